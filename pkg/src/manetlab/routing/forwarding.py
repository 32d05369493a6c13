"""Per-packet forwarding decision."""

from __future__ import annotations

import ipaddress
from dataclasses import dataclass, field
from typing import Any, Container

DEFAULT_TTL = 64
MDNS_GROUP = ipaddress.IPv4Address("224.0.0.251")

DELIVER = "deliver"
SEND = "send"
DROP = "drop"

NO_ROUTE = "NoRoute"
TTL_EXPIRED = "TtlExpired"
NOT_SUBSCRIBED = "NotSubscribed"


@dataclass
class NetPacket:
    src: Any
    dst: Any
    proto: str
    payload: Any = None
    size: int = 64
    ttl: int = DEFAULT_TTL
    multicast: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.size < 1:
            raise ValueError("packet size must be >= 1")
        if isinstance(self.dst, ipaddress.IPv4Address) and self.dst.is_multicast:
            self.multicast = True


@dataclass(frozen=True)
class ForwardDecision:
    action: str
    next_hop: Any = None  # None with SEND means link-local multicast
    reason: str | None = None
    ttl: int | None = None


def forward(
    pkt: NetPacket,
    local,
    routes,
    link_neighbors: Container = (),
    groups: Container = (),
    originating: bool = False,
) -> ForwardDecision:
    """Decide what ``local`` does with ``pkt``.

    Multicast leaves its originator on the local link only; receivers keep
    it if subscribed and never pass it on.  Unicast uses the route table,
    falling back to a directly reachable destination.
    """
    if pkt.multicast:
        if originating:
            return ForwardDecision(SEND, None, ttl=pkt.ttl)
        if pkt.dst in groups:
            return ForwardDecision(DELIVER)
        return ForwardDecision(DROP, reason=NOT_SUBSCRIBED)
    if pkt.dst == local:
        return ForwardDecision(DELIVER)
    ttl = pkt.ttl if originating else pkt.ttl - 1
    if ttl < 1:
        return ForwardDecision(DROP, reason=TTL_EXPIRED)
    route = routes.get(pkt.dst)
    if route is not None:
        return ForwardDecision(SEND, route.next_hop, ttl=ttl)
    if pkt.dst in link_neighbors:
        return ForwardDecision(SEND, pkt.dst, ttl=ttl)
    return ForwardDecision(DROP, reason=NO_ROUTE)
