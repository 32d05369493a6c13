"""IP-level node stack on top of the emulated medium."""

from __future__ import annotations

import ipaddress
import itertools
from collections import Counter
from typing import Callable

from .link import BROADCAST, Frame, Medium, NotAssociated
from .routing.forwarding import DELIVER, DROP, SEND, TTL_EXPIRED, NetPacket, forward
from .routing.plugin import RouteTable, RoutingPlugin
from .sim import SeededRng, Simulator, micros

LIMITED_BROADCAST = ipaddress.IPv4Address("255.255.255.255")

ICMP = "icmp"
OLSR = "olsr"


class _LinkView:
    """Membership test: is an address a current link-layer peer?"""

    __slots__ = ("host",)

    def __init__(self, host: "Host"):
        self.host = host

    def __contains__(self, addr) -> bool:
        h = self.host
        node = h.net.by_ip.get(addr)
        return node is not None and h.net.medium.is_neighbor(h.node, node)


class Host:
    def __init__(self, net: "Network", node: str, address, rng: SeededRng):
        self.net = net
        self.node = node
        self.address = address
        self.rng = rng
        self.routing: RoutingPlugin | None = None
        self.groups: set = set()
        self.handlers: dict[str, Callable[[NetPacket], None]] = {ICMP: self._icmp}
        self.icmp_waiters: dict[tuple, Callable[[NetPacket], None]] = {}
        self.drops: Counter = Counter()
        self._link = _LinkView(self)
        self._empty = RouteTable()

    # services offered to routing plugins
    def now(self) -> float:
        return self.net.sim.now / 1e6

    def schedule(self, delay_s: float, fn) -> int:
        return self.net.sim.after(micros(delay_s), fn)

    def cancel(self, event_id: int) -> None:
        self.net.sim.cancel(event_id)

    def broadcast(self, message, size: int) -> None:
        pkt = NetPacket(self.address, LIMITED_BROADCAST, OLSR, message, size, ttl=1, multicast=True)
        self._transmit(pkt, None)

    # routing lifecycle
    def start_routing(self, plugin: RoutingPlugin) -> None:
        if self.routing is not None:
            self.routing.stop()
        self.routing = plugin
        plugin.start(self)

    def stop_routing(self) -> None:
        if self.routing is not None:
            self.routing.stop()

    def routes(self) -> RouteTable:
        return self.routing.routes() if self.routing is not None else self._empty

    # data path
    def send(self, pkt: NetPacket) -> bool:
        d = forward(pkt, self.address, self.routes(), self._link, self.groups, originating=True)
        return self._apply(pkt, d)

    def receive(self, frame: Frame) -> None:
        pkt = frame.payload
        if pkt.proto == OLSR:
            if self.routing is not None:
                self.routing.on_control_packet(pkt.payload, pkt.src)
            return
        d = forward(pkt, self.address, self.routes(), self._link, self.groups)
        self._apply(pkt, d)

    def _apply(self, pkt: NetPacket, d) -> bool:
        action = d.action
        if action is SEND:
            pkt.ttl = d.ttl
            return self._transmit(pkt, d.next_hop)
        if action is DELIVER:
            if pkt.multicast:
                self.net.multicast_log.append((self.net.sim.now, pkt.meta.get("origin"), self.node))
            handler = self.handlers.get(pkt.proto)
            if handler is None:
                self.drops["NoListener"] += 1
            else:
                handler(pkt)
            return True
        self.drops[d.reason] += 1
        if d.reason == TTL_EXPIRED and not (pkt.proto == ICMP and pkt.payload.get("type") == "time-exceeded"):
            err = NetPacket(
                self.address,
                pkt.src,
                ICMP,
                {"type": "time-exceeded", "id": pkt.meta.get("id"), "seq": pkt.meta.get("seq")},
                56,
            )
            self.send(err)
        return False

    def _transmit(self, pkt: NetPacket, next_hop) -> bool:
        if next_hop is None:
            dst = BROADCAST
            pkt.meta.setdefault("origin", self.node)
        else:
            dst = self.net.by_ip.get(next_hop)
            if dst is None:
                self.drops["NoArp"] += 1
                return False
        try:
            out = self.net.medium.transmit(Frame(self.node, dst, pkt.size, pkt))
        except NotAssociated:
            self.drops["NotAssociated"] += 1
            return False
        if not out and dst != BROADCAST:
            self.drops["LinkLoss"] += 1
            if self.routing is not None:
                self.routing.link_failure(next_hop)
            return False
        return True

    # ICMP
    def _icmp(self, pkt: NetPacket) -> None:
        body = pkt.payload
        kind = body.get("type")
        if kind == "echo":
            reply = NetPacket(self.address, pkt.src, ICMP, {**body, "type": "echo-reply"}, pkt.size)
            reply.meta.update(id=body.get("id"), seq=body.get("seq"))
            self.send(reply)
            return
        cb = self.icmp_waiters.get((body.get("id"), body.get("seq")))
        if cb is not None:
            cb(pkt)


class Network:
    """All hosts of one emulation instance, wired to a shared medium."""

    def __init__(self, sim: Simulator, medium: Medium, rng: SeededRng | None = None):
        self.sim = sim
        self.medium = medium
        self.rng = rng or SeededRng(0)
        self.hosts: dict[str, Host] = {}
        self.by_ip: dict = {}
        self.multicast_log: list[tuple[int, str, str]] = []
        medium.receiver = self._on_frame
        self._idents = itertools.count(1)

    def next_ident(self) -> int:
        return next(self._idents)

    def add_host(self, node: str, address) -> Host:
        if node in self.hosts:
            raise ValueError(f"duplicate host {node!r}")
        if address in self.by_ip:
            raise ValueError(f"address {address} already used by {self.by_ip[address]}")
        h = Host(self, node, address, self.rng.fork(f"host:{node}"))
        self.hosts[node] = h
        self.by_ip[address] = node
        return h

    def host(self, node: str) -> Host:
        return self.hosts[node]

    def node_of(self, address) -> str | None:
        return self.by_ip.get(address)

    def _on_frame(self, node: str, frame: Frame) -> None:
        h = self.hosts.get(node)
        if h is not None:
            h.receive(frame)

    def drops(self) -> dict[tuple[str, str], int]:
        out = {}
        for node in sorted(self.hosts):
            for reason, n in sorted(self.hosts[node].drops.items()):
                out[(node, reason)] = n
        return out
