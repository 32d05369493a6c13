import ipaddress

from conftest import build
from manetlab.routing import MDNS_GROUP, NetPacket, Route, forward
from manetlab.routing.forwarding import DELIVER, DROP, NO_ROUTE, NOT_SUBSCRIBED, SEND, TTL_EXPIRED

A, B, C = (ipaddress.IPv4Address(f"10.0.0.{i}") for i in (1, 2, 3))


def test_local_delivery():
    assert forward(NetPacket(A, B, "udp"), B, {}).action == DELIVER


def test_unicast_uses_route_and_decrements_ttl():
    d = forward(NetPacket(A, C, "udp", ttl=5), B, {C: Route(C, 1)})
    assert (d.action, d.next_hop, d.ttl) == (SEND, C, 4)


def test_originator_keeps_ttl():
    d = forward(NetPacket(A, C, "udp", ttl=5), A, {C: Route(B, 2)}, originating=True)
    assert (d.action, d.next_hop, d.ttl) == (SEND, B, 5)


def test_ttl_expiry_and_no_route():
    assert forward(NetPacket(A, C, "udp", ttl=1), B, {C: Route(C, 1)}).reason == TTL_EXPIRED
    d = forward(NetPacket(A, C, "udp"), B, {})
    assert (d.action, d.reason) == (DROP, NO_ROUTE)


def test_on_link_fallback():
    d = forward(NetPacket(A, C, "udp"), A, {}, link_neighbors={C}, originating=True)
    assert (d.action, d.next_hop) == (SEND, C)


def test_multicast_never_forwarded():
    pkt = NetPacket(A, MDNS_GROUP, "mdns")
    assert pkt.multicast
    sent = forward(pkt, A, {}, originating=True)
    assert sent.action == SEND and sent.next_hop is None
    assert forward(pkt, B, {C: Route(C, 1)}, groups={MDNS_GROUP}).action == DELIVER
    assert forward(pkt, B, {C: Route(C, 1)}).reason == NOT_SUBSCRIBED


def test_multicast_confined_to_one_hop(chain):
    a = chain.net.host("A")
    for h in chain.net.hosts.values():
        h.groups.add(MDNS_GROUP)
    got = {n: [] for n in "ABC"}
    for n, h in chain.net.hosts.items():
        h.handlers["mdns"] = lambda pkt, n=n: got[n].append(pkt)
    a.send(NetPacket(a.address, MDNS_GROUP, "mdns", ("query",), 64))
    chain.sim.run_until(chain.sim.now + 100_000)
    assert len(got["B"]) == 1 and got["C"] == []
    for _, origin, receiver in chain.net.multicast_log:
        assert receiver in chain.medium.neighbors(origin)


def test_unicast_crosses_the_chain(chain):
    a, c = chain.net.host("A"), chain.net.host("C")
    got = []
    c.handlers["udp"] = got.append
    assert a.send(NetPacket(a.address, c.address, "udp", ("x", 1), 100))
    chain.sim.run_until(chain.sim.now + 100_000)
    assert len(got) == 1 and got[0].ttl == 63


def test_ttl_one_dies_at_the_router(chain):
    a, c = chain.net.host("A"), chain.net.host("C")
    a.send(NetPacket(a.address, c.address, "udp", ("x", 1), 100, ttl=1))
    chain.sim.run_until(chain.sim.now + 100_000)
    assert chain.net.host("B").drops[TTL_EXPIRED] == 1
