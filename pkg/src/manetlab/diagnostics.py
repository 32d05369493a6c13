"""ping, traceroute, route dumps and position logs."""

from __future__ import annotations

from dataclasses import dataclass, field

from .link import Trajectory
from .network import ICMP, Network
from .routing.forwarding import NetPacket
from .sim import micros

PING_SIZE = 64


class Unreachable(Exception):
    pass


@dataclass
class PingRecord:
    seq: int
    sent_at: int
    received_at: int | None = None

    @property
    def lost(self) -> bool:
        return self.received_at is None

    @property
    def rtt(self) -> float | None:
        if self.received_at is None:
            return None
        return (self.received_at - self.sent_at) / 1e6


@dataclass
class PingSession:
    src: str
    dst: str
    count: int
    interval: float
    timeout: float
    start: float
    records: list[PingRecord] = field(default_factory=list)

    @property
    def end(self) -> float:
        return self.start + (self.count - 1) * self.interval + self.timeout


def start_ping(net: Network, src: str, dst: str, count: int = 30, interval: float = 1.0,
               timeout: float = 2.0, at: float | None = None) -> PingSession:
    """Schedule an echo series; records fill in as the simulation runs."""
    if count < 1 or interval <= 0 or timeout <= 0:
        raise ValueError("count, interval and timeout must be positive")
    sim = net.sim
    start = sim.now / 1e6 if at is None else at
    session = PingSession(src, dst, count, interval, timeout, start)
    h = net.host(src)
    target = net.host(dst).address
    ident = net.next_ident()
    timeout_us = micros(timeout)

    def fire(seq: int) -> None:
        rec = PingRecord(seq, sim.now)
        session.records.append(rec)

        def on_reply(pkt: NetPacket) -> None:
            if pkt.payload.get("type") == "echo-reply" and rec.received_at is None:
                if sim.now - rec.sent_at <= timeout_us:
                    rec.received_at = sim.now

        h.icmp_waiters[(ident, seq)] = on_reply
        pkt = NetPacket(h.address, target, ICMP, {"type": "echo", "id": ident, "seq": seq}, PING_SIZE)
        pkt.meta.update(id=ident, seq=seq)
        h.send(pkt)
        sim.after(timeout_us, h.icmp_waiters.pop, (ident, seq), None)

    for i in range(count):
        sim.schedule(micros(start + i * interval), fire, i)
    return session


def ping(net: Network, src: str, dst: str, count: int = 30, interval: float = 1.0,
         timeout: float = 2.0) -> list[PingRecord]:
    session = start_ping(net, src, dst, count, interval, timeout)
    net.sim.run_until(micros(session.end))
    return session.records


def traceroute(net: Network, src: str, dst: str, max_hops: int = 16, probes: int = 3,
               wait: float = 2.0) -> list[tuple[str, float]]:
    """Returns (hop node, rtt seconds) per ttl level up to ``dst``."""
    sim = net.sim
    h = net.host(src)
    target = net.host(dst).address
    ident = net.next_ident()
    hops = []
    seq = 0
    for ttl in range(1, max_hops + 1):
        answer = None
        sent = sim.now
        for _ in range(probes):
            seq += 1
            got = []
            h.icmp_waiters[(ident, seq)] = lambda pkt, got=got: got.append((sim.now, pkt))
            sent = sim.now
            pkt = NetPacket(h.address, target, ICMP, {"type": "echo", "id": ident, "seq": seq}, PING_SIZE, ttl=ttl)
            pkt.meta.update(id=ident, seq=seq)
            h.send(pkt)
            # step until an answer arrives or the probe times out
            deadline = sent + micros(wait)
            while not got and sim.now < deadline:
                sim.run_until(min(sim.now + 1000, deadline))
            h.icmp_waiters.pop((ident, seq), None)
            if got:
                answer = got[0]
                break
        if answer is None:
            raise Unreachable(f"no response from ttl {ttl} towards {dst}")
        t_rx, reply = answer
        hops.append((net.node_of(reply.src), (t_rx - sent) / 1e6))
        if reply.payload.get("type") == "echo-reply":
            return hops
    raise Unreachable(f"{dst} not reached within {max_hops} hops")


def route_rows(net: Network, node: str) -> list[tuple[str, str, int, str]]:
    """(destination, next hop, hops, destination node) sorted by address."""
    table = net.host(node).routes()
    return [
        (str(dest), str(table[dest].next_hop), table[dest].hops, net.node_of(dest) or "?")
        for dest in sorted(table)
    ]


def route_dump(net: Network, node: str) -> str:
    lines = [f"{'destination':<16} {'next_hop':<16} hops"]
    for dest, nh, hops, name in route_rows(net, node):
        lines.append(f"{dest:<16} {nh:<16} {hops:<4} # {name}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class PositionSample:
    time: int
    node: str
    position: tuple[float, float]


def position_log(trajectories: dict[str, Trajectory], duration: float, period: float = 1.0) -> list[PositionSample]:
    if period <= 0:
        raise ValueError("period must be positive")
    n = int(duration / period + 1e-9) + 1
    out = []
    for node in sorted(trajectories):
        traj = trajectories[node]
        for k in range(n):
            t = k * period
            out.append(PositionSample(micros(t), node, traj.at(t)))
    return out
