"""Traffic generators and the discovery application."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..routing.forwarding import MDNS_GROUP, NetPacket
from ..sim import micros
from .scenario import FlowSpec

RETRY_US = 1000
UDP = "udp"
APP = "app"
MDNS = "mdns"


class FlowMeter:
    """Payload bytes delivered per simulated second."""

    def __init__(self, duration: float):
        self.bins = [0] * math.ceil(duration)
        self.bytes = 0

    def record(self, t_us: int, size: int) -> None:
        k = t_us // 1_000_000
        if k < len(self.bins):
            self.bins[k] += size
            self.bytes += size

    def bits_per_second(self) -> list[int]:
        return [b * 8 for b in self.bins]


class _Source:
    def __init__(self, emu, flow: FlowSpec):
        self.emu = emu
        self.flow = flow
        self.host = emu.net.host(flow.src)
        self.dst_ip = emu.net.host(flow.dst).address
        self.stop_us = micros(emu.scenario.flow_stop(flow))
        self.seq = 0
        self.sent = 0

    def _packet(self) -> NetPacket:
        self.seq += 1
        return NetPacket(self.host.address, self.dst_ip, UDP, (self.flow.label, self.seq), self.flow.packet_size)


class SaturationSource(_Source):
    """Always backlogged: the next datagram is ready as soon as the
    previous one has left the radio."""

    def start(self) -> None:
        self.emu.sim.schedule(micros(self.flow.start), self._send)

    def _send(self) -> None:
        sim = self.emu.sim
        now = sim.now
        if now >= self.stop_us:
            return
        ok = self.host.send(self._packet())
        nxt = self.emu.medium.tx_end(self.flow.src) if ok else now + RETRY_US
        if ok:
            self.sent += 1
        if nxt <= now:
            nxt = now + RETRY_US
        sim.schedule(nxt, self._send)


class CbrSource(_Source):
    def start(self) -> None:
        self.period = self.flow.packet_size * 8 / self.flow.rate
        self.t0 = self.flow.start
        self.emu.sim.schedule(micros(self.t0), self._send, 0)

    def _send(self, i: int) -> None:
        sim = self.emu.sim
        if sim.now >= self.stop_us:
            return
        if self.host.send(self._packet()):
            self.sent += 1
        sim.schedule(micros(self.t0 + (i + 1) * self.period), self._send, i + 1)


@dataclass
class DiscoveryResult:
    found: bool = False
    responders: list = field(default_factory=list)
    manual_fallback: bool = False
    requests: int = 0
    replies: int = 0
    longest_outage: float = 0.0
    session_ok: bool = False


class DiscoveryApp:
    """Find the peer by a multicast query, then keep a unicast session."""

    query_wait = 1.0
    exchange_interval = 0.5
    session_timeout = 5.0
    message_size = 200

    def __init__(self, emu, flow: FlowSpec):
        self.emu = emu
        self.flow = flow
        self.label = flow.label
        self.result = DiscoveryResult()
        self.reply_times: list[int] = []
        self.session_start: int | None = None
        self.stop_us = micros(emu.scenario.flow_stop(flow))

    def start(self) -> None:
        emu = self.emu
        emu.apps[self.label] = self
        emu.sim.schedule(micros(self.flow.start), self._query)

    def _query(self) -> None:
        src = self.emu.net.host(self.flow.src)
        pkt = NetPacket(src.address, MDNS_GROUP, MDNS, ("query", self.label, self.flow.src), 64, ttl=1)
        src.send(pkt)
        self.emu.sim.after(micros(self.query_wait), self._open_session)

    def on_answer(self, responder: str) -> None:
        if responder not in self.result.responders:
            self.result.responders.append(responder)

    def _open_session(self) -> None:
        self.result.found = self.flow.dst in self.result.responders
        # without an answer the user types the peer's address in by hand
        self.result.manual_fallback = not self.result.found
        self.session_start = self.emu.sim.now
        self._exchange(0)

    def _exchange(self, k: int) -> None:
        sim = self.emu.sim
        if sim.now >= self.stop_us:
            return
        src = self.emu.net.host(self.flow.src)
        dst_ip = self.emu.net.host(self.flow.dst).address
        self.result.requests += 1
        src.send(NetPacket(src.address, dst_ip, APP, (self.label, "req", k), self.message_size))
        sim.after(micros(self.exchange_interval), self._exchange, k + 1)

    def on_app(self, node: str, pkt: NetPacket) -> None:
        _, kind, k = pkt.payload
        host = self.emu.net.host(node)
        if kind == "req" and node == self.flow.dst:
            host.send(NetPacket(host.address, pkt.src, APP, (self.label, "rep", k), self.message_size))
        elif kind == "rep" and node == self.flow.src:
            self.result.replies += 1
            self.reply_times.append(self.emu.sim.now)

    def finish(self, end_us: int) -> DiscoveryResult:
        r = self.result
        if self.session_start is None:
            return r
        marks = [self.session_start] + self.reply_times + [min(end_us, self.stop_us)]
        r.longest_outage = max((b - a for a, b in zip(marks, marks[1:])), default=0) / 1e6
        r.session_ok = r.replies > 0 and r.longest_outage < self.session_timeout
        return r
