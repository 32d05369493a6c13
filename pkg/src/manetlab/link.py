"""802.11 medium emulation.

Connectivity is a binary in-range relation.  Every connected component of
the radio graph is one collision domain with a single airtime ledger: a
frame reserves the earliest free slot at or after the moment it is handed
to the medium, so reservations in a domain never overlap.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable

from .sim import SeededRng, Simulator, micros

BROADCAST = "*"


class LinkError(Exception):
    pass


class UnknownNode(LinkError, KeyError):
    pass


class NotAssociated(LinkError):
    pass


class LinkMode(Enum):
    IBSS = "ibss"
    STATION = "station"
    AP = "ap"


class FaultModel(Enum):
    NONE = "none"
    DRIVER_NO_IBSS = "driver_no_ibss"
    FAKE_AP_IBSS = "fake_ap_ibss"


@dataclass
class MediumModel:
    nominal_capacity: float = 24_000_000.0
    contention_overhead: float = 0.10
    per_hop_processing_delay: float = 0.0005
    radio_range: float = 50.0
    # sliding window used to count active transmitters
    accounting_window: float = 0.010

    def __post_init__(self):
        if not 0 <= self.contention_overhead < 1:
            raise ValueError("contention_overhead must be in [0, 1)")
        if self.nominal_capacity <= 0:
            raise ValueError("nominal_capacity must be positive")
        if self.radio_range < 0:
            raise ValueError("radio_range must be non-negative")

    def effective_rate(self, k: int) -> float:
        return self.nominal_capacity * max(1.0 - self.contention_overhead * (k - 1), 0.05)

    def airtime_us(self, size: int, k: int = 1) -> int:
        exact = size * 8 * 1e6 / self.effective_rate(k)
        return max(1, math.ceil(exact - 1e-9))


@dataclass
class PowerSaveModel:
    enabled: bool = True
    beacon_interval: float = 0.1024
    dtim_period: int = 2

    def __post_init__(self):
        if self.beacon_interval <= 0:
            raise ValueError("beacon_interval must be positive")
        if self.dtim_period < 1:
            raise ValueError("dtim_period must be >= 1")


def power_save_delay(rng: SeededRng, ps: PowerSaveModel) -> float:
    """Seconds an AP buffers a frame for a dozing station."""
    return rng.uniform(0.0, ps.dtim_period * ps.beacon_interval)


@dataclass
class Frame:
    src: str
    dst: str
    size: int
    payload: object = None
    multicast: bool = False

    def __post_init__(self):
        if self.size < 1:
            raise ValueError("frame size must be >= 1 byte")
        if self.dst == BROADCAST:
            self.multicast = True


class Trajectory:
    """Piecewise-linear scripted motion; static when given one point."""

    def __init__(self, position: tuple[float, float], waypoints: Iterable = ()):
        pts = sorted((float(t), float(x), float(y)) for t, x, y in waypoints)
        if not pts or pts[0][0] > 0:
            pts.insert(0, (0.0, float(position[0]), float(position[1])))
        for _, x, y in pts:
            if not (math.isfinite(x) and math.isfinite(y)):
                raise ValueError("positions must be finite")
        self.points = pts

    @property
    def mobile(self) -> bool:
        first = self.points[0][1:]
        return any(p[1:] != first for p in self.points)

    def at(self, t: float) -> tuple[float, float]:
        pts = self.points
        if t <= pts[0][0]:
            return pts[0][1], pts[0][2]
        for (t0, x0, y0), (t1, x1, y1) in zip(pts, pts[1:]):
            if t <= t1:
                f = (t - t0) / (t1 - t0) if t1 > t0 else 1.0
                return x0 + f * (x1 - x0), y0 + f * (y1 - y0)
        return pts[-1][1], pts[-1][2]


@dataclass
class _Radio:
    node: str
    trajectory: Trajectory
    up: bool = False
    network: str | None = None
    mode: LinkMode = LinkMode.IBSS
    fault: FaultModel = FaultModel.NONE
    last_tx_end: int = -(10**12)
    last_rx: int = -(10**12)
    backlog_until: int = 0
    release_at: int = 0
    # (start, end, call) sorted by start
    own: list = field(default_factory=list)
    # (start, end, addressed) sorted by start
    heard: list = field(default_factory=list)

    @property
    def associated(self) -> bool:
        return self.up and self.network is not None


@dataclass
class _Cell:
    members: list = field(default_factory=list)
    hub: str | None = None
    hub_lost: bool = False


class _Domain:
    __slots__ = ("members", "starts", "ends")

    def __init__(self, members: frozenset):
        self.members = members
        self.starts: list[int] = []
        self.ends: list[int] = []

    def prune(self, now: int) -> None:
        i = bisect.bisect_right(self.ends, now)
        if i > 256:
            del self.starts[:i]
            del self.ends[:i]

    def slot(self, desired: int, airtime: int) -> int:
        ends, starts = self.ends, self.starts
        i = bisect.bisect_right(ends, desired)
        t = desired
        n = len(starts)
        while i < n:
            if starts[i] >= t + airtime:
                break
            if ends[i] > t:
                t = ends[i]
            i += 1
        return t

    def reserve(self, start: int, end: int) -> None:
        i = bisect.bisect_right(self.starts, start)
        self.starts.insert(i, start)
        self.ends.insert(i, end)


class _Topology:
    def __init__(self):
        self.radio: dict[str, set[str]] = {}
        self.peers: dict[str, set[str]] = {}
        self.domain_of: dict[str, frozenset] = {}


def _overlap(entries: list, w0: int, w1: int, pred=None) -> int:
    total = 0
    i = max(bisect.bisect_left(entries, (w0,)) - 1, 0)
    n = len(entries)
    while i < n:
        e = entries[i]
        s = e[0]
        if s >= w1:
            break
        if pred is None or pred(e):
            lo = s if s > w0 else w0
            hi = e[1] if e[1] < w1 else w1
            if hi > lo:
                total += hi - lo
        i += 1
    return total


class Medium:
    """Shared radio medium for one simulation instance."""

    MOBILITY_STEP_US = 100_000

    def __init__(
        self,
        sim: Simulator,
        model: MediumModel | None = None,
        power_save: PowerSaveModel | None = None,
        rng: SeededRng | None = None,
    ):
        self.sim = sim
        self.model = model or MediumModel()
        self.power_save = power_save or PowerSaveModel()
        self.rng = rng or SeededRng(0)
        self.receiver: Callable[[str, Frame], None] | None = None
        self.losses = 0
        self.frames_sent = 0
        self._radios: dict[str, _Radio] = {}
        self._cells: dict[str, _Cell] = {}
        self._domains: dict[str, _Domain] = {}
        self._topo: _Topology | None = None
        self._topo_time = -1
        self._proc_us = micros(self.model.per_hop_processing_delay)
        self._window_us = micros(self.model.accounting_window)
        self._mobile = False

    # -- membership -------------------------------------------------------

    def add_node(self, node: str, trajectory: Trajectory | tuple[float, float]) -> None:
        if node in self._radios:
            raise ValueError(f"duplicate node {node!r}")
        if not isinstance(trajectory, Trajectory):
            trajectory = Trajectory(trajectory)
        self._radios[node] = _Radio(node, trajectory)
        self._mobile = self._mobile or trajectory.mobile
        self._invalidate()

    def nodes(self) -> list[str]:
        return sorted(self._radios)

    def _radio(self, node: str) -> _Radio:
        try:
            return self._radios[node]
        except KeyError:
            raise UnknownNode(node) from None

    def set_up(self, node: str, up: bool) -> None:
        r = self._radio(node)
        if not up and r.network is not None:
            self.disassociate(node)
        r.up = up
        self._invalidate()

    def is_up(self, node: str) -> bool:
        return self._radio(node).up

    def associate(self, node: str, network: str, mode: LinkMode = LinkMode.IBSS) -> None:
        r = self._radio(node)
        if not r.up:
            raise NotAssociated(f"{node} interface is down")
        if r.network is not None:
            self.disassociate(node)
        r.network = network
        r.mode = mode
        if mode is LinkMode.IBSS:
            cell = self._cells.setdefault(network, _Cell())
            if not cell.members:
                cell.hub = None
                cell.hub_lost = False
            cell.members.append(node)
            self._elect_hub(cell)
        self._invalidate()

    def disassociate(self, node: str) -> None:
        r = self._radio(node)
        if r.network is None:
            return
        if r.mode is LinkMode.IBSS:
            cell = self._cells[r.network]
            cell.members.remove(node)
            if cell.hub == node:
                cell.hub = None
                cell.hub_lost = True
            if not cell.members:
                cell.hub = None
                cell.hub_lost = False
        r.network = None
        self._invalidate()

    def is_associated(self, node: str) -> bool:
        return self._radio(node).associated

    def mode(self, node: str) -> LinkMode:
        return self._radio(node).mode

    def set_fault(self, node: str, fault: FaultModel) -> None:
        r = self._radio(node)
        r.fault = fault
        if r.network is not None and r.mode is LinkMode.IBSS:
            self._elect_hub(self._cells[r.network])
        self._invalidate()

    def fault(self, node: str) -> FaultModel:
        return self._radio(node).fault

    def hub(self, network: str) -> str | None:
        cell = self._cells.get(network)
        return cell.hub if cell else None

    def _elect_hub(self, cell: _Cell) -> None:
        # only the first joiner of a cell can act as the fake AP
        if cell.hub_lost or not cell.members:
            return
        first = self._radios[cell.members[0]]
        cell.hub = first.node if first.fault is FaultModel.FAKE_AP_IBSS else None

    # -- topology ---------------------------------------------------------

    def position(self, node: str, t_us: int | None = None) -> tuple[float, float]:
        t = self.sim.now if t_us is None else t_us
        return self._radio(node).trajectory.at(t / 1e6)

    def _invalidate(self) -> None:
        self._topo = None

    def _active(self, r: _Radio) -> bool:
        if not r.associated:
            return False
        return not (r.mode is LinkMode.IBSS and r.fault is FaultModel.DRIVER_NO_IBSS)

    def _topology(self) -> _Topology:
        now = self.sim.now
        if self._topo is not None:
            if not self._mobile or now - self._topo_time < self.MOBILITY_STEP_US:
                return self._topo
        topo = _Topology()
        active = [r for r in sorted(self._radios.values(), key=lambda r: r.node) if self._active(r)]
        pos = {r.node: r.trajectory.at(now / 1e6) for r in active}
        rng2 = self.model.radio_range ** 2
        radio: dict[str, set[str]] = {r.node: set() for r in active}
        for i, a in enumerate(active):
            ax, ay = pos[a.node]
            for b in active[i + 1:]:
                if a.network != b.network:
                    continue
                if a.mode is LinkMode.IBSS and b.mode is not LinkMode.IBSS:
                    continue
                if a.mode is not LinkMode.IBSS and b.mode is LinkMode.IBSS:
                    continue
                bx, by = pos[b.node]
                if (ax - bx) ** 2 + (ay - by) ** 2 <= rng2:
                    radio[a.node].add(b.node)
                    radio[b.node].add(a.node)
        topo.radio = radio
        peers: dict[str, set[str]] = {}
        for r in active:
            n = r.node
            if r.mode is LinkMode.IBSS:
                cell = self._cells[r.network]
                if cell.hub_lost:
                    peers[n] = set()
                elif cell.hub is None or cell.hub == n:
                    peers[n] = set(radio[n])
                elif cell.hub in radio[n]:
                    peers[n] = ({cell.hub} | radio[cell.hub]) - {n}
                else:
                    peers[n] = set()
            elif r.mode is LinkMode.AP:
                peers[n] = self._stations_of(n, radio)
            else:
                ap = self._ap_in_range(n, radio)
                peers[n] = set() if ap is None else ({ap} | self._stations_of(ap, radio)) - {n}
        topo.peers = peers
        # collision domains: connected components of the radio graph
        seen: set[str] = set()
        for r in active:
            if r.node in seen:
                continue
            comp = set()
            stack = [r.node]
            while stack:
                x = stack.pop()
                if x in comp:
                    continue
                comp.add(x)
                stack.extend(radio[x] - comp)
            seen |= comp
            fs = frozenset(comp)
            for x in comp:
                topo.domain_of[x] = fs
        self._rebuild_domains(topo, now)
        self._topo = topo
        self._topo_time = now
        return topo

    def _stations_of(self, ap: str, radio: dict[str, set[str]]) -> set[str]:
        return {m for m in radio[ap] if self._radios[m].mode is LinkMode.STATION}

    def _ap_in_range(self, node: str, radio: dict[str, set[str]]) -> str | None:
        aps = sorted(m for m in radio[node] if self._radios[m].mode is LinkMode.AP)
        return aps[0] if aps else None

    def _rebuild_domains(self, topo: _Topology, now: int) -> None:
        # carry pending reservations into the new components
        old = self._domains
        new: dict[str, _Domain] = {}
        built: dict[frozenset, _Domain] = {}
        for node, members in topo.domain_of.items():
            dom = built.get(members)
            if dom is None:
                dom = _Domain(members)
                pairs = set()
                seen = set()
                for m in members:
                    od = old.get(m)
                    if od is None or id(od) in seen:
                        continue
                    seen.add(id(od))
                    pairs.update((s, e) for s, e in zip(od.starts, od.ends) if e > now)
                ordered = sorted(pairs)
                dom.starts = [p[0] for p in ordered]
                dom.ends = [p[1] for p in ordered]
                built[members] = dom
            new[node] = dom
        self._domains = new

    def neighbors(self, node: str) -> set[str]:
        """Nodes reachable in one link-layer hop (relayed via AP/hub if any)."""
        self._radio(node)
        return set(self._topology().peers.get(node, ()))

    def is_neighbor(self, node: str, other: str) -> bool:
        return other in self._topology().peers.get(node, ())

    def radio_neighbors(self, node: str) -> set[str]:
        self._radio(node)
        return set(self._topology().radio.get(node, ()))

    def collision_domain(self, node: str) -> frozenset:
        self._radio(node)
        return self._topology().domain_of.get(node, frozenset())

    # -- power save -------------------------------------------------------

    def backlogged(self, node: str) -> bool:
        return self.sim.now < self._radio(node).backlog_until

    def tx_end(self, node: str) -> int:
        """End of the latest airtime reserved for ``node``'s own frames."""
        return self._radio(node).last_tx_end

    def dozing(self, node: str, at: int | None = None) -> bool:
        """A power-saving station with no backlog and no recent reception."""
        r = self._radio(node)
        if r.mode is not LinkMode.STATION or not self.power_save.enabled:
            return False
        t = self.sim.now if at is None else at
        if t < r.backlog_until:
            return False
        return t - r.last_rx >= micros(self.power_save.beacon_interval)

    # -- transmission -----------------------------------------------------

    def transmit(self, frame: Frame) -> list[tuple[str, int]]:
        """Queue ``frame`` on the medium.

        Returns ``(receiver, delivery_time_us)`` per network-layer receiver;
        an empty list means the frame is lost (destination unreachable).
        """
        src = self._radio(frame.src)
        if not self._active(src):
            raise NotAssociated(f"{frame.src} is not associated")
        topo = self._topology()
        radio = topo.radio
        n = frame.src
        bcast = frame.dst == BROADCAST
        relay = None
        if src.mode is LinkMode.IBSS:
            cell = self._cells[src.network]
            if cell.hub_lost:
                return self._lost()
            if cell.hub is not None and cell.hub != n:
                relay = cell.hub
        elif src.mode is LinkMode.STATION:
            relay = self._ap_in_range(n, radio)
            if relay is None:
                return self._lost()

        now = self.sim.now
        if relay is None:
            if bcast:
                rx = sorted(radio[n])
            elif frame.dst in radio[n]:
                rx = [frame.dst]
            else:
                return self._lost()
            if not rx:
                return []
            end = self._hop(n, rx, frame, now, now)
            return self._deliver_all(rx, frame, end)

        if relay not in radio[n]:
            return self._lost()
        if not bcast and frame.dst == relay:
            end = self._hop(n, [relay], frame, now, now)
            return self._deliver_all([relay], frame, end)
        if bcast:
            onward = sorted(radio[relay] - {n})
        elif frame.dst in radio[relay]:
            onward = [frame.dst]
        else:
            return self._lost()
        end1 = self._hop(n, [relay], frame, now, now)
        out = self._deliver_all([relay], frame, end1) if bcast else []
        if onward:
            end2 = self._hop(relay, onward, frame, end1, end1)
            out += self._deliver_all(onward, frame, end2)
        return out

    def _lost(self) -> list:
        self.losses += 1
        return []

    def _hop(self, sender: str, receivers: list[str], frame: Frame, desired: int, call: int) -> int:
        r = self._radios[sender]
        if r.mode is LinkMode.AP and self.power_save.enabled:
            dozing = [m for m in receivers if self.dozing(m, desired)]
            if dozing:
                desired += micros(power_save_delay(self.rng, self.power_save))
            # per-station FIFO at the AP buffer
            for m in receivers:
                desired = max(desired, self._radios[m].release_at)
            call = desired
        dom = self._domains[sender]
        w = desired - self._window_us
        k = 1
        for m in dom.members:
            if m != sender and self._radios[m].last_tx_end > w:
                k += 1
        air = self.model.airtime_us(frame.size, k)
        start = dom.slot(desired, air)
        end = start + air
        dom.reserve(start, end)
        dom.prune(self.sim.now)
        self.frames_sent += 1
        if end > r.last_tx_end:
            r.last_tx_end = end
        if end > r.backlog_until:
            r.backlog_until = end
        bisect.insort(r.own, (start, end, call))
        rset = set(receivers)
        radios = self._radios
        for m in dom.members:
            if m == sender:
                continue
            rm = radios[m]
            bisect.insort(rm.heard, (start, end, m in rset))
        for m in receivers:
            rm = radios[m]
            if end > rm.last_rx:
                rm.last_rx = end
            if r.mode is LinkMode.AP and end > rm.release_at:
                rm.release_at = end
        return end

    def _deliver_all(self, receivers: list[str], frame: Frame, end: int) -> list[tuple[str, int]]:
        t = end + self._proc_us
        sched = self.sim.schedule
        for m in receivers:
            sched(t, self._deliver, m, frame)
        return [(m, end) for m in receivers]

    def _deliver(self, node: str, frame: Frame) -> None:
        r = self._radios[node]
        if not self._active(r):
            self.losses += 1
            return
        if self.receiver is not None:
            self.receiver(node, frame)

    # -- airtime accounting -------------------------------------------------

    def medium_busy_airtime(self, node: str, window: tuple[int, int]) -> tuple[float, float]:
        """(tx, rx) seconds: own airtime, and airtime of other transmitters
        in the node's collision domain (the NIC is receiving or sensing)."""
        r = self._radio(node)
        w0, w1 = window
        if w1 < w0:
            raise ValueError("window end precedes start")
        return _overlap(r.own, w0, w1) / 1e6, _overlap(r.heard, w0, w1) / 1e6

    def nic_busy(self, node: str, window: tuple[int, int]) -> tuple[float, float]:
        """(tx, rx) seconds of NIC activity used for energy accounting.

        Time spent deferring with a pending frame while someone else holds
        the medium (and the frame on air is not for us) counts as transmit
        effort rather than reception.
        """
        r = self._radio(node)
        w0, w1 = window
        tx = _overlap(r.own, w0, w1)
        rx = _overlap(r.heard, w0, w1)
        waits = []
        own = r.own
        i = max(bisect.bisect_left(own, (w0,)) - 1, 0)
        for s, _e, call in own[i:]:
            lo = call if call > w0 else w0
            hi = s if s < w1 else w1
            if hi > lo:
                waits.append((lo, hi))
        if waits:
            waits.sort()
            merged = [list(waits[0])]
            for lo, hi in waits[1:]:
                if lo <= merged[-1][1]:
                    if hi > merged[-1][1]:
                        merged[-1][1] = hi
                else:
                    merged.append([lo, hi])
            contend = 0
            for lo, hi in merged:
                contend += _overlap(r.heard, lo, hi, pred=lambda e: not e[2])
            tx += contend
            rx -= contend
        return tx / 1e6, max(rx, 0) / 1e6

