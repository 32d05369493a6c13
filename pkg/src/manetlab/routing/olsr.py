"""Optimized Link State Routing: neighbor sensing, MPR flooding, routes.

The functions in this module are plain operations on an ``OlsrState`` so
they can be driven directly in tests; ``OlsrAgent`` wires them to timers
and the packet path of a node.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any

from .plugin import Route, RouteTable, RoutingPlugin

WILL_DEFAULT = 3

ASYM = "asym"
SYM = "sym"
MPR = "mpr"
LOST = "lost"
LINK_CODES = (ASYM, SYM, MPR, LOST)

NEVER = -math.inf


class MalformedMessage(ValueError):
    pass


@dataclass(frozen=True)
class Hello:
    originator: Any
    seq: int
    links: tuple = ()  # ((neighbor, code), ...)
    willingness: int = WILL_DEFAULT

    @property
    def size(self) -> int:
        return 48 + 8 * len(self.links)


@dataclass(frozen=True)
class Tc:
    originator: Any
    seq: int
    ansn: int
    advertised: tuple = ()
    ttl: int = 255
    hops: int = 0

    @property
    def size(self) -> int:
        return 48 + 4 * len(self.advertised)


@dataclass
class LinkTuple:
    sym_until: float = NEVER
    asym_until: float = NEVER
    expires: float = NEVER


@dataclass
class OlsrState:
    addr: Any
    hello_interval: float = 2.0
    tc_interval: float = 5.0
    hold_time: float = 6.0
    top_hold_time: float = 15.0
    dup_hold_time: float = 30.0
    links: dict = field(default_factory=dict)
    two_hop: dict = field(default_factory=dict)  # (via, addr) -> expires
    mpr_set: set = field(default_factory=set)
    mpr_selectors: dict = field(default_factory=dict)  # addr -> expires
    topology: dict = field(default_factory=dict)  # (dest, last) -> (ansn, expires)
    duplicates: dict = field(default_factory=dict)  # (orig, seq) -> [expires, forwarded]
    msg_seq: int = 0
    ansn: int = 0
    version: int = 0
    mpr_checks: int = 0
    mpr_violations: int = 0
    next_expiry: float = math.inf
    _sym_view: frozenset = frozenset()
    _two_hop_view: frozenset = frozenset()
    _sel_view: frozenset = frozenset()

    def next_seq(self) -> int:
        self.msg_seq += 1
        return self.msg_seq


def symmetric_neighbors(state: OlsrState, now: float) -> set:
    return {a for a, l in state.links.items() if l.sym_until >= now}


def reachability(state: OlsrState, now: float) -> dict:
    """neighbor -> set of nodes it advertises as symmetric."""
    reach: dict = {}
    for (via, a), exp in state.two_hop.items():
        if exp >= now:
            reach.setdefault(via, set()).add(a)
    return reach


def mpr_selection(me, neighbors: set, reach: dict) -> set:
    """Greedy MPR heuristic over an explicit neighborhood."""
    n2 = set()
    for y in neighbors:
        n2 |= reach.get(y, set())
    n2 -= neighbors
    n2.discard(me)
    cover = {y: reach.get(y, set()) & n2 for y in neighbors}
    mprs = set()
    for z in sorted(n2):
        providers = [y for y in neighbors if z in cover[y]]
        if len(providers) == 1:
            mprs.add(providers[0])
    covered = set()
    for y in mprs:
        covered |= cover[y]
    while covered != n2:
        best = None
        best_key = None
        for y in sorted(neighbors - mprs):
            key = (len(cover[y] - covered), len(cover[y]))
            if best_key is None or key > best_key:
                best, best_key = y, key
        if best is None or best_key[0] == 0:
            break
        mprs.add(best)
        covered |= cover[best]
    return mprs


def mpr_coverage_ok(me, neighbors: set, reach: dict, mprs: set) -> bool:
    n2 = set()
    for y in neighbors:
        n2 |= reach.get(y, set())
    n2 -= neighbors
    n2.discard(me)
    covered = set()
    for y in mprs:
        if y not in neighbors:
            return False
        covered |= reach.get(y, set())
    return n2 <= covered


def select_mprs(state: OlsrState, now: float) -> set:
    return mpr_selection(state.addr, symmetric_neighbors(state, now), reachability(state, now))


def _finish(state: OlsrState, now: float) -> bool:
    """Refresh derived sets after any mutation; True if routes may change."""
    sym = frozenset(symmetric_neighbors(state, now))
    two = frozenset(k for k, exp in state.two_hop.items() if exp >= now)
    sel = frozenset(a for a, exp in state.mpr_selectors.items() if exp >= now)
    changed = False
    if sym != state._sym_view or two != state._two_hop_view:
        state._sym_view, state._two_hop_view = sym, two
        reach = reachability(state, now)
        state.mpr_set = mpr_selection(state.addr, set(sym), reach)
        state.mpr_checks += 1
        if not mpr_coverage_ok(state.addr, set(sym), reach, state.mpr_set):
            state.mpr_violations += 1
        changed = True
    if sel != state._sel_view:
        state._sel_view = sel
        state.ansn += 1
    if changed:
        state.version += 1
    _update_next_expiry(state, now)
    return changed


def _update_next_expiry(state: OlsrState, now: float) -> None:
    nxt = math.inf
    for l in state.links.values():
        for t in (l.sym_until, l.expires):
            if now <= t < nxt:
                nxt = t
    for exp in state.two_hop.values():
        if now <= exp < nxt:
            nxt = exp
    for _, exp in state.topology.values():
        if now <= exp < nxt:
            nxt = exp
    state.next_expiry = nxt


def emit_hello(state: OlsrState, now: float) -> Hello:
    links = []
    for a in sorted(state.links):
        l = state.links[a]
        if l.sym_until >= now:
            code = MPR if a in state.mpr_set else SYM
        elif l.asym_until >= now:
            code = ASYM
        else:
            code = LOST
        links.append((a, code))
    return Hello(state.addr, state.next_seq(), tuple(links))


def process_hello(state: OlsrState, msg: Hello, sender, now: float) -> bool:
    if not isinstance(msg, Hello) or msg.originator != sender:
        raise MalformedMessage("HELLO originator must be the previous hop")
    try:
        statuses = dict(msg.links)
    except (TypeError, ValueError):
        raise MalformedMessage("bad link list") from None
    if any(code not in LINK_CODES for code in statuses.values()):
        raise MalformedMessage("unknown link code")
    if sender == state.addr:
        return False
    link = state.links.get(sender)
    if link is None:
        link = state.links[sender] = LinkTuple()
    link.asym_until = now + state.hold_time
    mine = statuses.get(state.addr)
    if mine == LOST:
        link.sym_until = NEVER
    elif mine is not None:
        link.sym_until = now + state.hold_time
    link.expires = max(link.asym_until, link.sym_until)
    for key in [k for k in state.two_hop if k[0] == sender]:
        del state.two_hop[key]
    sym = link.sym_until >= now
    if sym:
        for a, code in statuses.items():
            if code in (SYM, MPR) and a != state.addr:
                state.two_hop[(sender, a)] = now + state.hold_time
    if sym and mine == MPR:
        state.mpr_selectors[sender] = now + state.hold_time
    else:
        state.mpr_selectors.pop(sender, None)
    return _finish(state, now)


def emit_tc(state: OlsrState, now: float) -> Tc | None:
    selectors = sorted(a for a, exp in state.mpr_selectors.items() if exp >= now)
    if not selectors:
        return None
    return Tc(state.addr, state.next_seq(), state.ansn, tuple(selectors))


def process_tc(state: OlsrState, msg: Tc, sender, now: float) -> Tc | None:
    """Apply a TC; return the copy to re-broadcast, if this node must."""
    if not isinstance(msg, Tc) or msg.ttl < 1 or msg.hops < 0:
        raise MalformedMessage("bad TC")
    if sender not in symmetric_neighbors(state, now):
        return None
    if msg.originator == state.addr:
        return None
    key = (msg.originator, msg.seq)
    if key in state.duplicates:
        return None
    sel = state.mpr_selectors.get(sender)
    forward = sel is not None and sel >= now and msg.ttl > 1
    state.duplicates[key] = [now + state.dup_hold_time, forward]

    orig = msg.originator
    mine = [(k, v) for k, v in state.topology.items() if k[1] == orig]
    changed = False
    if not any(v[0] > msg.ansn for _, v in mine):
        for k, v in mine:
            if v[0] < msg.ansn:
                del state.topology[k]
                changed = True
        for dest in msg.advertised:
            k = (dest, orig)
            if k not in state.topology:
                changed = True
            state.topology[k] = (msg.ansn, now + state.top_hold_time)
    if changed:
        state.version += 1
    _update_next_expiry(state, now)
    if forward:
        return replace(msg, ttl=msg.ttl - 1, hops=msg.hops + 1)
    return None


def purge(state: OlsrState, now: float) -> bool:
    changed = False
    for a in [a for a, l in state.links.items() if l.expires < now]:
        del state.links[a]
        changed = True
    for k in [k for k, exp in state.two_hop.items() if exp < now]:
        del state.two_hop[k]
    for a in [a for a, exp in state.mpr_selectors.items() if exp < now]:
        del state.mpr_selectors[a]
    for k in [k for k, v in state.topology.items() if v[1] < now]:
        del state.topology[k]
        changed = True
    for k in [k for k, v in state.duplicates.items() if v[0] < now]:
        del state.duplicates[k]
    if changed:
        state.version += 1
    return _finish(state, now) or changed


def link_lost(state: OlsrState, neighbor, now: float) -> bool:
    link = state.links.get(neighbor)
    if link is None:
        return False
    link.sym_until = NEVER
    link.asym_until = NEVER
    for key in [k for k in state.two_hop if k[0] == neighbor]:
        del state.two_hop[key]
    state.mpr_selectors.pop(neighbor, None)
    return _finish(state, now)


def compute_routes(state: OlsrState, now: float) -> RouteTable:
    """Hop-count shortest paths; ties go to the smallest next hop."""
    me = state.addr
    table = RouteTable()
    sym = symmetric_neighbors(state, now)
    for n in sym:
        table[n] = Route(n, 1)
    cand: dict = {}
    for (via, a), exp in state.two_hop.items():
        if exp < now or via not in sym or a == me or a in table:
            continue
        if a not in cand or via < cand[a]:
            cand[a] = via
    for a, via in cand.items():
        table[a] = Route(via, 2)
    edges = [(dest, last) for (dest, last), (_, exp) in state.topology.items() if exp >= now]
    h = 2
    while True:
        new: dict = {}
        for dest, last in edges:
            if dest == me or dest in table:
                continue
            r = table.get(last)
            if r is not None and r.hops == h:
                if dest not in new or r.next_hop < new[dest]:
                    new[dest] = r.next_hop
        if not new:
            if not any(r.hops > h for r in table.values()):
                break
        for dest, nh in new.items():
            table[dest] = Route(nh, h + 1)
        h += 1
    return table


class OlsrAgent(RoutingPlugin):
    name = "olsr"

    def __init__(
        self,
        hello_interval: float = 2.0,
        tc_interval: float = 5.0,
        hold_time: float = 6.0,
        top_hold_time: float | None = None,
        jitter: float = 0.1,
        link_notification: bool = True,
    ):
        self.hello_interval = float(hello_interval)
        self.tc_interval = float(tc_interval)
        self.hold_time = float(hold_time)
        self.top_hold_time = float(top_hold_time if top_hold_time is not None else 3 * tc_interval)
        self.jitter = float(jitter)
        self.link_notification = link_notification
        self.state: OlsrState | None = None
        self.host = None
        self.malformed = 0
        self._timers: dict[str, int] = {}
        self._cache: RouteTable | None = None
        self._cache_version = -1

    def start(self, host) -> None:
        self.host = host
        self.state = OlsrState(
            host.address,
            hello_interval=self.hello_interval,
            tc_interval=self.tc_interval,
            hold_time=self.hold_time,
            top_hold_time=self.top_hold_time,
        )
        rng = host.rng
        self._arm("hello", rng.uniform(0.0, self.jitter * self.hello_interval), self._on_hello_timer)
        self._arm("tc", self._jittered(self.tc_interval), self._on_tc_timer)
        self._arm("tick", 1.0, self._on_tick)

    def stop(self) -> None:
        if self.host is not None:
            for tid in self._timers.values():
                self.host.cancel(tid)
        self._timers.clear()
        self.state = None
        self._cache = None

    def _jittered(self, interval: float) -> float:
        return interval * (1.0 + self.host.rng.uniform(-self.jitter, self.jitter))

    def _arm(self, name: str, delay: float, fn) -> None:
        self._timers[name] = self.host.schedule(delay, fn)

    def _on_hello_timer(self) -> None:
        now = self.host.now()
        purge(self.state, now)
        msg = emit_hello(self.state, now)
        self.host.broadcast(msg, msg.size)
        self._arm("hello", self._jittered(self.hello_interval), self._on_hello_timer)

    def _on_tc_timer(self) -> None:
        now = self.host.now()
        purge(self.state, now)
        msg = emit_tc(self.state, now)
        if msg is not None:
            self.host.broadcast(msg, msg.size)
        self._arm("tc", self._jittered(self.tc_interval), self._on_tc_timer)

    def _on_tick(self) -> None:
        self.tick(self.host.now())
        self._arm("tick", 1.0, self._on_tick)

    def tick(self, now: float) -> None:
        if self.state is not None:
            purge(self.state, now)

    def on_control_packet(self, message, from_addr) -> None:
        if self.state is None:
            return
        now = self.host.now()
        try:
            if isinstance(message, Hello):
                process_hello(self.state, message, from_addr, now)
            elif isinstance(message, Tc):
                fwd = process_tc(self.state, message, from_addr, now)
                if fwd is not None:
                    self.host.broadcast(fwd, fwd.size)
            else:
                raise MalformedMessage(f"unexpected {type(message).__name__}")
        except MalformedMessage:
            self.malformed += 1

    def link_failure(self, neighbor) -> None:
        if self.state is not None and self.link_notification:
            link_lost(self.state, neighbor, self.host.now())

    def routes(self) -> RouteTable:
        st = self.state
        if st is None:
            return RouteTable()
        now = self.host.now()
        if now >= st.next_expiry:
            purge(st, now)
        if self._cache is None or self._cache_version != st.version:
            self._cache = compute_routes(st, now)
            self._cache_version = st.version
        return self._cache
