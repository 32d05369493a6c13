"""Build an emulation from a scenario and run it."""

from __future__ import annotations

import ipaddress
from dataclasses import replace
from pathlib import Path

from ..diagnostics import position_log, route_rows, start_ping
from ..energy import BatteryState, Depleted, energy_step
from ..link import LinkMode, Medium, Trajectory
from ..netconfig import AddressConflict, DriverError, NetConfig, NetConfigError, NetworkProfile
from ..network import Network
from ..routing.forwarding import MDNS_GROUP, NetPacket
from ..routing.plugin import PackageRegistry, Route, StaticRouting, default_registry
from ..sim import SeededRng, Simulator, micros
from .metrics import MetricsBundle, emit_csv
from .scenario import Scenario, validate
from .traffic import APP, MDNS, UDP, CbrSource, DiscoveryApp, FlowMeter, SaturationSource

CONVERGENCE_STEP_US = 100_000


class Emulation:
    """Every component of one run, wired together but not yet started."""

    def __init__(self, scenario: Scenario, registry: PackageRegistry | None = None, trace: bool = False):
        self.scenario = s = validate(scenario, registry)
        self.registry = registry or default_registry()
        self.rng = SeededRng(s.seed)
        self.sim = Simulator(trace=trace)
        self.medium = Medium(self.sim, s.medium, s.power_save, self.rng.fork("medium"))
        self.trajectories = {n.id: Trajectory(n.position, n.waypoints) for n in s.nodes}
        for n in s.nodes:
            self.medium.add_node(n.id, self.trajectories[n.id])
            self.medium.set_fault(n.id, n.fault)
        self.netconfig = NetConfig(self.sim, self.medium)
        self.net = Network(self.sim, self.medium, self.rng.fork("net"))
        self.package = self.registry.get(s.routing.package)
        self.setup: dict[str, str] = {}
        self.hooks: list[tuple[float, str, str]] = []
        self.meters: dict[str, FlowMeter] = {}
        self.apps: dict[str, DiscoveryApp] = {}
        self.pings: dict = {}
        self.batteries = {n.id: BatteryState(float(n.battery)) for n in s.nodes}
        self.depleted: list[tuple[str, int]] = []
        self.convergence: dict[tuple[str, str], float | None] = {}
        self._stop_on_depletion = any(f.until_depleted for f in s.flows)
        for n in s.nodes:
            h = self.net.add_host(n.id, n.ip_config().address)
            h.handlers[UDP] = self._udp_in
            h.handlers[APP] = self._make_app_in(n.id)
            h.handlers[MDNS] = self._make_mdns(n.id)

    # -- packet sinks -----------------------------------------------------

    def _udp_in(self, pkt) -> None:
        meter = self.meters.get(pkt.payload[0])
        if meter is not None:
            meter.record(self.sim.now, pkt.size)

    def _make_app_in(self, node: str):
        def app_in(pkt) -> None:
            app = self.apps.get(pkt.payload[0])
            if app is not None:
                app.on_app(node, pkt)

        return app_in

    def _make_mdns(self, node: str):
        host = self.net.host(node)

        def mdns_in(pkt) -> None:
            kind, label, who = pkt.payload
            if kind == "query":
                host.send(NetPacket(host.address, pkt.src, MDNS, ("answer", label, node), 64))
            elif kind == "answer":
                app = self.apps.get(label)
                if app is not None:
                    app.on_answer(who)

        return mdns_in

    # -- lifecycle --------------------------------------------------------

    def bring_up(self, node: str) -> None:
        s = self.scenario
        spec = s.node(node)
        try:
            if s.mode == "ibss":
                self.netconfig.one_step_setup(node, NetworkProfile(s.ssid, "ibss"), spec.ip_config())
            else:
                role = LinkMode.AP if node == s.ap else LinkMode.STATION
                self.netconfig.join_infrastructure(
                    node, NetworkProfile(s.ssid, "infrastructure"), role, spec.ip_config()
                )
            self.setup[node] = "ok"
        except (DriverError, AddressConflict, NetConfigError) as exc:
            self.setup[node] = f"{type(exc).__name__}: {exc}"

    def _plugin(self, node: str):
        params = dict(self.scenario.routing.params)
        if self.package.protocol == "static":
            table = {}
            for dest, (nh, hops) in params.get("routes", {}).get(node, {}).items():
                table[self._addr(dest)] = Route(self._addr(nh), int(hops))
            return StaticRouting(table)
        params.pop("routes", None)
        return self.package.instantiate(**params)

    def _addr(self, node_or_ip: str):
        if node_or_ip in self.net.hosts:
            return self.net.host(node_or_ip).address
        return ipaddress.IPv4Address(node_or_ip)

    def start(self) -> None:
        s = self.scenario
        for n in s.nodes:
            self.bring_up(n.id)
        for n in s.nodes:
            self.net.host(n.id).start_routing(self._plugin(n.id))
            for hook in self.package.start_hook:
                self.hooks.append((0.0, n.id, hook))
        for n in s.nodes:
            self.net.host(n.id).groups.add(MDNS_GROUP)
        for f in s.flows:
            self.start_flow(f)
        for e in s.events:
            self.sim.schedule(micros(e.at), self._scripted, e)
        self.sim.schedule(micros(s.energy_epoch), self._energy_epoch)
        self.sim.schedule(0, self._watch_routes)

    def start_flow(self, f) -> None:
        label = f.label
        self.meters.setdefault(label, FlowMeter(self.scenario.duration))
        if f.kind == "udp-saturation":
            SaturationSource(self, f).start()
        elif f.kind == "cbr":
            CbrSource(self, f).start()
        elif f.kind == "ping-series":
            self.pings[label] = start_ping(self.net, f.src, f.dst, f.count, f.interval, f.timeout, at=f.start)
        elif f.kind == "discovery":
            DiscoveryApp(self, f).start()

    def _scripted(self, e) -> None:
        if e.action == "teardown":
            self.netconfig.teardown(e.node)
        elif e.action == "setup":
            self.bring_up(e.node)
        elif e.action == "set_fault":
            self.medium.set_fault(e.node, e.fault)

    def _energy_epoch(self) -> None:
        s = self.scenario
        t1 = self.sim.now
        epoch_us = micros(s.energy_epoch)
        t0 = t1 - epoch_us
        routing_active = self.package.protocol != "static"
        for node in s.node_ids():
            b = self.batteries[node]
            if b.depleted:
                continue
            tx, rx = self.medium.nic_busy(node, (t0, t1))
            try:
                energy_step(b, s.energy_epoch, tx, rx, self.medium.mode(node), routing_active,
                            s.energy, s.power_save.enabled)
            except Depleted:
                self.depleted.append((node, b.depleted_at))
                if self._stop_on_depletion:
                    self.sim.stop()
        if t1 + epoch_us <= micros(s.duration):
            self.sim.schedule(t1 + epoch_us, self._energy_epoch)

    def _watch_routes(self) -> None:
        ids = self.scenario.node_ids()
        pending = False
        now = self.sim.now
        for a in ids:
            table = self.net.host(a).routes()
            for b in ids:
                if a == b or self.convergence.get((a, b)) is not None:
                    continue
                if self.net.host(b).address in table:
                    self.convergence[(a, b)] = now / 1e6
                else:
                    self.convergence[(a, b)] = None
                    pending = True
        if pending and now + CONVERGENCE_STEP_US <= micros(self.scenario.duration):
            self.sim.schedule(now + CONVERGENCE_STEP_US, self._watch_routes)

    def run(self) -> MetricsBundle:
        s = self.scenario
        self.start()
        self.sim.run_until(micros(s.duration))
        return self.collect()

    def collect(self) -> MetricsBundle:
        s = self.scenario
        end_us = self.sim.now
        b = MetricsBundle(s.name, s.seed, s.duration, end_us / 1e6)
        for f in s.flows:
            b.flow_windows[f.label] = (f.start, s.flow_stop(f))
            if f.kind in ("udp-saturation", "cbr"):
                m = self.meters[f.label]
                b.throughput[f.label] = m.bits_per_second()
                b.delivered_bytes[f.label] = m.bytes
        b.pings = {k: v.records for k, v in self.pings.items()}
        b.discovery = {k: app.finish(end_us) for k, app in self.apps.items()}
        b.batteries = self.batteries
        b.depleted = list(self.depleted)
        b.convergence = dict(self.convergence)
        b.routes = {n: route_rows(self.net, n) for n in s.node_ids()}
        b.drops = self.net.drops()
        b.setup = dict(self.setup)
        b.positions = position_log(self.trajectories, min(s.duration, end_us / 1e6), s.position_period)
        b.multicast_log = list(self.net.multicast_log)
        b.stores = {n: self.netconfig.store(n).serialize() for n in s.node_ids()}
        b.hooks = list(self.hooks)
        return b


def run(scenario: Scenario, registry: PackageRegistry | None = None) -> MetricsBundle:
    return Emulation(scenario, registry).run()


def run_batch(scenario: Scenario, repeat: int, out_dir: str | Path,
              registry: PackageRegistry | None = None) -> list[MetricsBundle]:
    """Repetition i runs with seed + i and writes to out_dir/rep_i."""
    bundles = []
    for i in range(repeat):
        b = run(replace(scenario, seed=scenario.seed + i), registry)
        emit_csv(b, Path(out_dir) / f"rep_{i}")
        bundles.append(b)
    return bundles
