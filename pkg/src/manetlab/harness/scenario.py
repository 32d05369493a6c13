"""Scenario files: JSON documents describing topology, traffic and models."""

from __future__ import annotations

import copy
import ipaddress
import json
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

from ..energy import EnergyCoefficients
from ..link import FaultModel, MediumModel, PowerSaveModel
from ..netconfig import IpConfig, default_ip
from ..routing.plugin import PackageRegistry, default_registry

FLOW_KINDS = ("udp-saturation", "cbr", "ping-series", "discovery")
EVENT_ACTIONS = ("teardown", "setup", "set_fault")
BUILTINS = ("infra", "ibss_sh", "ibss_mh")


class ScenarioError(Exception):
    pass


class ParseError(ScenarioError):
    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.line = line
        self.field = field


class ValidationError(ScenarioError):
    pass


@dataclass
class NodeSpec:
    id: str
    position: tuple[float, float] = (0.0, 0.0)
    waypoints: list = field(default_factory=list)  # [t, x, y]
    fault: FaultModel = FaultModel.NONE
    battery: float = 100.0
    ip: str | None = None

    def ip_config(self) -> IpConfig:
        if self.ip is None:
            return default_ip(self.id)
        iface = ipaddress.IPv4Interface(self.ip if "/" in self.ip else f"{self.ip}/16")
        return IpConfig(iface.ip, iface.network.prefixlen)


@dataclass
class FlowSpec:
    src: str
    dst: str
    kind: str = "udp-saturation"
    packet_size: int = 1470
    start: float = 10.0
    stop: float | None = None
    rate: float | None = None  # cbr, bits/s
    count: int = 30  # ping-series
    interval: float = 1.0  # ping-series
    timeout: float = 2.0
    until_depleted: bool = False
    name: str | None = None

    @property
    def label(self) -> str:
        return self.name or f"{self.src}->{self.dst}:{self.kind}"


@dataclass
class RoutingSpec:
    package: str = "olsr"
    params: dict = field(default_factory=dict)


@dataclass
class ScriptedEvent:
    at: float
    action: str
    node: str
    fault: FaultModel | None = None


@dataclass
class Scenario:
    name: str
    nodes: list[NodeSpec]
    seed: int = 1
    duration: float = 60.0
    mode: str = "ibss"
    ap: str | None = None
    ssid: str = "manet"
    medium: MediumModel = field(default_factory=MediumModel)
    power_save: PowerSaveModel = field(default_factory=PowerSaveModel)
    routing: RoutingSpec = field(default_factory=RoutingSpec)
    flows: list[FlowSpec] = field(default_factory=list)
    energy: EnergyCoefficients = field(default_factory=EnergyCoefficients)
    events: list[ScriptedEvent] = field(default_factory=list)
    energy_epoch: float = 1.0
    position_period: float = 1.0

    def node(self, node_id: str) -> NodeSpec:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    def node_ids(self) -> list[str]:
        return [n.id for n in self.nodes]

    def flow_stop(self, flow: FlowSpec) -> float:
        return self.duration if flow.stop is None else flow.stop


# -- parsing ------------------------------------------------------------------


def _build(cls, data, where: str):
    if not isinstance(data, dict):
        raise ParseError(f"expected an object, got {type(data).__name__}", field=where)
    known = {f.name for f in fields(cls)}
    for key in data:
        if key not in known:
            raise ParseError("unknown key", field=f"{where}.{key}" if where else key)
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ParseError(str(exc), field=where) from None


def _fault(value, where: str) -> FaultModel:
    try:
        return FaultModel(value)
    except ValueError:
        names = ", ".join(f.value for f in FaultModel)
        raise ParseError(f"unknown fault {value!r} (one of {names})", field=where) from None


def _number(value, where: str, kind=float):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"expected a number, got {value!r}", field=where)
    return kind(value)


def scenario_from_dict(data: dict) -> Scenario:
    if not isinstance(data, dict):
        raise ParseError("top level must be an object")
    data = copy.deepcopy(data)
    known = {f.name for f in fields(Scenario)}
    for key in data:
        if key not in known:
            raise ParseError("unknown key", field=key)
    if "name" not in data:
        raise ParseError("missing", field="name")
    if not isinstance(data.get("nodes"), list):
        raise ParseError("nodes must be a list", field="nodes")

    nodes = []
    for i, raw in enumerate(data["nodes"]):
        where = f"nodes[{i}]"
        if not isinstance(raw, dict) or "id" not in raw:
            raise ParseError("node needs an id", field=where)
        raw = dict(raw)
        if "position" in raw:
            pos = raw["position"]
            if not isinstance(pos, list) or len(pos) != 2:
                raise ParseError("position must be [x, y]", field=f"{where}.position")
            raw["position"] = (_number(pos[0], f"{where}.position"), _number(pos[1], f"{where}.position"))
        if "waypoints" in raw:
            wps = raw["waypoints"]
            if not isinstance(wps, list) or any(not isinstance(w, list) or len(w) != 3 for w in wps):
                raise ParseError("waypoints must be [[t, x, y], ...]", field=f"{where}.waypoints")
            raw["waypoints"] = [[_number(v, f"{where}.waypoints") for v in w] for w in wps]
        if "fault" in raw:
            raw["fault"] = _fault(raw["fault"], f"{where}.fault")
        nodes.append(_build(NodeSpec, raw, where))
    data["nodes"] = nodes

    if "medium" in data:
        data["medium"] = _build(MediumModel, data["medium"], "medium")
    if "power_save" in data:
        data["power_save"] = _build(PowerSaveModel, data["power_save"], "power_save")
    if "energy" in data:
        data["energy"] = _build(EnergyCoefficients, data["energy"], "energy")
    if "routing" in data:
        data["routing"] = _build(RoutingSpec, data["routing"], "routing")
    flows = data.get("flows", [])
    if not isinstance(flows, list):
        raise ParseError("flows must be a list", field="flows")
    data["flows"] = [_build(FlowSpec, f, f"flows[{i}]") for i, f in enumerate(flows)]
    events = data.get("events", [])
    if not isinstance(events, list):
        raise ParseError("events must be a list", field="events")
    evs = []
    for i, e in enumerate(events):
        e = dict(e) if isinstance(e, dict) else e
        if isinstance(e, dict) and e.get("fault") is not None:
            e["fault"] = _fault(e["fault"], f"events[{i}].fault")
        evs.append(_build(ScriptedEvent, e, f"events[{i}]"))
    data["events"] = evs
    for key in ("duration", "energy_epoch", "position_period"):
        if key in data:
            data[key] = _number(data[key], key)
    if "seed" in data:
        data["seed"] = _number(data["seed"], "seed", int)
    return _build(Scenario, data, "")


def parse_scenario(text: str) -> Scenario:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from None
    return scenario_from_dict(data)


def validate(s: Scenario, registry: PackageRegistry | None = None) -> Scenario:
    registry = registry or default_registry()
    if not s.nodes:
        raise ValidationError("scenario has no nodes")
    ids = s.node_ids()
    if len(set(ids)) != len(ids):
        raise ValidationError("duplicate node ids")
    if s.duration <= 0:
        raise ValidationError("duration must be positive")
    if s.energy_epoch <= 0 or s.position_period <= 0:
        raise ValidationError("energy_epoch and position_period must be positive")
    seen = {}
    for n in s.nodes:
        try:
            addr = n.ip_config().address
        except ValueError as exc:
            raise ValidationError(f"node {n.id}: {exc}") from None
        if addr in seen:
            raise ValidationError(f"duplicate IP {addr} for nodes {seen[addr]} and {n.id}")
        seen[addr] = n.id
        if not 0 < n.battery <= 100:
            raise ValidationError(f"node {n.id}: battery must be in (0, 100]")
    if s.mode == "infrastructure":
        if s.ap not in ids:
            raise ValidationError(f"access point {s.ap!r} is not a node")
    elif s.mode == "ibss":
        if s.ap is not None:
            raise ValidationError("ibss scenarios have no access point")
    else:
        raise ValidationError(f"unknown mode {s.mode!r}")
    if s.routing.package not in registry:
        raise ValidationError(f"unknown routing package {s.routing.package!r}")
    for f in s.flows:
        if f.src not in ids or f.dst not in ids:
            raise ValidationError(f"flow {f.label} references an unknown node")
        if f.src == f.dst:
            raise ValidationError(f"flow {f.label} has src == dst")
        if f.kind not in FLOW_KINDS:
            raise ValidationError(f"flow kind {f.kind!r} not in {FLOW_KINDS}")
        stop = s.flow_stop(f)
        if not 0 <= f.start < stop <= s.duration:
            raise ValidationError(f"flow {f.label}: need 0 <= start < stop <= duration")
        if f.packet_size < 1:
            raise ValidationError(f"flow {f.label}: packet_size must be >= 1")
        if f.kind == "cbr" and not (f.rate and f.rate > 0):
            raise ValidationError(f"flow {f.label}: cbr needs a positive rate")
        if f.kind == "ping-series" and (f.count < 1 or f.interval <= 0):
            raise ValidationError(f"flow {f.label}: bad ping count/interval")
    labels = [f.label for f in s.flows]
    if len(set(labels)) != len(labels):
        raise ValidationError("flow names must be unique")
    for e in s.events:
        if e.node not in ids:
            raise ValidationError(f"event references unknown node {e.node!r}")
        if e.action not in EVENT_ACTIONS:
            raise ValidationError(f"unknown event action {e.action!r}")
        if e.action == "set_fault" and e.fault is None:
            raise ValidationError("set_fault event needs a fault")
        if not 0 <= e.at <= s.duration:
            raise ValidationError("event time outside the run")
    return s


def load_scenario(source: str | Path, registry: PackageRegistry | None = None) -> Scenario:
    """Load a scenario from a file path or a built-in name."""
    src = str(source)
    if src in BUILTINS and not Path(src).exists():
        text = resources.files("manetlab.harness").joinpath("scenarios", f"{src}.json").read_text()
    else:
        try:
            text = Path(src).read_text()
        except OSError as exc:
            raise ParseError(f"cannot read {src}: {exc.strerror}") from None
    return validate(parse_scenario(text), registry)


def builtin_scenarios() -> dict[str, Scenario]:
    return {name: load_scenario(name) for name in BUILTINS}


# -- rendering ----------------------------------------------------------------


def _plain(value):
    if isinstance(value, FaultModel):
        return value.value
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    if isinstance(value, list):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    return value


def scenario_to_dict(s: Scenario) -> dict:
    return _plain(asdict(s))


def dump_scenario(s: Scenario) -> str:
    return json.dumps(scenario_to_dict(s), indent=2) + "\n"


def with_traffic(s: Scenario, kind: str, **kw) -> Scenario:
    """Copy of ``s`` whose A->C style flow is swapped for another kind."""
    base = s.flows[0] if s.flows else FlowSpec(s.nodes[0].id, s.nodes[-1].id)
    if kind == "none":
        return replace(s, flows=[])
    if kind == "ping-series":
        count = kw.pop("count", 30)
        interval = kw.pop("interval", 1.0)
        start = kw.pop("start", base.start)
        flow = FlowSpec(base.src, base.dst, "ping-series", 64, start, None, count=count, interval=interval, **kw)
        duration = max(s.duration, start + (count - 1) * interval + flow.timeout + 1)
        return replace(s, flows=[flow], duration=duration)
    flow = replace(base, kind=kind, name=None, **kw)
    return replace(s, flows=[flow])
