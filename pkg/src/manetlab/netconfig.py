"""Per-node network configuration: known-networks store, one-step IBSS
setup, link-local addressing."""

from __future__ import annotations

import ipaddress
import json
from dataclasses import dataclass, field
from enum import Enum

from .link import FaultModel, LinkMode, Medium, UnknownNode
from .sim import Simulator


class NetConfigError(Exception):
    pass


class DriverError(NetConfigError):
    def __init__(self, message: str, report: "SetupReport"):
        super().__init__(message)
        self.report = report


class AddressConflict(NetConfigError):
    def __init__(self, message: str, report: "SetupReport"):
        super().__init__(message)
        self.report = report


class StoreParseError(NetConfigError):
    pass


@dataclass(frozen=True)
class NetworkProfile:
    ssid: str
    mode: str = "ibss"  # "ibss" | "infrastructure"
    priority: int = 0

    def __post_init__(self):
        if not self.ssid:
            raise ValueError("ssid must be non-empty")
        if self.mode not in ("ibss", "infrastructure"):
            raise ValueError(f"unknown profile mode {self.mode!r}")


@dataclass
class NetworkStore:
    profiles: list[NetworkProfile] = field(default_factory=list)
    ibss_only_visible: bool = False

    def upsert(self, profile: NetworkProfile) -> None:
        for i, p in enumerate(self.profiles):
            if p.ssid == profile.ssid and p.mode == profile.mode:
                self.profiles[i] = profile
                return
        self.profiles.append(profile)

    def remove_ibss(self) -> None:
        self.profiles = [p for p in self.profiles if p.mode != "ibss"]

    def serialize(self) -> str:
        lines = [f"ibss_only_visible={int(self.ibss_only_visible)}"]
        for p in self.profiles:
            lines.append("network {")
            lines.append(f"\tssid={json.dumps(p.ssid)}")
            lines.append(f"\tmode={p.mode}")
            lines.append(f"\tpriority={p.priority}")
            lines.append("}")
        return "\n".join(lines) + "\n"

    @classmethod
    def parse(cls, text: str) -> "NetworkStore":
        store = cls()
        block: dict | None = None
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line == "network {":
                if block is not None:
                    raise StoreParseError(f"line {lineno}: nested network block")
                block = {}
                continue
            if line == "}":
                if block is None:
                    raise StoreParseError(f"line {lineno}: unmatched '}}'")
                try:
                    store.profiles.append(
                        NetworkProfile(
                            ssid=block["ssid"],
                            mode=block.get("mode", "ibss"),
                            priority=int(block.get("priority", 0)),
                        )
                    )
                except (KeyError, ValueError) as exc:
                    raise StoreParseError(f"line {lineno}: bad network block ({exc})") from None
                block = None
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise StoreParseError(f"line {lineno}: expected key=value")
            if block is None:
                if key != "ibss_only_visible":
                    raise StoreParseError(f"line {lineno}: unknown global key {key!r}")
                store.ibss_only_visible = value.strip() == "1"
            elif key == "ssid":
                try:
                    block["ssid"] = json.loads(value)
                except json.JSONDecodeError:
                    raise StoreParseError(f"line {lineno}: ssid must be quoted") from None
            else:
                block[key] = value.strip()
        if block is not None:
            raise StoreParseError("unterminated network block")
        return store


@dataclass(frozen=True)
class IpConfig:
    address: ipaddress.IPv4Address
    prefix: int = 16
    gateway: ipaddress.IPv4Address | None = None

    def __post_init__(self):
        net = ipaddress.IPv4Network(f"{self.address}/{self.prefix}", strict=False)
        if self.prefix < 31 and self.address in (net.network_address, net.broadcast_address):
            raise ValueError(f"{self.address} is not a host address of {net}")


def address_hash(node: str) -> int:
    h = 0
    for ch in node:
        h = (h * 31 + ord(ch)) % 65536
    return h


def default_ip(node: str) -> IpConfig:
    """169.254.X.Y derived from a base-31 string hash of the node id."""
    h = address_hash(node)
    x = 1 + (h // 256) % 254
    y = 1 + h % 254
    return IpConfig(ipaddress.IPv4Address(f"169.254.{x}.{y}"), 16, None)


class IfaceState(Enum):
    DOWN = "down"
    UP_UNASSOCIATED = "up-unassociated"
    ASSOCIATED = "associated"


@dataclass
class SetupStep:
    name: str
    ok: bool
    time_us: int
    detail: str = ""


@dataclass
class SetupReport:
    node: str
    steps: list[SetupStep] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return len(self.steps) == 4 and all(s.ok for s in self.steps)


@dataclass
class _NodeConfig:
    store: NetworkStore = field(default_factory=NetworkStore)
    iface: IfaceState = IfaceState.DOWN
    profile: NetworkProfile | None = None
    ip: IpConfig | None = None


class NetConfig:
    """NetConfig for every node of one emulation instance."""

    def __init__(self, sim: Simulator, medium: Medium):
        self.sim = sim
        self.medium = medium
        self._nodes: dict[str, _NodeConfig] = {n: _NodeConfig() for n in medium.nodes()}

    def _cfg(self, node: str) -> _NodeConfig:
        try:
            return self._nodes[node]
        except KeyError:
            raise UnknownNode(node) from None

    def add_node(self, node: str) -> None:
        self._nodes.setdefault(node, _NodeConfig())

    def store(self, node: str) -> NetworkStore:
        return self._cfg(node).store

    def iface_state(self, node: str) -> IfaceState:
        return self._cfg(node).iface

    def ip(self, node: str) -> IpConfig | None:
        return self._cfg(node).ip

    def one_step_setup(self, node: str, profile: NetworkProfile, ip: IpConfig | None = None) -> SetupReport:
        cfg = self._cfg(node)
        if profile.mode != "ibss":
            raise ValueError("one-step setup creates IBSS networks only")
        report = SetupReport(node)
        now = self.sim.now

        # 1: interface down so nothing else rewrites the configuration
        self.medium.set_up(node, False)
        cfg.iface = IfaceState.DOWN
        cfg.profile = None
        report.steps.append(SetupStep("interface-down", True, now))

        # 2: rewrite the known-networks store
        cfg.store.upsert(profile)
        cfg.store.ibss_only_visible = True
        report.steps.append(SetupStep("store-updated", True, now))

        # 3: interface up and join
        self.medium.set_up(node, True)
        cfg.iface = IfaceState.UP_UNASSOCIATED
        if self.medium.fault(node) is FaultModel.DRIVER_NO_IBSS:
            report.steps.append(SetupStep("associate", False, now, "driver does not support IBSS"))
            raise DriverError(f"{node}: driver failed to join IBSS {profile.ssid!r}", report)
        visible = [p.ssid for p in self.visible_networks(node)]
        if profile.ssid not in visible:
            report.steps.append(SetupStep("associate", False, now, "network not visible"))
            raise DriverError(f"{node}: {profile.ssid!r} not visible", report)
        self.medium.associate(node, profile.ssid, LinkMode.IBSS)
        cfg.iface = IfaceState.ASSOCIATED
        cfg.profile = profile
        report.steps.append(SetupStep("associate", True, now, profile.ssid))

        # 4: addressing
        ipc = ip or default_ip(node)
        for other, ocfg in self._nodes.items():
            if other != node and ocfg.iface is IfaceState.ASSOCIATED and ocfg.ip is not None:
                if ocfg.ip.address == ipc.address:
                    report.steps.append(SetupStep("ip-config", False, now, f"{ipc.address} held by {other}"))
                    raise AddressConflict(f"{node}: {ipc.address} already used by {other}", report)
        cfg.ip = ipc
        report.steps.append(SetupStep("ip-config", True, now, f"{ipc.address}/{ipc.prefix}"))
        return report

    def join_infrastructure(self, node: str, profile: NetworkProfile, role: LinkMode, ip: IpConfig | None = None) -> None:
        """Associate as station (or act as AP) of an infrastructure BSS."""
        cfg = self._cfg(node)
        if profile.mode != "infrastructure":
            raise ValueError("profile is not an infrastructure network")
        if cfg.store.ibss_only_visible:
            raise NetConfigError(f"{node}: store hides infrastructure networks")
        cfg.store.upsert(profile)
        self.medium.set_up(node, True)
        self.medium.associate(node, profile.ssid, role)
        cfg.iface = IfaceState.ASSOCIATED
        cfg.profile = profile
        cfg.ip = ip or default_ip(node)

    def visible_networks(self, node: str) -> list[NetworkProfile]:
        store = self._cfg(node).store
        profiles = store.profiles
        if store.ibss_only_visible:
            profiles = [p for p in profiles if p.mode == "ibss"]
        return sorted(profiles, key=lambda p: -p.priority)

    def teardown(self, node: str) -> None:
        cfg = self._cfg(node)
        if cfg.iface is IfaceState.DOWN and not cfg.store.ibss_only_visible and not any(
            p.mode == "ibss" for p in cfg.store.profiles
        ):
            return
        cfg.store.remove_ibss()
        cfg.store.ibss_only_visible = False
        self.medium.set_up(node, False)
        cfg.iface = IfaceState.DOWN
        cfg.profile = None
