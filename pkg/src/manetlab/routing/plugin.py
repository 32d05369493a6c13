"""Pluggable routing protocols.

A routing package bundles a protocol factory with start/stop hook
descriptors, the way an importable archive bundles a daemon with its
start and stop scripts.  Hooks are recorded, not executed by a shell.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable


class RoutingError(Exception):
    pass


class DuplicatePackage(RoutingError):
    pass


class UnknownPackage(RoutingError, KeyError):
    pass


class ManifestError(RoutingError):
    pass


@dataclass(frozen=True)
class Route:
    next_hop: Any
    hops: int


class RouteTable(dict):
    """destination -> Route."""

    def check(self, owner=None, neighbors=None) -> None:
        for dest, r in self.items():
            if dest == owner:
                raise ValueError(f"self-route to {dest}")
            if r.hops < 1:
                raise ValueError(f"hop count {r.hops} for {dest}")
            if neighbors is not None and r.next_hop not in neighbors:
                raise ValueError(f"next hop {r.next_hop} for {dest} is not a neighbor")


class RoutingPlugin:
    """Contract every protocol implements.

    ``host`` supplies ``address``, ``now()`` (seconds), ``schedule(delay,
    fn)`` / ``cancel(id)``, ``broadcast(message, size)`` and ``rng``.
    """

    name = "abstract"

    def start(self, host) -> None:
        raise NotImplementedError

    def stop(self) -> None:
        raise NotImplementedError

    def on_control_packet(self, message, from_addr) -> None:
        pass

    def tick(self, now: float) -> None:
        pass

    def routes(self) -> RouteTable:
        raise NotImplementedError

    def link_failure(self, neighbor) -> None:
        """Link layer could not reach ``neighbor``."""


class StaticRouting(RoutingPlugin):
    """Fixed table handed over verbatim."""

    name = "static"

    def __init__(self, table: dict | None = None):
        self._configured = RouteTable()
        for dest, r in (table or {}).items():
            self._configured[dest] = r if isinstance(r, Route) else Route(r[0], int(r[1]))
        self._running = False

    def start(self, host) -> None:
        self._running = True

    def stop(self) -> None:
        self._running = False

    def routes(self) -> RouteTable:
        return RouteTable(self._configured) if self._running else RouteTable()


@dataclass
class RoutingPackage:
    name: str
    version: str
    protocol: str
    factory: Callable[..., RoutingPlugin]
    start_hook: tuple[str, ...] = ()
    stop_hook: tuple[str, ...] = ()
    params: dict = field(default_factory=dict)

    def instantiate(self, **overrides) -> RoutingPlugin:
        return self.factory(**{**self.params, **overrides})


def _protocols() -> dict[str, Callable[..., RoutingPlugin]]:
    from .olsr import OlsrAgent

    return {"olsr": OlsrAgent, "static": StaticRouting}


class PackageRegistry:
    def __init__(self):
        self._packages: dict[str, RoutingPackage] = {}

    def register(self, pkg: RoutingPackage) -> str:
        if pkg.name in self._packages:
            raise DuplicatePackage(pkg.name)
        self._packages[pkg.name] = pkg
        return pkg.name

    def get(self, name: str) -> RoutingPackage:
        try:
            return self._packages[name]
        except KeyError:
            raise UnknownPackage(name) from None

    def __contains__(self, name: str) -> bool:
        return name in self._packages

    def names(self) -> list[str]:
        return sorted(self._packages)


def package_from_manifest(data: dict) -> RoutingPackage:
    protocols = _protocols()
    try:
        name = data["name"]
        protocol = data["protocol"]
    except KeyError as exc:
        raise ManifestError(f"manifest missing {exc.args[0]!r}") from None
    if protocol not in protocols:
        raise ManifestError(f"unknown protocol id {protocol!r}")
    return RoutingPackage(
        name=name,
        version=str(data.get("version", "0")),
        protocol=protocol,
        factory=protocols[protocol],
        start_hook=tuple(data.get("start", (f"start {protocol}",))),
        stop_hook=tuple(data.get("stop", (f"stop {protocol}",))),
        params=dict(data.get("params", {})),
    )


def load_manifest(path: str | Path) -> RoutingPackage:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}:{exc.lineno}: {exc.msg}") from None
    return package_from_manifest(data)


def default_registry() -> PackageRegistry:
    reg = PackageRegistry()
    reg.register(package_from_manifest({"name": "olsr", "version": "0.9", "protocol": "olsr"}))
    reg.register(package_from_manifest({"name": "static", "version": "1.0", "protocol": "static"}))
    return reg
