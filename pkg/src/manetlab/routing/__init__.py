from .forwarding import DEFAULT_TTL, MDNS_GROUP, ForwardDecision, NetPacket, forward
from .olsr import Hello, MalformedMessage, OlsrAgent, OlsrState, Tc
from .plugin import (
    DuplicatePackage,
    ManifestError,
    PackageRegistry,
    Route,
    RouteTable,
    RoutingPackage,
    RoutingPlugin,
    StaticRouting,
    UnknownPackage,
    default_registry,
    load_manifest,
    package_from_manifest,
)

__all__ = [
    "DEFAULT_TTL",
    "MDNS_GROUP",
    "ForwardDecision",
    "NetPacket",
    "forward",
    "Hello",
    "MalformedMessage",
    "OlsrAgent",
    "OlsrState",
    "Tc",
    "DuplicatePackage",
    "ManifestError",
    "PackageRegistry",
    "Route",
    "RouteTable",
    "RoutingPackage",
    "RoutingPlugin",
    "StaticRouting",
    "UnknownPackage",
    "default_registry",
    "load_manifest",
    "package_from_manifest",
]
