"""manetlab command line."""

from __future__ import annotations

import argparse
import statistics
import sys
from dataclasses import replace
from pathlib import Path

from ..diagnostics import Unreachable, ping, route_dump, traceroute
from ..routing.plugin import RoutingError, default_registry, load_manifest
from ..sim import micros
from .metrics import emit_csv, ping_rtts
from .runner import Emulation, run, run_batch
from .scenario import BUILTINS, ScenarioError, dump_scenario, load_scenario, with_traffic
from .taxonomy import taxonomy_report

EXIT_INVALID = 2


def _registry(args):
    reg = default_registry()
    for path in args.package or ():
        reg.register(load_manifest(path))
    return reg


def _scenario(args, reg):
    s = load_scenario(args.scenario, reg)
    if getattr(args, "seed", None) is not None:
        s = replace(s, seed=args.seed)
    return s


def cmd_run(args) -> int:
    reg = _registry(args)
    s = _scenario(args, reg)
    if args.traffic:
        s = with_traffic(s, args.traffic)
    out = Path(args.out or Path("out") / s.name)
    if args.repeat > 1:
        bundles = run_batch(s, args.repeat, out, reg)
        dirs = [out / f"rep_{i}" for i in range(args.repeat)]
    else:
        bundles = [run(s, reg)]
        emit_csv(bundles[0], out)
        dirs = [out]
    for b, d in zip(bundles, dirs):
        parts = [f"seed={b.seed}"]
        for label in b.throughput:
            parts.append(f"{label} {b.goodput(label) / 1e6:.3f} Mbit/s")
        for label, recs in b.pings.items():
            rtts = ping_rtts(recs)
            med = f"{statistics.median(rtts) * 1e3:.3f} ms" if rtts else "n/a"
            parts.append(f"{label} median {med}, lost {sum(r.lost for r in recs)}/{len(recs)}")
        for label, res in b.discovery.items():
            parts.append(f"{label} found={res.found} session_ok={res.session_ok}")
        if b.depleted:
            parts.append(f"depleted {b.depleted[0][0]} at {b.depleted[0][1] / 1e6:.1f} s")
        print(f"{b.scenario}: " + "; ".join(parts) + f" -> {d}")
    return 0


def cmd_scenarios(args) -> int:
    if args.show:
        print(dump_scenario(load_scenario(args.show)), end="")
        return 0
    for name in BUILTINS:
        s = load_scenario(name)
        nodes = " ".join(f"{n.id}({n.position[0]:g},{n.position[1]:g})" for n in s.nodes)
        print(f"{name:<8} {s.mode:<15} routing={s.routing.package:<7} {nodes}")
    return 0


def cmd_taxonomy(args) -> int:
    print(taxonomy_report(args.format), end="")
    return 0


def _warm(args, reg) -> Emulation:
    s = with_traffic(_scenario(args, reg), "none")
    emu = Emulation(s, reg)
    emu.start()
    emu.sim.run_until(micros(args.at))
    return emu


def cmd_ping(args) -> int:
    reg = _registry(args)
    emu = _warm(args, reg)
    recs = ping(emu.net, args.src, args.dst, args.count, args.interval, args.timeout)
    for r in recs:
        print(f"seq={r.seq} " + ("lost" if r.lost else f"rtt={r.rtt * 1e3:.3f} ms"))
    rtts = ping_rtts(recs)
    print(f"{len(rtts)}/{len(recs)} received" + (f", median {statistics.median(rtts) * 1e3:.3f} ms" if rtts else ""))
    return 0


def cmd_traceroute(args) -> int:
    reg = _registry(args)
    emu = _warm(args, reg)
    try:
        hops = traceroute(emu.net, args.src, args.dst)
    except Unreachable as exc:
        print(f"unreachable: {exc}")
        return 1
    for i, (node, rtt) in enumerate(hops, 1):
        print(f"{i:>2}  {node}  {emu.net.host(node).address}  {rtt * 1e3:.3f} ms")
    if args.routes:
        print(route_dump(emu.net, args.src), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="manetlab", description="MANET emulation testbed")
    sub = p.add_subparsers(dest="command", required=True)

    def scenario_args(sp):
        sp.add_argument("--scenario", required=True, help="file path or built-in name")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--package", action="append", metavar="MANIFEST", help="routing package manifest (JSON)")

    r = sub.add_parser("run", help="run a scenario and write CSV metrics")
    scenario_args(r)
    r.add_argument("--repeat", type=int, default=1)
    r.add_argument("--out")
    r.add_argument("--traffic", choices=["udp-saturation", "cbr", "ping-series", "discovery", "none"])
    r.set_defaults(fn=cmd_run)

    sc = sub.add_parser("scenarios", help="list built-in scenarios")
    sc.add_argument("--show", choices=BUILTINS)
    sc.set_defaults(fn=cmd_scenarios)

    t = sub.add_parser("taxonomy", help="print the technology check-list")
    t.add_argument("--format", choices=["csv", "table"], default="table")
    t.set_defaults(fn=cmd_taxonomy)

    for name, fn in (("ping", cmd_ping), ("traceroute", cmd_traceroute)):
        d = sub.add_parser(name)
        scenario_args(d)
        d.add_argument("--src", required=True)
        d.add_argument("--dst", required=True)
        d.add_argument("--at", type=float, default=10.0, help="simulated seconds before probing")
        if name == "ping":
            d.add_argument("--count", type=int, default=30)
            d.add_argument("--interval", type=float, default=1.0)
            d.add_argument("--timeout", type=float, default=2.0)
        else:
            d.add_argument("--routes", action="store_true", help="also dump the source's route table")
        d.set_defaults(fn=fn)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "repeat", 1) < 1:
        print("error: --repeat must be >= 1", file=sys.stderr)
        return EXIT_INVALID
    try:
        return args.fn(args)
    except (ScenarioError, RoutingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except KeyError as exc:
        print(f"error: unknown node {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
