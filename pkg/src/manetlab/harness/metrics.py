"""Run results and their CSV rendering."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

from ..diagnostics import PingRecord, PositionSample
from ..energy import discharge_series


@dataclass
class MetricsBundle:
    scenario: str
    seed: int
    duration: float
    end_time: float
    flow_windows: dict = field(default_factory=dict)  # label -> (start, stop)
    throughput: dict = field(default_factory=dict)  # label -> [bits per second]
    delivered_bytes: dict = field(default_factory=dict)
    pings: dict = field(default_factory=dict)  # label -> [PingRecord]
    batteries: dict = field(default_factory=dict)  # node -> BatteryState
    convergence: dict = field(default_factory=dict)  # (node, dest node) -> seconds | None
    routes: dict = field(default_factory=dict)  # node -> [(dest, next_hop, hops, dest node)]
    drops: dict = field(default_factory=dict)  # (node, reason) -> count
    discovery: dict = field(default_factory=dict)
    setup: dict = field(default_factory=dict)  # node -> "ok" | error text
    depleted: list = field(default_factory=list)  # (node, t_us)
    positions: list[PositionSample] = field(default_factory=list)
    multicast_log: list = field(default_factory=list)
    stores: dict = field(default_factory=dict)  # node -> serialized network store
    hooks: list = field(default_factory=list)

    def goodput(self, label: str | None = None) -> float:
        """Mean bits/s over the whole seconds a flow was active."""
        if label is None:
            label = next(iter(self.throughput))
        start, stop = self.flow_windows[label]
        series = self.throughput[label]
        lo = int(-(-start // 1))
        hi = min(int(stop), len(series), int(self.end_time))
        if hi <= lo:
            return 0.0
        return sum(series[lo:hi]) / (hi - lo)

    def discharge(self, node: str, since: float = 0.0) -> list[tuple[int, float]]:
        return discharge_series(self.batteries[node], round(since * 1e6))


def _fmt(x: float, digits: int = 3) -> str:
    return f"{x:.{digits}f}"


def emit_csv(bundle: MetricsBundle, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def table(name: str, header: list[str], rows) -> None:
        path = out / name
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
        written.append(path)

    table(
        "throughput.csv",
        ["time_s", "flow", "bits_per_s"],
        [(t, label, bps) for label, series in bundle.throughput.items() for t, bps in enumerate(series)],
    )
    ping_rows = []
    for records in bundle.pings.values():
        for r in records:
            ping_rows.append((r.seq, "" if r.lost else _fmt(r.rtt * 1000), int(r.lost)))
    table("ping.csv", ["seq", "rtt_ms", "lost"], ping_rows)
    table(
        "battery.csv",
        ["node", "percent", "interval_s"],
        [(node, p, _fmt(s)) for node in sorted(bundle.batteries) for p, s in bundle.discharge(node)],
    )
    route_rows = []
    for node in sorted(bundle.routes):
        for dest, nh, hops, dest_node in bundle.routes[node]:
            conv = bundle.convergence.get((node, dest_node))
            route_rows.append((node, dest, nh, hops, "" if conv is None else _fmt(conv)))
    table("routes.csv", ["node", "destination", "next_hop", "hops", "converged_s"], route_rows)
    table("drops.csv", ["node", "reason", "count"], [(n, r, c) for (n, r), c in sorted(bundle.drops.items())])
    table(
        "positions.csv",
        ["time_s", "node", "x", "y"],
        [(_fmt(p.time / 1e6), p.node, _fmt(p.position[0]), _fmt(p.position[1])) for p in bundle.positions],
    )
    for node in sorted(bundle.stores):
        path = out / f"netstore_{node}.conf"
        path.write_text(bundle.stores[node])
        written.append(path)
    return written


def ping_rtts(records: list[PingRecord]) -> list[float]:
    return [r.rtt for r in records if not r.lost]


def battery_summary(bundle: MetricsBundle, since: float = 0.0) -> dict[str, float]:
    """node -> mean seconds per percent point."""
    out = {}
    for node in sorted(bundle.batteries):
        series = bundle.discharge(node, since)
        out[node] = sum(s for _, s in series) / len(series) if series else float("nan")
    return out

