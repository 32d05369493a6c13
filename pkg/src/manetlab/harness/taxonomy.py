"""Check-list matrix comparing MANET solutions."""

from __future__ import annotations

import csv
import io
from dataclasses import astuple, dataclass, fields

LEVELS = ("yes", "no", "partial")
COLUMNS = ("no_internet_needed", "multi_hop", "any_app", "no_other_wireless", "other_systems")


@dataclass(frozen=True)
class TechnologyProfile:
    name: str
    no_internet_needed: str
    multi_hop: str
    any_app: str
    no_other_wireless: str
    other_systems: str

    def __post_init__(self):
        for col in COLUMNS:
            if getattr(self, col) not in LEVELS:
                raise ValueError(f"{self.name}.{col} must be one of {LEVELS}")


BUILTIN_PROFILES = (
    TechnologyProfile("802.11s", "yes", "yes", "yes", "yes", "partial"),
    TechnologyProfile("Open Garden", "yes", "partial", "no", "no", "no"),
    TechnologyProfile("Serval", "yes", "yes", "no", "yes", "no"),
    TechnologyProfile("WiFi Direct", "yes", "no", "no", "yes", "yes"),
    TechnologyProfile("AdHocDroid", "yes", "yes", "yes", "yes", "partial"),
)


def taxonomy_report(fmt: str = "table", extra: tuple[TechnologyProfile, ...] = ()) -> str:
    rows = [astuple(p) for p in BUILTIN_PROFILES + tuple(extra)]
    header = tuple(f.name for f in fields(TechnologyProfile))
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        return buf.getvalue()
    if fmt != "table":
        raise ValueError(f"unknown format {fmt!r}")
    widths = [max(len(str(r[i])) for r in rows + [header]) for i in range(len(header))]
    lines = ["  ".join(str(c).ljust(w) for c, w in zip(r, widths)).rstrip() for r in [header] + rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"
