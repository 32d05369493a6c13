"""Linear battery model driven by interface busy time."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

from .link import LinkMode


class Depleted(Exception):
    pass


@dataclass(frozen=True)
class EnergyCoefficients:
    """Drain rates in percent per hour."""

    idle_ibss: float = 5.0
    idle_infra_ps: float = 2.0
    busy_tx: float = 20.0
    # close to busy_tx so a relay and a pure receiver drain alike
    busy_rx: float = 17.0
    routing_cpu: float = 0.1

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (v >= 0 and math.isfinite(v)):
                raise ValueError(f"{f.name} must be a finite value >= 0")
        if not self.idle_ibss > self.idle_infra_ps:
            raise ValueError("idle_ibss must exceed idle_infra_ps")

    def scaled(self, factor: float) -> "EnergyCoefficients":
        return replace(self, **{f.name: getattr(self, f.name) * factor for f in fields(self)})


def idle_rate(coeffs: EnergyCoefficients, mode: LinkMode, power_save: bool = True) -> float:
    if mode is LinkMode.STATION and power_save:
        return coeffs.idle_infra_ps
    return coeffs.idle_ibss


@dataclass
class BatteryState:
    percent: float = 100.0
    t_us: int = 0
    history: list = field(default_factory=list)  # (t_us, integer percent reached)
    depleted_at: int | None = None

    def __post_init__(self):
        if not 0 <= self.percent <= 100:
            raise ValueError("percent must be within [0, 100]")
        if not self.history and self.percent == int(self.percent):
            self.history.append((self.t_us, int(self.percent)))

    @property
    def depleted(self) -> bool:
        return self.depleted_at is not None


def energy_step(
    state: BatteryState,
    dt: float,
    tx_airtime: float,
    rx_airtime: float,
    mode: LinkMode,
    routing_active: bool,
    coeffs: EnergyCoefficients | None = None,
    power_save: bool = True,
) -> BatteryState:
    """Advance ``state`` by ``dt`` seconds; raises Depleted on reaching 0%."""
    c = coeffs or EnergyCoefficients()
    if dt < 0 or tx_airtime < 0 or rx_airtime < 0:
        raise ValueError("durations must be non-negative")
    if tx_airtime + rx_airtime > dt + 1e-9:
        raise ValueError("busy airtime exceeds the step length")
    drop = (
        idle_rate(c, mode, power_save) * dt
        + c.busy_tx * tx_airtime
        + c.busy_rx * rx_airtime
        + (c.routing_cpu * dt if routing_active else 0.0)
    ) / 3600.0
    t0 = state.t_us
    dt_us = round(dt * 1e6)
    old = state.percent
    new = max(old - drop, 0.0)
    if drop > 0:
        p = math.ceil(old) - 1 if old == int(old) else math.floor(old)
        while p >= new and p >= 0:
            frac = (old - p) / drop
            state.history.append((t0 + round(frac * dt_us), p))
            p -= 1
    state.percent = new
    state.t_us = t0 + dt_us
    if new <= 0.0 and state.depleted_at is None:
        state.depleted_at = state.history[-1][0] if state.history and state.history[-1][1] == 0 else state.t_us
        raise Depleted(f"battery empty at t={state.depleted_at} us")
    return state


def discharge_series(state: BatteryState, since_us: int = 0) -> list[tuple[int, float]]:
    """(percent reached, seconds spent dropping to it) per integer crossing."""
    out = []
    h = state.history
    for (t_prev, _), (t, p) in zip(h, h[1:]):
        if t_prev >= since_us:
            out.append((p, (t - t_prev) / 1e6))
    return out


def mean_interval(series: list[tuple[int, float]]) -> float:
    if not series:
        return math.nan
    return sum(s for _, s in series) / len(series)
