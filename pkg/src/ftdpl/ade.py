"""
River pollutant source identification with the 1-D advection-dispersion
plume model.

Decision vector is ``x = (s, l, t)``: released mass, source location (m) and
release time (min). Each period reveals one sensor reading; the online
instance has the squared residual as objective and ``exp(squared residual)``
as the single long-term constraint (the entropic risk constraint with risk
parameter 1, rewritten as a time average).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import DomainError, InstanceSpec, ParameterError, PrimalBox

__all__ = [
    "AdeParams",
    "SourceInfo",
    "SensorSchedule",
    "Observation",
    "TRUE_SOURCE",
    "default_box",
    "concentration",
    "predict",
    "generate_observations",
    "build_instance",
    "out_of_sample_stats",
    "write_observations_csv",
    "read_observations_csv",
]

CSV_HEADER = ["period", "location_m", "time_min", "concentration"]


@dataclass(frozen=True)
class AdeParams:
    D: float = 2430.0  # dispersion, m^2/min
    k: float = 0.0  # decay, 1/min
    A: float = 60.0  # cross-section area, m^2
    v: float = 80.0  # velocity, m/min

    def __post_init__(self):
        if not (self.D > 0 and self.A > 0 and self.k >= 0):
            raise ParameterError(f"invalid ADE parameters {self}")


@dataclass(frozen=True)
class SourceInfo:
    s0: float
    l0: float
    t0: float

    def __post_init__(self):
        if not self.s0 > 0:
            raise ParameterError(f"released mass must be positive, got {self.s0}")

    def as_array(self) -> np.ndarray:
        return np.array([self.s0, self.l0, self.t0], dtype=float)


TRUE_SOURCE = SourceInfo(1_300_000.0, -22106.0, -215.0)


def default_box() -> PrimalBox:
    return PrimalBox([1e5, -4e4, -400.0], [3e6, -1.5e4, -150.0])


@dataclass(frozen=True)
class SensorSchedule:
    """Round-robin sensor readings: period ``n`` reads sensor ``(n-1) % count`` at ``n * dt`` min."""

    first: float = -14216.3
    last: float = 22009.0
    count: int = 30
    dt: float = 0.8

    def __post_init__(self):
        if self.count < 2 or not self.last > self.first or not self.dt > 0:
            raise ParameterError(f"invalid sensor schedule {self}")

    @property
    def sensor_locations(self) -> np.ndarray:
        return np.linspace(self.first, self.last, self.count)

    def assignment(self, n):
        return (np.asarray(n) - 1) % self.count

    def location(self, n):
        return self.sensor_locations[self.assignment(n)]

    def time(self, n):
        return self.dt * np.asarray(n, dtype=float)


@dataclass(frozen=True)
class Observation:
    period: int
    location: float
    time: float
    concentration: float


def predict(params: AdeParams, s, l0, t0, l, t):
    """Broadcasting form of the plume model; no domain checks."""
    elapsed = t - t0
    spread = 4.0 * params.D * elapsed
    drift = l - l0 - params.v * elapsed
    exponent = -(drift * drift) / spread
    if params.k:
        exponent = exponent - params.k * elapsed
    return s / (params.A * np.sqrt(np.pi * spread)) * np.exp(exponent)


def concentration(params: AdeParams, source: SourceInfo, l, t):
    """
    Concentration at location ``l`` and time ``t`` from an instantaneous release.

    Raises
    ------
    DomainError
        If ``t <= t0`` anywhere.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t <= source.t0):
        raise DomainError(f"concentration undefined for t <= t0={source.t0}")
    c = predict(params, source.s0, source.l0, source.t0, np.asarray(l, dtype=float), t)
    return float(c) if np.ndim(c) == 0 else c


def generate_observations(
    params: AdeParams,
    true_source: SourceInfo,
    schedule: SensorSchedule,
    n_periods: int,
    noise_std: float,
    seed: int,
) -> list[Observation]:
    """Readings for periods ``1..n_periods`` with additive N(0, noise_std**2) errors."""
    if noise_std < 0:
        raise ParameterError(f"noise_std must be nonnegative, got {noise_std}")
    n = np.arange(1, n_periods + 1)
    loc, time = schedule.location(n), schedule.time(n)
    if np.any(time <= true_source.t0):
        raise DomainError("schedule has readings at or before the release time")
    clean = concentration(params, true_source, loc, time)
    noise = np.random.default_rng(seed).normal(0.0, noise_std, size=n.size) if noise_std > 0 else 0.0
    obs = clean + noise
    return [Observation(int(p), float(a), float(b), float(c)) for p, a, b, c in zip(n, loc, time, obs)]


def _arrays(observations):
    loc = np.array([o.location for o in observations], dtype=float)
    time = np.array([o.time for o in observations], dtype=float)
    conc = np.array([o.concentration for o in observations], dtype=float)
    return loc, time, conc


def build_instance(
    params: AdeParams,
    observations,
    b: float,
    box: PrimalBox | None = None,
    y_max: float = 100.0,
    threshold: str = "exp",
) -> InstanceSpec:
    """
    Online instance with ``f_n = r_n**2`` and ``c_n = exp(r_n**2)``, ``r_n`` the residual.

    ``threshold="exp"`` uses ``exp(b)`` so that the time average of ``c_n``
    bounded by it is the entropic risk bound ``log(mean exp(r**2)) <= b``;
    ``threshold="raw"`` uses ``b`` itself.
    """
    box = default_box() if box is None else box
    periods = np.array([o.period for o in observations])
    if not np.array_equal(periods, np.arange(1, len(observations) + 1)):
        raise ParameterError("observations must cover periods 1..T in order")
    loc, time, conc = _arrays(observations)
    if box.d != 3:
        raise ParameterError("the decision box must be 3-D (s, l, t)")
    if not box.upper[2] < time.min():
        raise ParameterError(
            f"box release-time upper bound {box.upper[2]} must lie before the first reading {time.min()}"
        )
    if threshold == "exp":
        b1 = float(np.exp(b))
    elif threshold == "raw":
        b1 = float(b)
    else:
        raise ParameterError(f"threshold must be 'exp' or 'raw', got {threshold!r}")

    def evaluator(X, idx):
        i = idx - 1
        pred = predict(params, X[:, 0:1], X[:, 1:2], X[:, 2:3], loc[i], time[i])
        loss = (pred - conc[i]) ** 2
        with np.errstate(over="ignore"):
            risk = np.exp(loss)
        return loss, risk[:, None, :]

    return InstanceSpec(len(observations), evaluator, [b1], box, y_max)


def out_of_sample_stats(params: AdeParams, solution, test_observations):
    """Mean and population variance of squared residuals of ``solution = (s, l, t)``."""
    if len(test_observations) == 0:
        raise DomainError("empty test set")
    s, l0, t0 = np.asarray(getattr(solution, "as_array", lambda: solution)(), dtype=float)
    loc, time, conc = _arrays(test_observations)
    loss = (predict(params, s, l0, t0, loc, time) - conc) ** 2
    return float(loss.mean()), float(loss.var())


def write_observations_csv(path, observations):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for o in observations:
            w.writerow([o.period, repr(o.location), repr(o.time), repr(o.concentration)])


def read_observations_csv(path) -> list[Observation]:
    with open(Path(path), newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_HEADER:
            raise ParameterError(f"{path}: expected header {','.join(CSV_HEADER)}")
        return [
            Observation(int(r["period"]), float(r["location_m"]), float(r["time_min"]), float(r["concentration"]))
            for r in reader
        ]
