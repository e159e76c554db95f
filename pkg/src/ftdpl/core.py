"""
Domain types and exact evaluation of the per-period Lagrangian, its
log-perturbed form and the primal perturbation.

An online instance is evaluated in batches: ``evaluator(X, periods)`` takes a
population ``X`` of shape ``(N, d)`` and 1-based period indices of shape
``(k,)`` and returns the objective values ``(N, k)`` and the constraint values
``(N, I, k)``. Scalar per-period callables are adapted with
:meth:`InstanceSpec.from_functions`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "DomainError",
    "ParameterError",
    "PrimalBox",
    "InstanceSpec",
    "PerturbationVector",
    "DualPerturbationSchedule",
    "derive_seed",
    "evaluate_lagrangian",
    "evaluate_perturbed",
    "cumulative_perturbed_objective",
    "cumulative_terms",
    "sample_perturbation",
]


class DomainError(ValueError):
    """An argument lies outside the domain of an evaluation."""


class ParameterError(ValueError):
    """An algorithm or model parameter is invalid."""


Evaluator = Callable[[np.ndarray, np.ndarray], "tuple[np.ndarray, np.ndarray]"]


@dataclass(frozen=True)
class PrimalBox:
    """Axis-aligned compact decision set ``lower <= x <= upper``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float)).copy()
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float)).copy()
        if lower.ndim != 1 or lower.shape != upper.shape or lower.size < 1:
            raise ParameterError("lower and upper must be 1-D arrays of equal length >= 1")
        if not np.all(lower < upper):
            raise ParameterError("lower must be strictly below upper in every coordinate")
        lower.setflags(write=False)
        upper.setflags(write=False)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def d(self) -> int:
        return self.lower.size

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def normalize(self, x):
        return (np.asarray(x, dtype=float) - self.lower) / self.width

    def denormalize(self, u):
        return np.clip(self.lower + np.asarray(u, dtype=float) * self.width, self.lower, self.upper)

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all((x >= self.lower) & (x <= self.upper)))

    def clip(self, x):
        return np.clip(x, self.lower, self.upper)


@dataclass(frozen=True)
class InstanceSpec:
    """
    Online problem with long-term constraints.

    Parameters
    ----------
    horizon : int
        Number of periods ``T``.
    evaluator : callable
        ``evaluator(X, periods) -> (F, C)`` with ``F`` of shape ``(N, k)``
        and ``C`` of shape ``(N, I, k)``.
    thresholds : array_like
        Nonnegative long-term thresholds ``b`` of length ``I``.
    primal_box : PrimalBox
        Decision set.
    y_max : float
        Upper bound of every Lagrange multiplier.
    """

    horizon: int
    evaluator: Evaluator
    thresholds: np.ndarray
    primal_box: PrimalBox
    y_max: float

    def __post_init__(self):
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ParameterError(f"horizon must be a positive integer, got {self.horizon}")
        b = np.atleast_1d(np.asarray(self.thresholds, dtype=float)).copy()
        if b.ndim != 1:
            raise ParameterError("thresholds must be a 1-D array")
        if np.any(b < 0) or not np.all(np.isfinite(b)):
            raise ParameterError("thresholds must be finite and nonnegative")
        if not self.y_max > 0:
            raise ParameterError(f"y_max must be positive, got {self.y_max}")
        b.setflags(write=False)
        object.__setattr__(self, "thresholds", b)
        object.__setattr__(self, "horizon", int(self.horizon))
        object.__setattr__(self, "y_max", float(self.y_max))

    @property
    def n_constraints(self) -> int:
        return self.thresholds.size

    @property
    def d(self) -> int:
        return self.primal_box.d

    @classmethod
    def from_functions(
        cls,
        horizon: int,
        objective: Callable[[int, np.ndarray], float],
        constraints: Sequence[Callable[[int, np.ndarray], float]] = (),
        thresholds=(),
        primal_box: PrimalBox | None = None,
        y_max: float = 100.0,
    ) -> "InstanceSpec":
        """Build an instance from scalar callables ``f(t, x)`` and ``c_i(t, x)``."""
        constraints = tuple(constraints)
        if len(constraints) != len(np.atleast_1d(thresholds)) and len(constraints) > 0:
            raise ParameterError("one threshold per constraint is required")

        def evaluator(X, periods):
            F = np.array([[objective(int(t), x) for t in periods] for x in X], dtype=float)
            C = np.array(
                [[[c(int(t), x) for t in periods] for c in constraints] for x in X],
                dtype=float,
            ).reshape(len(X), len(constraints), len(periods))
            return F.reshape(len(X), len(periods)), C

        b = np.asarray(thresholds, dtype=float) if constraints else np.zeros(0)
        return cls(horizon, evaluator, b, primal_box, y_max)

    def evaluate(self, X, periods):
        """Batch evaluation returning ``(F, C)`` as float arrays."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        periods = np.atleast_1d(np.asarray(periods, dtype=int))
        F, C = self.evaluator(X, periods)
        F = np.asarray(F, dtype=float).reshape(len(X), len(periods))
        C = np.asarray(C, dtype=float).reshape(len(X), self.n_constraints, len(periods))
        return F, C

    def unconstrained(self) -> "InstanceSpec":
        """Same objective stream with the constraints dropped (``I = 0``)."""
        inner = self.evaluator

        def evaluator(X, periods):
            F, _ = inner(X, periods)
            return F, np.zeros((len(X), 0, len(periods)))

        return InstanceSpec(self.horizon, evaluator, np.zeros(0), self.primal_box, self.y_max)


@dataclass(frozen=True)
class PerturbationVector:
    theta: np.ndarray
    eta: float

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float).copy()
        if np.any(theta < 0):
            raise ParameterError("perturbation components must be nonnegative")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)


@dataclass(frozen=True)
class DualPerturbationSchedule:
    """Coefficient of ``sum_i log(gamma_i + 1)`` accumulated over periods ``1..t-1``."""

    lam: float

    def __post_init__(self):
        if self.lam < 0:
            raise ParameterError(f"lambda must be nonnegative, got {self.lam}")

    def weight_at(self, t: int) -> float:
        if t < 1:
            raise DomainError(f"period must be >= 1, got {t}")
        n = np.arange(1, t, dtype=float)
        return float(self.lam * np.sum(n ** (-1.0 / 9.0)))


def derive_seed(seed: int, *keys: int) -> int:
    """Deterministic 63-bit child seed for the stream addressed by ``keys``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(2, dtype=np.uint32).view(np.uint64)[0] >> np.uint64(1))


def sample_perturbation(d: int, eta: float, rng_seed: int, index: int = 0) -> PerturbationVector:
    """
    Draw ``d`` i.i.d. exponential components with rate ``eta`` (mean ``1/eta``).

    The draw is a pure function of ``(rng_seed, index)``.
    """
    if not eta > 0:
        raise ParameterError(f"eta must be positive, got {eta}")
    if d < 1:
        raise ParameterError(f"d must be >= 1, got {d}")
    rng = np.random.default_rng(np.random.SeedSequence(int(rng_seed), spawn_key=(int(index),)))
    return PerturbationVector(rng.exponential(scale=1.0 / eta, size=int(d)), float(eta))


def _check_period(spec: InstanceSpec, t: int):
    if int(t) != t or not 1 <= t <= spec.horizon:
        raise DomainError(f"period t={t} outside 1..{spec.horizon}")


def _check_point(spec: InstanceSpec, x):
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != spec.d:
        raise DomainError(f"x has dimension {x.size}, expected {spec.d}")
    if not spec.primal_box.contains(x):
        raise DomainError(f"x={x} lies outside the primal box")
    return x


def _check_dual(spec: InstanceSpec, y):
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.size != spec.n_constraints:
        raise DomainError(f"y has {y.size} components, expected {spec.n_constraints}")
    if np.any(y < 0) or np.any(y > spec.y_max):
        raise DomainError(f"y={y} outside [0, {spec.y_max}]")
    return y


def evaluate_lagrangian(spec: InstanceSpec, t: int, x, y) -> float:
    """``f_t(x) + sum_i y_i (c_it(x) - b_i)``."""
    _check_period(spec, t)
    x = _check_point(spec, x)
    y = _check_dual(spec, y)
    F, C = spec.evaluate(x[None, :], [t])
    return float(F[0, 0] + np.dot(y, C[0, :, 0] - spec.thresholds))


def evaluate_perturbed(spec: InstanceSpec, t: int, x, y, lam: float) -> float:
    """Lagrangian plus ``lam / t**(1/9) * sum_i log(y_i + 1)``."""
    if not lam > 0:
        raise ParameterError(f"lambda must be positive, got {lam}")
    value = evaluate_lagrangian(spec, t, x, y)
    y = np.asarray(y, dtype=float).reshape(-1)
    return value + lam / t ** (1.0 / 9.0) * float(np.sum(np.log1p(y)))


def cumulative_terms(spec: InstanceSpec, t: int, X, start: int = 1):
    """
    Sums over revealed periods ``start <= n < t`` for a population.

    Returns
    -------
    F : ndarray, shape (N,)
        ``sum_{n<t} f_n(x)``.
    G : ndarray, shape (N, I)
        ``sum_{n<t} (c_in(x) - b_i)``.
    """
    X = np.atleast_2d(X)
    if t <= start:
        return np.zeros(len(X)), np.zeros((len(X), spec.n_constraints))
    periods = np.arange(start, t)
    F, C = spec.evaluate(X, periods)
    with np.errstate(over="ignore", invalid="ignore"):
        G = C.sum(axis=2) - len(periods) * spec.thresholds
    return F.sum(axis=1), G


def dual_term(G, Y):
    """Row-wise ``sum_i Y_i G_i`` with ``0 * inf`` taken as 0."""
    with np.errstate(invalid="ignore", over="ignore"):
        return np.where(Y > 0, Y * G, 0.0).sum(axis=1)


def perturbation_term(box: PrimalBox, theta, X, normalized: bool = True):
    """``theta . x`` in box-normalized (default) or raw coordinates."""
    X = np.atleast_2d(X)
    coords = box.normalize(X) if normalized else X
    return (coords * np.asarray(theta, dtype=float)).sum(axis=1)


def cumulative_perturbed_objective(
    spec: InstanceSpec,
    t: int,
    x,
    y,
    theta: PerturbationVector,
    lam: float,
    normalized: bool = True,
) -> float:
    """
    Oracle objective ``sum_{n<t} Lbar_n(x, y) - theta . x~`` at period ``t``.

    ``x~`` is ``x`` mapped to the unit box unless ``normalized`` is False.
    """
    if int(t) != t or not 1 <= t <= spec.horizon + 1:
        raise DomainError(f"period t={t} outside 1..{spec.horizon + 1}")
    if lam < 0:
        raise ParameterError(f"lambda must be nonnegative, got {lam}")
    x = _check_point(spec, x)
    y = _check_dual(spec, y)
    F, G = cumulative_terms(spec, t, x[None, :])
    W = DualPerturbationSchedule(lam).weight_at(t)
    value = F[0] + dual_term(G, y[None, :])[0] + W * np.sum(np.log1p(y))
    return float(value - perturbation_term(spec.primal_box, theta.theta, x[None, :], normalized)[0])
