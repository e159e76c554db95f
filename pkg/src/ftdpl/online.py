"""
Follow-the-Double-Perturbed-Leader online loop, the unconstrained
follow-the-perturbed-leader baseline, and Lagrangian regret bookkeeping.

Randomness is addressed by integer seeds: within a replication seeded with
``seed``, the perturbation of inner sample ``m`` at period ``t`` comes from
``derive_seed(seed, 0, t, m)`` and the matching oracle search from
``derive_seed(seed, 1, t, m)``. Hindsight solves use ``derive_seed(seed, 2, t)``
and burn-in window solves ``derive_seed(seed, 3, t)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from .core import (
    DomainError,
    InstanceSpec,
    ParameterError,
    derive_seed,
    evaluate_lagrangian,
    sample_perturbation,
)
from .oracle import GlobalSearchConfig, hindsight_solve, minimize_primal

__all__ = [
    "AlgorithmParams",
    "OnlineTrace",
    "binary_search_select",
    "ftdpl_step",
    "ftpl_baseline_step",
    "run_replication",
    "run_online",
    "wesc_regret",
    "sesc_regret",
]

logger = logging.getLogger(__name__)

_PERTURB, _SEARCH, _HINDSIGHT, _WINDOW = 0, 1, 2, 3


@dataclass(frozen=True)
class AlgorithmParams:
    """
    Parameters of the online algorithm.

    Use :meth:`for_horizon` to obtain the defaults ``eta = T**(-2/3)``,
    ``M = ceil(T**(2/9))`` and ``K = ceil(log2(T) / 9)``.
    """

    eta: float
    lam: float = 100.0
    y_max: float = 100.0
    M: int = 1
    K: int = 1
    normalized_perturbation: bool = True

    def __post_init__(self):
        if not self.eta > 0:
            raise ParameterError(f"eta must be positive, got {self.eta}")
        if not self.lam > 0:
            raise ParameterError(f"lambda must be positive, got {self.lam}")
        if not self.y_max > 0:
            raise ParameterError(f"y_max must be positive, got {self.y_max}")
        if self.M < 1 or self.K < 1:
            raise ParameterError("M and K must be positive integers")

    @classmethod
    def for_horizon(cls, T: int, **overrides) -> "AlgorithmParams":
        defaults = dict(
            eta=T ** (-2.0 / 3.0),
            M=math.ceil(T ** (2.0 / 9.0)),
            K=max(1, math.ceil(math.log2(T) / 9.0)),
        )
        defaults.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**defaults)


@dataclass
class OnlineTrace:
    """
    Per-period record of one replication.

    ``hindsight`` and ``regret`` are NaN except at checkpoints. When
    ``burn_in > 0`` the ``*_window`` arrays hold the same quantities with all
    sums restricted to periods ``burn_in..t`` (NaN for ``t < burn_in``).
    """

    x: np.ndarray
    y: np.ndarray
    lagrangian: np.ndarray
    cumulative: np.ndarray
    oracle_value: np.ndarray
    evaluations: np.ndarray
    hindsight: np.ndarray
    regret: np.ndarray
    seed: int
    selection_residual: np.ndarray
    burn_in: int = 0
    hindsight_window: np.ndarray | None = None
    regret_window: np.ndarray | None = None

    def __len__(self):
        return len(self.lagrangian)

    @property
    def checkpoints(self) -> np.ndarray:
        """1-based periods at which regret was evaluated."""
        return np.flatnonzero(~np.isnan(self.regret)) + 1

    @property
    def average_regret(self) -> np.ndarray:
        return self.regret / np.arange(1, len(self) + 1)


def binary_search_select(values, target: float, K: int) -> int:
    """
    Index of the candidate whose value is nearest ``target`` after ``K`` bisection probes.

    Candidates are sorted by value and a bracket ``sorted[lo] <= target <=
    sorted[hi]`` is halved ``K`` times; the nearer bracket end wins, ties go to
    the smaller value, and equal values resolve to the lowest original index.
    With ``K >= ceil(log2(M))`` this is the globally nearest candidate.
    """
    values = np.asarray(values, dtype=float).reshape(-1)
    if values.size == 0:
        raise DomainError("binary_search_select needs at least one candidate")
    if K < 1:
        raise ParameterError(f"K must be >= 1, got {K}")
    order = np.argsort(values, kind="stable")
    s = values[order]

    def original(pos):
        return int(np.flatnonzero(values == s[pos])[0])

    if target <= s[0]:
        return original(0)
    if target >= s[-1]:
        return original(len(s) - 1)
    lo, hi = 0, len(s) - 1
    for _ in range(K):
        if hi - lo <= 1:
            break
        mid = (lo + hi) // 2
        if s[mid] <= target:
            lo = mid
        else:
            hi = mid
    pos = lo if target - s[lo] <= s[hi] - target else hi
    return original(pos)


def _search_cfg(cfg: GlobalSearchConfig, seed: int) -> GlobalSearchConfig:
    return replace(cfg, seed=seed)


def ftdpl_step(
    spec: InstanceSpec,
    t: int,
    params: AlgorithmParams,
    cfg: GlobalSearchConfig,
    seed: int,
    initial=None,
):
    """
    One period of the double-perturbed leader.

    Draws ``M`` perturbation vectors, solves the ``M`` perturbed oracles over
    periods ``n < t``, and selects among them by :func:`binary_search_select`
    on the period-``t`` Lagrangian values against their mean.

    Returns
    -------
    x, y : ndarray
    diagnostics : dict
    """
    solutions, values, seeds = [], [], []
    for m in range(params.M):
        theta = sample_perturbation(spec.d, params.eta, derive_seed(seed, _PERTURB, t, m))
        search_seed = derive_seed(seed, _SEARCH, t, m)
        sol = minimize_primal(
            spec, t, theta, params.lam, _search_cfg(cfg, search_seed),
            initial=initial, normalized=params.normalized_perturbation,
        )
        solutions.append(sol)
        seeds.append(search_seed)
        if params.M > 1:
            values.append(evaluate_lagrangian(spec, t, sol.x, sol.y))
    if params.M == 1:
        chosen, target, residual = 0, float("nan"), 0.0
    else:
        target = float(np.mean(values))
        chosen = binary_search_select(values, target, params.K)
        residual = abs(values[chosen] - target)
    sol = solutions[chosen]
    diagnostics = dict(
        oracle_value=sol.value,
        evaluations=sum(s.evaluations for s in solutions),
        seeds=seeds,
        chosen=chosen,
        target=target,
        residual=residual,
    )
    return sol.x, sol.y, diagnostics


def ftpl_baseline_step(
    spec: InstanceSpec,
    t: int,
    eta: float,
    cfg: GlobalSearchConfig,
    seed: int,
    initial=None,
    normalized: bool = True,
):
    """Unconstrained perturbed leader: ``argmin_x sum_{n<t} f_n(x) - theta . x~``."""
    free = spec.unconstrained() if spec.n_constraints else spec
    theta = sample_perturbation(spec.d, eta, derive_seed(seed, _PERTURB, t, 0))
    sol = minimize_primal(
        free, t, theta, 0.0, _search_cfg(cfg, derive_seed(seed, _SEARCH, t, 0)),
        initial=initial, normalized=normalized,
    )
    return sol.x


def run_replication(
    spec: InstanceSpec,
    params: AlgorithmParams,
    cfg: GlobalSearchConfig,
    seed: int,
    checkpoints=(),
    method: str = "ftdpl",
    warm_start: bool = True,
    periods: int | None = None,
    burn_in: int = 0,
) -> OnlineTrace:
    """
    Run one seeded replication for ``periods`` (default: the horizon).

    Hindsight problems are solved at ``checkpoints``; with ``burn_in > 0`` a
    second hindsight problem over periods ``burn_in..t`` is solved at every
    checkpoint ``t >= burn_in``.

    ``method`` is ``"ftdpl"`` or ``"ftpl"``; for the baseline the played
    multipliers are zero and the trace records the unconstrained losses.
    """
    if params.y_max != spec.y_max:
        raise ParameterError(f"params.y_max={params.y_max} differs from instance y_max={spec.y_max}")
    if method not in ("ftdpl", "ftpl"):
        raise ParameterError(f"unknown method {method!r}")
    T = spec.horizon if periods is None else int(periods)
    checkpoints = set(int(c) for c in checkpoints)
    d, I = spec.d, spec.n_constraints
    X = np.empty((T, d))
    Y = np.zeros((T, I))
    lag = np.empty(T)
    oracle_value = np.full(T, np.nan)
    evals = np.zeros(T, dtype=int)
    residual = np.zeros(T)
    hind = np.full(T, np.nan)
    regret = np.full(T, np.nan)
    hind_w = np.full(T, np.nan)
    prev_x = None
    prev_hind = prev_hind_w = None
    for t in range(1, T + 1):
        initial = prev_x[None, :] if (warm_start and prev_x is not None) else None
        if method == "ftdpl":
            x, y, diag = ftdpl_step(spec, t, params, cfg, seed, initial=initial)
            oracle_value[t - 1] = diag["oracle_value"]
            evals[t - 1] = diag["evaluations"]
            residual[t - 1] = diag["residual"]
        else:
            x = ftpl_baseline_step(
                spec, t, params.eta, cfg, seed, initial=initial,
                normalized=params.normalized_perturbation,
            )
            y = np.zeros(I)
        X[t - 1], Y[t - 1] = x, y
        lag[t - 1] = evaluate_lagrangian(spec, t, x, y)
        prev_x = x
        if t in checkpoints:
            seeds = [x] if prev_hind is None else [prev_hind, x]
            h = hindsight_solve(
                spec, t, _search_cfg(cfg, derive_seed(seed, _HINDSIGHT, t)),
                initial=np.array(seeds) if warm_start else None,
            )
            prev_hind = h.x
            hind[t - 1] = h.value
            if burn_in and t >= burn_in:
                seeds = [x] if prev_hind_w is None else [prev_hind_w, x]
                h = hindsight_solve(
                    spec, t, _search_cfg(cfg, derive_seed(seed, _WINDOW, t)),
                    initial=np.array(seeds) if warm_start else None, start=burn_in,
                )
                prev_hind_w = h.x
                hind_w[t - 1] = h.value
        logger.debug("period %d x=%s y=%s L=%.6g", t, x, y, lag[t - 1])
    cumulative = np.cumsum(lag)
    mask = ~np.isnan(hind)
    regret[mask] = np.abs(cumulative[mask] - hind[mask])
    trace = OnlineTrace(X, Y, lag, cumulative, oracle_value, evals, hind, regret, seed, residual)
    if burn_in:
        window_sum = cumulative - (cumulative[burn_in - 2] if burn_in > 1 else 0.0)
        trace.burn_in = burn_in
        trace.hindsight_window = hind_w
        trace.regret_window = np.abs(window_sum - hind_w)
    return trace


def regret_checkpoints(T: int, stride: int):
    if stride < 1:
        raise ParameterError(f"regret stride must be >= 1, got {stride}")
    return sorted(set(range(stride, T + 1, stride)) | {T})


def run_online(
    spec: InstanceSpec,
    params: AlgorithmParams,
    cfg: GlobalSearchConfig,
    repeats: int = 1,
    regret_stride: int = 1,
    master_seed: int = 0,
    method: str = "ftdpl",
    warm_start: bool = True,
    burn_in: int = 0,
) -> list[OnlineTrace]:
    """
    ``repeats`` independent replications with hindsight checkpoints every
    ``regret_stride`` periods (and at the horizon).

    Replication ``r`` is seeded with ``derive_seed(master_seed, r)`` and does
    not depend on any other replication.
    """
    if repeats < 1:
        raise ParameterError(f"repeats must be >= 1, got {repeats}")
    checkpoints = regret_checkpoints(spec.horizon, regret_stride)
    return [
        run_replication(
            spec, params, cfg, derive_seed(master_seed, r),
            checkpoints=checkpoints, method=method, warm_start=warm_start, burn_in=burn_in,
        )
        for r in range(repeats)
    ]


def _gaps(traces):
    lengths = {len(tr) for tr in traces}
    if len(lengths) != 1:
        raise ParameterError("traces must have equal length")
    return np.array([tr.cumulative - tr.hindsight for tr in traces])


def wesc_regret(traces) -> np.ndarray:
    """``|E[sum L_n(x_n, y_n) - hindsight]|`` per period (NaN off checkpoints)."""
    return np.abs(np.mean(_gaps(traces), axis=0))


def sesc_regret(traces) -> np.ndarray:
    """``E|sum L_n(x_n, y_n) - hindsight|`` per period (NaN off checkpoints)."""
    return np.mean(np.abs(_gaps(traces)), axis=0)
