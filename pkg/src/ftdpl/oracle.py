"""
Offline minimax oracle.

The dual part of the perturbed cumulative Lagrangian is separable and
concave per multiplier, so the inner maximization is solved in closed form
(:func:`dual_argmax`). The outer minimization over the primal box is a seeded
genetic search on box-normalized coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    DualPerturbationSchedule,
    InstanceSpec,
    ParameterError,
    cumulative_terms,
    dual_term,
    perturbation_term,
)

__all__ = [
    "GlobalSearchConfig",
    "MinimaxSolution",
    "dual_argmax",
    "dual_objective",
    "primal_objective",
    "phi_batch",
    "minimize_primal",
    "hindsight_solve",
]


@dataclass(frozen=True)
class GlobalSearchConfig:
    """
    Budget and operators of the genetic search.

    Each of the ``restarts + 1`` runs evaluates ``population_size`` candidates
    for the initial population and once per generation thereafter.
    """

    population_size: int = 64
    generations: int = 60
    mutation_rate: float = 0.3
    crossover_rate: float = 0.9
    restarts: int = 2
    seed: int = 0
    tournament_size: int = 2
    blend_alpha: float = 0.5
    mutation_sigma: float = 0.1
    elitism: int = 1

    def __post_init__(self):
        if self.population_size < 4:
            raise ParameterError("population_size must be >= 4")
        if self.generations < 1:
            raise ParameterError("generations must be >= 1")
        if not 0 < self.mutation_rate < 1:
            raise ParameterError("mutation_rate must lie in (0, 1)")
        if not 0 < self.crossover_rate < 1:
            raise ParameterError("crossover_rate must lie in (0, 1)")
        if self.restarts < 0:
            raise ParameterError("restarts must be nonnegative")
        if self.tournament_size < 1 or not 0 <= self.elitism < self.population_size:
            raise ParameterError("invalid tournament_size or elitism")


@dataclass(frozen=True)
class MinimaxSolution:
    x: np.ndarray
    y: np.ndarray
    value: float
    evaluations: int
    best_seen: float
    history: tuple = field(default=(), repr=False)


def dual_argmax(G, W: float, y_max: float) -> np.ndarray:
    """
    Per-coordinate maximizer of ``gamma * G + W * log(gamma + 1)`` on ``[0, y_max]``.

    ``G`` may carry leading batch dimensions. With ``W == 0`` the maximizer is
    bang-bang: ``y_max`` where ``G > 0`` and 0 otherwise (ties go to 0).
    """
    G = np.asarray(G, dtype=float)
    if not y_max > 0:
        raise ParameterError(f"y_max must be positive, got {y_max}")
    if W < 0:
        raise ParameterError(f"W must be nonnegative, got {W}")
    if W == 0:
        return np.where(G > 0, float(y_max), 0.0)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        interior = np.clip(-W / G - 1.0, 0.0, y_max)
    return np.where(G >= 0, float(y_max), interior)


def dual_objective(gamma, G, W: float):
    """``gamma * G + W * log(gamma + 1)`` elementwise."""
    gamma = np.asarray(gamma, dtype=float)
    return gamma * G + W * np.log1p(gamma)


def phi_batch(spec: InstanceSpec, t: int, X, theta, lam: float, normalized: bool = True, start: int = 1):
    """
    Oracle objective with the exact inner maximum, for a population.

    Parameters
    ----------
    spec : InstanceSpec
    t : int
        Period; periods ``start <= n < t`` are summed.
    X : ndarray, shape (N, d)
    theta : ndarray or None
        Primal perturbation; None means no perturbation.
    lam : float
        Dual perturbation scale; 0 gives the unperturbed Lagrangian.

    Returns
    -------
    values : ndarray, shape (N,)
    Y : ndarray, shape (N, I)
        Maximizing multipliers.
    """
    X = np.atleast_2d(X)
    F, G = cumulative_terms(spec, t, X, start)
    schedule = DualPerturbationSchedule(lam)
    W = schedule.weight_at(t) - schedule.weight_at(start) if t > start else 0.0
    Y = dual_argmax(G, W, spec.y_max)
    with np.errstate(over="ignore", invalid="ignore"):
        values = F + dual_term(G, Y) + W * np.log1p(Y).sum(axis=1)
        if theta is not None:
            values = values - perturbation_term(spec.primal_box, theta, X, normalized)
    return np.where(np.isnan(values), np.inf, values), Y


def primal_objective(spec: InstanceSpec, t: int, x, theta, lam: float, normalized: bool = True):
    """``(phi(x), y_star)`` for a single point; ``theta`` may be a PerturbationVector."""
    theta = getattr(theta, "theta", theta)
    values, Y = phi_batch(spec, t, np.asarray(x, dtype=float)[None, :], theta, lam, normalized)
    return float(values[0]), Y[0]


def _tournament(rng, fitness, n, size):
    picks = rng.integers(0, len(fitness), size=(n, size))
    return picks[np.arange(n), np.argmin(fitness[picks], axis=1)]


def _offspring(rng, pop, fitness, cfg: GlobalSearchConfig):
    n_children = len(pop) - cfg.elitism
    d = pop.shape[1]
    p1 = pop[_tournament(rng, fitness, n_children, cfg.tournament_size)]
    p2 = pop[_tournament(rng, fitness, n_children, cfg.tournament_size)]
    # BLX-alpha: uniform on the parents' interval widened by alpha on each side
    lo = np.minimum(p1, p2)
    span = np.abs(p1 - p2)
    blend = lo - cfg.blend_alpha * span + rng.random((n_children, d)) * (1 + 2 * cfg.blend_alpha) * span
    cross = rng.random(n_children) < cfg.crossover_rate
    children = np.where(cross[:, None], blend, p1)
    mutate = rng.random((n_children, d)) < cfg.mutation_rate
    children = children + mutate * rng.normal(0.0, cfg.mutation_sigma, size=(n_children, d))
    children = np.clip(children, 0.0, 1.0)
    elite = pop[np.argsort(fitness, kind="stable")[: cfg.elitism]]
    return np.vstack([elite, children])


def _genetic_search(fitness_fn, d: int, cfg: GlobalSearchConfig, initial=None):
    """Minimize ``fitness_fn`` over ``[0, 1]^d``; returns ``(u, value, evaluations, history)``."""
    best_u, best_val = None, np.inf
    evaluations = 0
    history = []
    for r in range(cfg.restarts + 1):
        rng = np.random.default_rng(np.random.SeedSequence(int(cfg.seed), spawn_key=(r,)))
        pop = rng.random((cfg.population_size, d))
        if r == 0 and initial is not None and len(initial):
            seeds = np.clip(np.atleast_2d(initial), 0.0, 1.0)[: cfg.population_size]
            pop[: len(seeds)] = seeds
        fit = fitness_fn(pop)
        evaluations += len(pop)
        for g in range(cfg.generations + 1):
            i = int(np.argmin(fit))
            if fit[i] < best_val:
                best_val, best_u = float(fit[i]), pop[i].copy()
            history.append(best_val)
            if g == cfg.generations:
                break
            pop = _offspring(rng, pop, fit, cfg)
            fit = fitness_fn(pop)
            evaluations += len(pop)
    if best_u is None:
        # every candidate evaluated to +inf; fall back to the last population's first member
        best_u = pop[0].copy()
    return best_u, best_val, evaluations, tuple(history)


def minimize_primal(
    spec: InstanceSpec,
    t: int,
    theta,
    lam: float,
    cfg: GlobalSearchConfig,
    initial=None,
    normalized: bool = True,
    start: int = 1,
) -> MinimaxSolution:
    """
    Solve ``min_x max_y sum_{n<t} Lbar_n(x, y) - theta . x~`` over the primal box.

    Parameters
    ----------
    spec : InstanceSpec
    t : int
        Current period; only periods ``n < t`` enter the objective.
    theta : PerturbationVector, ndarray or None
    lam : float
        Dual perturbation scale.
    cfg : GlobalSearchConfig
    initial : ndarray, optional
        Candidate points (primal units) injected into the first population.
    normalized : bool
        Apply ``theta`` to box-normalized coordinates.
    start : int
        First period entering the sums.

    Returns
    -------
    MinimaxSolution
        ``value`` is the incumbent of the search, which is also the lowest
        value among all evaluated candidates.
    """
    box = spec.primal_box
    theta = getattr(theta, "theta", theta)

    def fitness(U):
        return phi_batch(spec, t, box.denormalize(U), theta, lam, normalized, start)[0]

    init_u = None if initial is None else box.normalize(np.atleast_2d(initial))
    u, value, evaluations, history = _genetic_search(fitness, spec.d, cfg, init_u)
    x = box.denormalize(u)
    values, Y = phi_batch(spec, t, x[None, :], theta, lam, normalized, start)
    phi, y = float(values[0]), Y[0]
    return MinimaxSolution(x, y, phi, evaluations, value, history)


def hindsight_solve(
    spec: InstanceSpec, t: int, cfg: GlobalSearchConfig, initial=None, start: int = 1
) -> MinimaxSolution:
    """
    Best estimate of ``min_x max_{y in [0, y_max]} sum_{start<=n<=t} L_n(x, y)``.

    Unperturbed; the inner maximum is the bang-bang closed form.
    """
    if not 1 <= start <= t <= spec.horizon:
        raise ParameterError(f"hindsight window {start}..{t} outside 1..{spec.horizon}")
    return minimize_primal(spec, t + 1, None, 0.0, cfg, initial=initial, start=start)
