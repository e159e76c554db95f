import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ftdpl.core import (
    DomainError,
    InstanceSpec,
    ParameterError,
    PrimalBox,
    derive_seed,
    evaluate_lagrangian,
    sample_perturbation,
)
from ftdpl.online import (
    AlgorithmParams,
    binary_search_select,
    ftdpl_step,
    ftpl_baseline_step,
    regret_checkpoints,
    run_online,
    run_replication,
    sesc_regret,
    wesc_regret,
)
from ftdpl.oracle import GlobalSearchConfig, minimize_primal

FAST = GlobalSearchConfig(population_size=24, generations=25, restarts=1)


def nearest_index(values, target):
    """Exhaustive reference: nearest value, ties to the smaller value, then the lowest index."""
    values = np.asarray(values, dtype=float)
    dist = np.abs(values - target)
    close = np.flatnonzero(dist == dist.min())
    smallest = values[close].min()
    return int(close[values[close] == smallest][0])


def drifting(horizon=40):
    """d = 1, I = 1: f_n(x) = (x - m_n)^2 with a drifting target, c_n(x) = x, b = 0.4."""
    targets = 0.5 + 0.4 * np.sin(np.arange(1, horizon + 1) / 3.0)

    def evaluator(X, periods):
        m = targets[np.asarray(periods) - 1]
        F = (X[:, :1] - m[None, :]) ** 2
        C = np.broadcast_to(X[:, :1], F.shape)[:, None, :]
        return F, C

    return InstanceSpec(horizon, evaluator, [0.4], PrimalBox([0.0], [1.0]), 100.0)


def vector_bowl(x0, horizon, thresholds=()):
    x0 = np.asarray(x0, dtype=float)

    def evaluator(X, periods):
        F = np.repeat(np.sum((X - x0) ** 2, axis=1, keepdims=True), len(periods), axis=1)
        C = np.repeat(X[:, None, :1], len(periods), axis=2)[:, : len(thresholds), :]
        return F, C

    return InstanceSpec(horizon, evaluator, list(thresholds), PrimalBox(np.zeros(len(x0)), np.ones(len(x0))), 100.0)


class TestParams:
    def test_defaults_at_500(self):
        p = AlgorithmParams.for_horizon(500)
        assert p.M == 4 == math.ceil(500 ** (2 / 9))
        assert p.K == 1
        assert p.eta == 500 ** (-2 / 3)
        assert (p.lam, p.y_max) == (100.0, 100.0)

    def test_overrides(self):
        p = AlgorithmParams.for_horizon(300, M=1, eta=None, lam=5.0)
        assert p.M == 1 and p.lam == 5.0 and p.eta == 300 ** (-2 / 3)

    def test_invalid(self):
        with pytest.raises(ParameterError):
            AlgorithmParams(eta=0.0)
        with pytest.raises(ParameterError):
            AlgorithmParams(eta=1.0, M=0)


class TestBinarySearch:
    def test_example(self):
        assert binary_search_select([1, 2, 3, 4], 2.6, 2) == 2
        assert binary_search_select([4, 3, 2, 1], 2.6, 2) == 1

    def test_single_candidate(self):
        for target in (-1e9, 0.0, 7.0):
            for K in (1, 5):
                assert binary_search_select([3.0], target, K) == 0

    def test_clamps(self):
        assert binary_search_select([5.0, 1.0, 3.0], -10.0, 1) == 1
        assert binary_search_select([5.0, 1.0, 3.0], 10.0, 1) == 0

    def test_ties(self):
        assert binary_search_select([1.0, 3.0], 2.0, 1) == 0
        assert binary_search_select([2.0, 1.0, 2.0], 2.0, 2) == 0

    def test_empty(self):
        with pytest.raises(DomainError):
            binary_search_select([], 0.0, 1)

    def test_short_budget_returns_bracket_end(self):
        values = np.arange(16.0)
        idx = binary_search_select(values, 12.2, 1)
        assert idx in (7, 15)

    @settings(max_examples=300, deadline=None)
    @given(
        values=st.lists(st.integers(-20, 20), min_size=1, max_size=40),
        target=st.floats(-25, 25),
        extra=st.integers(0, 3),
    )
    def test_exhaustive_when_budget_suffices(self, values, target, extra):
        K = max(1, math.ceil(math.log2(len(values)))) + extra
        values = [v / 2 for v in values]
        assert binary_search_select(values, target, K) == nearest_index(values, target)


class TestStep:
    def test_single_draw_is_oracle_output(self):
        spec = drifting()
        params = AlgorithmParams(eta=0.2, M=1)
        x, y, diag = ftdpl_step(spec, 6, params, FAST, seed=11)
        theta = sample_perturbation(1, 0.2, derive_seed(11, 0, 6, 0))
        sol = minimize_primal(spec, 6, theta, 100.0, replace(FAST, seed=derive_seed(11, 1, 6, 0)))
        np.testing.assert_array_equal(x, sol.x)
        np.testing.assert_array_equal(y, sol.y)
        assert diag["oracle_value"] == sol.value and diag["chosen"] == 0

    def test_first_period_takes_upper_corner(self):
        spec = vector_bowl([0.2, 0.3, 0.4], horizon=5, thresholds=[0.5])
        x, y, _ = ftdpl_step(spec, 1, AlgorithmParams(eta=0.5), FAST, seed=0)
        np.testing.assert_allclose(x, spec.primal_box.upper, atol=1e-9)
        np.testing.assert_array_equal(y, [0.0])

    def test_reproducible(self):
        spec = drifting()
        params = AlgorithmParams(eta=0.1, M=3, K=2)
        a = ftdpl_step(spec, 9, params, FAST, seed=5)
        b = ftdpl_step(spec, 9, params, FAST, seed=5)
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])
        assert a[2] == b[2]

    def test_several_draws_pick_nearest_to_mean(self):
        spec = drifting()
        params = AlgorithmParams(eta=0.05, M=4, K=2)
        x, y, diag = ftdpl_step(spec, 12, params, FAST, seed=3)
        assert len(diag["seeds"]) == 4
        assert diag["residual"] == pytest.approx(abs(evaluate_lagrangian(spec, 12, x, y) - diag["target"]))

    def test_baseline_first_period(self):
        spec = vector_bowl([0.5, 0.5], horizon=3)
        x = ftpl_baseline_step(spec, 1, 0.3, FAST, seed=2)
        np.testing.assert_allclose(x, [1.0, 1.0], atol=1e-9)

    def test_baseline_settles_at_minimizer(self):
        x0 = np.array([0.3, 0.6])
        spec = vector_bowl(x0, horizon=2000)
        eta = 500 ** (-2 / 3)
        for seed in range(3):
            x = ftpl_baseline_step(spec, 2000, eta, GlobalSearchConfig(), seed=seed)
            assert np.max(np.abs(x - x0)) < 0.1


class TestReplication:
    def test_reduces_to_baseline_without_constraints(self):
        spec = vector_bowl([0.3, 0.7], horizon=8)
        params = AlgorithmParams(eta=0.5, M=1)
        a = run_replication(spec, params, FAST, seed=4)
        b = run_replication(spec, params, FAST, seed=4, method="ftpl")
        np.testing.assert_array_equal(a.x, b.x)
        np.testing.assert_array_equal(a.lagrangian, b.lagrangian)

    def test_zero_regret_when_leader_is_optimal(self):
        def evaluator(X, periods):
            F = np.repeat(-X[:, :1], len(periods), axis=1)
            return F, np.zeros((len(X), 0, len(periods)))

        # the perturbation and every loss point to the same corner
        spec = InstanceSpec(12, evaluator, [], PrimalBox([0.0], [1.0]), 100.0)
        tr = run_replication(spec, AlgorithmParams(eta=0.5), FAST, seed=1, checkpoints=range(1, 13))
        np.testing.assert_allclose(tr.x[:, 0], 1.0)
        np.testing.assert_allclose(tr.regret, 0.0, atol=1e-12)

    def test_regret_recomputed_independently(self):
        spec = drifting(40)
        tr = run_replication(spec, AlgorithmParams(eta=40 ** (-2 / 3)), FAST, seed=9, checkpoints=regret_checkpoints(40, 5))
        lag = [evaluate_lagrangian(spec, n + 1, tr.x[n], tr.y[n]) for n in range(40)]
        cum = np.cumsum(lag)
        idx = np.asarray(tr.checkpoints) - 1
        np.testing.assert_array_equal(tr.checkpoints, [5, 10, 15, 20, 25, 30, 35, 40])
        np.testing.assert_allclose(tr.regret[idx], np.abs(cum[idx] - tr.hindsight[idx]), rtol=1e-9, atol=1e-9)
        assert np.all(tr.regret[idx] >= 0)
        assert np.all(np.isnan(np.delete(tr.regret, idx)))

    def test_burn_in_window(self):
        spec = drifting(20)
        tr = run_replication(spec, AlgorithmParams(eta=0.2), FAST, seed=2, checkpoints=range(1, 21), burn_in=6)
        assert np.all(np.isnan(tr.regret_window[:5]))
        window = np.cumsum(tr.lagrangian[5:])
        np.testing.assert_allclose(tr.regret_window[5:], np.abs(window - tr.hindsight_window[5:]), rtol=1e-12)

    def test_deterministic(self):
        spec = drifting(10)
        params = AlgorithmParams(eta=0.3)
        a = run_replication(spec, params, FAST, seed=6, checkpoints=[5, 10])
        b = run_replication(spec, params, FAST, seed=6, checkpoints=[5, 10])
        for field in ("x", "y", "lagrangian", "hindsight", "regret"):
            np.testing.assert_array_equal(getattr(a, field), getattr(b, field))

    def test_y_max_mismatch(self):
        with pytest.raises(ParameterError):
            run_replication(drifting(5), AlgorithmParams(eta=0.3, y_max=5.0), FAST, seed=0)

    def test_replications_are_independent(self):
        spec = drifting(6)
        params = AlgorithmParams(eta=0.3)
        both = run_online(spec, params, FAST, repeats=2, regret_stride=3, master_seed=8)
        alone = run_replication(spec, params, FAST, derive_seed(8, 1), checkpoints=[3, 6])
        np.testing.assert_array_equal(both[1].x, alone.x)
        np.testing.assert_array_equal(both[1].regret, alone.regret)

    def test_single_replication_estimators_agree(self):
        spec = drifting(6)
        traces = run_online(spec, AlgorithmParams(eta=0.3), FAST, repeats=1, regret_stride=2)
        np.testing.assert_array_equal(wesc_regret(traces), sesc_regret(traces))
        two = run_online(spec, AlgorithmParams(eta=0.3), FAST, repeats=2, regret_stride=2)
        ok = ~np.isnan(wesc_regret(two))
        assert np.all(wesc_regret(two)[ok] <= sesc_regret(two)[ok] + 1e-12)

    def test_checkpoints(self):
        assert regret_checkpoints(10, 3) == [3, 6, 9, 10]
        assert regret_checkpoints(4, 1) == [1, 2, 3, 4]
        with pytest.raises(ParameterError):
            regret_checkpoints(4, 0)
