"""Riccati recursion, DARE fixed point, covariance recursion, costs."""

import numpy as np
import pytest

from ddlqr.bench import ReactorPreset
from ddlqr.errors import DimensionError
from ddlqr.lti import CostWeights, LtiSystem, closed_loop, random_system
from ddlqr.riccati import (
    covariance_recursion,
    dare_fixed_point,
    deterministic_cost,
    expected_cost,
    riccati_recursion,
)

GOLDEN = (1.0 + np.sqrt(5.0)) / 2.0


def scalar_system():
    return LtiSystem(A=np.eye(1), B=np.eye(1))


def scalar_weights(N=1):
    return CostWeights(Qx=np.eye(1), Qf=np.eye(1), R=np.eye(1), N=N)


class TestRiccatiRecursion:
    def test_scalar_one_step(self):
        sol = riccati_recursion(scalar_system(), scalar_weights())
        assert sol.P[1][0, 0] == pytest.approx(1.0, abs=1e-14)
        assert sol.K[0][0, 0] == pytest.approx(-0.5, abs=1e-14)
        assert sol.P[0][0, 0] == pytest.approx(1.5, abs=1e-14)

    def test_zero_input_map(self):
        sys = LtiSystem(A=np.array([[0.9, 0.1], [0.0, 0.8]]), B=np.zeros((2, 1)))
        w = CostWeights(np.eye(2), np.eye(2), np.eye(1), 5)
        sol = riccati_recursion(sys, w)
        for K in sol.K:
            assert np.abs(K).max() == 0.0

    def test_zero_state_cost(self):
        sys = scalar_system()
        w = CostWeights(np.zeros((1, 1)), np.zeros((1, 1)), np.eye(1), 4)
        sol = riccati_recursion(sys, w)
        for P in sol.P:
            assert np.abs(P).max() == 0.0
        for K in sol.K:
            assert np.abs(K).max() == 0.0

    def test_terminal_condition_and_psd(self):
        rng = np.random.default_rng(2)
        sys = random_system(3, 1, rng)
        w = CostWeights(np.eye(3), 2.0 * np.eye(3), np.eye(1), 10)
        sol = riccati_recursion(sys, w)
        np.testing.assert_array_equal(sol.P[10], w.Qf)
        for P in sol.P:
            assert np.linalg.eigvalsh(P)[0] >= -1e-10


class TestDareFixedPoint:
    def test_golden_ratio(self):
        P, K = dare_fixed_point(scalar_system(), np.eye(1), np.eye(1))
        assert P[0, 0] == pytest.approx(GOLDEN, abs=1e-10)
        assert K[0, 0] == pytest.approx(-1.0 / GOLDEN, abs=1e-10)

    def test_zero_dynamics(self):
        sys = LtiSystem(A=np.zeros((2, 2)), B=np.eye(2))
        P, K = dare_fixed_point(sys, np.eye(2), np.eye(2))
        np.testing.assert_allclose(P, np.eye(2), atol=1e-12)
        np.testing.assert_allclose(K, np.zeros((2, 2)), atol=1e-12)

    def test_reactor_stabilizing(self):
        sys = ReactorPreset().system()
        _, K = dare_fixed_point(sys, np.eye(4), np.eye(2))
        eigs = np.linalg.eigvals(closed_loop(sys, K))
        assert np.abs(eigs).max() < 1.0


class TestCovarianceRecursion:
    def test_zero_horizon(self):
        sys = scalar_system()
        cov = covariance_recursion(sys, CostWeights(np.eye(1), np.eye(1), np.eye(1), 1), [])
        assert len(cov.S) == 1
        np.testing.assert_array_equal(cov.S[0], np.eye(1))

    def test_scalar_hand_values(self):
        cov = covariance_recursion(scalar_system(), scalar_weights(), [np.array([[-0.5]])])
        assert cov.S[1][0, 0] == pytest.approx(1.25, abs=1e-14)
        assert cov.U[0][0, 0] == pytest.approx(0.25, abs=1e-14)

    def test_S_dominates_identity(self):
        rng = np.random.default_rng(3)
        sys = random_system(3, 1, rng)
        w = CostWeights(np.eye(3), np.eye(3), np.eye(1), 8)
        gains = riccati_recursion(sys, w).K
        cov = covariance_recursion(sys, w, gains)
        for S in cov.S:
            assert np.linalg.eigvalsh(S - np.eye(3))[0] >= -1e-9

    def test_joint_block_psd(self):
        rng = np.random.default_rng(4)
        sys = random_system(3, 1, rng)
        w = CostWeights(np.eye(3), np.eye(3), np.eye(1), 6)
        gains = riccati_recursion(sys, w).K
        cov = covariance_recursion(sys, w, gains)
        for S, Y, U in zip(cov.S, cov.Y, cov.U):
            V = np.block([[S, Y], [Y.T, U]])
            assert np.linalg.eigvalsh(V)[0] >= -1e-9


class TestCosts:
    def test_expected_cost_zero_weights(self):
        sys = scalar_system()
        w = CostWeights(np.zeros((1, 1)), np.zeros((1, 1)), np.eye(1), 2)
        cov = covariance_recursion(sys, w, [np.zeros((1, 1))] * 2)
        assert expected_cost(w, cov) == 0.0

    def test_scalar_value_five_halves(self):
        w = scalar_weights()
        cov = covariance_recursion(scalar_system(), w, [np.array([[-0.5]])])
        assert expected_cost(w, cov) == pytest.approx(2.5, abs=1e-14)

    def test_suboptimal_gain_costs_more(self):
        sys = LtiSystem(A=np.array([[1.5]]), B=np.eye(1))
        w = scalar_weights(N=5)
        best = riccati_recursion(sys, w).K
        opt = expected_cost(w, covariance_recursion(sys, w, best))
        zero = expected_cost(w, covariance_recursion(sys, w, [np.zeros((1, 1))] * 5))
        assert zero > opt

    def test_length_mismatch(self):
        w = scalar_weights(N=2)
        cov = covariance_recursion(scalar_system(), scalar_weights(N=1), [np.zeros((1, 1))])
        with pytest.raises(DimensionError):
            expected_cost(w, cov)

    def test_deterministic_cost_zero_start(self):
        sys = scalar_system()
        w = scalar_weights(N=3)
        assert deterministic_cost(sys, w, np.zeros(1), [np.zeros((1, 1))] * 3) == 0.0

    def test_deterministic_cost_constant_state(self):
        sys = scalar_system()
        w = CostWeights(np.eye(1), np.eye(1), 5.0 * np.eye(1), 2)
        value = deterministic_cost(sys, w, np.ones(1), [np.zeros((1, 1))] * 2)
        assert value == pytest.approx(3.0, abs=1e-14)

    def test_bellman_consistency(self):
        rng = np.random.default_rng(5)
        sys = random_system(3, 1, rng)
        w = CostWeights(np.eye(3), np.eye(3), np.eye(1), 10)
        sol = riccati_recursion(sys, w)
        x0 = rng.standard_normal(3)
        direct = deterministic_cost(sys, w, x0, sol.K)
        assert direct == pytest.approx(x0 @ sol.P[0] @ x0, rel=1e-9)

    def test_stochastic_value_is_trace_sum(self):
        rng = np.random.default_rng(6)
        sys = random_system(3, 1, rng)
        w = CostWeights(np.eye(3), np.eye(3), np.eye(1), 10)
        sol = riccati_recursion(sys, w)
        value = expected_cost(w, covariance_recursion(sys, w, sol.K))
        traces = sum(float(np.trace(P)) for P in sol.P)
        assert value == pytest.approx(traces, rel=1e-8)

    def test_riccati_gains_are_optimal(self):
        rng = np.random.default_rng(7)
        sys = random_system(3, 1, rng)
        w = CostWeights(np.eye(3), np.eye(3), np.eye(1), 6)
        gains = riccati_recursion(sys, w).K
        opt = expected_cost(w, covariance_recursion(sys, w, gains))
        for _ in range(100):
            k = rng.integers(0, w.N)
            perturbed = [K.copy() for K in gains]
            perturbed[k] = perturbed[k] + 1e-3 * rng.standard_normal(gains[k].shape)
            value = expected_cost(w, covariance_recursion(sys, w, perturbed))
            assert value >= opt - 1e-12


class TestDareLimit:
    def test_reactor_gain_approaches_dare(self):
        sys = ReactorPreset().system()
        _, K_inf = dare_fixed_point(sys, np.eye(4), np.eye(2))
        dists = []
        for N in (5, 10, 20, 30):
            w = CostWeights(np.eye(4), np.eye(4), np.eye(2), N)
            K0 = riccati_recursion(sys, w).K[0]
            dists.append(np.linalg.norm(K0 - K_inf))
        assert all(b <= a + 1e-12 for a, b in zip(dists, dists[1:]))
        assert dists[-1] <= 1e-2
