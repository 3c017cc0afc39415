"""Embedded interior-point solver on hand-checkable programs."""

import numpy as np
import pytest

from ddlqr.errors import DimensionError
from ddlqr.sdp import (
    Constraint,
    SdpProblem,
    dump_problem,
    rescale_problem,
    solve,
    unscale_solution,
    verify_kkt,
)


def scalar_problem():
    """Minimize x subject to x = 1, x >= 0."""
    return SdpProblem(
        block_dims=[1],
        C=[np.array([[1.0]])],
        constraints=[Constraint(coeffs={0: np.array([[1.0]])}, b=1.0)],
    )


def pinned_diagonal_problem():
    """Minimize Tr(X) over 2x2 X >= 0 with X11 = X22 = 1."""
    e11 = np.array([[1.0, 0.0], [0.0, 0.0]])
    e22 = np.array([[0.0, 0.0], [0.0, 1.0]])
    return SdpProblem(
        block_dims=[2],
        C=[np.eye(2)],
        constraints=[
            Constraint(coeffs={0: e11}, b=1.0),
            Constraint(coeffs={0: e22}, b=1.0),
        ],
    )


def trace_lp(C, rhs=1.0):
    """Minimize <C, X> subject to Tr(X) = rhs, X >= 0."""
    d = C.shape[0]
    return SdpProblem(
        block_dims=[d],
        C=[C],
        constraints=[Constraint(coeffs={0: np.eye(d)}, b=rhs)],
    )


class TestBasicPrograms:
    def test_scalar_pin(self):
        sol = solve(scalar_problem())
        assert sol.status == "optimal"
        assert sol.objective == pytest.approx(1.0, abs=1e-7)
        assert sol.X[0][0, 0] == pytest.approx(1.0, abs=1e-7)

    def test_pinned_diagonal(self):
        sol = solve(pinned_diagonal_problem())
        assert sol.status == "optimal"
        assert sol.objective == pytest.approx(2.0, abs=1e-7)

    def test_trace_lp_min_eigenvalue(self):
        C = np.diag([1.0, 2.0])
        sol = solve(trace_lp(C))
        assert sol.status == "optimal"
        assert sol.objective == pytest.approx(1.0, abs=1e-7)
        np.testing.assert_allclose(sol.X[0], np.diag([1.0, 0.0]), atol=1e-6)

    def test_trace_lp_nondiagonal(self):
        rng = np.random.default_rng(0)
        M = rng.standard_normal((4, 4))
        C = (M + M.T) / 2.0
        sol = solve(trace_lp(C))
        assert sol.status == "optimal"
        assert sol.objective == pytest.approx(np.linalg.eigvalsh(C)[0], abs=1e-7)

    def test_zero_problem(self):
        prob = SdpProblem(block_dims=[2], C=[np.zeros((2, 2))], constraints=[])
        sol = solve(prob)
        assert sol.status == "optimal"
        assert sol.objective == pytest.approx(0.0, abs=1e-7)

    def test_multi_block(self):
        prob = SdpProblem(
            block_dims=[1, 2],
            C=[np.array([[1.0]]), np.diag([1.0, 3.0])],
            constraints=[
                Constraint(coeffs={0: np.array([[1.0]])}, b=2.0),
                Constraint(coeffs={1: np.eye(2)}, b=1.0),
            ],
        )
        sol = solve(prob)
        assert sol.status == "optimal"
        assert sol.objective == pytest.approx(3.0, abs=1e-7)


class TestFreeVariables:
    def test_free_variable_pins_block(self):
        # minimize x + u with x - u = 0 and x = 2: forces u = 2.
        prob = SdpProblem(
            block_dims=[1],
            C=[np.array([[1.0]])],
            constraints=[
                Constraint(coeffs={0: np.array([[1.0]])}, b=0.0, free={0: -1.0}),
                Constraint(coeffs={0: np.array([[1.0]])}, b=2.0),
            ],
            n_free=1,
            c_free=np.array([1.0]),
        )
        sol = solve(prob)
        assert sol.status == "optimal"
        assert sol.u[0] == pytest.approx(2.0, abs=1e-6)
        assert sol.objective == pytest.approx(4.0, abs=1e-6)

    def test_redundant_free_directions_get_min_norm(self):
        # u1 and u2 only appear through their sum, so the minimum-norm
        # representative splits it evenly.
        prob = SdpProblem(
            block_dims=[1],
            C=[np.array([[1.0]])],
            constraints=[
                Constraint(coeffs={0: np.array([[1.0]])}, b=3.0, free={0: -1.0, 1: -1.0}),
                Constraint(coeffs={0: np.array([[1.0]])}, b=1.0),
            ],
            n_free=2,
            c_free=np.zeros(2),
        )
        sol = solve(prob)
        assert sol.status == "optimal"
        assert sol.u[0] == pytest.approx(-1.0, abs=1e-6)
        assert sol.u[1] == pytest.approx(-1.0, abs=1e-6)


class TestSolverProperties:
    def test_weak_duality_along_path(self):
        # Residual-corrected form: pobj - dobj - corr = <X, Z> >= 0 exactly;
        # the raw inequality applies once the iterate is feasible.
        sol = solve(trace_lp(np.diag([1.0, 2.0, 5.0])))
        for pobj, dobj, _, rp_rel, rd_rel, corr in sol.trace:
            slack = 1e-10 * (1.0 + abs(pobj) + abs(dobj))
            assert pobj - corr >= dobj - slack
            if max(rp_rel, rd_rel) <= 1e-8:
                assert pobj >= dobj - slack

    def test_row_scaling_invariance(self):
        base = solve(pinned_diagonal_problem())
        scaled_prob = pinned_diagonal_problem()
        scaled_prob.constraints[0] = Constraint(
            coeffs={0: 1e4 * scaled_prob.constraints[0].coeffs[0]}, b=1e4
        )
        scaled = solve(scaled_prob)
        assert scaled.status == "optimal"
        np.testing.assert_allclose(scaled.X[0], base.X[0], atol=1e-7)

    def test_block_separability(self):
        C1, C2 = np.diag([1.0, 2.0]), np.diag([3.0, 4.0])
        joint = SdpProblem(
            block_dims=[2, 2],
            C=[C1, C2],
            constraints=[
                Constraint(coeffs={0: np.eye(2)}, b=1.0),
                Constraint(coeffs={1: np.eye(2)}, b=1.0),
            ],
        )
        sol = solve(joint)
        solo1 = solve(trace_lp(C1))
        solo2 = solve(trace_lp(C2))
        np.testing.assert_allclose(sol.X[0], solo1.X[0], atol=1e-7)
        np.testing.assert_allclose(sol.X[1], solo2.X[0], atol=1e-7)

    def test_dependent_rows_dropped(self):
        prob = pinned_diagonal_problem()
        prob.constraints.append(
            Constraint(coeffs={0: np.eye(2)}, b=2.0)  # sum of the other two
        )
        with pytest.warns(UserWarning):
            sol = solve(prob)
        assert sol.status == "optimal"
        assert sol.objective == pytest.approx(2.0, abs=1e-7)
        assert len(sol.dropped_constraints) == 1

    def test_status_optimal_means_tolerances_met(self):
        sol = solve(pinned_diagonal_problem(), tol_gap=1e-8, tol_feas=1e-8)
        assert sol.status == "optimal"
        assert sol.gap <= 1e-8
        assert sol.residuals["primal"] <= 1e-8
        assert sol.residuals["dual"] <= 1e-8


class TestVerifyKkt:
    def test_passes_on_optimum(self):
        prob = trace_lp(np.diag([1.0, 2.0]))
        report = verify_kkt(prob, solve(prob), tol=1e-6)
        assert report.ok

    def test_detects_perturbation(self):
        prob = trace_lp(np.diag([1.0, 2.0]))
        sol = solve(prob)
        sol.X[0][0, 0] += 0.1
        report = verify_kkt(prob, sol, tol=1e-6)
        assert not report.ok

    def test_zero_problem_passes(self):
        prob = SdpProblem(block_dims=[1], C=[np.zeros((1, 1))], constraints=[])
        report = verify_kkt(prob, solve(prob), tol=1e-6)
        assert report.ok


class TestRescaling:
    def test_round_trip_preserves_solution(self):
        prob = trace_lp(np.diag([1.0, 2.0]), rhs=100.0)
        first = solve(prob)
        scaled, scales = rescale_problem(prob, first.X)
        again = unscale_solution(solve(scaled), scales)
        assert again.status == "optimal"
        assert again.objective == pytest.approx(first.objective, rel=1e-7)
        np.testing.assert_allclose(again.X[0], first.X[0], atol=1e-5)


class TestValidationAndDump:
    def test_rejects_asymmetric_constraint(self):
        with pytest.raises(DimensionError):
            SdpProblem(
                block_dims=[2],
                C=[np.zeros((2, 2))],
                constraints=[
                    Constraint(coeffs={0: np.array([[0.0, 1.0], [0.0, 0.0]])}, b=0.0)
                ],
            )

    def test_rejects_wrong_block_shape(self):
        with pytest.raises(DimensionError):
            SdpProblem(block_dims=[2], C=[np.zeros((3, 3))], constraints=[])

    def test_dump_format(self):
        text = dump_problem(pinned_diagonal_problem())
        lines = text.strip().splitlines()
        assert lines[0].startswith("blocks")
        assert any(line.startswith("b ") for line in lines)
        # One triplet per stored entry: block index, row, col, value.
        triplets = [line for line in lines if line.startswith("A ")]
        assert len(triplets) == 2
