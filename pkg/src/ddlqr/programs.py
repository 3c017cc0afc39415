"""Compile finite-horizon LQR into block SDPs and recover gains from solutions.

Both formulations minimize Tr(Qf S(N)) + sum_k Tr(Qx S(k) + Z(k)).

Model-based, per step k:
    [[S(k+1) - I, A S(k) + B H(k)], [., S(k)]] >= 0
    [[Z(k), R^(1/2) H(k)], [., S(k)]] >= 0
with H(k) = K(k) S(k) and S(0) = I fixed by equality.

Data-driven, per step k, with experiment matrices U0T, X0T, X1T:
    S(k) = X0T Q(k)
    [[S(k+1) - I, X1T Q(k)], [., S(k)]] >= 0
    [[Z(k), R^(1/2) U0T Q(k)], [., S(k)]] >= 0
and gains are read back as K(k) = U0T Q(k) S(k)^(-1).

Encoding: each PSD constraint becomes a PSD variable block whose sub-blocks
are tied to one another (and, for the data-driven case, to the flattened
free variables Q(k)) by scalar equality constraints. The matrices S(k),
H(k), Z(k) therefore live inside the constraint blocks themselves and no
separate variable blocks are needed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from ddlqr.errors import DataRichnessError, DegenerateSolutionError, DimensionError
from ddlqr.excitation import (
    ExperimentRecord,
    rank_condition,
    solve_feedback_parametrization,
)
from ddlqr.lti import CostWeights, LtiSystem
from ddlqr.riccati import covariance_recursion, expected_cost
from ddlqr.sdp import Constraint, SdpProblem, SdpSolution

def _sqrtm_pd(R: np.ndarray) -> np.ndarray:
    evals, evecs = np.linalg.eigh(R)
    if evals[0] <= 0:
        raise DimensionError("R must be positive definite to take its square root")
    return (evecs * np.sqrt(evals)) @ evecs.T


def _sym(M: np.ndarray) -> np.ndarray:
    return (M + M.T) / 2.0


class _ConstraintBuilder:
    """Accumulate raw (possibly unsymmetric) per-block coefficients.

    For symmetric X, <(W + W')/2, X> = sum_ij W_ij X_ij, so raw weights can
    be written entry-wise and symmetrized once at the end.
    """

    def __init__(self):
        self.constraints = []

    def add(self, coeffs: dict, b: float, free: dict | None = None):
        sym = {blk: _sym(np.asarray(W, dtype=float)) for blk, W in coeffs.items()}
        self.constraints.append(Constraint(coeffs=sym, b=b, free=free or {}))


@dataclass(frozen=True)
class MbProgramVars:
    """Block layout of the model-based program.

    big_blocks[k] (size 2n) holds S(k+1)-I top-left, A S + B H top-right and
    S(k) bottom-right; small_blocks[k] (size m+n) holds Z(k) top-left,
    R^(1/2) H(k) top-right and S(k) bottom-right.
    """

    n: int
    m: int
    N: int
    big_blocks: list
    small_blocks: list
    R_inv_sqrt: np.ndarray
    objective_offset: float


@dataclass(frozen=True)
class DdProgramVars:
    """Block layout of the data-driven program.

    Q(k) occupies free-variable indices k*T*n ... (k+1)*T*n - 1, flattened
    row-major (entry (t, j) at offset t*n + j).
    """

    n: int
    m: int
    N: int
    T: int
    big_blocks: list
    small_blocks: list
    q_offset: int  # stride T*n between consecutive Q(k)
    objective_offset: float


@dataclass(frozen=True)
class LqrSolution:
    gains: list          # K(0..N-1), each (m, n)
    S: list              # S(0..N), each (n, n)
    objective: float
    mode: str            # model_based | data_driven
    diagnostics: dict


def _check_weights(n: int, m: int, w: CostWeights):
    if w.n != n or w.m != m:
        raise DimensionError(
            f"weights sized for (n={w.n}, m={w.m}), problem is (n={n}, m={m})"
        )


def build_mb_program(sys: LtiSystem, w: CostWeights):
    """Model-based SDP; returns (SdpProblem, MbProgramVars)."""
    _check_weights(sys.n, sys.m, w)
    n, m, N = sys.n, sys.m, w.N
    A, B = sys.A, sys.B
    Rh = _sqrtm_pd(w.R)
    Rih = np.linalg.inv(Rh)
    BRih = B @ Rih

    big = list(range(N))            # size 2n each
    small = list(range(N, 2 * N))   # size m+n each
    dims = [2 * n] * N + [m + n] * N
    C = [np.zeros((d, d)) for d in dims]
    for k in range(N):
        # Tr(Z(k)) + Tr(Qx S(k)) read off the small block.
        C[small[k]][:m, :m] = np.eye(m)
        C[small[k]][m:, m:] = w.Qx
    # S(N) = top-left of the last big block plus I.
    C[big[N - 1]][:n, :n] = w.Qf
    offset = float(np.trace(w.Qf))

    cb = _ConstraintBuilder()

    def eye_entry(i, j):
        return 1.0 if i == j else 0.0

    for k in range(N):
        bb, sb = big[k], small[k]
        # S(0) = I on the bottom-right of the first big block.
        if k == 0:
            for i in range(n):
                for j in range(i, n):
                    W = np.zeros((2 * n, 2 * n))
                    W[n + i, n + j] = 1.0
                    cb.add({bb: W}, eye_entry(i, j))
        # Tie the two copies of S(k).
        for i in range(n):
            for j in range(i, n):
                Wb = np.zeros((2 * n, 2 * n))
                Wb[n + i, n + j] = 1.0
                Ws = np.zeros((m + n, m + n))
                Ws[m + i, m + j] = -1.0
                cb.add({bb: Wb, sb: Ws}, 0.0)
        # Chain: top-left of big(k) = S(k+1) - I = bottom-right of big(k+1) - I.
        if k < N - 1:
            nb = big[k + 1]
            for i in range(n):
                for j in range(i, n):
                    Wk = np.zeros((2 * n, 2 * n))
                    Wk[i, j] = 1.0
                    Wn = np.zeros((2 * n, 2 * n))
                    Wn[n + i, n + j] = -1.0
                    cb.add({bb: Wk, nb: Wn}, -eye_entry(i, j))
        # Top-right of big(k) = A S(k) + B R^(-1/2) J(k), J = R^(1/2) H.
        for i in range(n):
            for j in range(n):
                Wb = np.zeros((2 * n, 2 * n))
                Wb[i, n + j] = 1.0
                Wb[n:, n + j] -= A[i, :]
                Ws = np.zeros((m + n, m + n))
                Ws[:m, m + j] -= BRih[i, :]
                cb.add({bb: Wb, sb: Ws}, 0.0)

    prob = SdpProblem(block_dims=dims, C=C, constraints=cb.constraints)
    vars_ = MbProgramVars(
        n=n, m=m, N=N, big_blocks=big, small_blocks=small,
        R_inv_sqrt=Rih, objective_offset=offset,
    )
    return prob, vars_


def build_dd_program(rec: ExperimentRecord, w: CostWeights):
    """Data-driven SDP from experiment data; returns (SdpProblem, DdProgramVars)."""
    if not rank_condition(rec):
        raise DataRichnessError(
            "rank [U0T; X0T] < n + m: data too poor for the data-driven program"
        )
    n, m, T, N = rec.n, rec.m, rec.T, w.N
    _check_weights(n, m, w)
    Rh = _sqrtm_pd(w.R)
    RhU = Rh @ rec.U0T  # (m, T)

    big = list(range(N))
    small = list(range(N, 2 * N))
    dims = [2 * n] * N + [m + n] * N
    C = [np.zeros((d, d)) for d in dims]
    for k in range(N):
        C[small[k]][:m, :m] = np.eye(m)
        C[small[k]][m:, m:] = w.Qx
    C[big[N - 1]][:n, :n] = w.Qf
    offset = float(np.trace(w.Qf))

    stride = T * n

    def qidx(k, t, j):
        return k * stride + t * n + j

    cb = _ConstraintBuilder()
    for k in range(N):
        bb, sb = big[k], small[k]
        if k == 0:
            for i in range(n):
                for j in range(i, n):
                    W = np.zeros((2 * n, 2 * n))
                    W[n + i, n + j] = 1.0
                    cb.add({bb: W}, 1.0 if i == j else 0.0)
        for i in range(n):
            for j in range(i, n):
                Wb = np.zeros((2 * n, 2 * n))
                Wb[n + i, n + j] = 1.0
                Ws = np.zeros((m + n, m + n))
                Ws[m + i, m + j] = -1.0
                cb.add({bb: Wb, sb: Ws}, 0.0)
        if k < N - 1:
            nb = big[k + 1]
            for i in range(n):
                for j in range(i, n):
                    Wk = np.zeros((2 * n, 2 * n))
                    Wk[i, j] = 1.0
                    Wn = np.zeros((2 * n, 2 * n))
                    Wn[n + i, n + j] = -1.0
                    cb.add({bb: Wk, nb: Wn}, -1.0 if i == j else 0.0)
        # S(k) = X0T Q(k), imposed entrywise (n^2 rows covers symmetry too).
        for i in range(n):
            for j in range(n):
                Wb = np.zeros((2 * n, 2 * n))
                Wb[n + i, n + j] = 1.0
                free = {qidx(k, t, j): -rec.X0T[i, t] for t in range(T)}
                cb.add({bb: Wb}, 0.0, free)
        # Top-right of big(k) = X1T Q(k).
        for i in range(n):
            for j in range(n):
                Wb = np.zeros((2 * n, 2 * n))
                Wb[i, n + j] = 1.0
                free = {qidx(k, t, j): -rec.X1T[i, t] for t in range(T)}
                cb.add({bb: Wb}, 0.0, free)
        # Top-right of small(k) = R^(1/2) U0T Q(k).
        for c in range(m):
            for j in range(n):
                Ws = np.zeros((m + n, m + n))
                Ws[c, m + j] = 1.0
                free = {qidx(k, t, j): -RhU[c, t] for t in range(T)}
                cb.add({sb: Ws}, 0.0, free)

    prob = SdpProblem(
        block_dims=dims, C=C, constraints=cb.constraints, n_free=N * stride
    )
    vars_ = DdProgramVars(
        n=n, m=m, N=N, T=T, big_blocks=big, small_blocks=small,
        q_offset=stride, objective_offset=offset,
    )
    return prob, vars_


def _extract_S(sol: SdpSolution, big, n: int, N: int) -> list:
    S = []
    for k in range(N):
        S.append(_sym(sol.X[big[k]][n:, n:]))
    S.append(_sym(sol.X[big[N - 1]][:n, :n]) + np.eye(n))
    return S


def _check_S_floor(S: list):
    # Feasibility gives S(k) >= I; allow slack proportional to the matrix
    # scale, since the solver's absolute feasibility error grows with the
    # covariance magnitude (unstable systems reach ||S|| ~ 1e4 and beyond).
    for k, Sk in enumerate(S):
        lo = float(np.linalg.eigvalsh(Sk)[0])
        floor = 1.0 - 1e-6 * (1.0 + float(np.linalg.norm(Sk)))
        if lo < floor:
            raise DegenerateSolutionError(
                f"S({k}) has smallest eigenvalue {lo:.8f}, below the floor "
                f"{floor:.8f}; gain recovery would be unreliable"
            )


def solve_program(
    prob: SdpProblem, tolerances=(1e-10, 1e-9, 1e-8), max_rounds: int = 3
) -> SdpSolution:
    """Solve directly, then fall back to rescaled accurate passes.

    Well-scaled problems converge in one direct run at the tightest
    tolerance. Unstable systems, however, produce covariance blocks with
    entries in the thousands next to duals near machine precision, which
    caps the accuracy a single interior-point run can reach. For those, a
    loose pass estimates the solution magnitudes, then each round solves
    the diagonally rescaled problem, where all blocks are of order one,
    and maps back; a round that still misses rescales again from its
    improved estimate. Tolerances are tried tightest-first since the
    tightest is not always attainable; an optimum at a looser rung is kept
    as a fallback while tighter rungs are retried, and the last attempt is
    returned even on total failure so callers see the solver's diagnosis.
    """
    from ddlqr.sdp import rescale_problem, solve, unscale_solution

    direct = solve(prob, tol_gap=tolerances[0], tol_feas=tolerances[0])
    if direct.status == "optimal":
        return direct

    rough = solve(prob, tol_gap=1e-6, tol_feas=1e-6)
    if rough.status != "optimal":
        return rough
    cur = prob
    X_est = rough.X
    total = None
    sol = rough
    best = None          # (rung index, unscaled solution) of the best optimum
    for _ in range(max_rounds):
        cur, scales = rescale_problem(cur, X_est)
        total = scales if total is None else [t * s for t, s in zip(total, scales)]
        rung = None
        for i, tol in enumerate(tolerances):
            sol = solve(cur, tol_gap=tol, tol_feas=tol)
            if sol.status == "optimal":
                rung = i
                break
        if rung == 0:
            return unscale_solution(sol, total)
        if rung is not None and (best is None or rung < best[0]):
            best = (rung, unscale_solution(sol, total))
            # An optimum only at a loose rung is worth one more rescaled
            # attempt at the tighter ones; the loose result stays as the
            # fallback.
        X_est = sol.X
    if best is not None:
        return best[1]
    return unscale_solution(sol, total)


def _require_optimal(sol: SdpSolution):
    if sol.status != "optimal":
        raise DegenerateSolutionError(
            f"solver status is '{sol.status}', cannot recover gains"
        )


def _diag(sol: SdpSolution) -> dict:
    return {
        "status": sol.status,
        "gap": sol.gap,
        "iterations": sol.iterations,
        "residuals": dict(sol.residuals),
    }


def recover_gains_mb(
    sol: SdpSolution, vars_: MbProgramVars, sys: LtiSystem, w: CostWeights
) -> LqrSolution:
    """Read K(k) = H(k) S(k)^(-1) out of a model-based solution.

    The reported objective is the cost achieved by the recovered gains,
    recomputed through the exact covariance recursion; the raw optimal
    value of the semidefinite program stays in diagnostics["sdp_objective"].
    Recomputing removes the solver's residual suboptimality from the
    objective, which otherwise dominates on large-cost instances.
    """
    _require_optimal(sol)
    n, m, N = vars_.n, vars_.m, vars_.N
    S_sdp = _extract_S(sol, vars_.big_blocks, n, N)
    _check_S_floor(S_sdp)
    gains = []
    for k in range(N):
        J = sol.X[vars_.small_blocks[k]][:m, m:]
        H = vars_.R_inv_sqrt @ J
        gains.append(np.linalg.solve(S_sdp[k].T, H.T).T)
    cov = covariance_recursion(sys, w, gains)
    diag = _diag(sol)
    diag["sdp_objective"] = sol.objective + vars_.objective_offset
    diag["S_sdp"] = S_sdp
    return LqrSolution(
        gains=gains,
        S=cov.S,
        objective=expected_cost(w, cov),
        mode="model_based",
        diagnostics=diag,
    )


def recover_gains_dd(
    sol: SdpSolution, vars_: DdProgramVars, rec: ExperimentRecord, w: CostWeights
) -> LqrSolution:
    """Read K(k) = U0T Q(k) S(k)^(-1) out of a data-driven solution.

    The diagnostics carry G(k), the trajectory-combination matrices that
    reproduce A + B K(k) as X1T G(k). Rather than trusting the solver's
    Q(k) iterates for this role, G(k) is refit from the recovered gains by
    an exact least-squares solve against the data matrices: the iterates
    satisfy the parametrization identity only up to the duality gap, and
    that error compounds geometrically when the closed-loop map is chained
    through the covariance recursion. As in the model-based case, the
    reported objective is the cost achieved by the recovered gains; here
    the covariance recursion is run without a model, using X1T G(k) as the
    closed-loop map. The raw optimal value of the semidefinite program
    stays in diagnostics["sdp_objective"].
    """
    _require_optimal(sol)
    n, m, N, T = vars_.n, vars_.m, vars_.N, vars_.T
    S_sdp = _extract_S(sol, vars_.big_blocks, n, N)
    _check_S_floor(S_sdp)
    gains = []
    Gs = []
    Qs = []
    for k in range(N):
        Q = sol.u[k * vars_.q_offset:(k + 1) * vars_.q_offset].reshape(T, n)
        Qs.append(Q)
        Sinv_Qt = np.linalg.solve(S_sdp[k], Q.T)
        gains.append(rec.U0T @ Sinv_Qt.T)
        Gs.append(solve_feedback_parametrization(rec, gains[-1]))
    # Model-free covariance recursion: X1T G(k) plays the role of A + B K(k).
    S = [np.eye(n)]
    objective = 0.0
    for k in range(N):
        objective += float(
            np.trace(w.Qx @ S[k]) + np.trace(w.R @ (gains[k] @ S[k] @ gains[k].T))
        )
        M = rec.X1T @ Gs[k]
        S.append(_sym(M @ S[k] @ M.T + np.eye(n)))
    objective += float(np.trace(w.Qf @ S[N]))
    diag = _diag(sol)
    diag["G"] = Gs
    diag["Q"] = Qs
    diag["sdp_objective"] = sol.objective + vars_.objective_offset
    diag["S_sdp"] = S_sdp
    return LqrSolution(
        gains=gains,
        S=S,
        objective=objective,
        mode="data_driven",
        diagnostics=diag,
    )
