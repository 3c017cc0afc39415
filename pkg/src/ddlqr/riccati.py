"""Model-based ground truth: Riccati recursion, DARE limit, covariance recursion."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ddlqr.errors import ConvergenceError, DefinitenessError, DimensionError
from ddlqr.lti import CostWeights, LtiSystem

_DARE_TOL = 1e-12
_DARE_CAP = 10000


def _sym(M: np.ndarray) -> np.ndarray:
    return (M + M.T) / 2.0


def _pd_solve(M: np.ndarray, rhs: np.ndarray, what: str) -> np.ndarray:
    """Solve M x = rhs with M positive definite (Cholesky), else raise."""
    try:
        c = scipy.linalg.cho_factor(_sym(M), lower=True)
    except np.linalg.LinAlgError as exc:
        raise DefinitenessError(f"{what} is not positive definite") from exc
    return scipy.linalg.cho_solve(c, rhs)


@dataclass(frozen=True)
class RiccatiSolution:
    """Backward value matrices P(0..N) and optimal gains K(0..N-1)."""

    P: list  # of (n, n) symmetric PSD
    K: list  # of (m, n)


@dataclass(frozen=True)
class CovarianceSequence:
    """State covariances S(0..N), input covariances U(0..N-1), cross terms Y."""

    S: list  # of (n, n)
    U: list  # of (m, m)
    Y: list  # of (n, m)


def _riccati_step(sys: LtiSystem, Qx: np.ndarray, R: np.ndarray, P_next: np.ndarray):
    """One backward step: gain at k and value matrix at k given P(k+1)."""
    A, B = sys.A, sys.B
    BtP = B.T @ P_next
    K = -_pd_solve(R + BtP @ B, BtP @ A, "R + B'PB")
    P = _sym(Qx + A.T @ P_next @ A + (A.T @ BtP.T) @ K)
    return P, K


def riccati_recursion(sys: LtiSystem, w: CostWeights) -> RiccatiSolution:
    """Finite-horizon backward recursion from P(N) = Qf."""
    if w.n != sys.n or w.m != sys.m:
        raise DimensionError(
            f"weights sized for (n={w.n}, m={w.m}) but system is (n={sys.n}, m={sys.m})"
        )
    P = [None] * (w.N + 1)
    K = [None] * w.N
    P[w.N] = w.Qf.copy()
    for k in range(w.N - 1, -1, -1):
        P[k], K[k] = _riccati_step(sys, w.Qx, w.R, P[k + 1])
    return RiccatiSolution(P=P, K=K)


def dare_fixed_point(sys: LtiSystem, Qx, R):
    """Stationary (P, K) by iterating the Riccati step to a fixed point.

    Stops when the Frobenius change drops below 1e-12 * (1 + ||P||_F);
    raises after 10000 iterations without convergence.
    """
    Qx = _sym(np.asarray(Qx, dtype=float))
    R = _sym(np.asarray(R, dtype=float))
    P = Qx.copy()
    for _ in range(_DARE_CAP):
        P_new, K = _riccati_step(sys, Qx, R, P)
        if np.linalg.norm(P_new - P) <= _DARE_TOL * (1.0 + np.linalg.norm(P)):
            return P_new, K
        P = P_new
    raise ConvergenceError(f"DARE iteration did not converge in {_DARE_CAP} steps")


def covariance_recursion(sys: LtiSystem, w: CostWeights, gains) -> CovarianceSequence:
    """Forward covariance propagation under given gains, from S(0) = I.

    Per step: Y(k) = S(k) K(k)', U(k) = K(k) S(k) K(k)', and
    S(k+1) = (A + B K(k)) S(k) (A + B K(k))' + I.
    """
    gains = [np.atleast_2d(np.asarray(K, dtype=float)) for K in gains]
    S = [np.eye(sys.n)]
    U = []
    Y = []
    for k, K in enumerate(gains):
        if K.shape != (sys.m, sys.n):
            raise DimensionError(f"gain {k} has shape {K.shape}, expected {(sys.m, sys.n)}")
        Sk = S[k]
        Y.append(Sk @ K.T)
        U.append(_sym(K @ Sk @ K.T))
        Acl = sys.A + sys.B @ K
        S.append(_sym(Acl @ Sk @ Acl.T + np.eye(sys.n)))
    return CovarianceSequence(S=S, U=U, Y=Y)


def expected_cost(w: CostWeights, cov: CovarianceSequence) -> float:
    """Stochastic objective Tr(Qf S(N)) + sum_k Tr(Qx S(k) + R U(k))."""
    N = w.N
    if len(cov.U) != N or len(cov.S) != N + 1:
        raise DimensionError(
            f"horizon {N} needs {N + 1} state and {N} input covariances, "
            f"got {len(cov.S)} and {len(cov.U)}"
        )
    total = float(np.trace(w.Qf @ cov.S[N]))
    for k in range(N):
        total += float(np.trace(w.Qx @ cov.S[k]) + np.trace(w.R @ cov.U[k]))
    return total


def deterministic_cost(sys: LtiSystem, w: CostWeights, x0, gains) -> float:
    """Closed-loop quadratic cost from x0 under the time-varying gains."""
    x = np.asarray(x0, dtype=float).reshape(-1)
    if x.shape[0] != sys.n:
        raise DimensionError(f"x0 has length {x.shape[0]}, expected {sys.n}")
    gains = [np.atleast_2d(np.asarray(K, dtype=float)) for K in gains]
    if len(gains) != w.N:
        raise DimensionError(f"{len(gains)} gains for horizon {w.N}")
    total = 0.0
    for K in gains:
        u = K @ x
        total += float(x @ w.Qx @ x + u @ w.R @ u)
        x = sys.A @ x + sys.B @ u
    total += float(x @ w.Qf @ x)
    return total
