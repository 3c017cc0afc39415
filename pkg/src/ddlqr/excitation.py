"""Hankel matrices, persistency of excitation, and input/state data collection."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ddlqr.errors import DataRichnessError, DimensionError
from ddlqr.lti import LtiSystem, Trajectory, numerical_rank, simulate


def _as_signal(signal) -> np.ndarray:
    """Normalize a sequence of sigma-vectors (or scalars) to shape (length, sigma)."""
    Z = np.asarray(signal, dtype=float)
    if Z.ndim == 1:
        Z = Z.reshape(-1, 1)
    if Z.ndim != 2:
        raise DimensionError(f"signal must be a sequence of vectors, got ndim={Z.ndim}")
    return Z


def hankel(signal, i: int, ell: int, j: int) -> np.ndarray:
    """Block Hankel matrix with block row r, column c holding signal[i + r + c].

    The result has shape (sigma*ell, j). With ell = 1 this degenerates to the
    single block row [z(i) ... z(i+j-1)].
    """
    Z = _as_signal(signal)
    if ell < 1 or j < 1:
        raise ValueError(f"need ell, j >= 1, got ell={ell}, j={j}")
    if i < 0 or i + ell + j - 1 > Z.shape[0]:
        raise IndexError(
            f"signal of length {Z.shape[0]} does not cover indices "
            f"{i}..{i + ell + j - 2}"
        )
    sigma = Z.shape[1]
    H = np.empty((sigma * ell, j))
    for r in range(ell):
        for c in range(j):
            H[r * sigma:(r + 1) * sigma, c] = Z[i + r + c]
    return H


def pe_order_check(signal, ell: int) -> bool:
    """Is the signal persistently exciting of order ell?

    Requires the depth-ell Hankel matrix over the whole signal to have full
    row rank sigma*ell. Signals too short to even form a candidate matrix
    (T < (sigma+1)*ell - 1) are reported as not exciting rather than an error.
    """
    Z = _as_signal(signal)
    T, sigma = Z.shape
    if ell < 1:
        raise ValueError(f"order must be >= 1, got {ell}")
    if T < (sigma + 1) * ell - 1:
        return False
    H = hankel(Z, 0, ell, T - ell + 1)
    return numerical_rank(H) == sigma * ell


def pe_input(m: int, T: int, rng: np.random.Generator) -> np.ndarray:
    """I.i.d. standard-normal input sequence of length T, shape (T, m)."""
    if T < 1:
        raise ValueError(f"need T >= 1, got {T}")
    return rng.standard_normal((T, m))


@dataclass(frozen=True)
class ExperimentRecord:
    """Data matrices from one open-loop experiment of length T.

    U0T stacks the first T inputs columnwise, X0T the first T states, and X1T
    the states shifted by one step, so that X1T = A X0T + B U0T holds exactly
    for the generating system.
    """

    U0T: np.ndarray  # (m, T)
    X0T: np.ndarray  # (n, T)
    X1T: np.ndarray  # (n, T)
    trajectory: Trajectory | None = None

    def __post_init__(self):
        U0T = np.atleast_2d(np.asarray(self.U0T, dtype=float))
        X0T = np.atleast_2d(np.asarray(self.X0T, dtype=float))
        X1T = np.atleast_2d(np.asarray(self.X1T, dtype=float))
        T = U0T.shape[1]
        if X0T.shape[1] != T or X1T.shape[1] != T:
            raise DimensionError(
                f"column counts differ: U0T {U0T.shape[1]}, X0T {X0T.shape[1]}, "
                f"X1T {X1T.shape[1]}"
            )
        if X0T.shape[0] != X1T.shape[0]:
            raise DimensionError(
                f"X0T has {X0T.shape[0]} rows but X1T has {X1T.shape[0]}"
            )
        object.__setattr__(self, "U0T", U0T)
        object.__setattr__(self, "X0T", X0T)
        object.__setattr__(self, "X1T", X1T)

    @property
    def T(self) -> int:
        return self.U0T.shape[1]

    @property
    def n(self) -> int:
        return self.X0T.shape[0]

    @property
    def m(self) -> int:
        return self.U0T.shape[0]

    def to_json(self) -> str:
        doc = {
            "T": self.T,
            "U0T": self.U0T.tolist(),
            "X0T": self.X0T.tolist(),
            "X1T": self.X1T.tolist(),
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentRecord":
        doc = json.loads(text)
        rec = cls(
            U0T=np.asarray(doc["U0T"], dtype=float),
            X0T=np.asarray(doc["X0T"], dtype=float),
            X1T=np.asarray(doc["X1T"], dtype=float),
        )
        if "T" in doc and int(doc["T"]) != rec.T:
            raise DimensionError(f"declared T={doc['T']} but matrices have {rec.T} columns")
        return rec


def collect_experiment(sys: LtiSystem, x0, inputs) -> ExperimentRecord:
    """Simulate one experiment and slice the trajectory into U0T, X0T, X1T."""
    traj = simulate(sys, x0, inputs)
    X = traj.states
    return ExperimentRecord(
        U0T=traj.inputs.T.copy(),
        X0T=X[:-1].T.copy(),
        X1T=X[1:].T.copy(),
        trajectory=traj,
    )


def rank_condition(rec: ExperimentRecord) -> bool:
    """Full-richness test: rank [U0T; X0T] == n + m."""
    stacked = np.vstack([rec.U0T, rec.X0T])
    return numerical_rank(stacked) == rec.n + rec.m


def solve_feedback_parametrization(rec: ExperimentRecord, K) -> np.ndarray:
    """Minimum-norm G with [U0T; X0T] G = [K; I_n].

    Existence is guaranteed by the rank condition; the minimum-norm choice
    makes the result deterministic. When the generating system is known,
    X1T @ G reproduces A + B K.
    """
    K = np.atleast_2d(np.asarray(K, dtype=float))
    if K.shape != (rec.m, rec.n):
        raise DimensionError(f"K has shape {K.shape}, expected {(rec.m, rec.n)}")
    if not rank_condition(rec):
        raise DataRichnessError(
            "rank [U0T; X0T] < n + m: data cannot parametrize the feedback"
        )
    M = np.vstack([rec.U0T, rec.X0T])
    rhs = np.vstack([K, np.eye(rec.n)])
    G, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    return G
