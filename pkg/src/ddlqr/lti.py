"""Discrete-time LTI systems: simulation, controllability, random generation."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ddlqr.errors import DefinitenessError, DimensionError, GenerationError

_SYM_TOL = 1e-12
_CONTROLLABILITY_RETRY_CAP = 100


def numerical_rank(M: np.ndarray) -> int:
    """Rank by singular values: sigma counts iff sigma > max(shape)*sigma_max*eps."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    tol = max(M.shape) * s[0] * np.finfo(float).eps
    return int(np.sum(s > tol))


def _as_matrix(M, name: str) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise DimensionError(f"{name} must be a 2-d matrix, got ndim={M.ndim}")
    if not np.all(np.isfinite(M)):
        raise DimensionError(f"{name} contains non-finite entries")
    return M


def _symmetrize(M: np.ndarray, name: str) -> np.ndarray:
    if M.shape[0] != M.shape[1]:
        raise DimensionError(f"{name} must be square, got {M.shape}")
    asym = np.max(np.abs(M - M.T)) if M.size else 0.0
    if asym > _SYM_TOL:
        raise DimensionError(f"{name} is not symmetric (max asymmetry {asym:.3e})")
    return (M + M.T) / 2.0


@dataclass(frozen=True)
class LtiSystem:
    """State-space pair x(k+1) = A x(k) + B u(k)."""

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = _as_matrix(self.A, "A")
        B = _as_matrix(self.B, "B")
        if A.shape[0] != A.shape[1]:
            raise DimensionError(f"A must be square, got {A.shape}")
        if B.shape[0] != A.shape[0]:
            raise DimensionError(f"B has {B.shape[0]} rows, expected {A.shape[0]}")
        if A.shape[0] < 1 or B.shape[1] < 1:
            raise DimensionError("state and input dimensions must be at least 1")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    def to_json(self) -> str:
        doc = {"n": self.n, "m": self.m, "A": self.A.tolist(), "B": self.B.tolist()}
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "LtiSystem":
        doc = json.loads(text)
        sys = cls(A=np.asarray(doc["A"], dtype=float), B=np.asarray(doc["B"], dtype=float))
        if "n" in doc and int(doc["n"]) != sys.n:
            raise DimensionError(f"declared n={doc['n']} but A is {sys.A.shape}")
        if "m" in doc and int(doc["m"]) != sys.m:
            raise DimensionError(f"declared m={doc['m']} but B is {sys.B.shape}")
        return sys


@dataclass(frozen=True)
class CostWeights:
    """Quadratic cost data: running weights Qx, R, terminal weight Qf, horizon N.

    Qx and Qf must be PSD, R must be PD; all three are symmetrized at
    construction and rejected if the asymmetry exceeds 1e-12.
    """

    Qx: np.ndarray
    Qf: np.ndarray
    R: np.ndarray
    N: int

    def __post_init__(self):
        Qx = _symmetrize(_as_matrix(self.Qx, "Qx"), "Qx")
        Qf = _symmetrize(_as_matrix(self.Qf, "Qf"), "Qf")
        R = _symmetrize(_as_matrix(self.R, "R"), "R")
        if Qf.shape != Qx.shape:
            raise DimensionError(f"Qf shape {Qf.shape} != Qx shape {Qx.shape}")
        if self.N < 1:
            raise DimensionError(f"horizon N must be positive, got {self.N}")
        eig_tol = 1e-10
        for name, M in (("Qx", Qx), ("Qf", Qf)):
            lo = float(np.linalg.eigvalsh(M)[0]) if M.size else 0.0
            if lo < -eig_tol * max(1.0, np.abs(M).max()):
                raise DefinitenessError(f"{name} is not PSD (min eigenvalue {lo:.3e})")
        lo = float(np.linalg.eigvalsh(R)[0])
        if lo <= eig_tol * max(1.0, np.abs(R).max()):
            raise DefinitenessError(f"R is not PD (min eigenvalue {lo:.3e})")
        object.__setattr__(self, "Qx", Qx)
        object.__setattr__(self, "Qf", Qf)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "N", int(self.N))

    @property
    def n(self) -> int:
        return self.Qx.shape[0]

    @property
    def m(self) -> int:
        return self.R.shape[0]


@dataclass(frozen=True)
class Trajectory:
    """A simulated run: L inputs and the L+1 states they produce."""

    states: np.ndarray  # (L+1, n)
    inputs: np.ndarray  # (L, m)

    def __post_init__(self):
        states = np.atleast_2d(np.asarray(self.states, dtype=float))
        inputs = np.asarray(self.inputs, dtype=float)
        if inputs.ndim == 1:
            inputs = inputs.reshape(-1, 1) if inputs.size else inputs.reshape(0, 1)
        if states.shape[0] != inputs.shape[0] + 1:
            raise DimensionError(
                f"{states.shape[0]} states with {inputs.shape[0]} inputs; "
                "expected states = inputs + 1"
            )
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "inputs", inputs)

    @property
    def length(self) -> int:
        return self.inputs.shape[0]


def simulate(sys: LtiSystem, x0, inputs) -> Trajectory:
    """Roll out x(k+1) = A x(k) + B u(k) from x0 under the given input sequence."""
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape[0] != sys.n:
        raise DimensionError(f"x0 has length {x0.shape[0]}, expected {sys.n}")
    U = np.asarray(inputs, dtype=float)
    if U.ndim == 1:
        U = U.reshape(-1, 1)
    if U.size and U.shape[1] != sys.m:
        raise DimensionError(f"inputs have width {U.shape[1]}, expected {sys.m}")
    L = U.shape[0]
    X = np.empty((L + 1, sys.n))
    X[0] = x0
    for k in range(L):
        X[k + 1] = sys.A @ X[k] + sys.B @ U[k]
    return Trajectory(states=X, inputs=U)


def controllability_matrix(sys: LtiSystem) -> np.ndarray:
    blocks = []
    Ak_B = sys.B
    for _ in range(sys.n):
        blocks.append(Ak_B)
        Ak_B = sys.A @ Ak_B
    return np.hstack(blocks)


def is_controllable(sys: LtiSystem) -> bool:
    """True iff [B, AB, ..., A^(n-1) B] has full numerical row rank n."""
    return numerical_rank(controllability_matrix(sys)) == sys.n


def random_system(n: int, m: int, rng: np.random.Generator) -> LtiSystem:
    """Draw (A, B) with i.i.d. standard-normal entries, retrying until controllable.

    Uncontrollable draws have probability zero; the retry cap only guards
    against a degenerate generator being passed in.
    """
    if n < 1 or m < 1:
        raise DimensionError(f"need n, m >= 1, got n={n}, m={m}")
    for _ in range(_CONTROLLABILITY_RETRY_CAP):
        sys = LtiSystem(A=rng.standard_normal((n, n)), B=rng.standard_normal((n, m)))
        if is_controllable(sys):
            return sys
    raise GenerationError(
        f"no controllable ({n},{m}) pair in {_CONTROLLABILITY_RETRY_CAP} draws"
    )


def closed_loop(sys: LtiSystem, K) -> np.ndarray:
    """State matrix A + B K under the static feedback u = K x."""
    K = np.asarray(K, dtype=float)
    if K.shape != (sys.m, sys.n):
        raise DimensionError(f"K has shape {K.shape}, expected {(sys.m, sys.n)}")
    return sys.A + sys.B @ K
