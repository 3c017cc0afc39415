"""Benchmark harness comparing the two solution routes on sampled systems.

Each trial draws a controllable system, runs a persistently exciting
experiment on it, solves the model-based and the data-driven program, and
records how far apart the two land in cost and gains. A preset batch
reactor model (discretized, open-loop unstable) is included as a fixed
case study, with a closed-loop simulation under the data-driven gains.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from ddlqr.errors import DdlqrError, DimensionError
from ddlqr.excitation import collect_experiment, pe_input, rank_condition
from ddlqr.lti import CostWeights, LtiSystem, Trajectory, closed_loop, random_system
from ddlqr.programs import (
    build_dd_program,
    build_mb_program,
    recover_gains_dd,
    recover_gains_mb,
    solve_program,
)

RANK_RETRY_CAP = 10


@dataclass
class TrialResult:
    """Outcome of one paired model-based / data-driven solve."""

    trial: int
    seed: int
    status: str
    J_mb: float = math.nan
    J_dd: float = math.nan
    abs_cost_err: float = math.nan
    gain_errs: list = field(default_factory=list)
    gains_mb: list = field(default_factory=list)
    gains_dd: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @property
    def max_gain_err(self) -> float:
        return max(self.gain_errs) if self.gain_errs else math.nan

    @property
    def mean_gain_err(self) -> float:
        if not self.gain_errs:
            return math.nan
        return sum(self.gain_errs) / len(self.gain_errs)


@dataclass(frozen=True)
class ReactorPreset:
    """Discretized batch reactor model, open-loop unstable.

    The matrix entries are fixed literals; `weights` supplies the default
    identity state and input penalties.
    """

    A: np.ndarray = field(
        default_factory=lambda: np.array(
            [
                [1.178, 0.001, 0.511, -0.403],
                [-0.051, 0.661, -0.011, 0.061],
                [0.076, 0.335, 0.560, 0.382],
                [0.000, 0.335, 0.089, 0.849],
            ]
        )
    )
    B: np.ndarray = field(
        default_factory=lambda: np.array(
            [
                [0.004, -0.087],
                [0.467, 0.001],
                [0.213, -0.235],
                [0.213, -0.016],
            ]
        )
    )
    T: int = 15
    N: int = 10

    def system(self) -> LtiSystem:
        return LtiSystem(A=self.A, B=self.B)

    def weights(self, N: int | None = None) -> CostWeights:
        horizon = self.N if N is None else N
        return CostWeights(np.eye(4), np.eye(4), np.eye(2), horizon)


def _paired_solve(trial: int, seed: int, sys: LtiSystem, w: CostWeights, T: int,
                  rng: np.random.Generator) -> TrialResult:
    """Collect data on `sys`, solve both programs, and compare them."""
    rec = None
    for _ in range(RANK_RETRY_CAP):
        candidate = collect_experiment(sys, rng.standard_normal(sys.n), pe_input(sys.m, T, rng))
        if rank_condition(candidate):
            rec = candidate
            break
    if rec is None:
        return TrialResult(
            trial=trial,
            seed=seed,
            status="rank_failed",
            diagnostics={"detail": f"rank condition failed {RANK_RETRY_CAP} times"},
        )

    try:
        prob_mb, vars_mb = build_mb_program(sys, w)
        mb = recover_gains_mb(solve_program(prob_mb), vars_mb, sys, w)
        prob_dd, vars_dd = build_dd_program(rec, w)
        dd = recover_gains_dd(solve_program(prob_dd), vars_dd, rec, w)
    except DdlqrError as exc:
        return TrialResult(
            trial=trial,
            seed=seed,
            status="solver_failed",
            diagnostics={"detail": str(exc)},
        )

    gain_errs = [
        float(np.linalg.norm(np.asarray(kd) - np.asarray(km)))
        for kd, km in zip(dd.gains, mb.gains)
    ]
    return TrialResult(
        trial=trial,
        seed=seed,
        status="ok",
        J_mb=mb.objective,
        J_dd=dd.objective,
        abs_cost_err=abs(dd.objective - mb.objective),
        gain_errs=gain_errs,
        gains_mb=[np.asarray(K) for K in mb.gains],
        gains_dd=[np.asarray(K) for K in dd.gains],
        diagnostics={"mb": mb.diagnostics, "dd": dd.diagnostics},
    )


def trial_seeds(base_seed: int, n_trials: int) -> list:
    """Derive independent per-trial seeds from one base seed.

    Uses the generator-state expansion of a seed sequence, so the list is
    a pure function of (base_seed, n_trials) and trials can run in any
    order or in parallel without sharing a stream.
    """
    state = np.random.SeedSequence(base_seed).generate_state(n_trials, dtype=np.uint64)
    return [int(s) for s in state]


def run_monte_carlo(n_trials: int, n: int, m: int, T: int, w: CostWeights,
                    base_seed: int = 0) -> list:
    """Compare the two programs on `n_trials` random controllable systems."""
    if T < (m + 1) * (n + 1) - 1:
        raise DimensionError(
            f"experiment length {T} cannot be persistently exciting of order "
            f"{n + 1} with {m} inputs; need at least {(m + 1) * (n + 1) - 1}"
        )
    results = []
    for trial, seed in enumerate(trial_seeds(base_seed, n_trials)):
        rng = np.random.default_rng(seed)
        sys = random_system(n, m, rng)
        results.append(_paired_solve(trial, seed, sys, w, T, rng))
    return results


def run_reactor(w: CostWeights | None = None, T: int | None = None,
                N: int | None = None, seed: int = 0):
    """Run one experiment on the reactor preset and simulate the result.

    Returns the trial comparison plus the closed-loop trajectory under the
    data-driven gains from a seeded unit-norm initial state.
    """
    preset = ReactorPreset()
    sys = preset.system()
    horizon = preset.N if N is None else N
    weights = preset.weights(horizon) if w is None else w
    length = preset.T if T is None else T
    rng = np.random.default_rng(seed)
    result = _paired_solve(0, seed, sys, weights, length, rng)
    if not result.ok:
        return result, None

    x0 = rng.standard_normal(sys.n)
    x0 /= np.linalg.norm(x0)
    states = [x0]
    inputs = []
    for K in result.gains_dd:
        u = np.asarray(K) @ states[-1]
        inputs.append(u)
        states.append(sys.A @ states[-1] + sys.B @ u)
    traj = Trajectory(states=np.array(states), inputs=np.array(inputs))
    return result, traj


def summarize(results: list) -> dict:
    """Aggregate trial statistics, reporting failures rather than hiding them."""
    if not results:
        raise DimensionError("cannot summarize an empty result list")
    ok = [r for r in results if r.ok]
    failed = [r for r in results if not r.ok]
    summary = {
        "n_trials": len(results),
        "n_ok": len(ok),
        "n_failed": len(failed),
        "failed_trials": [{"trial": r.trial, "status": r.status} for r in failed],
    }
    if ok:
        costs = np.array([r.abs_cost_err for r in ok])
        gains = np.concatenate([np.array(r.gain_errs) for r in ok])
        summary.update(
            {
                "abs_cost_err": {
                    "mean": float(costs.mean()),
                    "median": float(np.median(costs)),
                    "max": float(costs.max()),
                },
                "gain_err": {
                    "mean": float(gains.mean()),
                    "median": float(np.median(gains)),
                    "max": float(gains.max()),
                },
            }
        )
    return summary


def _fmt(x: float) -> str:
    return "" if math.isnan(x) else format(x, ".17g")


def results_to_csv(results: list) -> str:
    out = io.StringIO()
    out.write("trial,seed,J_mb,J_dd,abs_cost_err,max_gain_err,mean_gain_err,status\n")
    for r in results:
        out.write(
            f"{r.trial},{r.seed},{_fmt(r.J_mb)},{_fmt(r.J_dd)},"
            f"{_fmt(r.abs_cost_err)},{_fmt(r.max_gain_err)},"
            f"{_fmt(r.mean_gain_err)},{r.status}\n"
        )
    return out.getvalue()


def trajectory_to_csv(traj: Trajectory) -> str:
    n = traj.states.shape[1]
    m = traj.inputs.shape[1]
    out = io.StringIO()
    cols = ["k"] + [f"x{i + 1}" for i in range(n)] + [f"u{i + 1}" for i in range(m)]
    out.write(",".join(cols) + "\n")
    for k, x in enumerate(traj.states):
        row = [str(k)] + [format(v, ".17g") for v in x]
        if k < len(traj.inputs):
            row += [format(v, ".17g") for v in traj.inputs[k]]
        else:
            row += [""] * m
        out.write(",".join(row) + "\n")
    return out.getvalue()


def summary_to_json(summary: dict) -> str:
    return json.dumps(summary, indent=2, sort_keys=True) + "\n"
