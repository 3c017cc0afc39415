"""HTTP service exposing the library workflows.

Every endpoint is a stateless POST taking and returning JSON; the CLI is a
thin client of this app, run in-process by default. Failures are reported
with a `kind` field so clients can distinguish bad requests, numerical
trouble, and insufficiently rich data without parsing messages.
"""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from ddlqr.bench import (
    run_monte_carlo,
    run_reactor,
    results_to_csv,
    summarize,
    trajectory_to_csv,
)
from ddlqr.errors import (
    ConvergenceError,
    DataRichnessError,
    DdlqrError,
    DegenerateSolutionError,
    DefinitenessError,
)
from ddlqr.excitation import (
    ExperimentRecord,
    collect_experiment,
    pe_input,
    pe_order_check,
    rank_condition,
)
from ddlqr.lti import CostWeights, LtiSystem
from ddlqr.programs import (
    build_dd_program,
    build_mb_program,
    recover_gains_dd,
    recover_gains_mb,
    solve_program,
)
from ddlqr.riccati import (
    covariance_recursion,
    dare_fixed_point,
    expected_cost,
    riccati_recursion,
)


class SystemModel(BaseModel):
    n: int | None = None
    m: int | None = None
    A: list[list[float]]
    B: list[list[float]]

    def to_system(self) -> LtiSystem:
        sys = LtiSystem(A=np.asarray(self.A, dtype=float), B=np.asarray(self.B, dtype=float))
        if self.n is not None and self.n != sys.n:
            raise DataError(f"declared n={self.n} but A is {sys.A.shape}")
        if self.m is not None and self.m != sys.m:
            raise DataError(f"declared m={self.m} but B is {sys.B.shape}")
        return sys


class WeightsModel(BaseModel):
    Qx: list[list[float]]
    Qf: list[list[float]]
    R: list[list[float]]
    N: int

    def to_weights(self) -> CostWeights:
        return CostWeights(
            Qx=np.asarray(self.Qx, dtype=float),
            Qf=np.asarray(self.Qf, dtype=float),
            R=np.asarray(self.R, dtype=float),
            N=self.N,
        )


class ExperimentModel(BaseModel):
    T: int | None = None
    U0T: list[list[float]]
    X0T: list[list[float]]
    X1T: list[list[float]]

    def to_record(self) -> ExperimentRecord:
        return ExperimentRecord(
            U0T=np.asarray(self.U0T, dtype=float),
            X0T=np.asarray(self.X0T, dtype=float),
            X1T=np.asarray(self.X1T, dtype=float),
        )

    @classmethod
    def from_record(cls, rec: ExperimentRecord) -> "ExperimentModel":
        return cls(T=rec.T, U0T=rec.U0T.tolist(), X0T=rec.X0T.tolist(), X1T=rec.X1T.tolist())


class CollectRequest(BaseModel):
    system: SystemModel
    T: int
    seed: int = 0


class CollectResponse(BaseModel):
    experiment: ExperimentModel
    pe_order_ok: bool
    rank_ok: bool


class SolveRequest(BaseModel):
    mode: str = Field(pattern="^(mb|dd)$")
    weights: WeightsModel
    system: SystemModel | None = None
    experiment: ExperimentModel | None = None
    tolerances: list[float] | None = None


class SolveResponse(BaseModel):
    mode: str
    gains: list[list[list[float]]]
    objective: float
    gap: float
    iters: int


class RiccatiRequest(BaseModel):
    system: SystemModel
    weights: WeightsModel


class RiccatiResponse(BaseModel):
    gains: list[list[list[float]]]
    P: list[list[list[float]]]
    expected_cost: float
    dare_gain: list[list[float]]


class MonteCarloRequest(BaseModel):
    trials: int = 100
    n: int = 3
    m: int = 1
    T: int = 15
    N: int = 10
    weights: WeightsModel | None = None
    seed: int = 0


class MonteCarloResponse(BaseModel):
    summary: dict
    csv: str


class ReactorRequest(BaseModel):
    T: int | None = None
    N: int | None = None
    seed: int = 0


class ReactorResponse(BaseModel):
    status: str
    J_mb: float
    J_dd: float
    abs_cost_err: float
    max_gain_err: float
    mean_gain_err: float
    gains_dd: list[list[list[float]]]
    trajectory_csv: str


class DataError(DdlqrError):
    """Request payload is structurally valid but semantically wrong."""


app = FastAPI(title="ddlqr", description=__doc__)

_NUMERICAL = (ConvergenceError, DegenerateSolutionError, DefinitenessError)


@app.exception_handler(DdlqrError)
def _ddlqr_error(request: Request, exc: DdlqrError) -> JSONResponse:
    if isinstance(exc, DataRichnessError):
        kind, status = "data_richness", 422
    elif isinstance(exc, _NUMERICAL):
        kind, status = "numerical", 409
    else:
        kind, status = "usage", 400
    return JSONResponse(
        status_code=status,
        content={"kind": kind, "error": type(exc).__name__, "detail": str(exc)},
    )


@app.get("/health")
def health() -> dict:
    return {"status": "ok"}


@app.post("/collect", response_model=CollectResponse)
def collect(req: CollectRequest) -> CollectResponse:
    sys = req.system.to_system()
    rng = np.random.default_rng(req.seed)
    inputs = pe_input(sys.m, req.T, rng)
    rec = collect_experiment(sys, rng.standard_normal(sys.n), inputs)
    return CollectResponse(
        experiment=ExperimentModel.from_record(rec),
        pe_order_ok=pe_order_check(inputs, sys.n + 1),
        rank_ok=rank_condition(rec),
    )


@app.post("/solve", response_model=SolveResponse)
def solve_lqr(req: SolveRequest) -> SolveResponse:
    w = req.weights.to_weights()
    kwargs = {} if req.tolerances is None else {"tolerances": tuple(req.tolerances)}
    if req.mode == "mb":
        if req.system is None:
            raise DataError("mode 'mb' requires a system")
        prob, vars_ = build_mb_program(req.system.to_system(), w)
        sol = recover_gains_mb(solve_program(prob, **kwargs), vars_, req.system.to_system(), w)
    else:
        if req.experiment is None:
            raise DataError("mode 'dd' requires experiment data")
        rec = req.experiment.to_record()
        prob, vars_ = build_dd_program(rec, w)
        sol = recover_gains_dd(solve_program(prob, **kwargs), vars_, rec, w)
    return SolveResponse(
        mode=req.mode,
        gains=[np.asarray(K).tolist() for K in sol.gains],
        objective=sol.objective,
        gap=float(sol.diagnostics["gap"]),
        iters=int(sol.diagnostics["iterations"]),
    )


@app.post("/riccati", response_model=RiccatiResponse)
def riccati(req: RiccatiRequest) -> RiccatiResponse:
    sys = req.system.to_system()
    w = req.weights.to_weights()
    sol = riccati_recursion(sys, w)
    cost = expected_cost(w, covariance_recursion(sys, w, sol.K))
    dare_P, dare_K = dare_fixed_point(sys, w.Qx, w.R)
    return RiccatiResponse(
        gains=[K.tolist() for K in sol.K],
        P=[P.tolist() for P in sol.P],
        expected_cost=cost,
        dare_gain=dare_K.tolist(),
    )


@app.post("/montecarlo", response_model=MonteCarloResponse)
def montecarlo(req: MonteCarloRequest) -> MonteCarloResponse:
    w = (
        req.weights.to_weights()
        if req.weights is not None
        else CostWeights(np.eye(req.n), np.eye(req.n), np.eye(req.m), req.N)
    )
    results = run_monte_carlo(req.trials, req.n, req.m, req.T, w, base_seed=req.seed)
    return MonteCarloResponse(summary=summarize(results), csv=results_to_csv(results))


@app.post("/reactor", response_model=ReactorResponse)
def reactor(req: ReactorRequest) -> ReactorResponse:
    result, traj = run_reactor(T=req.T, N=req.N, seed=req.seed)
    if not result.ok:
        raise ConvergenceError(result.diagnostics.get("detail", result.status))
    return ReactorResponse(
        status=result.status,
        J_mb=result.J_mb,
        J_dd=result.J_dd,
        abs_cost_err=result.abs_cost_err,
        max_gain_err=result.max_gain_err,
        mean_gain_err=result.mean_gain_err,
        gains_dd=[np.asarray(K).tolist() for K in result.gains_dd],
        trajectory_csv=trajectory_to_csv(traj),
    )
