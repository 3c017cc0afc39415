"""Finite-horizon LQR, solved three ways.

A classical Riccati recursion serves as ground truth for two semidefinite
programs: a model-based covariance-selection formulation and a purely
data-driven formulation built from input/state trajectory matrices. The
embedded interior-point solver handles both at desk scale.
"""

from ddlqr.lti import LtiSystem, CostWeights, Trajectory, simulate, closed_loop
from ddlqr.excitation import ExperimentRecord, collect_experiment, hankel
from ddlqr.riccati import riccati_recursion, dare_fixed_point
from ddlqr.programs import (
    build_mb_program,
    build_dd_program,
    recover_gains_mb,
    recover_gains_dd,
    solve_program,
    LqrSolution,
)
from ddlqr.bench import ReactorPreset, TrialResult, run_monte_carlo, run_reactor, summarize

__all__ = [
    "ReactorPreset",
    "TrialResult",
    "run_monte_carlo",
    "run_reactor",
    "summarize",
    "recover_gains_mb",
    "recover_gains_dd",
    "solve_program",
    "LtiSystem",
    "CostWeights",
    "Trajectory",
    "simulate",
    "closed_loop",
    "ExperimentRecord",
    "collect_experiment",
    "hankel",
    "riccati_recursion",
    "dare_fixed_point",
    "build_mb_program",
    "build_dd_program",
    "LqrSolution",
]

__version__ = "0.1.0"
