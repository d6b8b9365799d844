"""Gauss-Newton SQP with a Riccati interior-point QP backend."""

from .qp import QpStage, MultiPhaseQp, QpSolution, QpError, solve_qp
from .sqp import (SqpSettings, SolveStats, sqp_solve, warm_start_shift,
                  cold_start_guess)

__all__ = [
    "QpStage", "MultiPhaseQp", "QpSolution", "QpError", "solve_qp",
    "SqpSettings", "SolveStats", "sqp_solve", "warm_start_shift",
    "cold_start_guess",
]
