"""
Solver Results and Diagnostics

This module contains the records emitted by the low-rank solvers and the
structure diagnostics built from them.
"""

from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, Field


class SolutionKind(str, Enum):
    """Kind of solution held by a handle."""
    VECTOR = "vector"
    OPERATOR = "operator"


class IterationTrace(BaseModel):
    """One fixed-point iteration."""

    iteration: int = Field(..., ge=1, description="1-based iteration index")
    error_estimate: float = Field(..., description="Cheap estimate ||b - b_old||_2")
    rank: int = Field(..., ge=1, description="Rank kept after truncation")
    rank_before_truncation: int = Field(..., ge=1, description="Columns of L before truncation")
    wall_time: float = Field(default=0.0, description="Seconds spent in this iteration")
    nnz: Optional[int] = Field(default=None, description="Nonzeros of R (operator solves)")
    bandwidth: Optional[int] = Field(
        default=None, description="Maximal sub-block bandwidth of R (operator solves)"
    )
    true_error: Optional[float] = Field(
        default=None, description="||b - b_ref||_2 when a reference is supplied"
    )


class SolveStats(BaseModel):
    """Summary of one low-rank solve."""

    kind: SolutionKind = Field(..., description="Vector or operator solve")
    M: int = Field(..., description="Truncation order")
    N: int = Field(..., description="System size")
    tol: float = Field(..., description="Stopping tolerance")
    trunc: float = Field(..., description="Truncation threshold")
    converged: bool = Field(default=False, description="Estimate fell below tol")
    stagnated: bool = Field(default=False, description="Estimate stopped decreasing")
    wall_time: float = Field(default=0.0, description="Seconds in the iteration loop")
    discretization_time: float = Field(default=0.0, description="Seconds spent in discretize")
    initial_nnz: Optional[int] = Field(default=None, description="Nonzeros of the initial R")
    trace: List[IterationTrace] = Field(default_factory=list, description="Per-iteration records")

    @property
    def iterations(self) -> int:
        return len(self.trace)

    @property
    def error_estimates(self) -> List[float]:
        return [t.error_estimate for t in self.trace]

    @property
    def ranks(self) -> List[int]:
        return [t.rank for t in self.trace]

    @property
    def max_rank(self) -> int:
        return max(self.ranks, default=1)

    @property
    def final_error_estimate(self) -> float:
        return self.trace[-1].error_estimate if self.trace else float("nan")

    @property
    def total_time(self) -> float:
        return self.discretization_time + self.wall_time


class StructureReport(BaseModel):
    """Per-iteration structure of an operator solve."""

    M: int = Field(..., description="Truncation order")
    N: int = Field(..., description="System size")
    ranks: List[int] = Field(default_factory=list, description="Rank r per iteration")
    nnz: List[int] = Field(default_factory=list, description="Nonzeros of R per iteration")
    bandwidths: List[int] = Field(default_factory=list, description="Max bandwidth per iteration")
    iteration_times: List[float] = Field(default_factory=list, description="Seconds per iteration")
    discretization_time: float = Field(default=0.0, description="Seconds spent in discretize")
    bandwidth_violations: List[int] = Field(
        default_factory=list, description="Iterations whose bandwidth exceeded iteration + 1"
    )
    rank_violations: List[int] = Field(
        default_factory=list, description="Iterations whose rank exceeded M"
    )

    @property
    def ok(self) -> bool:
        return not self.bandwidth_violations and not self.rank_violations
