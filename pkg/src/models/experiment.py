"""
Experiment Configuration Models

This module contains the configuration of a benchmark run, its validation,
and the tabular result handed to the result writer.
"""

from enum import Enum
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from src.models.discretization import RHSMode
from src.models.parameters import CaseLabel


class ExperimentName(str, Enum):
    """Benchmark commands."""
    EXP1 = "exp1"
    EXP2 = "exp2"
    EXP3 = "exp3"
    EXP4 = "exp4"
    SPECTRUM = "spectrum"
    PROPERTIES = "properties"
    ESTIMATOR = "estimator"


class SolverName(str, Enum):
    """Solver selection."""
    STAR = "star"
    RK4 = "rk4"
    DP54 = "dp54"


class OutputFormat(str, Enum):
    """Result file format."""
    CSV = "csv"
    JSON = "json"


class SweepPoint(BaseModel):
    """One star setting of a work-precision sweep."""

    M: int = Field(..., ge=2, description="Truncation order")
    tol: float = Field(..., gt=0, description="Stopping tolerance")
    trunc: float = Field(..., ge=0, description="Truncation threshold")


class ExperimentConfig(BaseModel):
    """Full configuration of one benchmark run; echoed into the result metadata."""

    # Selection
    experiment: ExperimentName = Field(..., description="Benchmark command")
    case: CaseLabel = Field(default=CaseLabel.A, description="Parameter case")
    N: Optional[List[int]] = Field(
        default=None, description="System sizes, per experiment if unset"
    )
    M: Optional[int] = Field(default=None, ge=2, description="Truncation order, per case if unset")

    # Interval
    t0: Optional[float] = Field(default=None, description="Initial time, from settings if unset")
    tf: Optional[float] = Field(default=None, description="Final time, from settings if unset")

    # Solver
    tol: Optional[float] = Field(default=None, gt=0, description="Stopping tolerance")
    trunc: Optional[float] = Field(default=None, ge=0, description="Truncation threshold")
    max_iter: Optional[int] = Field(default=None, ge=1, description="Iteration cap")
    solver: SolverName = Field(
        default=SolverName.STAR,
        description="Method under test (exp1) or baseline method (exp2-exp4, star means rk4)",
    )
    rhs_mode: Optional[RHSMode] = Field(default=None, description="Right-hand side variant")

    # Experiment specifics
    ell: List[int] = Field(
        default_factory=lambda: [2, 4, 8, 16, 32, 64, 128, 256],
        description="Powers for the Frobenius bounds",
    )
    sweep: Optional[List[SweepPoint]] = Field(
        default=None, description="Star settings of the work-precision sweep"
    )
    steps: List[int] = Field(default_factory=list, description="RK4 step counts")
    rtols: List[float] = Field(default_factory=list, description="DP54 tolerances")
    lengths: List[float] = Field(
        default_factory=lambda: [25.1, 50.2, 100.5], description="Interval lengths for exp4"
    )
    samples: int = Field(default=201, ge=2, description="Sample times for exp1")
    frobenius_method: Literal["kronecker", "columns"] = Field(
        default="kronecker", description="Evaluation of ||A^l||_F"
    )
    baseline: bool = Field(default=True, description="Time the baseline integrator")

    # Run control
    seed: int = Field(default=0, ge=0, description="Random seed")
    repeats: int = Field(default=3, ge=1, description="Timing repetitions")
    parallel: bool = Field(default=False, description="Run untimed cells concurrently")
    out: Optional[str] = Field(default=None, description="Output path")
    format: OutputFormat = Field(default=OutputFormat.CSV, description="Output format")

    @field_validator("N")
    @classmethod
    def check_sizes(cls, v: Optional[List[int]]) -> Optional[List[int]]:
        if v is None:
            return v
        if not v:
            raise ValueError("at least one N is required")
        for n in v:
            if n < 2 or n % 2:
                raise ValueError(f"N must be even and at least 2, got {n}")
        return v

    @field_validator("ell")
    @classmethod
    def check_powers(cls, v: List[int]) -> List[int]:
        if any(e < 1 for e in v):
            raise ValueError("powers must be at least 1")
        return v

    @field_validator("steps")
    @classmethod
    def check_steps(cls, v: List[int]) -> List[int]:
        if any(s < 1 for s in v):
            raise ValueError("step counts must be positive")
        return v

    @field_validator("rtols", "lengths")
    @classmethod
    def check_positive(cls, v: List[float]) -> List[float]:
        if any(x <= 0 for x in v):
            raise ValueError("values must be positive")
        return v

    @model_validator(mode="after")
    def check_interval(self) -> "ExperimentConfig":
        if self.t0 is not None and self.tf is not None and not self.t0 < self.tf:
            raise ValueError(f"t0 must precede tf, got t0={self.t0}, tf={self.tf}")
        if self.experiment == ExperimentName.EXP2 and self.N and self.N != sorted(self.N):
            raise ValueError("exp2 requires an ascending N list")
        return self


class ExperimentResult(BaseModel):
    """Rows of one run plus the metadata written ahead of them."""

    experiment: ExperimentName = Field(..., description="Benchmark command")
    columns: List[str] = Field(..., description="Column order of the rows")
    rows: List[Dict[str, Any]] = Field(default_factory=list, description="Data rows")
    metadata: Dict[str, Any] = Field(default_factory=dict, description="Run summary")
