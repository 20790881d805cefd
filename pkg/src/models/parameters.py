"""
Model Parameters and Stepper Settings

This module contains the scalar Rosen-Zener pulse parameters, the preset case
labels used by the experiments, and the configuration of the reference integrators.
"""

from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class CaseLabel(str, Enum):
    """Experimental parameter cases."""
    A = "a"
    B = "b"
    C = "c"
    D = "d"


class RZParameters(BaseModel):
    """Pulse parameters of omega(t) = w0 + eps cos(delta t), v(t) = v0 / cosh(t / T0)."""

    model_config = ConfigDict(frozen=True)

    w0: float = Field(..., description="Detuning constant")
    v0: float = Field(..., description="Pulse amplitude")
    epsilon: float = Field(default=0.0, description="Chirp amplitude")
    delta: float = Field(default=0.0, description="Chirp frequency")
    T0: float = Field(..., gt=0, description="Pulse width")


class StepperMethod(str, Enum):
    """Reference integrator selection."""
    RK4 = "rk4"
    DP54 = "dp54"


class StepperConfig(BaseModel):
    """Settings of a reference time-stepping integrator."""

    model_config = ConfigDict(frozen=True)

    method: StepperMethod = Field(default=StepperMethod.DP54, description="Integrator")
    steps: Optional[int] = Field(default=None, ge=1, description="Fixed step count for rk4")
    atol: float = Field(default=1e-12, gt=0, description="Absolute tolerance for dp54")
    rtol: float = Field(default=1e-12, gt=0, description="Relative tolerance for dp54")
    dense_output: bool = Field(
        default=False,
        description="Record every accepted step instead of the final state only",
    )
    max_steps: int = Field(default=10_000_000, ge=1, description="Hard cap on accepted steps")

    @model_validator(mode="after")
    def check_steps(self) -> "StepperConfig":
        if self.method == StepperMethod.RK4 and self.steps is None:
            raise ValueError("rk4 requires a step count")
        return self
