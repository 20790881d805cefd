"""
Discretization Data Structures

This module contains the immutable containers produced by the Legendre
discretization and consumed by the low-rank solvers:
- QuadratureRule and CoefficientMatrix from the basis machinery
- StarDiscretization, the assembled truncated system with stored factorizations
- LowRankFactors, the factor pair of an iterate
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Tuple, Union

import numpy as np
from scipy.linalg import lu_solve

if TYPE_CHECKING:
    from src.services.banded_blocks import BandedBlocks


class RHSMode(str, Enum):
    """Right-hand side of the truncated matrix equation."""
    PLAIN = "plain"
    CONSISTENT = "consistent"


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Gauss-Legendre nodes and weights on [-1, 1]."""

    nodes: np.ndarray
    weights: np.ndarray

    @property
    def size(self) -> int:
        return int(self.nodes.shape[0])

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Apply the rule along the first axis of ``values`` sampled at the nodes."""
        return np.tensordot(self.weights, values, axes=(0, 0))


@dataclass(frozen=True, eq=False)
class CoefficientMatrix:
    """M x M Legendre coefficients of a kernel f(t) Theta(t - s)."""

    order: int
    entries: np.ndarray
    kernel_label: str = ""

    def __post_init__(self) -> None:
        if self.entries.shape != (self.order, self.order):
            raise ValueError(
                f"entries shape {self.entries.shape} does not match order {self.order}"
            )
        self.entries.setflags(write=False)

    def leading(self, m: int) -> "CoefficientMatrix":
        """Leading principal m x m submatrix."""
        return CoefficientMatrix(
            order=m, entries=self.entries[:m, :m].copy(), kernel_label=self.kernel_label
        )


LUFactors = Tuple[np.ndarray, np.ndarray]


@dataclass(frozen=True, eq=False)
class StarDiscretization:
    """
    Truncated star-product discretization on the rescaled interval [-1, 1].

    ``lu_plus`` and ``lu_minus`` hold the LU factorizations of (I + i Omega_M) and
    (I - i Omega_M); ``omega_moments`` and ``v_moments`` are the Legendre
    coefficients of the rescaled kernels, used by the consistent right-hand side.
    """

    M: int
    N: int
    t0: float
    tf: float
    omega_mat: CoefficientMatrix
    v_mat: CoefficientMatrix
    theta_mat: CoefficientMatrix
    lu_plus: LUFactors
    lu_minus: LUFactors
    phi_minus1: np.ndarray
    omega_moments: np.ndarray
    v_moments: np.ndarray
    rhs_mode: RHSMode = RHSMode.CONSISTENT
    case_label: str = ""
    build_time: float = field(default=0.0, compare=False)

    @property
    def k(self) -> int:
        return self.N // 2

    @property
    def half_length(self) -> float:
        """Jacobian (tf - t0) / 2 of the interval map."""
        return 0.5 * (self.tf - self.t0)

    def solve_plus(self, y: np.ndarray) -> np.ndarray:
        """Apply G1 = (I + i Omega_M)^{-1} to the rows of ``y``."""
        return lu_solve(self.lu_plus, y)

    def solve_minus(self, y: np.ndarray) -> np.ndarray:
        """Apply G2 = (I - i Omega_M)^{-1} to the rows of ``y``."""
        return lu_solve(self.lu_minus, y)

    def to_tau(self, t: Union[float, np.ndarray]) -> np.ndarray:
        """Affine map from [t0, tf] onto [-1, 1]."""
        return (2.0 * (np.asarray(t, dtype=float) - self.t0) / (self.tf - self.t0)) - 1.0


@dataclass
class LowRankFactors:
    """Factor pair X ~ L R^T of an iterate; R is banded-block storage for operator solves."""

    left: np.ndarray
    right: Union[np.ndarray, "BandedBlocks"]

    @property
    def rank(self) -> int:
        return int(self.left.shape[1])
