"""
Generalized Rosen-Zener Model

This module defines the Hamiltonian

    H(t) = omega(t) sigma3 (x) I_k + v(t) sigma1 (x) M_k,   N = 2k,

with M_k the k x k tridiagonal matrix of unit off-diagonals, the four
experimental parameter presets, the rescaling of the interval onto [-1, 1],
and O(N) application of H(t) used by the reference integrators.
"""

from dataclasses import dataclass
from typing import Callable, Tuple, Union

import numpy as np

from src.config.settings import get_settings
from src.models.parameters import CaseLabel, RZParameters
from src.utils.error_handling import BudgetExceededError, InvalidArgumentError

ArrayLike = Union[float, np.ndarray]

_PRESETS = {
    CaseLabel.A: RZParameters(w0=5.0, v0=0.5, epsilon=0.0, delta=0.0, T0=10.0),
    CaseLabel.B: RZParameters(w0=5.0, v0=0.5, epsilon=0.1, delta=0.1, T0=5.0),
    CaseLabel.C: RZParameters(w0=5.0, v0=0.5, epsilon=0.5, delta=1.0, T0=5.0),
    CaseLabel.D: RZParameters(w0=5.0, v0=0.5, epsilon=2.0, delta=5.0, T0=1.0),
}


def preset_case(label: Union[str, CaseLabel]) -> RZParameters:
    """Parameters of experimental case (a), (b), (c) or (d)."""
    try:
        key = CaseLabel(str(getattr(label, "value", label)).strip().lower())
    except ValueError:
        raise InvalidArgumentError(f"unknown case label {label!r}", field="label") from None
    return _PRESETS[key]


def omega(params: RZParameters, t: ArrayLike) -> ArrayLike:
    """Detuning omega(t) = w0 + eps cos(delta t)."""
    return params.w0 + params.epsilon * np.cos(params.delta * np.asarray(t, dtype=float))


def v(params: RZParameters, t: ArrayLike) -> ArrayLike:
    """Pulse v(t) = v0 / cosh(t / T0)."""
    return params.v0 / np.cosh(np.asarray(t, dtype=float) / params.T0)


def coupling_shift(x: np.ndarray, axis: int = 0) -> np.ndarray:
    """M_k x along ``axis``: y[i] = x[i - 1] + x[i + 1]."""
    x = np.moveaxis(np.asarray(x), axis, 0)
    y = np.zeros_like(x)
    y[:-1] += x[1:]
    y[1:] += x[:-1]
    return np.moveaxis(y, 0, axis)


def apply_coupling(x: np.ndarray, axis: int = 0) -> np.ndarray:
    """(sigma1 (x) M_k) x along ``axis``."""
    x = np.moveaxis(np.asarray(x), axis, 0)
    k = x.shape[0] // 2
    y = np.empty_like(x)
    y[:k] = coupling_shift(x[k:])
    y[k:] = coupling_shift(x[:k])
    return np.moveaxis(y, 0, axis)


def apply_sign(x: np.ndarray, axis: int = 0) -> np.ndarray:
    """(sigma3 (x) I_k) x along ``axis``."""
    x = np.moveaxis(np.asarray(x), axis, 0)
    k = x.shape[0] // 2
    y = x.copy()
    y[k:] *= -1
    return np.moveaxis(y, 0, axis)


def coupling_matrix(k: int) -> np.ndarray:
    """Dense M_k."""
    return np.eye(k, k=1) + np.eye(k, k=-1)


@dataclass(frozen=True)
class RZModel:
    """Generalized Rosen-Zener Hamiltonian of size N = 2k on [t0, tf]."""

    params: RZParameters
    k: int
    t0: float
    tf: float
    label: str = ""

    def __post_init__(self) -> None:
        if self.k < 1:
            raise InvalidArgumentError(f"k must be at least 1, got {self.k}", field="k")
        if not self.tf > self.t0:
            raise InvalidArgumentError(
                f"interval must satisfy t0 < tf, got [{self.t0}, {self.tf}]", field="tf"
            )

    @classmethod
    def from_case(
        cls,
        label: Union[str, CaseLabel],
        N: int,
        t0: float | None = None,
        tf: float | None = None,
    ) -> "RZModel":
        """Build a preset model for system size N (even)."""
        if N < 2 or N % 2:
            raise InvalidArgumentError(f"N must be even and at least 2, got {N}", field="N")
        settings = get_settings()
        params = preset_case(label)
        return cls(
            params=params,
            k=N // 2,
            t0=settings.default_t0 if t0 is None else t0,
            tf=settings.default_tf if tf is None else tf,
            label=str(getattr(label, "value", label)).strip().lower(),
        )

    @property
    def N(self) -> int:
        return 2 * self.k

    @property
    def half_length(self) -> float:
        return 0.5 * (self.tf - self.t0)

    def omega(self, t: ArrayLike) -> ArrayLike:
        return omega(self.params, t)

    def v(self, t: ArrayLike) -> ArrayLike:
        return v(self.params, t)

    def to_time(self, tau: ArrayLike) -> ArrayLike:
        """Map tau in [-1, 1] onto [t0, tf]."""
        return self.t0 + (np.asarray(tau, dtype=float) + 1.0) * self.half_length

    def rescaled_kernels(
        self,
    ) -> Tuple[Callable[[np.ndarray], np.ndarray], Callable[[np.ndarray], np.ndarray]]:
        """
        Kernels on [-1, 1] with the Jacobian (tf - t0) / 2 absorbed.

        The rescaled ODE on [-1, 1] then has the same solution values at mapped times.
        """
        scale = self.half_length

        def omega_tilde(tau: np.ndarray) -> np.ndarray:
            return scale * np.asarray(self.omega(self.to_time(tau)))

        def v_tilde(tau: np.ndarray) -> np.ndarray:
            return scale * np.asarray(self.v(self.to_time(tau)))

        return omega_tilde, v_tilde

    def apply_coupling(self, x: np.ndarray) -> np.ndarray:
        return apply_coupling(x)

    def apply_sign(self, x: np.ndarray) -> np.ndarray:
        return apply_sign(x)

    def apply_hamiltonian(self, t: float, x: np.ndarray) -> np.ndarray:
        """
        H(t) x in O(N) work per column.

        ``x`` may be a vector of length N or an N x m block of columns.
        """
        x = np.asarray(x)
        if x.shape[0] != self.N:
            raise InvalidArgumentError(
                f"state has leading dimension {x.shape[0]}, expected {self.N}", field="x"
            )
        return self.omega(t) * apply_sign(x) + self.v(t) * apply_coupling(x)

    def coupling_matrix(self) -> np.ndarray:
        return coupling_matrix(self.k)

    def dense_hamiltonian(self, t: float, dense_cap: int | None = None) -> np.ndarray:
        """Explicit Hermitian H(t); refused above the dense cap."""
        cap = get_settings().dense_cap if dense_cap is None else dense_cap
        if self.N > cap:
            raise BudgetExceededError(
                f"dense Hamiltonian of size {self.N} exceeds the cap {cap}",
                limit=cap,
                requested=self.N,
            )
        sigma3 = np.diag([1.0, -1.0])
        sigma1 = np.array([[0.0, 1.0], [1.0, 0.0]])
        H = self.omega(t) * np.kron(sigma3, np.eye(self.k)) + self.v(t) * np.kron(
            sigma1, self.coupling_matrix()
        )
        return H.astype(complex)
