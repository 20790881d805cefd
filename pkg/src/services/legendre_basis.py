"""
Orthonormal Legendre Basis

This module contains the Legendre machinery behind the star-product discretization:
- Gauss-Legendre quadrature rules
- Evaluation of the orthonormal basis p_k = sqrt((2k + 1) / 2) P_k and its antiderivatives
- Coefficient matrices of kernels f(t) Theta(t - s) and Legendre moments of f

All functions are pure; results are immutable and safe to share across threads.
"""

from functools import lru_cache
from typing import Callable, Optional, Union

import numpy as np
import structlog

from src.config.settings import get_settings
from src.models.discretization import CoefficientMatrix, QuadratureRule
from src.utils.error_handling import BudgetExceededError, InvalidArgumentError

logger = structlog.get_logger(__name__)

Kernel = Callable[[np.ndarray], np.ndarray]

# Rounding slack when mapping physical times onto [-1, 1]
_TAU_SLACK = 1e-12


@lru_cache(maxsize=64)
def _cached_rule(n: int) -> QuadratureRule:
    nodes, weights = np.polynomial.legendre.leggauss(n)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(nodes=nodes, weights=weights)


def gauss_legendre_rule(n: int) -> QuadratureRule:
    """Return the n-point Gauss-Legendre rule on [-1, 1]."""
    if n < 1:
        raise InvalidArgumentError(f"quadrature size must be positive, got {n}", field="n")
    return _cached_rule(int(n))


def _check_order(M: int) -> None:
    if M < 1:
        raise InvalidArgumentError(f"order M must be at least 1, got {M}", field="M")


def _check_tau(tau: Union[float, np.ndarray]) -> np.ndarray:
    tau_arr = np.asarray(tau, dtype=float)
    if np.any(~np.isfinite(tau_arr)) or np.any(np.abs(tau_arr) > 1.0 + _TAU_SLACK):
        raise InvalidArgumentError(
            "tau outside [-1, 1]; extrapolation is not supported", field="tau"
        )
    return np.clip(tau_arr, -1.0, 1.0)


def _legendre_table(n: int, tau: np.ndarray) -> np.ndarray:
    """Classical P_0 .. P_{n-1} at ``tau``, stacked on the last axis."""
    table = np.empty(tau.shape + (n,), dtype=float)
    table[..., 0] = 1.0
    if n > 1:
        table[..., 1] = tau
    for j in range(1, n - 1):
        table[..., j + 1] = ((2 * j + 1) * tau * table[..., j] - j * table[..., j - 1]) / (j + 1)
    return table


def _normalization(M: int) -> np.ndarray:
    return np.sqrt((2.0 * np.arange(M) + 1.0) / 2.0)


def eval_basis(M: int, tau: Union[float, np.ndarray]) -> np.ndarray:
    """
    Orthonormal Legendre values p_0(tau) .. p_{M-1}(tau).

    Accepts a scalar or an array of points; the basis index is the last axis.
    """
    _check_order(M)
    tau_arr = _check_tau(tau)
    return _legendre_table(M, tau_arr) * _normalization(M)


def eval_antiderivative_basis(M: int, tau: Union[float, np.ndarray]) -> np.ndarray:
    """
    Antiderivatives int_{-1}^{tau} p_l(s) ds for l = 0 .. M-1.

    Uses int_{-1}^{tau} P_l = (P_{l+1}(tau) - P_{l-1}(tau)) / (2l + 1) for l >= 1.
    """
    _check_order(M)
    tau_arr = _check_tau(tau)
    table = _legendre_table(M + 1, tau_arr)
    anti = np.empty(tau_arr.shape + (M,), dtype=float)
    anti[..., 0] = tau_arr + 1.0
    if M > 1:
        ell = np.arange(1, M)
        anti[..., 1:] = (table[..., 2 : M + 1] - table[..., 0 : M - 1]) / (2.0 * ell + 1.0)
    return anti * _normalization(M)


def default_quad_points(M: int) -> int:
    return M + get_settings().quad_margin


def _sample_kernel(f: Kernel, nodes: np.ndarray) -> np.ndarray:
    values = np.asarray(f(nodes))
    if values.ndim == 0:
        values = np.full(nodes.shape, values.item())
    if values.shape != nodes.shape:
        raise InvalidArgumentError(
            f"kernel returned shape {values.shape} for {nodes.shape[0]} nodes", field="f"
        )
    return values


def kernel_coefficient_matrix(
    f: Kernel,
    M: int,
    quad_points: Optional[int] = None,
    label: str = "",
) -> CoefficientMatrix:
    """
    Coefficient matrix of f(t) Theta(t - s) in the orthonormal Legendre basis.

    entries[k, l] = sum_q w_q f(t_q) p_k(t_q) int_{-1}^{t_q} p_l, i.e. the outer
    t-integral by Gauss-Legendre and the inner s-integral in closed form.

    Args:
        f: Vectorized scalar function on [-1, 1] (real or complex valued)
        M: Truncation order
        quad_points: Size of the outer rule, M + quad_margin by default
        label: Identifier stored with the matrix
    """
    _check_order(M)
    n = default_quad_points(M) if quad_points is None else int(quad_points)
    if n < M:
        raise BudgetExceededError(
            f"quad_points={n} below M={M} aliases the coefficient matrix",
            limit=M,
            requested=n,
        )

    rule = gauss_legendre_rule(n)
    f_values = _sample_kernel(f, rule.nodes)
    basis = eval_basis(M, rule.nodes)
    anti = eval_antiderivative_basis(M, rule.nodes)

    weighted = basis * (rule.weights * f_values)[:, None]
    entries = weighted.T @ anti
    if not np.iscomplexobj(entries):
        entries = entries.astype(float)

    logger.debug("Kernel coefficient matrix built", label=label, M=M, quad_points=n)
    return CoefficientMatrix(order=M, entries=entries, kernel_label=label)


def kernel_moments(f: Kernel, M: int, quad_points: Optional[int] = None) -> np.ndarray:
    """Legendre coefficients int f(t) p_k(t) dt for k = 0 .. M-1."""
    _check_order(M)
    n = default_quad_points(M) if quad_points is None else int(quad_points)
    if n < M:
        raise InvalidArgumentError(
            f"quad_points={n} below M={M} aliases the moments", field="quad_points"
        )
    rule = gauss_legendre_rule(n)
    f_values = _sample_kernel(f, rule.nodes)
    return eval_basis(M, rule.nodes).T @ (rule.weights * f_values)


def theta_matrix(M: int, quad_points: Optional[int] = None) -> CoefficientMatrix:
    """T_M, the coefficient matrix of Theta(t - s)."""
    return kernel_coefficient_matrix(
        lambda t: np.ones_like(t), M, quad_points=quad_points, label="theta"
    )
