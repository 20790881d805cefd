"""
Convergence Analysis

Diagnostics for the stationary iteration x_{n+1} = A x_n + c of the star-product
solver, with

    A = -G (i (sigma1 (x) M_k) (x) V_M),   G = (I + i (sigma3 (x) I_k) (x) Omega_M)^{-1}.

Provides matrix-free application of A, Frobenius power bounds
rho(A) <= ||A^l||_F^(1/l), spectral radius estimates by Arnoldi and the structure reports
of operator solves.
"""

from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence, Tuple

import numpy as np
import structlog
from scipy.linalg import eigvals, lu_solve
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigs
from scipy.special import logsumexp

from src.config.settings import Settings, get_settings
from src.models.discretization import StarDiscretization
from src.models.results import SolutionKind, SolveStats, StructureReport
from src.services.rz_model import RZModel, apply_coupling, coupling_matrix
from src.utils.error_handling import BudgetExceededError, InvalidArgumentError, with_error_handling


def iteration_matrix_apply(disc: StarDiscretization, model: RZModel, x: np.ndarray) -> np.ndarray:
    """
    A x without forming A.

    ``x`` is the column-major vectorization of an M x N matrix, or an MN x m block
    of such vectors. The coupling (sigma1 (x) M_k) acts on the N index in O(MN),
    the two block-diagonal solves reuse the stored LU factors.
    """
    M, N = disc.M, disc.N
    if model.N != N:
        raise InvalidArgumentError(f"model has N={model.N}, discretization N={N}", field="model")
    x = np.asarray(x)
    if x.shape[0] != M * N or x.ndim > 2:
        raise InvalidArgumentError(
            f"expected a vector of length {M * N} or an {M * N} x m block, got {x.shape}",
            field="x",
        )

    X = x.reshape((M, N) + x.shape[1:], order="F")
    Y = -1j * np.tensordot(disc.v_mat.entries, X, axes=(1, 0))
    Y = apply_coupling(Y, axis=1)

    k = disc.k
    Z = np.empty_like(Y)
    upper = Y[:, :k].reshape(M, -1)
    lower = Y[:, k:].reshape(M, -1)
    Z[:, :k] = lu_solve(disc.lu_plus, upper).reshape(Y[:, :k].shape)
    Z[:, k:] = lu_solve(disc.lu_minus, lower).reshape(Y[:, k:].shape)
    return Z.reshape(x.shape, order="F")


def kronecker_blocks(disc: StarDiscretization) -> Tuple[np.ndarray, np.ndarray]:
    """C1 = i G1 V_M and C2 = i G2 V_M, so that A = -[[0, M_k (x) C1], [M_k (x) C2, 0]]."""
    V = disc.v_mat.entries.astype(complex)
    return 1j * lu_solve(disc.lu_plus, V), 1j * lu_solve(disc.lu_minus, V)


def _log_norm_power(base: np.ndarray, power: int, tail: Optional[np.ndarray] = None) -> float:
    """log ||base^power @ tail||_F with per-step normalization."""
    product = np.eye(base.shape[0], dtype=base.dtype)
    log_scale = 0.0
    for _ in range(power):
        product = product @ base
        scale = np.linalg.norm(product)
        if scale == 0.0:
            return -np.inf
        product /= scale
        log_scale += np.log(scale)
    if tail is not None:
        product = product @ tail
    final = np.linalg.norm(product)
    if final == 0.0:
        return -np.inf
    return log_scale + float(np.log(final))


def linear_regression(x: Sequence[float], y: Sequence[float]) -> Tuple[float, float, float]:
    """Least-squares slope, intercept and R^2 of y against x."""
    x_arr = np.asarray(x, dtype=float)
    y_arr = np.asarray(y, dtype=float)
    if x_arr.size < 2:
        raise InvalidArgumentError("regression needs at least two points", field="x")
    slope, intercept = np.polyfit(x_arr, y_arr, 1)
    residual = y_arr - (slope * x_arr + intercept)
    total = np.sum((y_arr - y_arr.mean()) ** 2)
    r2 = 1.0 - float(np.sum(residual**2) / total) if total > 0 else 1.0
    return float(slope), float(intercept), r2


def observed_tail_ratio(error_estimates: Sequence[float], tail: int = 5) -> float:
    """Geometric mean of the last ``tail`` ratios e_n / e_{n-1} of an error sequence."""
    errors = np.asarray([e for e in error_estimates if e > 0 and np.isfinite(e)], dtype=float)
    if errors.size < 2:
        return float("nan")
    ratios = errors[1:] / errors[:-1]
    return float(np.exp(np.mean(np.log(ratios[-tail:]))))


class ConvergenceAnalyzer:
    """Spectral radius, Frobenius bounds and structure reports."""

    def __init__(self, settings: Optional[Settings] = None):
        self.settings = settings or get_settings()
        self.logger = structlog.get_logger(__name__)

    def dense_iteration_matrix(self, disc: StarDiscretization, model: RZModel) -> np.ndarray:
        """Explicit A for small systems (verification only)."""
        size = disc.M * disc.N
        if size > self.settings.eig_budget:
            raise BudgetExceededError(
                f"dense iteration matrix of size {size} exceeds the budget",
                limit=self.settings.eig_budget,
                requested=size,
            )
        k = disc.k
        identity = np.eye(disc.M)
        G1 = lu_solve(disc.lu_plus, identity)
        G2 = lu_solve(disc.lu_minus, identity)
        D1 = np.diag(np.r_[np.ones(k), np.zeros(k)])
        D2 = np.eye(disc.N) - D1
        S1M = np.kron(np.array([[0.0, 1.0], [1.0, 0.0]]), coupling_matrix(k))
        G = np.kron(D1, G1) + np.kron(D2, G2)
        return G @ (-1j * np.kron(S1M, disc.v_mat.entries))

    @with_error_handling("convergence_analysis", "frobenius_power_bound")
    def frobenius_power_bound(
        self,
        disc: StarDiscretization,
        model: RZModel,
        ell: int,
        method: str = "kronecker",
        workers: Optional[int] = None,
    ) -> float:
        """
        ||A^ell||_F^(1/ell), an upper bound on rho(A) for every ell >= 1.

        Args:
            disc: Discretization holding V_M and the (I +/- i Omega_M) factors
            model: Model matching the discretization
            ell: Power
            method: "kronecker" (products of M_k and M x M blocks) or "columns"
                (ell matrix-free applications per canonical vector, threaded)
            workers: Thread pool size for "columns"
        """
        if ell < 1:
            raise InvalidArgumentError(f"ell must be at least 1, got {ell}", field="ell")
        if method == "kronecker":
            log_norm = self._log_frobenius_kronecker(disc, ell)
        elif method == "columns":
            log_norm = self._log_frobenius_columns(disc, model, ell, workers)
        else:
            raise InvalidArgumentError(f"unknown method {method!r}", field="method")

        bound = 0.0 if not np.isfinite(log_norm) else float(np.exp(log_norm / ell))
        self.logger.debug(
            "Frobenius power bound", case=disc.case_label, M=disc.M, N=disc.N, ell=ell,
            method=method, bound=bound,
        )
        return bound

    def _log_frobenius_kronecker(self, disc: StarDiscretization, ell: int) -> float:
        C1, C2 = kronecker_blocks(disc)
        half, odd = divmod(ell, 2)
        log_coupling = _log_norm_power(coupling_matrix(disc.k), ell)
        if odd:
            log_a = _log_norm_power(C1 @ C2, half, tail=C1)
            log_b = _log_norm_power(C2 @ C1, half, tail=C2)
        else:
            log_a = _log_norm_power(C1 @ C2, half)
            log_b = _log_norm_power(C2 @ C1, half)
        log_blocks = 0.5 * float(np.logaddexp(2.0 * log_a, 2.0 * log_b))
        return log_coupling + log_blocks

    def _log_frobenius_columns(
        self, disc: StarDiscretization, model: RZModel, ell: int, workers: Optional[int]
    ) -> float:
        size = disc.M * disc.N
        workers = workers or self.settings.frobenius_workers
        chunk = max(1, min(64, size // max(workers, 1) or 1))
        starts = list(range(0, size, chunk))

        def column_log_norms(start: int) -> np.ndarray:
            stop = min(start + chunk, size)
            block = np.zeros((size, stop - start), dtype=complex)
            block[np.arange(start, stop), np.arange(stop - start)] = 1.0
            log_scale = np.zeros(stop - start)
            alive = np.ones(stop - start, dtype=bool)
            for _ in range(ell):
                block = iteration_matrix_apply(disc, model, block)
                norms = np.linalg.norm(block, axis=0)
                alive &= norms > 0
                safe = np.where(norms > 0, norms, 1.0)
                block /= safe
                log_scale += np.log(safe)
            return np.where(alive, 2.0 * log_scale, -np.inf)

        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts: List[np.ndarray] = list(pool.map(column_log_norms, starts))

        squared = np.concatenate(parts)
        if not np.isfinite(squared).any():
            return -np.inf
        return 0.5 * float(logsumexp(squared))

    def spectral_radius_kronecker(self, disc: StarDiscretization) -> float:
        """rho(A) = 2 cos(pi / (k + 1)) sqrt(rho(C1 C2))."""
        if disc.k == 1:
            return 0.0
        C1, C2 = kronecker_blocks(disc)
        rho_blocks = float(np.max(np.abs(eigvals(C1 @ C2))))
        return 2.0 * np.cos(np.pi / (disc.k + 1)) * np.sqrt(rho_blocks)

    @with_error_handling("convergence_analysis", "spectral_radius_small")
    def spectral_radius_small(
        self,
        disc: StarDiscretization,
        model: RZModel,
        tol: Optional[float] = None,
        seed: Optional[int] = None,
    ) -> Tuple[float, bool]:
        """
        Dominant eigenvalue magnitude of A by implicitly restarted Arnoldi.

        The eigenvalues of A come in +/- pairs and complex-conjugate pairs with a
        dominant cluster from the spectrum of M_k, so ``eig_block_size`` Ritz pairs
        are resolved at once. Convergence is judged on the residual
        ||A z - lambda z|| <= tol |lambda| of the dominant Ritz pair.
        Returns the estimate and whether it met ``tol`` within the matvec cap.
        """
        size = disc.M * disc.N
        budget = self.settings.eig_budget
        if size > budget:
            raise BudgetExceededError(
                f"M*N={size} exceeds the eigencomputation budget {budget}",
                limit=budget,
                requested=size,
            )
        tol = self.settings.power_iteration_tol if tol is None else tol
        rng = np.random.default_rng(self.settings.seed if seed is None else seed)
        start = rng.standard_normal(size) + 1j * rng.standard_normal(size)
        if not np.any(iteration_matrix_apply(disc, model, start)):
            return 0.0, True

        nev = min(max(self.settings.eig_block_size, 4), size - 2)
        if nev < 1:
            values = eigvals(self.dense_iteration_matrix(disc, model))
            return float(np.max(np.abs(values))), True

        ncv = min(size, max(2 * nev + 1, 40))
        operator = LinearOperator(
            (size, size),
            matvec=lambda x: iteration_matrix_apply(disc, model, x),
            dtype=complex,
        )
        max_restarts = max(1, self.settings.power_iteration_max_matvecs // ncv)
        try:
            values, vectors = eigs(
                operator, k=nev, which="LM", v0=start, ncv=ncv, maxiter=max_restarts,
                tol=0.1 * tol,
            )
        except ArpackNoConvergence as e:
            values, vectors = e.eigenvalues, e.eigenvectors
            if values is None or len(values) == 0:
                self.logger.warning(
                    "Spectral radius did not converge", case=disc.case_label, M=disc.M,
                    N=disc.N, restarts=max_restarts,
                )
                return float("nan"), False

        top = int(np.argmax(np.abs(values)))
        rho = float(np.abs(values[top]))
        z = vectors[:, top]
        residual = float(
            np.linalg.norm(iteration_matrix_apply(disc, model, z) - values[top] * z)
        )
        converged = residual <= tol * max(rho, np.finfo(float).tiny) * np.linalg.norm(z)
        log = self.logger.info if converged else self.logger.warning
        log(
            "Spectral radius computed", case=disc.case_label, M=disc.M, N=disc.N, rho=rho,
            residual=residual, converged=converged,
        )
        return rho, bool(converged)

    def spectral_norm(
        self, E: np.ndarray, max_iter: int = 500, tol: float = 1e-10, seed: int = 0
    ) -> float:
        """||E||_2, dense below the cap, power iteration on E^H E above it."""
        E = np.asarray(E)
        if max(E.shape) <= self.settings.dense_cap:
            return float(np.linalg.norm(E, 2))

        rng = np.random.default_rng(seed)
        x = rng.standard_normal(E.shape[1]) + 1j * rng.standard_normal(E.shape[1])
        x /= np.linalg.norm(x)
        value = 0.0
        for _ in range(max_iter):
            y = E.conj().T @ (E @ x)
            norm = float(np.linalg.norm(y))
            if norm == 0.0:
                return 0.0
            x = y / norm
            if abs(norm - value) < tol * norm:
                value = norm
                break
            value = norm
        return float(np.sqrt(value))

    def structure_report(self, stats: SolveStats) -> StructureReport:
        """Per-iteration rank, nnz(R) and bandwidth of an operator solve, with violations."""
        if stats.kind != SolutionKind.OPERATOR:
            raise InvalidArgumentError("structure reports need an operator solve", field="stats")

        report = StructureReport(
            M=stats.M,
            N=stats.N,
            ranks=[1],
            nnz=[stats.initial_nnz if stats.initial_nnz is not None else stats.N],
            bandwidths=[0],
            iteration_times=[0.0],
            discretization_time=stats.discretization_time,
        )
        for record in stats.trace:
            report.ranks.append(record.rank)
            report.nnz.append(record.nnz or 0)
            report.bandwidths.append(record.bandwidth or 0)
            report.iteration_times.append(record.wall_time)
            if (record.bandwidth or 0) > record.iteration + 1:
                report.bandwidth_violations.append(record.iteration)
            if record.rank > stats.M:
                report.rank_violations.append(record.iteration)

        if not report.ok:
            self.logger.warning(
                "Structure violations recorded",
                M=stats.M,
                N=stats.N,
                bandwidth_violations=report.bandwidth_violations,
                rank_violations=report.rank_violations,
            )
        return report
