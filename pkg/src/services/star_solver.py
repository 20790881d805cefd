"""
Star-Product Low-Rank Solver

This module assembles the truncated Legendre discretization of the Rosen-Zener
dynamics and solves the resulting matrix equation

    X + i Omega_M X S3 + i V_M X S1M = C,   S3 = sigma3 (x) I_k,  S1M = sigma1 (x) M_k,

by the stationary iteration

    X_{n+1} = G1 (C - i V_M X_n S1M) D1 + G2 (C - i V_M X_n S1M) D2,

kept in factored form X_n = L R^T and recompressed by QR + SVD each step.
State solves keep R as an N x r matrix; operator solves keep R as r banded
N x N blocks (one column of the operator per column of each block).
"""

import time
from dataclasses import dataclass
from typing import Callable, Optional, Tuple, Union

import numpy as np
import structlog
from scipy.linalg import lu_factor, qr, svd

from src.config.settings import Settings, get_settings
from src.models.discretization import LowRankFactors, RHSMode, StarDiscretization
from src.models.results import IterationTrace, SolutionKind, SolveStats
from src.services.banded_blocks import BandedBlocks
from src.services.legendre_basis import (
    eval_antiderivative_basis,
    eval_basis,
    kernel_coefficient_matrix,
    kernel_moments,
    theta_matrix,
)
from src.services.rz_model import RZModel, apply_coupling, apply_sign
from src.utils.error_handling import DivergenceError, InvalidArgumentError, with_error_handling
from src.utils.logger import log_iteration

RightFactor = Union[np.ndarray, BandedBlocks]


@dataclass(frozen=True, eq=False)
class ConstantTerm:
    """Factored constant term [G1 Lc, G2 Lc] [D1 Rc, D2 Rc]^T of the iteration."""

    left: np.ndarray
    right: RightFactor


@dataclass(eq=False)
class ODESolutionHandle:
    """Read-only access to a converged factored solution."""

    disc: StarDiscretization
    factors: LowRankFactors
    kind: SolutionKind
    psi0: Optional[np.ndarray] = None


def _restrict_rows(R: np.ndarray, block_row: int) -> np.ndarray:
    k = R.shape[0] // 2
    out = np.zeros_like(R)
    out[block_row * k : (block_row + 1) * k] = R[block_row * k : (block_row + 1) * k]
    return out


class StarSolver:
    """Discretization, low-rank iterations and reconstruction."""

    def __init__(self, settings: Optional[Settings] = None):
        self.settings = settings or get_settings()
        self.logger = structlog.get_logger(__name__)

    # Discretization

    @with_error_handling("star_solver", "discretize")
    def discretize(
        self,
        model: RZModel,
        M: int,
        quad_points: Optional[int] = None,
        rhs_mode: Optional[RHSMode] = None,
    ) -> StarDiscretization:
        """
        Build Omega_M, V_M, T_M and phi_M(-1) and factorize (I +/- i Omega_M) once.

        Args:
            model: Hamiltonian and interval
            M: Truncation order (at least 2)
            quad_points: Outer quadrature size, M + quad_margin by default
            rhs_mode: Plain or consistent right-hand side, from settings by default
        """
        if M < 2:
            raise InvalidArgumentError(f"M must be at least 2, got {M}", field="M")

        start = time.perf_counter()
        n = M + self.settings.quad_margin if quad_points is None else quad_points
        omega_tilde, v_tilde = model.rescaled_kernels()

        omega_mat = kernel_coefficient_matrix(omega_tilde, M, n, label="omega")
        v_mat = kernel_coefficient_matrix(v_tilde, M, n, label="v")
        theta_mat = theta_matrix(M, n)

        identity = np.eye(M)
        lu_plus = lu_factor(identity + 1j * omega_mat.entries)
        lu_minus = lu_factor(identity - 1j * omega_mat.entries)

        if rhs_mode is None:
            rhs_mode = RHSMode.CONSISTENT if self.settings.consistent_rhs else RHSMode.PLAIN

        disc = StarDiscretization(
            M=M,
            N=model.N,
            t0=model.t0,
            tf=model.tf,
            omega_mat=omega_mat,
            v_mat=v_mat,
            theta_mat=theta_mat,
            lu_plus=lu_plus,
            lu_minus=lu_minus,
            phi_minus1=eval_basis(M, -1.0),
            omega_moments=kernel_moments(omega_tilde, M, n),
            v_moments=kernel_moments(v_tilde, M, n),
            rhs_mode=RHSMode(rhs_mode),
            case_label=model.label,
            build_time=time.perf_counter() - start,
        )
        self.logger.info(
            "Discretization built",
            case=model.label,
            M=M,
            N=model.N,
            quad_points=n,
            rhs_mode=disc.rhs_mode.value,
            seconds=disc.build_time,
        )
        return disc

    # Constant terms

    def _constant_left(self, disc: StarDiscretization) -> np.ndarray:
        phi = disc.phi_minus1
        if disc.rhs_mode == RHSMode.PLAIN:
            return phi[:, None].astype(complex)
        alpha = disc.omega_moments - disc.omega_mat.entries @ phi
        beta = disc.v_moments - disc.v_mat.entries @ phi
        return np.column_stack([phi, -1j * alpha, -1j * beta]).astype(complex)

    def constant_term(self, disc: StarDiscretization, psi0: np.ndarray) -> ConstantTerm:
        """Factored constant term of the state iteration."""
        Lc = self._constant_left(disc)
        psi0 = np.asarray(psi0, dtype=complex)
        if disc.rhs_mode == RHSMode.PLAIN:
            Rc = psi0[:, None]
        else:
            Rc = np.column_stack([psi0, apply_sign(psi0), apply_coupling(psi0)])
        return ConstantTerm(
            left=np.hstack([disc.solve_plus(Lc), disc.solve_minus(Lc)]),
            right=np.hstack([_restrict_rows(Rc, 0), _restrict_rows(Rc, 1)]),
        )

    def operator_constant_term(self, disc: StarDiscretization) -> ConstantTerm:
        """Factored constant term of the operator iteration, one block per column of Lc."""
        Lc = self._constant_left(disc)
        identity = BandedBlocks.identity(disc.k)
        if disc.rhs_mode == RHSMode.PLAIN:
            Rc = identity
        else:
            Rc = BandedBlocks.concat(
                [identity, identity.apply_sign(), identity.apply_coupling()]
            )
        return ConstantTerm(
            left=np.hstack([disc.solve_plus(Lc), disc.solve_minus(Lc)]),
            right=BandedBlocks.concat([Rc.restrict(0), Rc.restrict(1)]),
        )

    # Iteration kernels

    def fixed_point_step(
        self,
        disc: StarDiscretization,
        L: np.ndarray,
        R: RightFactor,
        constant: ConstantTerm,
    ) -> Tuple[np.ndarray, RightFactor]:
        """
        One untruncated step in factored form.

        Left factor [G1(-i V L), G2(-i V L), g], right factor [D1 R', D2 R', d]
        with R' = (sigma1 (x) M_k) R; the rank triples plus the constant rank.
        """
        rank_right = R.rank if isinstance(R, BandedBlocks) else R.shape[1]
        n_rows = R.N if isinstance(R, BandedBlocks) else R.shape[0]
        if L.shape[0] != disc.M or L.shape[1] != rank_right or n_rows != disc.N:
            raise InvalidArgumentError(
                f"factor shapes {L.shape} and (N={n_rows}, r={rank_right}) do not conform "
                f"with M={disc.M}, N={disc.N}",
                field="L",
            )

        VL = -1j * (disc.v_mat.entries @ L)
        left = np.hstack([disc.solve_plus(VL), disc.solve_minus(VL), constant.left])

        if isinstance(R, BandedBlocks):
            coupled = R.apply_coupling()
            right: RightFactor = BandedBlocks.concat(
                [coupled.restrict(0), coupled.restrict(1), constant.right]
            )
        else:
            coupled_dense = apply_coupling(R)
            right = np.hstack(
                [_restrict_rows(coupled_dense, 0), _restrict_rows(coupled_dense, 1), constant.right]
            )
        return left, right

    def truncate(
        self, L: np.ndarray, R: RightFactor, trunc: float
    ) -> Tuple[np.ndarray, RightFactor, int]:
        """
        Recompress L R^T: economy QR of L, SVD of its triangular factor, keep s >= trunc.

        At least one singular triplet is always kept.
        """
        if trunc < 0:
            raise InvalidArgumentError(f"trunc must be non-negative, got {trunc}", field="trunc")

        Q, RL = qr(L, mode="economic")
        U, s, Vh = svd(RL, full_matrices=False)
        r = max(1, int(np.count_nonzero(s >= trunc)))

        L_new = Q @ (U[:, :r] * s[:r])
        weights = Vh[:r].T
        if isinstance(R, BandedBlocks):
            return L_new, R.combine(weights), r
        return L_new, R @ weights, r

    # Solves

    def _iterate(
        self,
        disc: StarDiscretization,
        L: np.ndarray,
        R: RightFactor,
        constant: ConstantTerm,
        functional: Callable[[np.ndarray, RightFactor], np.ndarray],
        kind: SolutionKind,
        tol: float,
        trunc: float,
        max_iter: int,
        reference: Optional[np.ndarray],
    ) -> Tuple[np.ndarray, RightFactor, SolveStats]:
        stats = SolveStats(
            kind=kind,
            M=disc.M,
            N=disc.N,
            tol=tol,
            trunc=trunc,
            discretization_time=disc.build_time,
            initial_nnz=R.nnz() if isinstance(R, BandedBlocks) else None,
        )
        window = self.settings.stagnation_window
        b_old = functional(L, R)
        prev_err = np.inf
        stalled = 0
        loop_start = time.perf_counter()

        for n in range(1, max_iter + 1):
            step_start = time.perf_counter()
            L_half, R_half = self.fixed_point_step(disc, L, R, constant)
            if isinstance(R_half, BandedBlocks):
                finite_right = R_half.all_finite()
            else:
                finite_right = bool(np.isfinite(R_half).all())
            if not (np.isfinite(L_half).all() and finite_right):
                raise DivergenceError(
                    f"non-finite iterate at iteration {n}; spectral radius >= 1 suspected",
                    iteration=n,
                )
            rank_before = L_half.shape[1]
            L, R, r = self.truncate(L_half, R_half, trunc)

            b = functional(L, R)
            err = float(np.linalg.norm(b - b_old))
            record = IterationTrace(
                iteration=n,
                error_estimate=err,
                rank=r,
                rank_before_truncation=rank_before,
                wall_time=time.perf_counter() - step_start,
                true_error=None if reference is None else float(np.linalg.norm(b - reference)),
            )
            if isinstance(R, BandedBlocks):
                record.nnz = R.nnz()
                record.bandwidth = R.bandwidth()
            stats.trace.append(record)
            log_iteration(kind.value, n, err, r, bandwidth=record.bandwidth, nnz=record.nnz)

            if err < tol:
                stats.converged = True
                break

            stalled = stalled + 1 if err >= prev_err else 0
            if stalled >= window:
                stats.stagnated = True
                self.logger.warning(
                    "Iteration stagnated", kind=kind.value, iteration=n, error_estimate=err
                )
                break
            prev_err = err
            b_old = b

        stats.wall_time = time.perf_counter() - loop_start
        return L, R, stats

    def _resolve(
        self, tol: Optional[float], trunc: Optional[float], max_iter: Optional[int]
    ) -> Tuple[float, float, int]:
        tol = self.settings.tol if tol is None else tol
        trunc = self.settings.trunc if trunc is None else trunc
        max_iter = self.settings.max_iter if max_iter is None else max_iter
        if tol <= 0:
            raise InvalidArgumentError(f"tol must be positive, got {tol}", field="tol")
        if trunc < 0:
            raise InvalidArgumentError(f"trunc must be non-negative, got {trunc}", field="trunc")
        if max_iter < 1:
            raise InvalidArgumentError("max_iter must be at least 1", field="max_iter")
        return tol, trunc, max_iter

    @with_error_handling("star_solver", "solve_vector")
    def solve_vector(
        self,
        disc: StarDiscretization,
        psi0: np.ndarray,
        tol: Optional[float] = None,
        trunc: Optional[float] = None,
        max_iter: Optional[int] = None,
        reference: Optional[np.ndarray] = None,
    ) -> Tuple[ODESolutionHandle, SolveStats]:
        """
        Low-rank iteration for the state psi(t) from psi(t0) = psi0.

        Stops when ||b - b_old|| < tol for b = L (R^T conj(psi0)), or after max_iter
        iterations with ``converged`` False. ``reference`` is an optional exact b used
        to record the true error of b per iteration.
        """
        tol, trunc, max_iter = self._resolve(tol, trunc, max_iter)
        psi0 = np.asarray(psi0, dtype=complex).reshape(-1)
        if psi0.shape[0] != disc.N:
            raise InvalidArgumentError(
                f"psi0 has length {psi0.shape[0]}, expected {disc.N}", field="psi0"
            )
        if not np.linalg.norm(psi0) > 0:
            raise InvalidArgumentError("psi0 must be nonzero", field="psi0")

        constant = self.constant_term(disc, psi0)
        L0 = disc.phi_minus1[:, None].astype(complex)
        R0 = psi0[:, None].copy()
        psi0_conj = np.conj(psi0)

        def functional(L: np.ndarray, R: RightFactor) -> np.ndarray:
            return L @ (R.T @ psi0_conj)

        L, R, stats = self._iterate(
            disc, L0, R0, constant, functional, SolutionKind.VECTOR,
            tol, trunc, max_iter, reference,
        )
        self.logger.info(
            "State solve finished",
            case=disc.case_label,
            M=disc.M,
            N=disc.N,
            iterations=stats.iterations,
            max_rank=stats.max_rank,
            converged=stats.converged,
            stagnated=stats.stagnated,
            seconds=stats.wall_time,
        )
        handle = ODESolutionHandle(
            disc=disc, factors=LowRankFactors(L, R), kind=SolutionKind.VECTOR, psi0=psi0
        )
        return handle, stats

    @with_error_handling("star_solver", "solve_operator")
    def solve_operator(
        self,
        disc: StarDiscretization,
        tol: Optional[float] = None,
        trunc: Optional[float] = None,
        max_iter: Optional[int] = None,
        reference: Optional[np.ndarray] = None,
    ) -> Tuple[ODESolutionHandle, SolveStats]:
        """
        Low-rank iteration for the propagator U(t) from U(t0) = I_N.

        R starts as I_N in banded-block storage; the stopping functional is the
        first column of the first solution block, b = L (R_q[0, 0])_q.
        """
        tol, trunc, max_iter = self._resolve(tol, trunc, max_iter)
        constant = self.operator_constant_term(disc)
        L0 = disc.phi_minus1[:, None].astype(complex)
        R0 = BandedBlocks.identity(disc.k)

        def functional(L: np.ndarray, R: RightFactor) -> np.ndarray:
            assert isinstance(R, BandedBlocks)
            return L @ R.first_entries()

        L, R, stats = self._iterate(
            disc, L0, R0, constant, functional, SolutionKind.OPERATOR,
            tol, trunc, max_iter, reference,
        )
        last = stats.trace[-1] if stats.trace else None
        self.logger.info(
            "Operator solve finished",
            case=disc.case_label,
            M=disc.M,
            N=disc.N,
            iterations=stats.iterations,
            max_rank=stats.max_rank,
            nnz=last.nnz if last else None,
            bandwidth=last.bandwidth if last else None,
            converged=stats.converged,
            stagnated=stats.stagnated,
            seconds=stats.wall_time,
        )
        handle = ODESolutionHandle(
            disc=disc, factors=LowRankFactors(L, R), kind=SolutionKind.OPERATOR
        )
        return handle, stats

    # Reconstruction

    def _weights(
        self, handle: ODESolutionHandle, t: Union[float, np.ndarray]
    ) -> Tuple[np.ndarray, np.ndarray]:
        """Scalar weight of the initial value and coefficients on the columns of R."""
        disc = handle.disc
        t_arr = np.asarray(t, dtype=float)
        slack = 1e-12 * (disc.tf - disc.t0)
        if np.any(t_arr < disc.t0 - slack) or np.any(t_arr > disc.tf + slack):
            raise InvalidArgumentError(
                f"t outside the solved interval [{disc.t0}, {disc.tf}]", field="t"
            )
        tau = np.clip(disc.to_tau(t_arr), -1.0, 1.0)

        if disc.rhs_mode == RHSMode.PLAIN:
            basis = eval_basis(disc.M, tau) @ disc.theta_mat.entries
            base = np.zeros(tau.shape)
        else:
            basis = eval_antiderivative_basis(disc.M, tau)
            base = 1.0 - basis @ disc.phi_minus1
        return base, basis @ handle.factors.left

    def evaluate_state(self, handle: ODESolutionHandle, t: Union[float, np.ndarray]) -> np.ndarray:
        """psi(t) for scalar t (length N) or an array of times (shape (..., N))."""
        if handle.kind != SolutionKind.VECTOR or handle.psi0 is None:
            raise InvalidArgumentError("handle does not hold a state solution", field="handle")
        base, coeffs = self._weights(handle, t)
        R = handle.factors.right
        assert isinstance(R, np.ndarray)
        return base[..., None] * handle.psi0 + coeffs @ R.T

    def evaluate_overlap(
        self, handle: ODESolutionHandle, t: Union[float, np.ndarray]
    ) -> np.ndarray:
        """beta(t) = psi0^H psi(t) without forming psi(t)."""
        if handle.kind != SolutionKind.VECTOR or handle.psi0 is None:
            raise InvalidArgumentError("handle does not hold a state solution", field="handle")
        base, coeffs = self._weights(handle, t)
        R = handle.factors.right
        assert isinstance(R, np.ndarray)
        psi0 = handle.psi0
        return base * np.vdot(psi0, psi0) + coeffs @ (R.T @ np.conj(psi0))

    def evaluate_operator(self, handle: ODESolutionHandle, t: float, j: int) -> np.ndarray:
        """U(t) e_j."""
        if handle.kind != SolutionKind.OPERATOR:
            raise InvalidArgumentError("handle does not hold an operator solution", field="handle")
        R = handle.factors.right
        assert isinstance(R, BandedBlocks)
        if not 0 <= j < R.N:
            raise InvalidArgumentError(f"column {j} out of range for N={R.N}", field="j")
        base, coeffs = self._weights(handle, float(t))
        column = R.column(j) @ coeffs
        column[j] += base
        return column

    def evaluate_operator_full(self, handle: ODESolutionHandle, t: float) -> np.ndarray:
        """Dense U(t)."""
        if handle.kind != SolutionKind.OPERATOR:
            raise InvalidArgumentError("handle does not hold an operator solution", field="handle")
        R = handle.factors.right
        assert isinstance(R, BandedBlocks)
        base, coeffs = self._weights(handle, float(t))
        U = R.combine(coeffs).to_dense()[0]
        U[np.diag_indices(R.N)] += base
        return U

    def dense_iterate(self, handle: ODESolutionHandle) -> np.ndarray:
        """X = L R^T for state solves (dense check helper)."""
        R = handle.factors.right
        if isinstance(R, BandedBlocks):
            raise InvalidArgumentError(
                "operator factors have no single dense iterate", field="handle"
            )
        return handle.factors.left @ R.T
