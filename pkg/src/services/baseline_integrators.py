"""
Reference Time-Stepping Integrators

Classical fixed-step RK4 and adaptive Dormand-Prince 5(4) for

    psi'(t) = -i H(t) psi(t)   and   U'(t) = -i H(t) U(t),  U(t0) = I,

both driven by the O(N) Hamiltonian application of the model. These serve as
accuracy oracles and timing baselines for the star-product solver.
"""

import time
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import structlog

from src.config.settings import Settings, get_settings
from src.models.parameters import StepperConfig, StepperMethod
from src.services.rz_model import RZModel
from src.utils.error_handling import (
    BudgetExceededError,
    InvalidArgumentError,
    StiffnessError,
    with_error_handling,
)

RHS = Callable[[float, np.ndarray], np.ndarray]

# Dormand-Prince 5(4) tableau
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_DP_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# Difference of the fifth and fourth order weights
_DP_E = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)

# PI step control
_SAFETY = 0.9
_BETA = 0.04
_ALPHA = 0.2 - 0.75 * _BETA
_FAC_MIN = 0.2
_FAC_MAX = 10.0


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled solution: ``states[i]`` is the state at ``times[i]``."""

    times: np.ndarray
    states: np.ndarray
    accepted_steps: int = 0
    rejected_steps: int = 0
    rhs_evaluations: int = 0
    wall_time: float = 0.0

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def _rms(x: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.abs(x) ** 2)))


class BaselineIntegrator:
    """RK4 and DP54 propagation of Rosen-Zener models."""

    def __init__(self, settings: Optional[Settings] = None):
        self.settings = settings or get_settings()
        self.logger = structlog.get_logger(__name__)

    def default_config(self, method: StepperMethod = StepperMethod.DP54) -> StepperConfig:
        """Stepper configuration from settings."""
        if method == StepperMethod.RK4:
            return StepperConfig(method=method, steps=self.settings.rk4_steps)
        return StepperConfig(
            method=method, atol=self.settings.oracle_atol, rtol=self.settings.oracle_rtol
        )

    @staticmethod
    def _rhs(model: RZModel) -> RHS:
        def f(t: float, y: np.ndarray) -> np.ndarray:
            return -1j * model.apply_hamiltonian(t, y)

        return f

    @with_error_handling("baseline_integrators", "propagate_state")
    def propagate_state(
        self,
        model: RZModel,
        psi0: np.ndarray,
        config: Optional[StepperConfig] = None,
        t_eval: Optional[Sequence[float]] = None,
        tf: Optional[float] = None,
    ) -> Trajectory:
        """
        Integrate the state from model.t0.

        Args:
            model: Hamiltonian and interval
            psi0: Initial state (length N) or block of initial states (N x m)
            config: Stepper settings, DP54 at oracle tolerances by default
            t_eval: Times at which to record the state; steps land on them exactly
            tf: End time, model.tf by default

        Returns:
            Trajectory at t0, every t_eval point (or every accepted step with
            dense_output) and tf
        """
        config = config or self.default_config()
        psi0 = np.asarray(psi0, dtype=complex)
        if psi0.shape[0] != model.N:
            raise InvalidArgumentError(
                f"psi0 has leading dimension {psi0.shape[0]}, expected {model.N}", field="psi0"
            )

        t0 = model.t0
        t_end = model.tf if tf is None else float(tf)
        if t_end < t0:
            raise InvalidArgumentError(f"end time {t_end} precedes t0={t0}", field="tf")

        stops = self._stop_times(t0, t_end, t_eval)
        start = time.perf_counter()
        f = self._rhs(model)

        if config.method == StepperMethod.RK4:
            assert config.steps is not None
            trajectory = self._rk4(f, t0, t_end, psi0, config.steps, stops, config.dense_output)
        else:
            trajectory = self._dp54(f, t0, t_end, psi0, config, stops)

        trajectory = Trajectory(
            times=trajectory.times,
            states=trajectory.states,
            accepted_steps=trajectory.accepted_steps,
            rejected_steps=trajectory.rejected_steps,
            rhs_evaluations=trajectory.rhs_evaluations,
            wall_time=time.perf_counter() - start,
        )
        self.logger.info(
            "Propagation finished",
            method=config.method.value,
            case=model.label,
            N=model.N,
            columns=1 if psi0.ndim == 1 else psi0.shape[1],
            accepted=trajectory.accepted_steps,
            rejected=trajectory.rejected_steps,
            seconds=trajectory.wall_time,
        )
        return trajectory

    @with_error_handling("baseline_integrators", "propagate_operator")
    def propagate_operator(
        self,
        model: RZModel,
        config: Optional[StepperConfig] = None,
        tf: Optional[float] = None,
    ) -> np.ndarray:
        """U(tf) as a dense matrix, integrating all N columns together."""
        cap = self.settings.dense_cap
        if model.N > cap:
            raise BudgetExceededError(
                f"dense propagator of size {model.N} exceeds the cap {cap}",
                limit=cap,
                requested=model.N,
            )
        identity = np.eye(model.N, dtype=complex)
        return self.propagate_state(model, identity, config, tf=tf).final

    @staticmethod
    def _stop_times(
        t0: float, tf: float, t_eval: Optional[Sequence[float]]
    ) -> np.ndarray:
        if t_eval is None:
            return np.array([tf])
        points = np.asarray(t_eval, dtype=float).reshape(-1)
        slack = 1e-12 * max(tf - t0, 1.0)
        if np.any(points < t0 - slack) or np.any(points > tf + slack):
            raise InvalidArgumentError("t_eval outside the integration interval", field="t_eval")
        points = np.clip(np.unique(points), t0, tf)
        points = points[points > t0]
        if points.size == 0 or points[-1] < tf:
            points = np.append(points, tf)
        return points

    def _rk4(
        self,
        f: RHS,
        t0: float,
        tf: float,
        y0: np.ndarray,
        steps: int,
        stops: np.ndarray,
        dense: bool,
    ) -> Trajectory:
        times: List[float] = [t0]
        states: List[np.ndarray] = [y0.copy()]
        if tf == t0:
            return Trajectory(times=np.array(times), states=np.array(states))

        h_nominal = (tf - t0) / steps
        t, y = t0, y0.copy()
        evaluations = 0
        accepted = 0
        for stop in stops:
            # Uniform substeps between output times, no longer than the nominal step
            n_sub = max(1, int(np.ceil((stop - t) / h_nominal - 1e-9)))
            h = (stop - t) / n_sub
            for i in range(n_sub):
                k1 = f(t, y)
                k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
                k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
                k4 = f(t + h, y + h * k3)
                y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
                t = stop if i == n_sub - 1 else t + h
                evaluations += 4
                accepted += 1
                if dense and i < n_sub - 1:
                    times.append(t)
                    states.append(y.copy())
            times.append(t)
            states.append(y.copy())

        return Trajectory(
            times=np.array(times),
            states=np.array(states),
            accepted_steps=accepted,
            rhs_evaluations=evaluations,
        )

    def _initial_step(
        self, f: RHS, t0: float, y0: np.ndarray, f0: np.ndarray, atol: float, rtol: float
    ) -> float:
        """Starting step from the size of y0, f0 and a finite-difference second derivative."""
        scale = atol + rtol * np.abs(y0)
        d0 = _rms(y0 / scale)
        d1 = _rms(f0 / scale)
        h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
        f1 = f(t0 + h0, y0 + h0 * f0)
        d2 = _rms((f1 - f0) / scale) / h0
        if max(d1, d2) <= 1e-15:
            h1 = max(1e-6, h0 * 1e-3)
        else:
            h1 = (0.01 / max(d1, d2)) ** (1.0 / 5.0)
        return min(100.0 * h0, h1)

    def _dp54_step(
        self, f: RHS, t: float, y: np.ndarray, k1: np.ndarray, h: float
    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """One Dormand-Prince step: new state, error vector and the last stage (FSAL)."""
        stages = [k1]
        for i in range(1, 7):
            increment = sum(a * k for a, k in zip(_DP_A[i], stages) if a != 0.0)
            stages.append(f(t + _DP_C[i] * h, y + h * increment))
        y_new = y + h * sum(b * k for b, k in zip(_DP_B, stages) if b != 0.0)
        error = h * sum(e * k for e, k in zip(_DP_E, stages) if e != 0.0)
        return y_new, error, stages[6]

    def _dp54(
        self,
        f: RHS,
        t0: float,
        tf: float,
        y0: np.ndarray,
        config: StepperConfig,
        stops: np.ndarray,
    ) -> Trajectory:
        times: List[float] = [t0]
        states: List[np.ndarray] = [y0.copy()]
        if tf == t0:
            return Trajectory(times=np.array(times), states=np.array(states))

        atol, rtol = config.atol, config.rtol
        h_min = self.settings.min_step_fraction * (tf - t0)

        t, y = t0, y0.copy()
        k1 = f(t, y)
        h = self._initial_step(f, t, y, k1, atol, rtol)
        evaluations = 2
        accepted = rejected = 0
        err_old = 1e-4
        fac_max = _FAC_MAX

        for stop in stops:
            while t < stop:
                if accepted >= config.max_steps:
                    raise StiffnessError(
                        f"step cap {config.max_steps} reached at t={t}", t=t, dt=h
                    )
                landing = t + h >= stop or stop - (t + h) < 1e-12 * (tf - t0)
                step = stop - t if landing else h

                y_new, error, k_last = self._dp54_step(f, t, y, k1, step)
                evaluations += 6
                scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
                err = _rms(error / scale)

                if err <= 1.0:
                    t = stop if landing else t + step
                    y = y_new
                    k1 = k_last
                    accepted += 1
                    if err == 0.0:
                        fac = fac_max
                    else:
                        fac = _SAFETY * err ** (-_ALPHA) * err_old**_BETA
                        fac = min(fac_max, max(_FAC_MIN, fac))
                    err_old = max(err, 1e-4)
                    fac_max = _FAC_MAX
                    # A clipped landing step never shrinks the proposal
                    h = max(h, step * fac) if landing and step < h else step * fac
                    if config.dense_output and t < stop:
                        times.append(t)
                        states.append(y.copy())
                else:
                    rejected += 1
                    fac_max = 1.0
                    h = step * max(_FAC_MIN, _SAFETY * err ** (-_ALPHA))
                    if h < h_min:
                        raise StiffnessError(
                            f"step size {h:.3e} below {h_min:.3e} at t={t}", t=t, dt=h
                        )
            times.append(t)
            states.append(y.copy())

        return Trajectory(
            times=np.array(times),
            states=np.array(states),
            accepted_steps=accepted,
            rejected_steps=rejected,
            rhs_evaluations=evaluations,
        )
