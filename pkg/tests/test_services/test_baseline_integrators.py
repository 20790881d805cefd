"""
Tests for the Reference Integrators
"""

import numpy as np
import pytest
from pydantic import ValidationError

from src.config.settings import Settings
from src.models.parameters import StepperConfig, StepperMethod
from src.services.baseline_integrators import BaselineIntegrator
from src.utils.error_handling import BudgetExceededError, InvalidArgumentError, StiffnessError
from tests.conftest import decoupled_exact


@pytest.fixture
def integrator() -> BaselineIntegrator:
    return BaselineIntegrator()


def rk4(steps: int) -> StepperConfig:
    return StepperConfig(method=StepperMethod.RK4, steps=steps)


class TestAccuracy:
    """Test accuracy against closed forms and each other."""

    def test_decoupled_closed_form(self, integrator, decoupled_model, psi0):
        """DP54 at oracle tolerances reproduces the pure phase evolution."""
        trajectory = integrator.propagate_state(decoupled_model, psi0)
        np.testing.assert_allclose(
            trajectory.final, decoupled_exact(decoupled_model, psi0, decoupled_model.tf), atol=1e-9
        )
        assert trajectory.accepted_steps > 0
        assert trajectory.rhs_evaluations == 2 + 6 * (
            trajectory.accepted_steps + trajectory.rejected_steps
        )

    def test_rk4_order(self, integrator, toy_model, psi0):
        """Halving the step divides the RK4 error by about 16."""
        reference = integrator.propagate_state(toy_model, psi0).final
        coarse = integrator.propagate_state(toy_model, psi0, rk4(100)).final
        fine = integrator.propagate_state(toy_model, psi0, rk4(200)).final
        order = np.log2(np.linalg.norm(coarse - reference) / np.linalg.norm(fine - reference))
        assert 3.7 <= order <= 4.3

    def test_rk4_converges_to_oracle(self, integrator, chirped_model, rng):
        """Fine RK4 and DP54 agree."""
        psi0 = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        reference = integrator.propagate_state(chirped_model, psi0).final
        fine = integrator.propagate_state(chirped_model, psi0, rk4(4000))
        np.testing.assert_allclose(fine.final, reference, atol=1e-9)
        assert fine.accepted_steps == 4000
        assert fine.rhs_evaluations == 16000

    def test_norm_is_conserved(self, integrator, chirped_model, rng):
        """The Hamiltonian is Hermitian, so the state norm is constant."""
        psi0 = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        psi0 /= np.linalg.norm(psi0)
        trajectory = integrator.propagate_state(
            chirped_model, psi0, t_eval=np.linspace(-0.5, 1.5, 5)
        )
        np.testing.assert_allclose(np.linalg.norm(trajectory.states, axis=1), 1.0, atol=1e-9)

    def test_block_matches_columns(self, integrator, toy_model, rng):
        """A block of initial states is integrated column by column."""
        block = rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))
        config = rk4(50)
        together = integrator.propagate_state(toy_model, block, config).final
        for j in range(2):
            alone = integrator.propagate_state(toy_model, block[:, j], config).final
            np.testing.assert_allclose(together[:, j], alone, atol=1e-14)


class TestOperator:
    """Test dense propagators."""

    def test_unitary(self, integrator, chirped_model):
        U = integrator.propagate_operator(chirped_model)
        np.testing.assert_allclose(U.conj().T @ U, np.eye(6), atol=1e-9)

    def test_identity_at_initial_time(self, integrator, toy_model):
        """Zero-length integration returns the initial value."""
        U = integrator.propagate_operator(toy_model, tf=toy_model.t0)
        np.testing.assert_array_equal(U, np.eye(4))

    def test_dense_cap(self, toy_model):
        """Propagators larger than the cap are refused."""
        integrator = BaselineIntegrator(Settings(dense_cap=2))
        with pytest.raises(BudgetExceededError):
            integrator.propagate_operator(toy_model)


class TestSampling:
    """Test output times and guards."""

    @pytest.mark.parametrize("method", [StepperMethod.RK4, StepperMethod.DP54])
    def test_t_eval_alignment(self, integrator, toy_model, psi0, method):
        """Outputs land exactly on the requested times."""
        times = [0.3, 1.1, 1.7]
        config = rk4(40) if method == StepperMethod.RK4 else None
        trajectory = integrator.propagate_state(toy_model, psi0, config, t_eval=times)
        np.testing.assert_array_equal(trajectory.times, [0.0, 0.3, 1.1, 1.7, 2.0])
        assert trajectory.states.shape == (5, 4)

    def test_dense_output(self, integrator, toy_model, psi0):
        """Every accepted step is recorded with dense output."""
        config = StepperConfig(method=StepperMethod.RK4, steps=10, dense_output=True)
        trajectory = integrator.propagate_state(toy_model, psi0, config)
        assert trajectory.times.shape == (11,)
        assert np.all(np.diff(trajectory.times) > 0)

    def test_t_eval_outside_interval(self, integrator, toy_model, psi0):
        with pytest.raises(InvalidArgumentError):
            integrator.propagate_state(toy_model, psi0, t_eval=[3.0])

    def test_wrong_state_size(self, integrator, toy_model):
        with pytest.raises(InvalidArgumentError):
            integrator.propagate_state(toy_model, np.ones(6))

    def test_step_cap(self, integrator, toy_model, psi0):
        """Exhausting max_steps raises StiffnessError."""
        config = StepperConfig(method=StepperMethod.DP54, max_steps=3)
        with pytest.raises(StiffnessError):
            integrator.propagate_state(toy_model, psi0, config)

    def test_rk4_requires_steps(self):
        with pytest.raises(ValidationError):
            StepperConfig(method=StepperMethod.RK4)

    def test_default_configs(self, integrator, settings):
        """Defaults come from settings."""
        assert integrator.default_config(StepperMethod.RK4).steps == settings.rk4_steps
        oracle = integrator.default_config()
        assert (oracle.atol, oracle.rtol) == (settings.oracle_atol, settings.oracle_rtol)
