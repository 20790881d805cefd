"""
Test Configuration and Fixtures

This module contains pytest fixtures and configuration for the test suite.
"""

import os
from typing import Generator

import numpy as np
import pytest

# Set test environment
os.environ["ENVIRONMENT"] = "test"
os.environ["LOG_LEVEL"] = "WARNING"

from src.config.settings import Settings, get_settings
from src.models.parameters import RZParameters
from src.services.rz_model import RZModel, preset_case
from src.services.star_solver import StarSolver


@pytest.fixture(autouse=True)
def fresh_settings() -> Generator[None, None, None]:
    """Reset the cached settings around every test."""
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def settings() -> Settings:
    """Settings as read from the test environment."""
    return get_settings()


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded random generator."""
    return np.random.default_rng(1234)


@pytest.fixture
def toy_model() -> RZModel:
    """Case (a) pulse, N = 4, on the short interval [0, 2]."""
    return RZModel(params=preset_case("a"), k=2, t0=0.0, tf=2.0, label="a")


@pytest.fixture
def chirped_model() -> RZModel:
    """Case (c) pulse, N = 6, on [-1, 1.5]."""
    return RZModel(params=preset_case("c"), k=3, t0=-1.0, tf=1.5, label="c")


@pytest.fixture
def decoupled_model() -> RZModel:
    """v0 = 0: H = w0 sigma3 (x) I_2 with a closed-form propagator."""
    params = RZParameters(w0=5.0, v0=0.0, epsilon=0.0, delta=0.0, T0=1.0)
    return RZModel(params=params, k=2, t0=0.0, tf=2.0, label="decoupled")


@pytest.fixture
def psi0(rng: np.random.Generator) -> np.ndarray:
    """Normalized random state of length 4."""
    v = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    return v / np.linalg.norm(v)


@pytest.fixture
def solver() -> StarSolver:
    """Star solver with test settings."""
    return StarSolver()


def decoupled_exact(model: RZModel, psi0: np.ndarray, t: float) -> np.ndarray:
    """Closed-form state of a model with v0 = 0 and epsilon = 0."""
    k = model.k
    phase = np.exp(-1j * model.params.w0 * (t - model.t0))
    out = np.asarray(psi0, dtype=complex).copy()
    out[:k] *= phase
    out[k:] *= np.conj(phase)
    return out
