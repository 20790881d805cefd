"""
Application Settings and Configuration

This module contains all configuration settings for star-rz, including:
- Environment variables management
- Solver defaults (tolerances, truncation, iteration caps)
- Discretization and memory guards
- Oracle integrator and benchmark settings
"""

import math
from functools import lru_cache

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Application settings loaded from environment variables."""

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # Application Settings
    environment: str = Field(default="development", description="Application environment")
    log_level: str = Field(default="INFO", description="Logging level")
    app_name: str = Field(default="star-rz", description="Application name used in log context")
    app_version: str = Field(default="1.0.0", description="Application version")

    # Solver Configuration
    tol: float = Field(default=1e-7, gt=0, description="Stopping tolerance on the cheap estimate")
    trunc: float = Field(default=1e-6, gt=0, description="Absolute singular value threshold")
    max_iter: int = Field(default=200, ge=1, description="Fixed-point iteration cap")
    stagnation_window: int = Field(
        default=10,
        ge=1,
        description="Consecutive non-decreasing estimates that flag stagnation",
    )
    consistent_rhs: bool = Field(
        default=True,
        description="Split the initial point mass off the right-hand side analytically",
    )

    # Discretization Configuration
    quad_margin: int = Field(
        default=128,
        ge=0,
        description="Extra Gauss-Legendre points beyond M for kernel coefficient matrices",
    )
    dense_cap: int = Field(
        default=2048,
        ge=2,
        description="Largest N for which dense N x N matrices may be formed",
    )

    # Interval Configuration
    default_t0: float = Field(default=-2.0, description="Default initial time")
    default_tf: float = Field(default=-2.0 + 8.0 * math.pi, description="Default final time")

    # Convergence Diagnostics
    power_iteration_tol: float = Field(
        default=1e-6,
        gt=0,
        description="Relative residual tolerance of the dominant Ritz pair",
    )
    power_iteration_max_matvecs: int = Field(
        default=5000,
        ge=1,
        description="Matrix-vector product cap of the Arnoldi iteration",
    )
    eig_budget: int = Field(
        default=4000,
        ge=1,
        description="Largest M*N accepted by the small spectral radius computation",
    )
    eig_block_size: int = Field(
        default=8, ge=1, description="Ritz pairs kept by the Arnoldi iteration"
    )
    frobenius_workers: int = Field(
        default=4,
        ge=1,
        description="Thread pool size for column-wise Frobenius accumulation",
    )

    # Oracle Integrators
    oracle_atol: float = Field(default=1e-12, gt=0, description="Oracle absolute tolerance")
    oracle_rtol: float = Field(default=1e-12, gt=0, description="Oracle relative tolerance")
    rk4_steps: int = Field(default=4000, ge=1, description="Default RK4 step count")
    min_step_fraction: float = Field(
        default=1e-14,
        gt=0,
        description="Smallest adaptive step relative to the interval length",
    )

    # Benchmark Configuration
    repeats: int = Field(default=3, ge=1, description="Timing repetitions per cell")
    output_dir: str = Field(default="results", description="Default directory for result files")
    seed: int = Field(default=0, ge=0, description="Default random seed")
    parallel_cells: bool = Field(
        default=False,
        description="Run independent experiment cells concurrently",
    )

    @property
    def is_development(self) -> bool:
        """Check if running in development environment."""
        return self.environment == "development"


@lru_cache
def get_settings() -> Settings:
    """Get cached application settings."""
    return Settings()
