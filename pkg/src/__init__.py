"""
star-rz - star-product propagators for the generalized Rosen-Zener model.

This package contains the numerical core and benchmark harness, including:
- Orthonormal Legendre machinery and kernel coefficient matrices
- The Rosen-Zener Hamiltonian and its parameter presets
- Low-rank fixed-point solvers for state and operator solutions
- Runge-Kutta oracles and convergence diagnostics
- A command-line benchmark reproducing the numerical experiments

Version: 1.0.0
"""

__version__ = "1.0.0"
__description__ = "Star-product Legendre solvers for generalized Rosen-Zener dynamics"
