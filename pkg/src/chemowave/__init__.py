"""Solver and verification suite for 1-D chemotaxis hydrodynamics on the half-line.

Subpackages:

- ``model``        parameters, pressure/potential laws, grid and state
- ``profile``      nonlinear diffusion waves (evolved and self-similar)
- ``correction``   closed-form far-field correction functions
- ``solver``       finite-volume time integration of the full system
- ``diagnostics``  perturbation norms, decay-exponent fits, monitors
- ``cli``          scenario configs, run orchestration, CSV artifacts
"""

from .model import Grid, ModelParams, PressureLaw, State

__version__ = "0.1.0"

__all__ = ["Grid", "ModelParams", "PressureLaw", "State", "__version__"]
