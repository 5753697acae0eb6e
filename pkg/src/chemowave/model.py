"""Physical parameters, constitutive laws and grid/state containers.

The model couples cell density rho, cell momentum m and a chemoattractant
concentration phi on the half-line.  All other modules consume the containers
defined here.  The key derived quantity is the combined potential

    q(rho) = p(rho) - (a*mu)/(2*b) * rho**2

whose derivative q'(rho) = p'(rho) - (a*mu/b)*rho must stay positive over the
dynamic density range for the damped system to relax onto a nonlinear
diffusion wave.  ``validate_params`` checks exactly that.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PressureLaw",
    "ModelParams",
    "Grid",
    "State",
    "Validity",
    "pressure",
    "pressure_d1",
    "pressure_d2",
    "q_potential",
    "q_potential_d1",
    "validate_params",
]

#: q'(rho) smaller than this is treated as numerically degenerate: the
#: diffusion-wave equation loses parabolicity and implicit steps stall.
DEGENERACY_THRESHOLD = 1e-5


@dataclass(frozen=True)
class PressureLaw:
    """Power-law pressure p(rho) = K * rho**gamma.

    Power laws cover the isothermal (gamma = 1) and adiabatic (gamma > 1)
    cases while keeping every derivative closed-form; derivatives up to
    fifth order are exposed because the stability theory needs a C^5
    pressure.
    """

    K: float = 1.0
    gamma: float = 2.0
    kind: str = "power-law"

    def __post_init__(self):
        if self.kind != "power-law":
            raise ValueError(f"unsupported pressure law kind: {self.kind!r}")
        if self.K <= 0.0:
            raise ValueError("pressure scale K must be > 0")
        if self.gamma < 1.0:
            raise ValueError("pressure exponent gamma must be >= 1")

    def __call__(self, rho, order: int = 0):
        """Evaluate d^order/drho^order p(rho) for order in 0..5."""
        if order < 0 or order > 5:
            raise ValueError("pressure derivatives supported for order 0..5 only")
        rho = np.asarray(rho, dtype=float)
        if np.any(rho <= 0.0):
            raise ValueError("pressure law evaluated at non-positive density")
        coef = self.K
        for j in range(order):
            coef *= self.gamma - j
        out = coef * rho ** (self.gamma - order)
        return out if out.ndim else float(out)


def pressure(p_law: PressureLaw, rho):
    """p(rho) = K * rho**gamma (domain error for rho <= 0)."""
    return p_law(rho, 0)


def pressure_d1(p_law: PressureLaw, rho):
    """dp/drho; strictly positive for admissible laws and rho > 0."""
    return p_law(rho, 1)


def pressure_d2(p_law: PressureLaw, rho):
    return p_law(rho, 2)


@dataclass(frozen=True)
class ModelParams:
    """Coefficients of the chemotaxis system plus the far-field state.

    alpha    -- momentum damping rate (> 0)
    mu       -- chemotactic sensitivity (> 0)
    D        -- chemoattractant diffusivity (> 0)
    a, b     -- chemoattractant secretion / death rates (> 0)
    pressure -- PressureLaw instance
    rho_plus, m_plus, phi_plus -- limits of the initial data as x -> +inf
    """

    alpha: float = 1.0
    mu: float = 1.0
    D: float = 1.0
    a: float = 1.0
    b: float = 1.0
    pressure: PressureLaw = field(default_factory=PressureLaw)
    rho_plus: float = 1.0
    m_plus: float = 0.0
    phi_plus: float = 1.0

    def __post_init__(self):
        for name in ("alpha", "mu", "D", "a", "b"):
            if not np.isfinite(getattr(self, name)) or getattr(self, name) <= 0.0:
                raise ValueError(f"parameter {name} must be finite and > 0")
        if self.rho_plus <= 0.0:
            raise ValueError("far-field density rho_plus must be > 0")
        if self.phi_plus < 0.0:
            raise ValueError("far-field chemoattractant phi_plus must be >= 0")
        if not np.isfinite(self.d_plus):
            raise ValueError("far-field excess d_plus is not finite")

    @property
    def d_plus(self) -> float:
        """Far-field chemoattractant excess phi_plus - (a/b) * rho_plus."""
        return self.phi_plus - (self.a / self.b) * self.rho_plus


def q_potential(params: ModelParams, rho):
    """Combined potential q(rho) = p(rho) - (a*mu)/(2*b) * rho**2."""
    rho = np.asarray(rho, dtype=float)
    out = params.pressure(rho, 0) - (params.a * params.mu) / (2.0 * params.b) * rho**2
    return out if np.ndim(out) else float(out)


def q_potential_d1(params: ModelParams, rho):
    """q'(rho) = p'(rho) - (a*mu/b) * rho; the effective diffusivity is q'/alpha."""
    rho = np.asarray(rho, dtype=float)
    out = params.pressure(rho, 1) - (params.a * params.mu / params.b) * rho
    return out if np.ndim(out) else float(out)


def q_potential_d2(params: ModelParams, rho):
    rho = np.asarray(rho, dtype=float)
    out = params.pressure(rho, 2) - (params.a * params.mu / params.b)
    return out if np.ndim(out) else float(out)


@dataclass(frozen=True)
class Validity:
    """Outcome of an admissibility scan.

    ``ok`` is True iff q' > 0 on every sampled density; ``min_q_d1`` is the
    smallest sampled value and ``near_degenerate`` flags a positive but
    numerically tiny margin.
    """

    ok: bool
    min_q_d1: float
    argmin_rho: float
    near_degenerate: bool

    def __bool__(self) -> bool:
        return self.ok


def validate_params(
    params: ModelParams,
    rho_min: float,
    rho_max: float,
    n_samples: int = 2001,
) -> Validity:
    """Check the parabolicity condition q'(rho) > 0 on [rho_min, rho_max].

    The condition is sampled densely rather than proved: for power laws with
    gamma < 2 it always fails for large enough rho, so validation is scoped
    to the density range the run will actually visit.
    """
    if not (0.0 < rho_min <= rho_max):
        raise ValueError("require 0 < rho_min <= rho_max")
    rho = np.linspace(rho_min, rho_max, n_samples)
    qd1 = np.asarray(q_potential_d1(params, rho))
    i = int(np.argmin(qd1))
    min_val = float(qd1[i])
    ok = min_val > 0.0
    return Validity(
        ok=ok,
        min_q_d1=min_val,
        argmin_rho=float(rho[i]),
        near_degenerate=ok and min_val < DEGENERACY_THRESHOLD,
    )


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centered grid on the truncated half-line [0, L].

    Cell centers sit at x_i = (i + 1/2) * dx.  ``n_ghost`` cells are kept on
    each side for reconstruction stencils and boundary closures.
    """

    L: float
    n_cells: int
    n_ghost: int = 2

    def __post_init__(self):
        if self.L <= 0.0 or self.n_cells < 4:
            raise ValueError("grid needs L > 0 and at least 4 cells")
        if self.n_ghost < 2:
            raise ValueError("at least 2 ghost cells per side are required")

    @property
    def dx(self) -> float:
        return self.L / self.n_cells

    @property
    def x(self) -> np.ndarray:
        return (np.arange(self.n_cells) + 0.5) * self.dx


@dataclass
class State:
    """Cell-averaged (rho, m, phi) at one time level.

    Arrays cover interior cells only; ghost values are regenerated from the
    boundary regime on demand.  Instances are treated as immutable after
    construction (steppers allocate new ones).
    """

    rho: np.ndarray
    m: np.ndarray
    phi: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=float)
        self.m = np.asarray(self.m, dtype=float)
        self.phi = np.asarray(self.phi, dtype=float)
        if not (self.rho.shape == self.m.shape == self.phi.shape):
            raise ValueError("field shape mismatch")
        if not (
            np.all(np.isfinite(self.rho))
            and np.all(np.isfinite(self.m))
            and np.all(np.isfinite(self.phi))
        ):
            raise ValueError("non-finite value in state fields")
        if np.any(self.rho <= 0.0):
            raise ValueError("vacuum (rho <= 0) in state")

    def copy(self) -> "State":
        return State(self.rho.copy(), self.m.copy(), self.phi.copy(), self.t)
