"""Finite-volume time integration of the full system on the truncated half-line.

    rho_t + m_x                          = 0
    m_t + (m^2/rho + p(rho))_x           = mu * rho * phi_x - alpha * m
    phi_t                                = D * phi_xx + a * rho - b * phi

One step is a splitting of three actions:

  (i)   hyperbolic update of (rho, m) with an approximate Riemann flux
        (Rusanov or HLL) and optional MUSCL-minmod reconstruction;
  (ii)  momentum sources: the chemotactic force mu*rho*phi_x by centered
        differencing of the frozen phi, the damping -alpha*m through the
        exact integrating factor exp(-alpha*dt) -- the two are combined in
        an exponential two-stage update so pure far-field decay
        m_plus*exp(-alpha*t) is reproduced to round-off;
  (iii) one Crank-Nicolson step of the phi equation (Thomas solve) using the
        updated rho.

Ghost cells encode the boundary regime at x = 0 (reflection for the wall
regime, even extension plus pinned phi for the free-momentum regime) and the
far-field ODE limit at x = L (time-dependent Dirichlet).
"""

from __future__ import annotations

import time as _time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .model import Grid, ModelParams, State, q_potential_d1

__all__ = [
    "BoundaryRegime",
    "SchemeConfig",
    "FarFieldState",
    "StepError",
    "StepInfo",
    "Trajectory",
    "AdmissibilityReport",
    "init_state",
    "step",
    "run",
    "stability_guard",
]

RHO_FLOOR = 1e-10


class StepError(RuntimeError):
    """Step rejected (positivity loss or linear-solve failure)."""

    def __init__(self, message: str, diagnostic: dict | None = None):
        super().__init__(message)
        self.diagnostic = diagnostic or {}


@dataclass(frozen=True)
class BoundaryRegime:
    """Boundary closure at x = 0.

    kind "A": wall -- m(0,t) = 0 and phi_x(0,t) = 0.
    kind "B": free momentum -- m_x(0,t) = 0 and phi(0,t) pinned to
    (a/b) * rho0(0).  Since the mass equation then freezes the boundary
    density (d/dt rho(0,t) = -m_x(0,t) = 0), the density is pinned at
    rho0(0) as well, and that is the form the discrete closure enforces.
    """

    kind: str
    phi_left: float | None = None
    rho_left: float | None = None

    def __post_init__(self):
        if self.kind not in ("A", "B"):
            raise ValueError("boundary regime kind must be 'A' or 'B'")
        if self.kind == "B" and (self.phi_left is None or self.rho_left is None):
            raise ValueError("regime B needs the pinned boundary values of phi and rho")


@dataclass(frozen=True)
class SchemeConfig:
    cfl: float = 0.45
    flux: str = "rusanov"
    reconstruction: str = "muscl-minmod"
    splitting: str = "lie"
    phi_stepping: str = "crank-nicolson"
    source_damping: str = "exact-integrating-factor"

    def __post_init__(self):
        if not (0.0 < self.cfl <= 0.9):
            raise ValueError("cfl must lie in (0, 0.9]")
        if self.flux not in ("rusanov", "hll"):
            raise ValueError("flux must be 'rusanov' or 'hll'")
        if self.reconstruction not in ("first-order", "muscl-minmod"):
            raise ValueError("reconstruction must be 'first-order' or 'muscl-minmod'")
        if self.splitting not in ("lie", "strang"):
            raise ValueError("splitting must be 'lie' or 'strang'")
        if self.phi_stepping != "crank-nicolson":
            raise ValueError("only crank-nicolson phi stepping is implemented")
        if self.source_damping != "exact-integrating-factor":
            raise ValueError("only exact-integrating-factor damping is implemented")


@dataclass(frozen=True)
class FarFieldState:
    """Exact solution of the x -> infinity ODE limit of the system."""

    params: ModelParams

    def rho(self, t: float) -> float:
        return self.params.rho_plus

    def m(self, t: float) -> float:
        return self.params.m_plus * np.exp(-self.params.alpha * t)

    def phi(self, t: float) -> float:
        p = self.params
        return p.d_plus * np.exp(-p.b * t) + (p.a / p.b) * p.rho_plus


# ---------------------------------------------------------------------------
# initialization
# ---------------------------------------------------------------------------


def init_state(
    params: ModelParams,
    grid: Grid,
    rho0,
    m0,
    phi0,
    regime: BoundaryRegime | None = None,
    tail_tol: float = 1e-6,
) -> State:
    """Sample initial data at cell centers (midpoint rule) and validate it.

    Checks: positivity of rho0, decay of all fields to the far-field
    constants at x = L within ``tail_tol``, and, for the wall regime,
    boundary compatibility m0(0) = 0.
    """
    x = grid.x
    rho = np.asarray(rho0(x), dtype=float)
    m = np.asarray(m0(x), dtype=float)
    phi = np.asarray(phi0(x), dtype=float)
    if np.any(rho <= 0.0):
        raise ValueError("initial density must be strictly positive")
    gaps = (
        abs(rho[-1] - params.rho_plus),
        abs(m[-1] - params.m_plus),
        abs(phi[-1] - params.phi_plus),
    )
    if max(gaps) > tail_tol:
        raise ValueError(
            "initial data has not settled to the far-field state at x = L "
            f"(gaps {gaps}); enlarge the domain or fix the data"
        )
    if regime is not None and regime.kind == "A":
        m_at_0 = float(np.asarray(m0(np.array([0.0])))[0])
        if abs(m_at_0) > tail_tol:
            raise ValueError(
                f"wall regime requires m0(0) = 0; got {m_at_0:.3e}"
            )
    return State(rho=rho, m=m, phi=phi, t=0.0)


# ---------------------------------------------------------------------------
# spatial pieces
# ---------------------------------------------------------------------------


def _extend(field_in: np.ndarray, ng: int, left_mode: str, left_value: float | None,
            right_values: float) -> np.ndarray:
    """Ghost-extended copy of a cell array.

    left_mode: "even" mirrors, "odd" mirrors with sign flip, "dirichlet"
    linearly extrapolates through the pinned interface value.
    """
    n = field_in.size
    out = np.empty(n + 2 * ng)
    out[ng:-ng] = field_in
    if left_mode == "even":
        out[:ng] = field_in[:ng][::-1]
    elif left_mode == "odd":
        out[:ng] = -field_in[:ng][::-1]
    elif left_mode == "dirichlet":
        out[:ng] = 2.0 * left_value - field_in[:ng][::-1]
    else:  # pragma: no cover
        raise ValueError(left_mode)
    out[-ng:] = right_values
    return out


def _ghost_fields(rho, m, phi, bc: BoundaryRegime, far: FarFieldState, t: float, ng: int):
    if bc.kind == "A":
        rho_e = _extend(rho, ng, "even", None, far.rho(t))
        m_e = _extend(m, ng, "odd", None, far.m(t))
        phi_e = _extend(phi, ng, "even", None, far.phi(t))
    else:
        # free-momentum wall: pin the boundary density (the form the mass
        # equation gives the m_x(0) = 0 condition); m_x(0) = 0 via the even
        # ghost.  A mirrored rho ghost would impose a spurious zero slope
        # and drain the wall layer of the wave it must track.
        rho_e = _extend(rho, ng, "dirichlet", bc.rho_left, far.rho(t))
        m_e = _extend(m, ng, "even", None, far.m(t))
        phi_e = _extend(phi, ng, "dirichlet", bc.phi_left, far.phi(t))
    return rho_e, m_e, phi_e


def _minmod(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return 0.5 * (np.sign(a) + np.sign(b)) * np.minimum(np.abs(a), np.abs(b))


def _reconstruct(rho_e, m_e, ng: int, scheme: str):
    """Interface states (left/right of each of the n+1 interfaces)."""
    hi = rho_e.size - ng + 1  # right-cell slice end for the last interface
    if scheme == "first-order":
        return rho_e[ng - 1 : -ng], m_e[ng - 1 : -ng], rho_e[ng:hi], m_e[ng:hi]
    drho = np.diff(rho_e)
    dm = np.diff(m_e)
    s_rho = np.zeros_like(rho_e)
    s_m = np.zeros_like(m_e)
    s_rho[1:-1] = _minmod(drho[:-1], drho[1:])
    s_m[1:-1] = _minmod(dm[:-1], dm[1:])
    rl = rho_e[ng - 1 : -ng] + 0.5 * s_rho[ng - 1 : -ng]
    ml = m_e[ng - 1 : -ng] + 0.5 * s_m[ng - 1 : -ng]
    rr = rho_e[ng:hi] - 0.5 * s_rho[ng:hi]
    mr = m_e[ng:hi] - 0.5 * s_m[ng:hi]
    return rl, ml, rr, mr


def _phys_flux(rho, m, params: ModelParams):
    u = m / rho
    return m, m * u + params.pressure(rho, 0)


def _interface_flux(rl, ml, rr, mr, params: ModelParams, kind: str):
    cl = np.sqrt(params.pressure(np.maximum(rl, RHO_FLOOR), 1))
    cr = np.sqrt(params.pressure(np.maximum(rr, RHO_FLOOR), 1))
    ul = ml / rl
    ur = mr / rr
    f_rho_l, f_m_l = _phys_flux(rl, ml, params)
    f_rho_r, f_m_r = _phys_flux(rr, mr, params)
    if kind == "rusanov":
        s = np.maximum(np.abs(ul) + cl, np.abs(ur) + cr)
        f_rho = 0.5 * (f_rho_l + f_rho_r) - 0.5 * s * (rr - rl)
        f_m = 0.5 * (f_m_l + f_m_r) - 0.5 * s * (mr - ml)
        return f_rho, f_m
    # HLL with direct wave-speed bounds
    sl = np.minimum(ul - cl, ur - cr)
    sr = np.maximum(ul + cl, ur + cr)
    f_rho = np.where(sl >= 0.0, f_rho_l, np.where(sr <= 0.0, f_rho_r, 0.0))
    f_m = np.where(sl >= 0.0, f_m_l, np.where(sr <= 0.0, f_m_r, 0.0))
    mid = (sl < 0.0) & (sr > 0.0)
    denom = np.where(mid, sr - sl, 1.0)
    f_rho = np.where(
        mid,
        (sr * f_rho_l - sl * f_rho_r + sl * sr * (rr - rl)) / denom,
        f_rho,
    )
    f_m = np.where(
        mid,
        (sr * f_m_l - sl * f_m_r + sl * sr * (mr - ml)) / denom,
        f_m,
    )
    return f_rho, f_m


def max_wave_speed(state: State, params: ModelParams) -> float:
    c = np.sqrt(params.pressure(state.rho, 1))
    return float(np.max(np.abs(state.m / state.rho) + c))


def _phi1(z: float) -> float:
    if abs(z) < 1e-8:
        return 1.0 + 0.5 * z + z * z / 6.0
    return np.expm1(z) / z


def _phi2(z: float) -> float:
    if abs(z) < 1e-6:
        return 0.5 + z / 6.0 + z * z / 24.0
    return (np.expm1(z) - z) / (z * z)


# ---------------------------------------------------------------------------
# the step
# ---------------------------------------------------------------------------


@dataclass
class StepInfo:
    """Per-step bookkeeping (boundary mass fluxes are time-integrated)."""

    dt: float
    mass_flux_left: float = 0.0
    mass_flux_right: float = 0.0


def _hyperbolic_substep(
    rho, m, phi_frozen, params, cfg, bc, far, t, dt, dx, ng, phi_time=None
) -> tuple[np.ndarray, np.ndarray, float, float]:
    """Exponential two-stage update of (rho, m) over dt with phi frozen.

    ``phi_time`` is the time level of the frozen phi field; its far-field
    ghost must be evaluated there (under Strang splitting phi sits at the
    half step, and a stage-time ghost would fake a boundary gradient).
    """
    mu = params.mu
    z = -params.alpha * dt
    ez, p1, p2 = np.exp(z), _phi1(z), _phi2(z)

    _, _, phi_e = _ghost_fields(rho, m, phi_frozen, bc, far,
                                t if phi_time is None else phi_time, ng)
    phi_x = (phi_e[ng + 1 : phi_e.size - ng + 1] - phi_e[ng - 1 : -ng - 1]) / (2.0 * dx)

    def rhs(r, mm, at_t):
        rho_e, m_e, _ = _ghost_fields(r, mm, phi_frozen, bc, far, at_t, ng)
        rl, ml, rr, mr = _reconstruct(rho_e, m_e, ng, cfg.reconstruction)
        f_rho, f_m = _interface_flux(rl, ml, rr, mr, params, cfg.flux)
        div_rho = (f_rho[1:] - f_rho[:-1]) / dx
        div_m = (f_m[1:] - f_m[:-1]) / dx
        force = mu * r * phi_x
        return -div_rho, -div_m + force, f_rho

    r0, n0, f_rho_0 = rhs(rho, m, t)
    rho_a = rho + dt * r0
    m_a = ez * m + dt * p1 * n0
    if np.any(rho_a <= RHO_FLOOR):
        i = int(np.argmin(rho_a))
        raise StepError(
            "positivity loss in hyperbolic stage",
            {"t": t, "cell": i, "rho": float(rho_a[i])},
        )
    if cfg.reconstruction == "first-order":
        return rho_a, m_a, float(f_rho_0[0]) * dt, float(f_rho_0[-1]) * dt

    r1, n1, f_rho_1 = rhs(rho_a, m_a, t + dt)
    rho_new = rho + 0.5 * dt * (r0 + r1)
    m_new = m_a + dt * p2 * (n1 - n0)
    if np.any(rho_new <= RHO_FLOOR):
        i = int(np.argmin(rho_new))
        raise StepError(
            "positivity loss in hyperbolic stage",
            {"t": t, "cell": i, "rho": float(rho_new[i])},
        )
    flux_l = 0.5 * dt * float(f_rho_0[0] + f_rho_1[0])
    flux_r = 0.5 * dt * float(f_rho_0[-1] + f_rho_1[-1])
    return rho_new, m_new, flux_l, flux_r


def _phi_substep(phi, rho_frozen, params, bc, far, t_old, tau, dx):
    """Crank-Nicolson step of phi_t = D phi_xx + a rho - b phi over tau."""
    p = params
    n = phi.size
    r = p.D * tau / (2.0 * dx * dx)
    hb = 0.5 * tau * p.b

    lap = np.empty(n)
    lap[1:-1] = phi[:-2] - 2.0 * phi[1:-1] + phi[2:]
    if bc.kind == "A":
        lap[0] = phi[1] - phi[0]
    else:
        lap[0] = 2.0 * bc.phi_left - 3.0 * phi[0] + phi[1]
    lap[-1] = phi[-2] - 2.0 * phi[-1] + far.phi(t_old)

    rhs = phi + r * lap - hb * phi + tau * p.a * rho_frozen

    ab = np.zeros((3, n))
    ab[0, 1:] = -r
    ab[2, :-1] = -r
    ab[1, :] = 1.0 + 2.0 * r + hb
    if bc.kind == "A":
        ab[1, 0] = 1.0 + r + hb
    else:
        ab[1, 0] = 1.0 + 3.0 * r + hb
        rhs[0] += 2.0 * r * bc.phi_left
    rhs[-1] += r * far.phi(t_old + tau)
    try:
        out = solve_banded((1, 1), ab, rhs, overwrite_ab=True, overwrite_b=True)
    except Exception as exc:  # singular system should never happen
        raise StepError(f"tridiagonal solve for phi failed: {exc}") from exc
    return out


def step(
    state: State,
    params: ModelParams,
    cfg: SchemeConfig,
    bc: BoundaryRegime,
    far: FarFieldState,
    dt: float,
    grid: Grid | None = None,
    dx: float | None = None,
) -> tuple[State, StepInfo]:
    """Advance one full time step. dt must respect the hyperbolic CFL bound."""
    if dx is None:
        dx = grid.dx
    smax = max_wave_speed(state, params)
    if dt > cfg.cfl * dx / smax * (1.0 + 1e-9):
        raise StepError(
            "dt exceeds the CFL bound",
            {"dt": dt, "limit": cfg.cfl * dx / smax},
        )
    ng = 2
    t = state.t
    if cfg.splitting == "strang":
        phi = _phi_substep(state.phi, state.rho, params, bc, far, t, 0.5 * dt, dx)
        rho, m, fl, fr = _hyperbolic_substep(
            state.rho, state.m, phi, params, cfg, bc, far, t, dt, dx, ng,
            phi_time=t + 0.5 * dt,
        )
        phi = _phi_substep(phi, rho, params, bc, far, t + 0.5 * dt, 0.5 * dt, dx)
    else:
        rho, m, fl, fr = _hyperbolic_substep(
            state.rho, state.m, state.phi, params, cfg, bc, far, t, dt, dx, ng
        )
        phi = _phi_substep(state.phi, rho, params, bc, far, t, dt, dx)
    new = State(rho=rho, m=m, phi=phi, t=t + dt)
    return new, StepInfo(dt=dt, mass_flux_left=fl, mass_flux_right=fr)


# ---------------------------------------------------------------------------
# orchestration
# ---------------------------------------------------------------------------


@dataclass
class RunStats:
    n_steps: int = 0
    n_rejections: int = 0
    dt_min: float = np.inf
    dt_max: float = 0.0
    wall_seconds: float = 0.0


@dataclass
class Trajectory:
    """Snapshots plus conservation bookkeeping aligned with them."""

    snapshots: list[State]
    stats: RunStats
    grid: Grid
    mass_initial: float = 0.0
    # time-integrated rho-flux through each boundary up to each snapshot
    flux_left: list[float] = field(default_factory=list)
    flux_right: list[float] = field(default_factory=list)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])

    def mass_defect(self, i: int) -> float:
        """Mass change minus net boundary inflow at snapshot i (should be ~0)."""
        s = self.snapshots[i]
        mass = float(np.sum(s.rho) * self.grid.dx)
        return mass - self.mass_initial + (self.flux_right[i] - self.flux_left[i])


def run(
    state0: State,
    params: ModelParams,
    cfg: SchemeConfig,
    bc: BoundaryRegime,
    grid: Grid,
    t_final: float,
    snapshot_times,
    far: FarFieldState | None = None,
    wall_budget: float | None = None,
) -> Trajectory:
    """Integrate to t_final with adaptive CFL steps, landing snapshots exactly."""
    far = far or FarFieldState(params)
    snaps = np.asarray(sorted(set(float(s) for s in snapshot_times)), dtype=float)
    if snaps.size and (snaps[0] < state0.t - 1e-12 or snaps[-1] > t_final + 1e-12):
        raise ValueError("snapshot times must lie in [t0, t_final]")

    stats = RunStats()
    traj = Trajectory(snapshots=[], stats=stats, grid=grid)
    traj.mass_initial = float(np.sum(state0.rho) * grid.dx)
    t_start = _time.perf_counter()

    state = state0.copy()
    acc_left = acc_right = 0.0
    pending = list(snaps)

    def maybe_snapshot():
        while pending and state.t >= pending[0] - 1e-10:
            pending.pop(0)
            traj.snapshots.append(state.copy())
            traj.flux_left.append(acc_left)
            traj.flux_right.append(acc_right)

    maybe_snapshot()
    halved_last = False
    dt_forced = None
    while state.t < t_final - 1e-12:
        if wall_budget is not None and _time.perf_counter() - t_start > wall_budget:
            raise StepError("wall-clock budget exceeded", {"t": state.t})
        smax = max_wave_speed(state, params)
        dt = cfg.cfl * grid.dx / smax
        if dt_forced is not None:
            dt = min(dt, dt_forced)
        horizon = pending[0] if pending else t_final
        dt = min(dt, horizon - state.t, t_final - state.t)
        try:
            state, info = step(state, params, cfg, bc, far, dt, dx=grid.dx)
        except StepError as exc:
            stats.n_rejections += 1
            if halved_last:
                raise StepError(
                    f"persistent step failure near t = {state.t:.6g}: {exc}",
                    getattr(exc, "diagnostic", {}),
                ) from exc
            halved_last = True
            dt_forced = 0.5 * dt
            continue
        halved_last = False
        dt_forced = None
        acc_left += info.mass_flux_left
        acc_right += info.mass_flux_right
        stats.n_steps += 1
        stats.dt_min = min(stats.dt_min, dt)
        stats.dt_max = max(stats.dt_max, dt)
        maybe_snapshot()
    stats.wall_seconds = _time.perf_counter() - t_start
    if not traj.snapshots and snaps.size == 0:
        traj.snapshots.append(state.copy())
        traj.flux_left.append(acc_left)
        traj.flux_right.append(acc_right)
    return traj


@dataclass(frozen=True)
class AdmissibilityReport:
    min_q_d1: float
    argmin_x: float
    min_rho: float
    flagged: bool


def stability_guard(state: State, params: ModelParams, grid: Grid | None = None) -> AdmissibilityReport:
    """Dynamic check of the positivity condition p'(rho) - (a*mu/b)*rho > 0."""
    margin = np.asarray(q_potential_d1(params, state.rho))
    i = int(np.argmin(margin))
    x_at = float(grid.x[i]) if grid is not None else float(i)
    return AdmissibilityReport(
        min_q_d1=float(margin[i]),
        argmin_x=x_at,
        min_rho=float(np.min(state.rho)),
        flagged=bool(margin[i] <= 0.0),
    )
