"""Scenario configuration, run orchestration and CSV artifact emission.

Config files are flat ``key = value`` text with dotted section names (see
README for the schema).  The CLI verbs are::

    chemowave run <config>                 full pipeline, writes artifacts
    chemowave sweep <config> --axis K --values v1,v2,...
    chemowave profile <config>             build and export the wave only
    chemowave check <config>               validate only

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O
error.  All floating-point output uses 17 significant digits so reruns with
identical configs produce byte-identical CSV bodies.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import hashlib
import json
import os
import sys
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from .correction import CorrectionField, build_correction, compute_delta0
from .diagnostics import (
    DecayReport,
    perturbation,
    theorem_suite,
    weighted_monitor,
)
from .model import Grid, ModelParams, PressureLaw, validate_params
from .profile import (
    AdmissibilityError,
    ProfileField,
    ProfileStepError,
    build_neumann_wave,
    build_selfsimilar_wave,
    constant_profile,
    selfsimilar_field,
)
from .solver import (
    BoundaryRegime,
    FarFieldState,
    SchemeConfig,
    StepError,
    Trajectory,
    init_state,
    run,
    stability_guard,
)

__all__ = [
    "Scenario",
    "ScenarioError",
    "load_scenario",
    "scenario_from_dict",
    "run_scenario",
    "sweep",
    "main",
]

FLOAT_FMT = "%.17g"


class ScenarioError(ValueError):
    """Configuration rejected (parse failure or violated constraint)."""


# ---------------------------------------------------------------------------
# configuration schema
# ---------------------------------------------------------------------------

_DEFAULTS: dict[str, str] = {
    "params.alpha": "1.0",
    "params.mu": "1.0",
    "params.D": "1.0",
    "params.a": "1.0",
    "params.b": "1.0",
    "params.pressure.K": "1.0",
    "params.pressure.gamma": "2.0",
    "params.rho_plus": "1.0",
    "params.m_plus": "0.0",
    "params.phi_plus": "",  # default: (a/b) * rho_plus (zero excess)
    "grid.L": "40.0",
    "grid.n_cells": "800",
    "grid.n_ghost": "2",
    "scheme.cfl": "0.45",
    "scheme.flux": "rusanov",
    "scheme.reconstruction": "muscl-minmod",
    "scheme.splitting": "lie",
    "regime": "A",
    "profile": "",  # auto from regime
    "epsilon0": "0.1",
    "ic.family": "gaussian-bump",
    "ic.amplitude": "0.02",
    "ic.center": "12.0",
    "ic.width": "3.0",
    "ic.rho_left": "",  # case B boundary density; default rho_plus
    "ic.m0_boundary": "",  # case B boundary momentum; default m_plus
    "ic.zeta_amplitude": "0.0",
    "ic.psi_amplitude": "0.0",
    "ic.tail_tol": "1e-6",
    "wave.center": "",  # defaults to ic.center
    "wave.width": "",  # defaults to ic.width
    "t_final": "50.0",
    "snapshots": "auto",
    "fit.t_min": "",  # default 20
    "fit.t_max": "",  # default 0.8 * t_final
    "fit.tolerance": "0.2",
    "fit.r2_min": "0.98",
    "output_dir": "out",
    "output.snapshot_csvs": "first-last",
    "seed": "0",
}

_VALID_PROFILES = ("", "neumann-evolved", "self-similar", "constant")


@dataclass
class Scenario:
    """Fully validated run description."""

    params: ModelParams
    grid: Grid
    regime: BoundaryRegime
    scheme: SchemeConfig
    profile_source: str
    epsilon0: float
    ic_family: str
    ic_amplitude: float
    ic_center: float
    ic_width: float
    rho_left: float
    m0_boundary: float
    zeta_amplitude: float
    psi_amplitude: float
    tail_tol: float
    wave_center: float
    wave_width: float
    t_final: float
    snapshot_times: np.ndarray
    fit_window: tuple[float, float]
    fit_tolerance: float
    fit_r2_min: float
    output_dir: Path
    snapshot_csvs: str
    seed: int
    raw: dict[str, str] = dc_field(default_factory=dict)

    def config_hash(self) -> str:
        """Hash of the physical/numerical configuration (not the output path)."""
        payload = "\n".join(
            f"{k} = {self.raw[k]}" for k in sorted(self.raw) if k != "output_dir"
        )
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def _parse_kv_text(text: str, origin: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ScenarioError(f"{origin}:{lineno}: expected 'key = value', got {line!r}")
        key, value = body.split("=", 1)
        key = key.strip()
        if key not in _DEFAULTS:
            raise ScenarioError(f"{origin}:{lineno}: unknown key {key!r}")
        if key in out:
            raise ScenarioError(f"{origin}:{lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def _as_float(raw: dict[str, str], key: str) -> float:
    try:
        return float(raw[key])
    except ValueError as exc:
        raise ScenarioError(f"key {key!r}: not a number ({raw[key]!r})") from exc


def _as_int(raw: dict[str, str], key: str) -> int:
    try:
        return int(raw[key])
    except ValueError as exc:
        raise ScenarioError(f"key {key!r}: not an integer ({raw[key]!r})") from exc


def _parse_snapshots(spec: str, t_final: float) -> np.ndarray:
    if spec == "auto":
        n = 56
        body = np.geomspace(0.5, t_final, n) if t_final > 0.5 else np.array([t_final])
        return np.unique(np.concatenate(([0.0], body)))
    kind, _, rest = spec.partition(":")
    try:
        if kind == "list":
            times = np.array([float(v) for v in rest.split(",") if v.strip()])
        elif kind in ("geometric", "linear"):
            a, b, n = rest.split(":")
            a, b, n = float(a), float(b), int(n)
            times = np.geomspace(a, b, n) if kind == "geometric" else np.linspace(a, b, n)
            times = np.concatenate(([0.0], times))
        else:
            raise ValueError(f"unknown schedule kind {kind!r}")
    except (ValueError, TypeError) as exc:
        raise ScenarioError(f"snapshot schedule {spec!r}: {exc}") from exc
    times = np.unique(times)
    if times.size == 0 or times[0] < 0.0 or times[-1] > t_final + 1e-12:
        raise ScenarioError("snapshot times must lie in [0, t_final]")
    return times


def scenario_from_dict(overrides: dict[str, str], origin: str = "<dict>") -> Scenario:
    """Apply defaults, type, and cross-validate a raw key-value mapping."""
    raw = dict(_DEFAULTS)
    for k, v in overrides.items():
        if k not in _DEFAULTS:
            raise ScenarioError(f"{origin}: unknown key {k!r}")
        raw[k] = v

    a = _as_float(raw, "params.a")
    b = _as_float(raw, "params.b")
    rho_plus = _as_float(raw, "params.rho_plus")
    phi_plus = _as_float(raw, "params.phi_plus") if raw["params.phi_plus"] else (a / b) * rho_plus
    try:
        params = ModelParams(
            alpha=_as_float(raw, "params.alpha"),
            mu=_as_float(raw, "params.mu"),
            D=_as_float(raw, "params.D"),
            a=a,
            b=b,
            pressure=PressureLaw(
                K=_as_float(raw, "params.pressure.K"),
                gamma=_as_float(raw, "params.pressure.gamma"),
            ),
            rho_plus=rho_plus,
            m_plus=_as_float(raw, "params.m_plus"),
            phi_plus=phi_plus,
        )
        grid = Grid(
            L=_as_float(raw, "grid.L"),
            n_cells=_as_int(raw, "grid.n_cells"),
            n_ghost=_as_int(raw, "grid.n_ghost"),
        )
        scheme = SchemeConfig(
            cfl=_as_float(raw, "scheme.cfl"),
            flux=raw["scheme.flux"],
            reconstruction=raw["scheme.reconstruction"],
            splitting=raw["scheme.splitting"],
        )
    except ValueError as exc:
        raise ScenarioError(str(exc)) from exc

    regime_kind = raw["regime"].strip()
    if regime_kind not in ("A", "B"):
        raise ScenarioError(f"regime must be 'A' or 'B', got {raw['regime']!r}")

    rho_left = _as_float(raw, "ic.rho_left") if raw["ic.rho_left"] else rho_plus
    if rho_left <= 0.0:
        raise ScenarioError("ic.rho_left must be positive")
    # empty: defer to the excess-mass balance computed in prepare()
    m0_boundary = _as_float(raw, "ic.m0_boundary") if raw["ic.m0_boundary"] else np.nan

    # regime/profile pairing
    profile_source = raw["profile"].strip()
    if profile_source not in _VALID_PROFILES:
        raise ScenarioError(f"unknown profile source {profile_source!r}")
    if regime_kind == "A":
        auto = "neumann-evolved"
        if abs(rho_left - rho_plus) > 0.0 and raw["ic.rho_left"]:
            raise ScenarioError("regime A has no boundary density knob (ic.rho_left)")
    else:
        auto = "self-similar" if abs(rho_left - rho_plus) > 1e-12 else "constant"
    if not profile_source:
        profile_source = auto
    elif profile_source != auto:
        raise ScenarioError(
            f"regime {regime_kind} pairs with the {auto!r} profile "
            f"(boundary density {rho_left:.17g} vs far field {rho_plus:.17g}); "
            f"got {profile_source!r}"
        )

    epsilon0 = _as_float(raw, "epsilon0")
    if epsilon0 <= 0.0:
        raise ScenarioError("epsilon0 must be > 0")
    if 1.0 / epsilon0 > grid.L:
        raise ScenarioError(
            f"scaled correction support (0, {1.0 / epsilon0:.17g}) does not fit "
            f"inside the truncated domain (L = {grid.L:.17g})"
        )

    family = raw["ic.family"].strip()
    if family not in ("gaussian-bump", "tanh-front", "constant"):
        raise ScenarioError(f"unknown initial-data family {family!r}")

    t_final = _as_float(raw, "t_final")
    if t_final < 0.0:
        raise ScenarioError("t_final must be >= 0")
    snapshot_times = _parse_snapshots(raw["snapshots"].strip(), t_final)

    fit_min = _as_float(raw, "fit.t_min") if raw["fit.t_min"] else 20.0
    fit_max = _as_float(raw, "fit.t_max") if raw["fit.t_max"] else 0.8 * t_final
    if fit_min >= fit_max and t_final > 0:
        raise ScenarioError("fit window is empty (fit.t_min >= fit.t_max)")

    regime = BoundaryRegime(
        kind=regime_kind,
        phi_left=(a / b) * rho_left if regime_kind == "B" else None,
        rho_left=rho_left if regime_kind == "B" else None,
    )

    scn = Scenario(
        params=params,
        grid=grid,
        regime=regime,
        scheme=scheme,
        profile_source=profile_source,
        epsilon0=epsilon0,
        ic_family=family,
        ic_amplitude=_as_float(raw, "ic.amplitude"),
        ic_center=_as_float(raw, "ic.center"),
        ic_width=_as_float(raw, "ic.width"),
        rho_left=rho_left,
        m0_boundary=m0_boundary,
        zeta_amplitude=_as_float(raw, "ic.zeta_amplitude"),
        psi_amplitude=_as_float(raw, "ic.psi_amplitude"),
        tail_tol=_as_float(raw, "ic.tail_tol"),
        wave_center=_as_float(raw, "wave.center") if raw["wave.center"] else _as_float(raw, "ic.center"),
        wave_width=_as_float(raw, "wave.width") if raw["wave.width"] else _as_float(raw, "ic.width"),
        t_final=t_final,
        snapshot_times=snapshot_times,
        fit_window=(fit_min, fit_max),
        fit_tolerance=_as_float(raw, "fit.tolerance"),
        fit_r2_min=_as_float(raw, "fit.r2_min"),
        output_dir=Path(raw["output_dir"]),
        snapshot_csvs=raw["output.snapshot_csvs"].strip(),
        seed=_as_int(raw, "seed"),
        raw=raw,
    )
    _validate_admissibility(scn)
    return scn


def _validate_admissibility(scn: Scenario) -> None:
    """Reject parameter sets violating the positivity condition on the
    density range the run will visit."""
    amp = abs(scn.ic_amplitude)
    lo = min(scn.params.rho_plus, scn.rho_left) - 2.0 * amp
    hi = max(scn.params.rho_plus, scn.rho_left) + 2.0 * amp
    lo = max(lo, 1e-8)
    check = validate_params(scn.params, lo, hi)
    if not check.ok:
        raise ScenarioError(
            "admissibility failure: the positivity condition "
            "p'(rho) - (a*mu/b)*rho > 0 is violated on the run's density range "
            f"[{lo:.17g}, {hi:.17g}] (min margin {check.min_q_d1:.3e} at "
            f"rho = {check.argmin_rho:.6g})"
        )


def load_scenario(path: str | os.PathLike) -> Scenario:
    """Parse and validate a scenario file."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read config {p}: {exc}") from exc
    return scenario_from_dict(_parse_kv_text(text, str(p)), origin=str(p))


# ---------------------------------------------------------------------------
# initial data assembly
# ---------------------------------------------------------------------------


def _sym_bump(center: float, width: float):
    """Even-symmetrized Gaussian: zero slope at x = 0 exactly."""

    def f(x):
        x = np.asarray(x, dtype=float)
        return np.exp(-0.5 * ((x - center) / width) ** 2) + np.exp(
            -0.5 * ((x + center) / width) ** 2
        )

    return f


def _odd_bump(center: float, width: float):
    def f(x):
        x = np.asarray(x, dtype=float)
        return np.exp(-0.5 * ((x - center) / width) ** 2) - np.exp(
            -0.5 * ((x + center) / width) ** 2
        )

    return f


def _front(center: float, width: float):
    def f(x):
        x = np.asarray(x, dtype=float)
        return 0.5 * (1.0 - np.tanh((x - center) / width))

    return f


def _ic_bump(scn: Scenario):
    if scn.ic_family == "constant":
        return lambda x: np.zeros_like(np.asarray(x, dtype=float))
    if scn.ic_family == "tanh-front":
        return _front(scn.ic_center, scn.ic_width)
    if scn.regime.kind == "B":
        # vanishes at the wall exactly, so the pinned boundary density is
        # untouched by the perturbation
        return _odd_bump(scn.ic_center, scn.ic_width)
    return _sym_bump(scn.ic_center, scn.ic_width)


@dataclass
class PreparedRun:
    """Everything run_scenario assembles before stepping."""

    scenario: Scenario
    profile: ProfileField
    correction: CorrectionField
    state0: "State"
    delta0: float
    w0: object | None


def prepare(scn: Scenario) -> PreparedRun:
    """Build profile, correction and initial state for a scenario.

    Initial data: rho0 rides the configured bump on top of the regime's base
    profile; m0 and phi0 start on the wave + correction manifold (plus
    optional momentum/chemoattractant seeds), which keeps the initial
    perturbation small in the sense the theorems require.
    """
    params, grid = scn.params, scn.grid
    x = grid.x
    bump = _ic_bump(scn)
    delta0 = 0.0
    w0 = None

    if scn.profile_source == "neumann-evolved":
        base = np.full(grid.n_cells, params.rho_plus)
        rho0_row = base + scn.ic_amplitude * bump(x)
        w0 = _sym_bump(scn.wave_center, scn.wave_width)
        delta0 = compute_delta0(params, rho0_row, np.asarray(w0(x)), grid)
        prof = build_neumann_wave(
            params,
            w0,
            delta0,
            grid,
            scn.t_final,
            store_times=scn.snapshot_times,
        )
        corr = build_correction("A", params, scn.epsilon0)
    else:
        # the free-momentum analogue of the wall regime's amplitude balance:
        # unless overridden, pick m0(0) so the correction mass -(m0(0) -
        # m_plus)/alpha absorbs the bump's excess mass and the antiderivative
        # perturbation starts (and stays) anchored at zero
        m0b = scn.m0_boundary
        if np.isnan(m0b):
            excess = scn.ic_amplitude * float(np.sum(bump(x))) * grid.dx
            m0b = params.m_plus - params.alpha * excess
        if scn.profile_source == "self-similar":
            similar = build_selfsimilar_wave(params, scn.rho_left)
            prof = selfsimilar_field(params, grid, similar)
        else:
            prof = constant_profile(params, grid)
        corr = build_correction("B", params, scn.epsilon0, m0_boundary=m0b)

    zeta_seed = _sym_bump(scn.ic_center, scn.ic_width)
    psi_seed = _odd_bump(scn.ic_center, scn.ic_width)

    def rho0(xq):
        # wall regime: the bump is the perturbation against rho_plus and the
        # wave absorbs its excess mass through delta0; free regime: the bump
        # rides on the (data-independent) self-similar or constant base
        if scn.profile_source == "neumann-evolved":
            base_rho = params.rho_plus
        else:
            base_rho = prof.rho(xq, 0.0)
        return base_rho + scn.ic_amplitude * bump(xq)

    def m0(xq):
        return corr.m_hat(xq, 0.0) + scn.psi_amplitude * psi_seed(xq)

    def phi0(xq):
        base_phi = (params.a / params.b) * prof.rho(xq, 0.0)
        return base_phi + corr.phi_hat(xq, 0.0) + scn.zeta_amplitude * zeta_seed(xq)

    state0 = init_state(params, grid, rho0, m0, phi0, scn.regime, tail_tol=scn.tail_tol)

    if scn.regime.kind == "B":
        rho0_at_wall = float(np.asarray(rho0(np.array([0.0])))[0])
        if abs(rho0_at_wall - scn.rho_left) > scn.tail_tol:
            raise ScenarioError(
                f"initial density at the boundary ({rho0_at_wall:.17g}) does not "
                f"match ic.rho_left ({scn.rho_left:.17g}); move the bump away from x=0"
            )
    return PreparedRun(
        scenario=scn, profile=prof, correction=corr, state0=state0, delta0=delta0, w0=w0
    )


# ---------------------------------------------------------------------------
# CSV writers (deterministic bodies; no timestamps)
# ---------------------------------------------------------------------------


def _fmt(v: float) -> str:
    return FLOAT_FMT % v


def write_snapshot_csv(path: Path, state, grid: Grid, scn: Scenario) -> None:
    lines = [
        f"# t = {_fmt(state.t)}",
        f"# params_hash = {scn.config_hash()}",
        f"# scheme = {scn.scheme.flux}/{scn.scheme.reconstruction}/{scn.scheme.splitting}",
        "x,rho,m,phi",
    ]
    for xi, r, m, p in zip(grid.x, state.rho, state.m, state.phi):
        lines.append(f"{_fmt(xi)},{_fmt(r)},{_fmt(m)},{_fmt(p)}")
    path.write_text("\n".join(lines) + "\n")


def write_norms_csv(path: Path, reports: list[DecayReport]) -> None:
    lines = ["t,name,value"]
    for rep in reports:
        for t, v in zip(rep.times, rep.values):
            lines.append(f"{_fmt(t)},{rep.name},{_fmt(v)}")
    path.write_text("\n".join(lines) + "\n")


def write_decay_report_csv(path: Path, reports: list[DecayReport]) -> None:
    lines = ["series_name,predicted_exponent,fitted_exponent,r2,t_min,t_max,tolerance,status"]
    for rep in reports:
        lines.append(
            ",".join(
                [
                    rep.name,
                    _fmt(rep.predicted_exponent),
                    _fmt(rep.fitted_exponent) if np.isfinite(rep.fitted_exponent) else "nan",
                    _fmt(rep.r_squared) if np.isfinite(rep.r_squared) else "nan",
                    _fmt(rep.t_min),
                    _fmt(rep.t_max),
                    _fmt(rep.tolerance),
                    rep.status,
                ]
            )
        )
    path.write_text("\n".join(lines) + "\n")


def write_weighted_csv(path: Path, monitor) -> None:
    lines = ["t,name,value"]
    for name in sorted(monitor.quantities):
        for t, v in zip(monitor.times, monitor.quantities[name]):
            lines.append(f"{_fmt(t)},{name},{_fmt(v)}")
    path.write_text("\n".join(lines) + "\n")


def write_mass_identity_csv(path: Path, rows: list[tuple[float, float, float, float]]) -> None:
    lines = ["t,Phi_at_origin,tail_mass,quad_tol"]
    for t, v, tail, qt in rows:
        lines.append(f"{_fmt(t)},{_fmt(v)},{_fmt(tail)},{_fmt(qt)}")
    path.write_text("\n".join(lines) + "\n")


def write_profile_csv(path: Path, prof: ProfileField, times) -> None:
    if prof.kind == "self-similar":
        lines = ["xi,rho_bar"]
        for xi, v in zip(prof.similar.xi_grid, prof.similar.values):
            lines.append(f"{_fmt(xi)},{_fmt(v)}")
    else:
        lines = ["x,rho_bar,t"]
        xs = prof.grid.x
        for t in times:
            row = prof.rho_on_grid(float(t))
            for xi, v in zip(xs, row):
                lines.append(f"{_fmt(xi)},{_fmt(v)},{_fmt(float(t))}")
    path.write_text("\n".join(lines) + "\n")


def write_correction_csv(path: Path, corr: CorrectionField, grid: Grid, times) -> None:
    lines = ["t,x,rho_hat,m_hat,phi_hat"]
    for t in times:
        r, m, p = corr.triple(grid.x, float(t))
        for xi, rv, mv, pv in zip(grid.x, r, m, p):
            lines.append(f"{_fmt(float(t))},{_fmt(xi)},{_fmt(rv)},{_fmt(mv)},{_fmt(pv)}")
    path.write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# pipeline
# ---------------------------------------------------------------------------


@dataclass
class RunResult:
    scenario: Scenario
    trajectory: Trajectory
    reports: list[DecayReport]
    monitor: object
    prepared: PreparedRun
    manifest: dict


def run_scenario(scn: Scenario, write: bool = True) -> RunResult:
    """Execute the full pipeline for one scenario."""
    prep = prepare(scn)
    params, grid = scn.params, scn.grid
    far = FarFieldState(params)
    traj = run(
        prep.state0,
        params,
        scn.scheme,
        scn.regime,
        grid,
        scn.t_final,
        scn.snapshot_times,
        far=far,
    )
    reports = theorem_suite(
        traj,
        prep.profile,
        prep.correction,
        params,
        scn.regime.kind,
        window=scn.fit_window,
        tolerance=scn.fit_tolerance,
        r2_min=scn.fit_r2_min,
    )
    monitor = weighted_monitor(traj, prep.profile, prep.correction, params)
    mass_rows = []
    for snap in traj.snapshots:
        tri = perturbation(snap, prep.profile, prep.correction, params, grid)
        mass_rows.append((snap.t, tri.Phi_at_origin, tri.tail_mass, tri.quad_tol))

    guard = stability_guard(traj.snapshots[-1], params, grid)
    artifacts: list[str] = []
    outdir = scn.output_dir
    if write:
        try:
            outdir.mkdir(parents=True, exist_ok=True)
            wanted = {"first-last": [0, len(traj.snapshots) - 1]}.get(
                scn.snapshot_csvs,
                range(len(traj.snapshots)) if scn.snapshot_csvs == "all" else [],
            )
            for idx in sorted(set(int(i) for i in wanted)):
                snap = traj.snapshots[idx]
                name = f"snapshot_{idx:04d}.csv"
                write_snapshot_csv(outdir / name, snap, grid, scn)
                artifacts.append(name)
            write_norms_csv(outdir / "norms.csv", reports)
            write_decay_report_csv(outdir / "decay_report.csv", reports)
            write_weighted_csv(outdir / "weighted.csv", monitor)
            write_mass_identity_csv(outdir / "mass_identity.csv", mass_rows)
            prof_times = [t for t in (0.0, scn.t_final) if t <= scn.t_final]
            write_profile_csv(outdir / "profile.csv", prep.profile, prof_times)
            write_correction_csv(outdir / "correction.csv", prep.correction, grid, prof_times)
            artifacts += [
                "norms.csv",
                "decay_report.csv",
                "weighted.csv",
                "mass_identity.csv",
                "profile.csv",
                "correction.csv",
            ]
        except OSError as exc:
            raise RuntimeError(f"I/O failure writing artifacts: {exc}") from exc

    manifest = {
        "config": {k: scn.raw[k] for k in sorted(scn.raw)},
        "config_hash": scn.config_hash(),
        "version": _package_version(),
        "regime": scn.regime.kind,
        "profile_source": scn.profile_source,
        "delta0": prep.delta0,
        "n_steps": traj.stats.n_steps,
        "n_rejections": traj.stats.n_rejections,
        "wall_seconds": traj.stats.wall_seconds,
        "admissibility_margin": guard.min_q_d1,
        "series": {r.name: r.status for r in reports},
        "weighted_flagged": sorted(k for k, v in monitor.flagged.items() if v),
        "artifacts": artifacts,
    }
    if write:
        try:
            (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
        except OSError as exc:
            raise RuntimeError(f"I/O failure writing manifest: {exc}") from exc
    return RunResult(
        scenario=scn,
        trajectory=traj,
        reports=reports,
        monitor=monitor,
        prepared=prep,
        manifest=manifest,
    )


def _package_version() -> str:
    try:
        from importlib.metadata import version

        return version("chemowave")
    except Exception:
        return "unknown"


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


_SWEEPABLE = set(_DEFAULTS) - {"output_dir", "snapshots", "regime", "profile", "ic.family"}


def _sweep_child(args) -> tuple[str, str, list[tuple[str, str, str]]]:
    base_raw, axis, value, outdir = args
    raw = dict(base_raw)
    raw[axis] = value
    raw["output_dir"] = str(outdir)
    try:
        scn = scenario_from_dict(raw, origin=f"sweep[{axis}={value}]")
        result = run_scenario(scn)
        rows = [
            (r.name, _fmt(r.fitted_exponent) if np.isfinite(r.fitted_exponent) else "nan", r.status)
            for r in result.reports
        ]
        return value, "ok", rows
    except Exception as exc:  # reported per-value; sweep continues
        return value, f"error: {exc}", []


def sweep(base: Scenario, axis: str, values: list[str], workers: int | None = None) -> dict:
    """Run one scenario per value of a swept scalar key.

    Children are independent; failures are reported per value and do not
    stop the sweep.  A combined CSV keyed by the swept value lands in the
    base output directory.
    """
    if axis not in _SWEEPABLE:
        raise ScenarioError(f"axis {axis!r} is not a sweepable scalar key")
    if not values:
        raise ScenarioError("sweep needs a non-empty value list")
    if workers is None:
        workers = int(os.environ.get("CHEMOWAVE_WORKERS", "1"))
    base_out = base.output_dir
    base_out.mkdir(parents=True, exist_ok=True)
    jobs = [
        (base.raw, axis, v, base_out / f"{axis.replace('.', '_')}={v}") for v in values
    ]
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_child, jobs))
    else:
        results = [_sweep_child(j) for j in jobs]

    lines = [f"{axis},series_name,fitted_exponent,status"]
    statuses = {}
    for value, status, rows in results:
        statuses[value] = status
        if status != "ok":
            lines.append(f"{value},-,nan,{status.split(':')[0]}")
        for name, fitted, st in rows:
            lines.append(f"{value},{name},{fitted},{st}")
    (base_out / "sweep_summary.csv").write_text("\n".join(lines) + "\n")
    return statuses


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="chemowave", description=__doc__)
    sub = ap.add_subparsers(dest="verb", required=True)
    for verb in ("run", "profile", "check"):
        p = sub.add_parser(verb)
        p.add_argument("config")
    p = sub.add_parser("sweep")
    p.add_argument("config")
    p.add_argument("--axis", required=True)
    p.add_argument("--values", required=True, help="comma-separated value list")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        scn = load_scenario(args.config)
    except ScenarioError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        if args.verb == "check":
            print(f"config ok: regime {scn.regime.kind}, profile {scn.profile_source}, "
                  f"hash {scn.config_hash()}")
            return 0
        if args.verb == "profile":
            prep = prepare(scn)
            scn.output_dir.mkdir(parents=True, exist_ok=True)
            write_profile_csv(scn.output_dir / "profile.csv", prep.profile,
                              [0.0, scn.t_final])
            print(f"profile written to {scn.output_dir / 'profile.csv'}")
            return 0
        if args.verb == "run":
            result = run_scenario(scn)
            print(f"run complete: {len(result.reports)} series, "
                  f"{sum(r.status == 'pass' for r in result.reports)} pass, "
                  f"{sum(r.status == 'fail' for r in result.reports)} fail, "
                  f"{sum(r.status == 'at-floor' for r in result.reports)} at-floor")
            for r in result.reports:
                fitted = f"{r.fitted_exponent:+.3f}" if np.isfinite(r.fitted_exponent) else "  n/a"
                print(f"  {r.name:<14s} predicted {r.predicted_exponent:+.2f} "
                      f"fitted {fitted} [{r.status}]")
            return 0
        if args.verb == "sweep":
            statuses = sweep(scn, args.axis, [v for v in args.values.split(",") if v])
            bad = {k: v for k, v in statuses.items() if v != "ok"}
            for value, status in statuses.items():
                print(f"  {args.axis}={value}: {status}")
            return 3 if bad else 0
    except ScenarioError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (StepError, ProfileStepError, AdmissibilityError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (OSError, RuntimeError) as exc:
        print(f"I/O failure: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
