import numpy as np
import pytest

from chemowave.correction import build_correction
from chemowave.diagnostics import (
    fit_decay,
    norms,
    perturbation,
    theorem_suite,
    weighted_monitor,
)
from chemowave.model import Grid, ModelParams, PressureLaw, State
from chemowave.profile import build_neumann_wave, constant_profile
from chemowave.solver import BoundaryRegime, FarFieldState, SchemeConfig, init_state, run
from chemowave.stencils import deriv1, deriv2


def make_params(**kw):
    defaults = dict(
        alpha=1.0, mu=1.0, D=1.0, a=1.0, b=1.0,
        pressure=PressureLaw(K=1.0, gamma=2.0),
        rho_plus=1.0, m_plus=0.0, phi_plus=1.0,
    )
    defaults.update(kw)
    return ModelParams(**defaults)


class TestStencils:
    def test_convergence_orders(self):
        errs1, errs2 = [], []
        for n in (100, 200, 400):
            x = np.linspace(0.0, 2.0, n)
            dx = x[1] - x[0]
            f = np.sin(3.0 * x)
            errs1.append(np.max(np.abs(deriv1(f, dx) - 3.0 * np.cos(3.0 * x))))
            errs2.append(np.max(np.abs(deriv2(f, dx) + 9.0 * np.sin(3.0 * x))))
        assert np.log2(errs1[0] / errs1[1]) >= 2.7  # 3rd order at the edges
        assert np.log2(errs2[0] / errs2[1]) >= 2.6


class TestNorms:
    def test_zero_field(self):
        z = np.zeros(100)
        for which in ("L1", "L2", "Linf", "H1", "H2"):
            assert norms(z, which, 0.1) == 0.0

    def test_bump_sup(self):
        x = np.linspace(0.0, 10.0, 801)
        f = np.exp(-((x - 5.0) ** 2))
        assert norms(f, "Linf", x[1] - x[0]) == pytest.approx(1.0, abs=1e-12)

    def test_sine_l2_closed_form(self):
        x = np.linspace(0.0, 2.0 * np.pi, 4001)
        f = np.sin(x)
        assert norms(f, "L2", x[1] - x[0]) == pytest.approx(np.sqrt(np.pi), abs=1e-4)

    def test_norm_refinement_order(self):
        # generic interval (nonzero endpoint slopes) so the trapezoid error
        # is genuinely O(dx^2)
        exact = np.sqrt(1.0 - np.sin(4.0) / 4.0)
        errs = []
        for n in (201, 401):
            x = np.linspace(0.0, 2.0, n)
            errs.append(abs(norms(np.sin(x), "L2", x[1] - x[0]) - exact))
        assert np.log2(errs[0] / errs[1]) >= 1.9

    def test_unknown_norm(self):
        with pytest.raises(ValueError):
            norms(np.ones(4), "L7", 0.1)


class TestFitDecay:
    def test_exact_algebraic_series(self):
        t = np.linspace(0.0, 300.0, 200)
        v = 3.0 * (1.0 + t) ** (-0.75)
        fit = fit_decay(t, v, (10.0, 250.0))
        assert fit.slope == pytest.approx(-0.75, abs=1e-12)
        assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
        assert not fit.super_algebraic

    def test_exponential_flagged_super_algebraic(self):
        t = np.linspace(0.0, 60.0, 120)
        v = np.exp(-t)
        fit = fit_decay(t, v, (1.0, 50.0))
        assert fit.slope < -3.0
        assert fit.super_algebraic

    def test_window_validation(self):
        t = np.linspace(0.0, 10.0, 50)
        with pytest.raises(ValueError, match="10 samples"):
            fit_decay(t, np.ones_like(t), (9.0, 9.5))
        v = np.ones_like(t)
        v[30] = 0.0
        with pytest.raises(ValueError, match="non-positive"):
            fit_decay(t, v, (0.0, 10.0))


@pytest.fixture(scope="module")
def smooth_run():
    """Short wall-regime run with wave and correction, shared by the
    perturbation-level tests."""
    p = make_params(m_plus=0.02, phi_plus=1.02)
    grid = Grid(L=60.0, n_cells=600)
    corr = build_correction("A", p, 0.1)
    bump = lambda x: (
        np.exp(-0.5 * ((np.asarray(x, float) - 10) / 2.5) ** 2)
        + np.exp(-0.5 * ((np.asarray(x, float) + 10) / 2.5) ** 2)
    )
    rho0 = lambda x: 1.0 + 0.02 * bump(x)
    from chemowave.correction import compute_delta0

    d0 = compute_delta0(p, rho0(grid.x), bump(grid.x), grid)
    times = np.unique(np.concatenate((np.linspace(0.0, 2.0, 9), [4.0, 8.0])))
    wave = build_neumann_wave(p, bump, d0, grid, 8.0, store_times=times)
    st = init_state(
        p, grid, rho0,
        lambda x: corr.m_hat(x, 0.0),
        lambda x: (p.a / p.b) * wave.rho(x, 0.0) + corr.phi_hat(x, 0.0),
        BoundaryRegime(kind="A"),
    )
    traj = run(st, p, SchemeConfig(splitting="strang"), BoundaryRegime(kind="A"),
               grid, 8.0, times, far=FarFieldState(p))
    return p, grid, wave, corr, traj


class TestPerturbation:
    def test_exact_compensation_gives_zero(self):
        p = make_params(a=2.0, b=1.0, m_plus=0.03, phi_plus=2.03)
        grid = Grid(L=40.0, n_cells=200)
        prof = constant_profile(p, grid)
        corr = build_correction("B", p, 0.1, m0_boundary=0.03)
        t = 1.7
        rho_hat, m_hat, phi_hat = corr.triple(grid.x, t)
        st = State(
            prof.rho_on_grid(t) + rho_hat,
            prof.m_on_grid(t) + m_hat,
            prof.phi_on_grid(t) + phi_hat,
            t,
        )
        tri = perturbation(st, prof, corr, p, grid)
        assert np.max(np.abs(tri.Phi)) <= 1e-12
        assert np.max(np.abs(tri.psi)) <= 1e-15
        assert np.max(np.abs(tri.zeta)) <= 1e-15
        assert abs(tri.Phi_at_origin) <= 1e-12

    def test_phi_x_recovers_integrand(self, smooth_run):
        p, grid, wave, corr, traj = smooth_run
        tri = perturbation(traj.snapshots[-1], wave, corr, p, grid)
        fd = np.gradient(tri.Phi, grid.dx)
        err = np.max(np.abs(fd[2:-2] - tri.Phi_x[2:-2]))
        assert err <= 1.0 * grid.dx**2 * max(1.0, np.max(np.abs(deriv2(tri.Phi_x, grid.dx))))

    def test_mass_identity_along_run(self, smooth_run):
        p, grid, wave, corr, traj = smooth_run
        tail_seen = 0.0
        for snap in traj.snapshots:
            tri = perturbation(snap, wave, corr, p, grid)
            tail_seen = max(tail_seen, tri.tail_mass)
            assert abs(tri.Phi_at_origin) <= 10.0 * (tri.quad_tol + tail_seen) + 1e-12

    def test_phi_psi_consistency(self, smooth_run):
        # d/dt Phi = -psi discretely between close snapshots
        p, grid, wave, corr, traj = smooth_run
        snaps = [s for s in traj.snapshots if s.t <= 2.0 + 1e-9]
        for s0, s1 in zip(snaps[:-1], snaps[1:]):
            t0 = perturbation(s0, wave, corr, p, grid)
            t1 = perturbation(s1, wave, corr, p, grid)
            dt = s1.t - s0.t
            lhs = (t1.Phi - t0.Phi) / dt
            rhs = -0.5 * (t0.psi + t1.psi)
            scale = max(np.max(np.abs(t0.psi)), 1e-6)
            assert np.max(np.abs(lhs - rhs)) <= 0.5 * (dt + grid.dx**2) * max(scale, 1.0)


class TestTheoremSuite:
    def test_exact_trajectory_reports_at_floor(self):
        p = make_params(a=2.0, b=1.0, m_plus=0.03, phi_plus=2.03)
        grid = Grid(L=40.0, n_cells=200)
        prof = constant_profile(p, grid)
        corr = build_correction("B", p, 0.1, m0_boundary=0.03)

        class FakeTraj:
            pass

        traj = FakeTraj()
        traj.grid = grid
        traj.snapshots = []
        times = np.linspace(0.0, 50.0, 40)
        for t in times:
            rho_hat, m_hat, phi_hat = corr.triple(grid.x, float(t))
            traj.snapshots.append(
                State(
                    prof.rho_on_grid(t) + rho_hat,
                    prof.m_on_grid(t) + m_hat,
                    prof.phi_on_grid(t) + phi_hat,
                    float(t),
                )
            )
        traj.times = times
        reports = theorem_suite(traj, prof, corr, p, "B", window=(5.0, 45.0))
        by_name = {r.name: r for r in reports}
        # gap series vanish identically; the sup gaps only carry the
        # exponentially dead correction
        assert by_name["Phi_L2"].at_floor
        assert by_name["psi_L2"].at_floor
        assert by_name["zeta_L2"].at_floor
        for r in reports:
            assert r.status in ("at-floor", "pass", "fail")

    def test_report_names_complete(self, smooth_run):
        p, grid, wave, corr, traj = smooth_run
        reports = theorem_suite(traj, wave, corr, p, "A", window=(0.5, 8.0))
        names = {r.name for r in reports}
        assert {
            "Phi_L2", "Phi_x_L2", "Phi_xx_L2",
            "psi_L2", "psi_x_L2", "psi_xx_L2",
            "zeta_L2", "zeta_x_L2",
            "rho_gap_sup", "m_gap_sup", "phi_gap_sup",
        } <= names


class TestWeightedMonitor:
    def test_equilibrium_all_zero(self):
        p = make_params()
        grid = Grid(L=20.0, n_cells=100)
        prof = constant_profile(p, grid)
        corr = build_correction("B", p, 0.1, m0_boundary=0.0)

        class FakeTraj:
            pass

        traj = FakeTraj()
        traj.grid = grid
        times = np.linspace(0.0, 10.0, 11)
        eq = np.full(grid.n_cells, 1.0)
        traj.snapshots = [State(eq.copy(), 0 * eq, eq.copy(), float(t)) for t in times]
        traj.times = times
        mon = weighted_monitor(traj, prof, corr, p)
        assert not mon.any_flagged
        for series in mon.quantities.values():
            assert np.max(series) <= 1e-20

    def test_quadratic_scaling_in_data(self, smooth_run):
        # doubling the perturbation quadruples the k=0 weighted quantity
        p, grid, wave, corr, traj = smooth_run
        snap = traj.snapshots[0]

        def k0_quantity(scale):
            rho_base = wave.rho_on_grid(0.0) + corr.rho_hat(grid.x, 0.0)
            m_base = wave.m_on_grid(0.0) + corr.m_hat(grid.x, 0.0)
            tri = perturbation(
                State(
                    rho_base + scale * (snap.rho - rho_base),
                    m_base + scale * (snap.m - m_base),
                    snap.phi,
                    0.0,
                ),
                wave, corr, p, grid,
            )
            return np.trapezoid(tri.Phi**2, dx=grid.dx)

        q1 = k0_quantity(1.0)
        q2 = k0_quantity(2.0)
        assert q2 / q1 == pytest.approx(4.0, rel=1e-6)

    def test_bounded_along_smooth_run(self, smooth_run):
        p, grid, wave, corr, traj = smooth_run
        mon = weighted_monitor(traj, wave, corr, p, t_transient=2.0)
        assert not mon.any_flagged
