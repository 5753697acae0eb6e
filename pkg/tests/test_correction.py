import numpy as np
import pytest

from chemowave.correction import (
    build_correction,
    build_mollifier,
    compute_delta0,
    correction_decay_scan,
    eval_correction_A,
    eval_correction_B,
    mollifier_mass_check,
)
from chemowave.model import Grid, ModelParams, PressureLaw


def make_params(**kw):
    defaults = dict(
        alpha=1.0, mu=1.0, D=1.0, a=1.0, b=1.0,
        pressure=PressureLaw(K=1.0, gamma=2.0),
        rho_plus=1.0, m_plus=0.05, phi_plus=1.05,
    )
    defaults.update(kw)
    return ModelParams(**defaults)


class TestMollifier:
    def test_outside_support(self):
        m = build_mollifier()
        assert m.q0(-0.5) == 0.0
        assert m.q0(1.5) == 0.0
        assert m.q0(0.0) == 0.0
        assert m.q0(1.0) == 0.0

    def test_unit_mass_by_adaptive_quadrature(self):
        m = build_mollifier()
        assert abs(mollifier_mass_check(m) - 1.0) <= 1e-10

    def test_primitive_endpoints(self):
        m = build_mollifier()
        assert m.primitive(0.0) == 0.0
        assert m.primitive(1.0) == 1.0
        assert m.primitive(5.0) == 1.0
        assert 0.0 < m.primitive(0.5) < 1.0

    def test_primitive_monotone(self):
        m = build_mollifier()
        y = np.linspace(0.0, 1.0, 5001)
        assert np.all(np.diff(m.primitive(y)) >= 0.0)

    def test_derivatives_match_finite_differences(self):
        m = build_mollifier()
        y = np.linspace(0.05, 0.95, 181)
        h = 1e-6
        for k in (1, 2, 3):
            fd = (m.q0(y + h, k - 1) - m.q0(y - h, k - 1)) / (2.0 * h)
            exact = m.q0(y, k)
            scale = np.max(np.abs(exact))
            assert np.max(np.abs(fd - exact)) <= 2e-4 * scale


class TestCorrectionValues:
    def test_far_field_case_A(self):
        c = build_correction("A", make_params(), 0.1)
        x_far = 25.0  # beyond the scaled support (0, 10)
        for t in (0.0, 1.0, 3.0):
            r, m, p = eval_correction_A(c, x_far, t)
            assert r == 0.0
            assert m == pytest.approx(0.05 * np.exp(-t), abs=1e-15)
            assert p == pytest.approx(0.05 * np.exp(-t), abs=1e-15)

    def test_wall_values_case_A(self):
        c = build_correction("A", make_params(), 0.1)
        for t in (0.0, 0.7, 4.0):
            assert eval_correction_A(c, 0.0, t) == pytest.approx((0.0, 0.0, 0.0))

    def test_boundary_flatness_case_A(self):
        # finite-difference estimates of the first two x-derivatives at 0
        c = build_correction("A", make_params(b=2.0), 0.2)
        h = 5e-3
        for field in (c.rho_hat, c.m_hat, c.phi_hat):
            f0, f1, f2 = field(0.0, 1.0), field(h, 1.0), field(2 * h, 1.0)
            assert abs(f0) <= 1e-10
            assert abs((f1 - f0) / h) <= 1e-10
            assert abs((f2 - 2 * f1 + f0) / h**2) <= 1e-10

    def test_wall_values_case_B(self):
        p = make_params()
        c = build_correction("B", p, 0.1, m0_boundary=0.02)
        for t in (0.0, 1.5):
            r, m, ph = eval_correction_B(c, 0.0, t)
            assert r == pytest.approx(0.0, abs=1e-300)
            assert m == pytest.approx(0.02 * np.exp(-p.alpha * t))
            assert ph == pytest.approx(0.0, abs=1e-300)
        # m_hat_x vanishes at the wall
        assert abs(c.m_hat(0.0, 1.0, dx_order=1)) <= 1e-300

    def test_far_field_case_B(self):
        p = make_params()
        c = build_correction("B", p, 0.1, m0_boundary=0.02)
        r, m, ph = eval_correction_B(c, 30.0, 2.0)
        assert r == 0.0
        assert m == pytest.approx(p.m_plus * np.exp(-2.0 * p.alpha))
        assert ph == pytest.approx(p.d_plus * np.exp(-2.0 * p.b))

    def test_case_mismatch_rejected(self):
        c = build_correction("A", make_params(), 0.1)
        with pytest.raises(ValueError):
            eval_correction_B(c, 1.0, 0.0)


@pytest.mark.parametrize("case,b_coef,m0b", [
    ("A", 1.0, None),      # equal-rate branch
    ("A", 2.5, None),      # distinct-rate branch
    ("B", 1.0, 0.02),
    ("B", 0.7, -0.01),
])
def test_relaxation_system_residuals(case, b_coef, m0b):
    """The corrections solve their relaxation system exactly; residuals at
    random space-time points stay at the table-interpolation floor."""
    p = make_params(b=b_coef, phi_plus=1.0 + 0.05 * b_coef)
    c = build_correction(case, p, 0.1, m0_boundary=m0b)
    rng = np.random.default_rng(7)
    x = rng.uniform(0.0, 15.0, 200)
    t = rng.uniform(0.0, 5.0, 200)
    r_mass = c.rho_hat_t(x, t) + c.m_hat_x_from_table(x, t)
    r_mom = c.m_hat_t(x, t) + p.alpha * c.m_hat(x, t)
    r_chem = c.phi_hat_t(x, t) - p.a * c.rho_hat(x, t) + p.b * c.phi_hat(x, t)
    assert np.max(np.abs(r_mass)) <= 1e-8
    assert np.max(np.abs(r_mom)) <= 1e-8
    assert np.max(np.abs(r_chem)) <= 1e-8


def test_branch_continuity():
    p_eq = make_params(b=1.0)
    p_near = make_params(b=1.0 + 1e-6)
    c_eq = build_correction("A", p_eq, 0.1)
    c_near = build_correction("A", p_near, 0.1)
    assert c_eq.branch == "b=alpha"
    assert c_near.branch == "b!=alpha"
    x = np.linspace(0.0, 12.0, 97)
    for t in (0.0, 0.5, 2.0, 10.0):
        assert np.max(np.abs(c_near.phi_hat(x, t) - c_eq.phi_hat(x, t))) <= 1e-4


def test_correction_mass_identity():
    # integral of rho_hat equals (m_plus/alpha) * exp(-alpha t) in case A
    p = make_params(alpha=1.3)
    c = build_correction("A", p, 0.1)
    x = np.linspace(0.0, 10.0, 200_001)
    for t in (0.0, 1.0, 2.5):
        mass = np.trapezoid(c.rho_hat(x, t), x)
        assert mass == pytest.approx((p.m_plus / p.alpha) * np.exp(-p.alpha * t), abs=1e-8)


class TestDecayScan:
    def test_sup_norm_time_factor_exact(self):
        c = build_correction("A", make_params(alpha=1.7), 0.1)
        scan = correction_decay_scan(c, k=0, times=np.linspace(0.0, 3.0, 7))
        series = scan.norms["Linf"]
        ratio = series / series[0]
        assert np.allclose(ratio, np.exp(-1.7 * scan.times), rtol=1e-12)
        assert scan.fitted_rate["Linf"] == pytest.approx(-1.7, rel=1e-9)

    def test_epsilon_scaling_ratios(self):
        c = build_correction("A", make_params(), 0.1)
        scan0 = correction_decay_scan(c, k=0)
        # k=0, p=1: ratio 2^0 = 1 (exact mass scaling)
        assert scan0.epsilon_ratio["L1"] == pytest.approx(1.0, rel=1e-6)
        scan1 = correction_decay_scan(c, k=1)
        # k=1, p=inf: ratio 2^(k+1) = 4
        assert scan1.epsilon_ratio["Linf"] == pytest.approx(4.0, rel=1e-4)


class TestDelta0:
    def grid(self):
        return Grid(L=40.0, n_cells=800)

    def test_zero_excess(self):
        p = make_params(m_plus=0.0)
        g = self.grid()
        rho0 = np.full(g.n_cells, p.rho_plus)
        w0 = np.exp(-0.5 * ((g.x - 10.0) / 2.0) ** 2)
        assert compute_delta0(p, rho0, w0, g) == pytest.approx(0.0, abs=1e-15)

    def test_arithmetic(self):
        # excess 0.3, m_plus 0.1, alpha 1, unit bump mass -> 0.2
        p = make_params(m_plus=0.1)
        g = self.grid()
        w0 = np.exp(-0.5 * ((g.x - 10.0) / 2.0) ** 2)
        w0 = w0 / (np.sum(w0) * g.dx)
        rho0 = p.rho_plus + 0.3 * w0
        assert compute_delta0(p, rho0, w0, g) == pytest.approx(0.2, rel=1e-12)

    def test_degenerate_bump_rejected(self):
        p = make_params()
        g = self.grid()
        w0 = np.sin(2 * np.pi * g.x / g.L)  # integral ~ 0
        with pytest.raises(ValueError):
            compute_delta0(p, np.full(g.n_cells, 1.0), w0, g)

    def test_identity_with_built_fields(self):
        # with delta0 from the balance, the initial gap integrates to zero
        p = make_params()
        g = self.grid()
        c = build_correction("A", p, 0.1)
        bump = np.exp(-0.5 * ((g.x - 10.0) / 2.0) ** 2)
        rho0 = p.rho_plus + 0.02 * bump
        d0 = compute_delta0(p, rho0, bump, g)
        gap = rho0 - (p.rho_plus + d0 * bump) - c.rho_hat(g.x, 0.0)
        assert abs(np.sum(gap) * g.dx) <= 1e-10
