import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chemowave.model import (
    Grid,
    ModelParams,
    PressureLaw,
    State,
    pressure,
    pressure_d1,
    q_potential,
    q_potential_d1,
    validate_params,
)


def make_params(**kw):
    defaults = dict(
        alpha=1.0, mu=1.0, D=1.0, a=1.0, b=1.0,
        pressure=PressureLaw(K=1.0, gamma=2.0),
        rho_plus=1.0, m_plus=0.0, phi_plus=1.0,
    )
    defaults.update(kw)
    return ModelParams(**defaults)


class TestPressureLaw:
    def test_power_law_values(self):
        assert pressure(PressureLaw(K=1.0, gamma=2.0), 2.0) == pytest.approx(4.0)
        assert pressure(PressureLaw(K=1.0, gamma=1.0), 0.5) == pytest.approx(0.5)
        assert pressure(PressureLaw(K=2.0, gamma=1.4), 1.0) == pytest.approx(2.0)

    def test_nonpositive_density_rejected(self):
        law = PressureLaw(K=1.0, gamma=2.0)
        with pytest.raises(ValueError):
            pressure(law, 0.0)
        with pytest.raises(ValueError):
            pressure(law, -1.0)

    def test_bad_parameters_rejected(self):
        with pytest.raises(ValueError):
            PressureLaw(K=0.0)
        with pytest.raises(ValueError):
            PressureLaw(gamma=0.5)
        with pytest.raises(ValueError):
            PressureLaw(kind="tabulated")

    @given(
        K=st.floats(0.1, 10.0),
        gamma=st.floats(1.0, 3.0),
        rho=st.floats(0.01, 50.0),
    )
    @settings(max_examples=200, deadline=None)
    def test_derivative_positive(self, K, gamma, rho):
        assert pressure_d1(PressureLaw(K=K, gamma=gamma), rho) > 0.0

    def test_fifth_derivative_available(self):
        law = PressureLaw(K=2.0, gamma=2.5)
        vals = [law(1.3, k) for k in range(6)]
        assert all(np.isfinite(v) for v in vals)
        with pytest.raises(ValueError):
            law(1.0, 6)


class TestQPotential:
    def test_substitution_examples(self):
        p = make_params()
        assert q_potential(p, 2.0) == pytest.approx(4.0 - 2.0)
        assert q_potential(p, 1.0) == pytest.approx(0.5)
        assert q_potential_d1(p, 1.0) == pytest.approx(2.0 - 1.0)

    def test_d1_matches_finite_differences(self):
        # central differences of q at 100 random densities, rel err <= 1e-6
        p = make_params(a=1.3, b=0.7, mu=2.1, pressure=PressureLaw(K=1.5, gamma=1.8))
        rng = np.random.default_rng(42)
        rho = rng.uniform(0.1, 10.0, size=100)
        h = 1e-6 * rho
        fd = (q_potential(p, rho + h) - q_potential(p, rho - h)) / (2.0 * h)
        exact = q_potential_d1(p, rho)
        assert np.all(np.abs(fd - exact) <= 1e-6 * np.maximum(np.abs(exact), 1e-3))


class TestValidateParams:
    def test_valid_interval(self):
        v = validate_params(make_params(), 0.5, 2.0)
        assert v.ok and bool(v)
        assert v.min_q_d1 == pytest.approx(0.5, rel=1e-3)

    def test_invalid_interval(self):
        p = make_params(mu=2.0, pressure=PressureLaw(K=1.0, gamma=1.0))
        v = validate_params(p, 0.5, 2.0)
        assert not v.ok
        assert v.min_q_d1 < 0.0

    def test_near_degenerate_flagged(self):
        eps = 1e-6
        v = validate_params(make_params(), eps, eps)
        assert v.ok
        assert v.min_q_d1 == pytest.approx(eps, rel=1e-6)
        assert v.near_degenerate

    def test_agrees_with_brute_force_scan(self):
        p = make_params(mu=1.9, pressure=PressureLaw(K=1.0, gamma=1.9))
        lo, hi = 0.2, 8.0
        rho = np.linspace(lo, hi, 10_000)
        brute = bool(np.all(q_potential_d1(p, rho) > 0.0))
        assert validate_params(p, lo, hi).ok == brute

    def test_bad_interval_rejected(self):
        with pytest.raises(ValueError):
            validate_params(make_params(), -1.0, 2.0)
        with pytest.raises(ValueError):
            validate_params(make_params(), 2.0, 1.0)


class TestContainers:
    def test_grid_geometry(self):
        g = Grid(L=10.0, n_cells=100)
        assert g.dx == pytest.approx(0.1)
        assert g.x[0] == pytest.approx(0.05)
        assert g.x[-1] == pytest.approx(9.95)

    def test_grid_requires_ghosts(self):
        with pytest.raises(ValueError):
            Grid(L=1.0, n_cells=10, n_ghost=1)

    def test_state_rejects_vacuum_and_nan(self):
        n = 8
        ones = np.ones(n)
        with pytest.raises(ValueError):
            State(rho=np.zeros(n), m=ones, phi=ones)
        bad = ones.copy()
        bad[3] = np.nan
        with pytest.raises(ValueError):
            State(rho=ones, m=bad, phi=ones)

    def test_d_plus(self):
        p = make_params(a=2.0, b=4.0, rho_plus=1.5, phi_plus=1.0)
        assert p.d_plus == pytest.approx(1.0 - 0.75)
