import math

import numpy as np
import pytest

from oldroyd1d.errors import AdmissibilityError, DomainError, ValidationError
from oldroyd1d.grid import GridSpec, StateField
from oldroyd1d.model import (
    CellState,
    PhysParams,
    RegimeWarning,
    admissibility_scan,
    characteristic_speeds,
    dpressure,
    max_wave_speed,
    neo_hookean_stress,
    pressure,
    symmetrizer,
)


@pytest.mark.parametrize("v,gamma,expected", [(1.0, 1.4, 1.0), (2.0, 2.0, 0.25), (0.5, 1.4, 2.0**1.4)])
def test_pressure_values(v, gamma, expected):
    assert pressure(v, PhysParams(gamma=gamma)) == pytest.approx(expected, rel=1e-14)


def test_pressure_matches_log_exp_form():
    p = PhysParams(gamma=1.4, B=1.0)
    assert pressure(0.5, p) == pytest.approx(math.exp(-1.4 * math.log(0.5)), rel=1e-14)
    assert pressure(0.5, p) == pytest.approx(2.6390, abs=1e-4)


@pytest.mark.parametrize("v,gamma,expected", [(1.0, 1.4, -1.4), (1.0, 2.0, -2.0), (2.0, 2.0, -0.25)])
def test_dpressure_values(v, gamma, expected):
    assert dpressure(v, PhysParams(gamma=gamma)) == pytest.approx(expected, rel=1e-14)


def test_dpressure_against_finite_difference():
    p = PhysParams(gamma=2.0)
    h = 1e-5
    fd = (pressure(2.0 + h, p) - pressure(2.0 - h, p)) / (2 * h)
    assert fd == pytest.approx(dpressure(2.0, p), rel=1e-8)


@pytest.mark.parametrize("bad", [0.0, -0.1, np.array([1.0, 0.5, -2.0])])
def test_pressure_rejects_nonpositive_volume(bad):
    with pytest.raises(DomainError):
        pressure(bad, PhysParams())


def test_domain_error_names_index():
    with pytest.raises(DomainError, match="index 2"):
        dpressure(np.array([1.0, 0.5, -2.0]), PhysParams())


@pytest.mark.parametrize(
    "kwargs,match",
    [
        ({"a": 1.5}, r"a must lie in \[-1,1\]"),
        ({"tau": 0.0}, "tau"),
        ({"mu": -1.0}, "mu"),
        ({"gamma": 1.0}, "gamma"),
        ({"G": 2.0, "a": 0.0}, "a"),
    ],
)
def test_param_validation(kwargs, match):
    with pytest.raises(ValidationError, match=match):
        PhysParams(**kwargs)


def test_regime_warning():
    p = PhysParams(tau=0.5, mu=0.6)
    assert not p.in_small_relaxation_regime
    with pytest.warns(RegimeWarning):
        p.warn_if_outside_regime()
    assert PhysParams().regime_warning() is None


def test_symmetrizer_rest_state():
    tri = symmetrizer(CellState(1.0, 0.0, 0.0), PhysParams(gamma=1.4, mu=1.0, tau=0.1, a=0.5))
    np.testing.assert_allclose(tri.A0, np.diag([1.4, 1.0, 0.1]), rtol=1e-15)
    assert np.array_equal(tri.A0, tri.A0.T)
    assert np.array_equal(tri.A1, tri.A1.T)


def test_symmetrizer_stress_dependent_entry():
    p = PhysParams(mu=1.0, tau=0.25, a=-1.0)
    tri = symmetrizer(CellState(1.0, 0.0, 1.0), p)
    denom = 2 * 0.25 * (-1.0) * 1.0 + 1.0
    assert denom == 0.5
    assert tri.A0[2, 2] == pytest.approx(0.25 / denom, rel=1e-15)
    assert tri.Bmat[2, 2] == pytest.approx(1.0 / denom, rel=1e-15)


def test_symmetrizer_rejects_margin_violation():
    p = PhysParams(mu=1.0, tau=0.5, a=1.0)
    with pytest.raises(AdmissibilityError) as exc:
        symmetrizer(CellState(1.0, 0.0, -1.0), p)
    assert exc.value.invariant == "2*tau*a*S+mu>0"
    with pytest.raises(AdmissibilityError) as exc:
        symmetrizer(CellState(-1.0, 0.0, 0.0), p)
    assert exc.value.invariant == "v>0"


def test_rest_state_speeds():
    p = PhysParams(gamma=1.4, B=1.0, mu=1.0, tau=0.1)
    s = characteristic_speeds(CellState(1.0, 0.0, 0.0), p)
    c = math.sqrt(11.4)
    np.testing.assert_allclose(s, [-c, 0.0, c], rtol=1e-12, atol=1e-12)
    assert s[2] == pytest.approx(3.3764, abs=1e-4)


def test_speed_factorization_oracle_general_state():
    # the cubic factors as lam * (lam^2 - (-p' + m / (tau v))) up to a constant
    p = PhysParams(gamma=1.7, B=2.0, mu=0.8, tau=0.3, a=-0.4)
    for v, S in [(0.4, 0.2), (3.0, -1.0), (1.2, 2.5)]:
        m = 2 * p.tau * p.a * S + p.mu
        c = math.sqrt(-dpressure(v, p) + m / (p.tau * v))
        s = characteristic_speeds(CellState(v, 0.3, S), p)
        np.testing.assert_allclose(s, [-c, 0.0, c], rtol=1e-12, atol=1e-12 * c)
        assert float(max_wave_speed(np.array([v]), np.array([S]), p)[0]) == pytest.approx(c, rel=1e-12)


def test_neo_hookean_stress_values():
    assert neo_hookean_stress(1.0, 1.0, 5.0) == 0.0
    assert neo_hookean_stress(2.0, 1.0, 3.0) == pytest.approx(3.0)
    v = np.array([0.3, 1.0, 2.7])
    np.testing.assert_allclose(neo_hookean_stress(1.0 / v**2, v, 4.0), 0.0, atol=1e-14)
    with pytest.raises(DomainError):
        neo_hookean_stress(-1.0, 1.0, 1.0)


def test_admissibility_constant_field():
    grid = GridSpec(N=16)
    p = PhysParams(mu=1.3)
    rep = admissibility_scan(StateField.constant(grid), p)
    assert rep.passed and rep.min_v == 1.0 and rep.min_margin == pytest.approx(1.3)
    assert rep.in_small_data_window


def test_admissibility_reports_bad_cell():
    grid = GridSpec(N=16)
    f = StateField.constant(grid)
    f.v[5] = -0.1
    rep = admissibility_scan(f, PhysParams())
    assert not rep.passed
    assert "v>0" in rep.violated and rep.first_bad_index == 5 and rep.min_v_index == 5


def test_admissibility_boundary_margin():
    p = PhysParams(mu=1.0, tau=0.1, a=1.0)
    S = np.full(8, -p.mu / (2 * p.tau * p.a) + 1e-9)
    rep = admissibility_scan(np.ones(8), p, S=S)
    assert rep.passed
    assert rep.min_margin == pytest.approx(2 * p.tau * 1e-9, rel=1e-6)


def test_middle_speed_exactly_zero():
    p = PhysParams(gamma=2.3, mu=0.7, tau=0.2, a=-0.6)
    for S in (0.0, 1.3, -2.0):
        assert characteristic_speeds(CellState(0.8, 0.0, S), p)[1] == 0.0
