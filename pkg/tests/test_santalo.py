import numpy as np
import pytest

from srlab.domains import cc_ball, hemisphere
from srlab.geometries import chf, heisenberg
from srlab.inequalities import cos_delta
from srlab.santalo import (
    SantaloEstimate, boundary_covectors, constant_one, domain_perimeter, domain_volume, half_fiber_indicator,
    santalo_balance, squared_derivative, visibility_angles,
)


def test_constant_balance_chf_small():
    m = chf(1)
    d = hemisphere(m)
    est = santalo_balance(m, d, {"one": constant_one}, 4000, 4000, np.random.default_rng(0))[0]
    assert est.lhs == pytest.approx(2 * np.pi**3, rel=1e-12)
    assert est.balanced()
    assert est.capped_fraction == 0


def test_test_function_and_half_fiber_balance():
    m = chf(1)
    d = hemisphere(m)
    f = cos_delta(m)
    est = santalo_balance(
        m, d, {"dcos": squared_derivative(m, f.gradient), "half": half_fiber_indicator(np.array([1.0, 0.0]))},
        8000, 8000, np.random.default_rng(1),
    )
    for e in est:
        assert e.balanced(4.0), e.to_dict()


def test_balance_on_heisenberg_ball():
    m = heisenberg(1)
    d = cc_ball(m, 1.0)
    est = santalo_balance(m, d, {"one": constant_one}, 2000, 2000, np.random.default_rng(2))[0]
    assert est.balanced(4.0)


def test_visibility_is_full_on_hemisphere():
    m = chf(1)
    d = hemisphere(m)
    rng = np.random.default_rng(3)
    pts = d.sample_interior_direct(rng, 20)
    vis = visibility_angles(m, d, pts, 32, rng)
    assert vis.theta_min == 1.0
    assert vis.theta_tilde_min == 1.0
    assert 0 < vis.ell_max <= np.pi + 1e-6


def test_boundary_covectors_are_inward():
    m = chf(1)
    d = hemisphere(m)
    lam, char = boundary_covectors(m, d, 500, np.random.default_rng(4))
    assert char == 0.0
    assert np.allclose(np.linalg.norm(lam.u, axis=1), 1.0)


def test_measures_prefer_deterministic_values():
    m = chf(1)
    d = hemisphere(m)
    rng = np.random.default_rng(5)
    assert domain_volume(m, d, rng).source == "quadrature"
    assert domain_perimeter(m, d, rng).stderr == 0.0


def test_estimate_balance_logic():
    e = SantaloEstimate("x", 1.0, 0.1, 1.2, 0.0, 10, 10, 0.0)
    assert e.combined_stderr == pytest.approx(0.1)
    assert e.balanced(3.0)
    assert not e.balanced(1.0)
    assert e.discrepancy == pytest.approx(0.2)
