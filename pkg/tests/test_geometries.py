import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from srlab.carnot import CarnotSpec
from srlab.domains import (
    box, cc_ball, euclidean_ball, hemisphere, make_domain, perimeter_mc, sample_boundary, sample_interior, volume_mc,
)
from srlab.geometries import (
    carnot_model, chf, heisenberg, make_model, martinet, qhf, round_sphere, spherical_band,
)
from srlab.model import (
    BoundaryPreconditionError, ChartDomainError, FrameCovector, bracket_tensors, fd_brackets, hamiltonian,
    horizontal_normal,
)
from srlab.spheres import sphere_area, uniform_sphere

SPHERES = [round_sphere(2), chf(1), chf(2), qhf(1)]


@pytest.mark.parametrize("model", SPHERES, ids=lambda m: m.id)
def test_sphere_frames_orthonormal_and_tangent(model):
    q = uniform_sphere(np.random.default_rng(0), 50, model.dim)
    F = model.frame(q)
    gram = np.einsum("bid,bjd->bij", F, F)
    assert np.allclose(gram, np.eye(model.n), atol=1e-12)
    assert np.allclose(np.einsum("bid,bd->bi", F, q), 0.0, atol=1e-12)


@pytest.mark.parametrize(
    "model", SPHERES + [heisenberg(1), martinet(), spherical_band(0.1, "round")], ids=lambda m: m.id
)
def test_bracket_oracle_matches_finite_differences(model):
    rng = np.random.default_rng(1)
    if model.ambient:
        q = uniform_sphere(rng, 20, model.dim)
    elif model.kind == "band":
        q = np.column_stack([rng.uniform(1.4, 1.7, 20), rng.uniform(0, 6, 20)])
    else:
        q = rng.uniform(-1, 1, (20, model.dim))
    assert bracket_tensors(model, q).max_abs_difference(fd_brackets(model, q)) < 1e-6


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 4), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_carnot_brackets_are_structure_constants(k, m, seed):
    rng = np.random.default_rng(seed)
    spec = CarnotSpec.random(k, m, rng)
    model = carnot_model(spec)
    q = rng.uniform(-1, 1, (5, spec.n))
    br = fd_brackets(model, q)
    assert np.allclose(br.c, spec.c, atol=1e-6)
    assert np.allclose(br.b, 0.0, atol=1e-6)


def test_hamiltonian_and_chart_errors():
    m = heisenberg(1)
    lam = FrameCovector.reduced(np.zeros((2, 3)), np.array([[3.0, 4.0], [1.0, 0.0]]), 1)
    assert np.allclose(hamiltonian(m, lam), [12.5, 0.5])
    with pytest.raises(ChartDomainError):
        m.check_chart(np.array([[np.nan, 0.0, 0.0]]))


def test_make_model_registry():
    assert make_model("chf", d=2).id == "chf(2)"
    assert make_model("round-sphere", d=3).n == 3
    with pytest.raises(KeyError):
        make_model("torus")


def test_hemisphere_measures():
    m = chf(1)
    d = hemisphere(m)
    assert d.volume == pytest.approx(sphere_area(3) / 2)
    assert d.perimeter == pytest.approx(np.pi**2, rel=1e-10)
    rng = np.random.default_rng(2)
    v, sv = volume_mc(m, d, rng, 100_000)
    assert abs(v - d.volume) < 5 * sv
    p, sp = perimeter_mc(m, d, rng, 100_000)
    assert abs(p - d.perimeter) < 5 * sp


def test_cc_ball_measures_match_monte_carlo():
    m = heisenberg(1)
    d = cc_ball(m, 1.0)
    rng = np.random.default_rng(3)
    v, sv = volume_mc(m, d, rng, 100_000)
    assert abs(v - d.volume) < 5 * sv
    p, sp = perimeter_mc(m, d, rng, 50_000)
    assert abs(p - d.perimeter) < 5 * sp


def test_cc_ball_rejects_other_models():
    with pytest.raises(ValueError):
        cc_ball(martinet(), 1.0)


def test_box_perimeter_abelian_is_euclidean():
    spec = CarnotSpec.abelian(3, 0)
    d = box(carnot_model(spec), [0, 0, 0], [1, 2, 3])
    assert d.perimeter == pytest.approx(2 * (2 + 3 + 6), rel=1e-12)
    assert d.volume == pytest.approx(6.0)


def test_samplers_stay_inside_and_on_boundary():
    m = heisenberg(1)
    d = euclidean_ball(m, [0, 0, 0], 1.0)
    rng = np.random.default_rng(4)
    q = sample_interior(m, d, rng, 500)
    assert np.all(d.defining(q) >= 0)
    qb, frac = sample_boundary(m, d, rng, 500, 1e-8)
    assert np.allclose(d.defining(qb), 0.0, atol=1e-10)
    assert 0.0 <= frac <= 1.0


def test_horizontal_normal_is_unit_and_inward():
    m = chf(1)
    d = hemisphere(m)
    rng = np.random.default_rng(5)
    qb, _ = sample_boundary(m, d, rng, 200, 1e-8)
    nr = horizontal_normal(m, d, qb)
    ok = ~nr.characteristic
    assert np.allclose(np.linalg.norm(nr.u[ok], axis=1), 1.0)
    assert np.all(np.einsum("bd,bd->b", nr.vector, d.gradient(qb)) > 0)
    with pytest.raises(BoundaryPreconditionError):
        horizontal_normal(m, d, np.array([[1.0, 0, 0, 0]]))


def test_make_domain_unknown():
    with pytest.raises(KeyError):
        make_domain(chf(1), "annulus")
