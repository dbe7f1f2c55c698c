import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from srlab.carnot import (
    CarnotSpec, CarnotSpecError, carnot_bounds, group_inverse, group_multiply, horizontal_diameter, line_chord,
    reduced_geodesic,
)
from srlab.domains import box, cc_ball
from srlab.geometries import carnot_model, heisenberg


def test_heisenberg_product_example():
    spec = CarnotSpec.heisenberg(1)
    t = 0.7
    assert np.allclose(group_multiply(spec, [0, 1, 0], [t, 0, 0]), [t, 1, -t / 2])


@settings(max_examples=30)
@given(st.integers(1, 4), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_group_axioms(k, m, seed):
    rng = np.random.default_rng(seed)
    spec = CarnotSpec.random(k, m, rng)
    p, q, r = rng.standard_normal((3, spec.n))
    e = np.zeros(spec.n)
    assert np.allclose(group_multiply(spec, p, e), p)
    assert np.allclose(group_multiply(spec, p, group_inverse(spec, p)), 0.0, atol=1e-14)
    lhs = group_multiply(spec, group_multiply(spec, p, q), r)
    rhs = group_multiply(spec, p, group_multiply(spec, q, r))
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        group_multiply(CarnotSpec.heisenberg(1), np.zeros(2), np.zeros(3))


def test_reduced_geodesic_examples():
    spec = CarnotSpec.heisenberg(1)
    assert np.allclose(reduced_geodesic(spec, [0, 1, 0], [1, 0], 1.0), [1, 1, -0.5])
    t = np.linspace(0, 2, 5)
    line = reduced_geodesic(spec, np.zeros(3), np.array([0.6, 0.8]), t)
    assert np.allclose(line, np.column_stack([0.6 * t, 0.8 * t, np.zeros_like(t)]))


def test_spec_text_roundtrip_and_errors():
    spec = CarnotSpec.from_text("# heisenberg\n2 1\n1 2 1 1.0\n")
    assert np.allclose(spec.c, CarnotSpec.heisenberg(1).c)
    assert CarnotSpec.from_text(spec.to_text()).c.tolist() == spec.c.tolist()
    assert spec.is_bracket_generating()
    assert not CarnotSpec.abelian(2, 1).is_bracket_generating()
    for bad in ("", "2\n", "2 1\n1 2\n", "2 1\n1 3 1 1.0\n", "2 1\n1 1 1 1.0\n", "2 1\n1 2 1 1\n2 1 1 1\n",
                "2 1\n1 2 1 x\n", "-1 2\n"):
        with pytest.raises(CarnotSpecError):
            CarnotSpec.from_text(bad)
    with pytest.raises(CarnotSpecError):
        CarnotSpec(2, 1, np.ones((2, 2, 1)))


def test_spec_from_file(tmp_path):
    p = tmp_path / "h.txt"
    p.write_text("2 1\n1 2 1 1.0\n")
    assert CarnotSpec.from_file(p).name == "carnot-step2(h)"


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_chords_are_left_invariant(seed):
    rng = np.random.default_rng(seed)
    spec = CarnotSpec.heisenberg(1)
    dom = cc_ball(heisenberg(1), 1.0)
    g = rng.uniform(-0.5, 0.5, 3)
    q = np.array([[0.1, -0.2, 0.02]])
    u = np.array([[np.cos(seed % 7), np.sin(seed % 7)]])
    # M' = g * M has defining function U(g^{-1} * x)
    moved = lambda x: dom.defining(group_multiply(spec, group_inverse(spec, g)[None, :], x))
    a = line_chord(spec, dom.defining, q, u, 3.0)
    b = line_chord(spec, moved, group_multiply(spec, g[None, :], q), u, 3.0)
    assert np.allclose(a, b, atol=1e-10)


def test_closed_form_chords_match_flow():
    from srlab.flow import chord_data
    from srlab.model import FrameCovector

    spec = CarnotSpec.heisenberg(1)
    model = heisenberg(1)
    dom = cc_ball(model, 1.0)
    rng = np.random.default_rng(0)
    q = 0.3 * rng.uniform(-1, 1, (6, 3)) * np.array([1, 1, 0.1])
    u = rng.standard_normal((6, 2))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    f, b = line_chord(spec, dom.defining, q, u, 3.0)
    ch = chord_data(model, dom, FrameCovector.reduced(q, u, 1), tol=1e-11)
    assert np.allclose(f + b, ch.L, atol=1e-7)


def test_diameter_abelian_cube():
    spec = CarnotSpec.abelian(3, 0)
    dom = box(carnot_model(spec), [0, 0, 0], [1, 1, 1])
    est = horizontal_diameter(spec, dom, 500, np.random.default_rng(1))
    assert est.lower == pytest.approx(np.sqrt(3), abs=1e-6)
    assert est.upper >= est.lower


def test_diameter_heisenberg_thin_cube():
    eps = 0.1
    spec = CarnotSpec.heisenberg(1)
    dom = box(heisenberg(1), [0, 0, 0], [eps, eps, eps**2])
    est = horizontal_diameter(spec, dom, 500, np.random.default_rng(2))
    assert est.lower >= eps * np.sqrt(2) - 1e-9


def test_bounds_unit_cube_abelian():
    spec = CarnotSpec.abelian(2, 0)
    dom = box(carnot_model(spec), [0, 0], [1, 1])
    b = carnot_bounds(spec, dom, np.random.default_rng(3), n_samples=300)
    exact_lambda1 = 2 * np.pi**2
    assert b.lambda1_bound <= np.pi**2 + 1e-9
    assert b.lambda1_bound < exact_lambda1
    assert b.isoperimetric_holds
    assert b.perimeter_ratio == pytest.approx(4.0)


def test_bounds_heisenberg_ball():
    spec = CarnotSpec.heisenberg(1)
    dom = cc_ball(heisenberg(1), 1.0)
    b = carnot_bounds(spec, dom, np.random.default_rng(4), n_samples=200)
    assert b.diameter.lower == pytest.approx(2.0, abs=1e-6)
    assert b.lambda1_bound <= np.pi**2 / 2 + 1e-9
    assert b.lambda1_bound == pytest.approx(np.pi**2 / 2, rel=2e-2)
    assert b.isoperimetric_holds and b.perimeter_ratio > b.isoperimetric_bound
    assert b.to_dict()["direction"].startswith("bounds use the upper")
