import numpy as np
import pytest
from hypothesis import given, strategies as st

from srlab.spheres import (
    hemisphere_rule, householder_e1, inward_weighted_directions, sphere_area, sphere_rule, uniform_sphere,
)


@pytest.mark.parametrize("k, area", [(0, 2.0), (1, 2 * np.pi), (2, 4 * np.pi), (3, 2 * np.pi**2), (4, 8 * np.pi**2 / 3)])
def test_sphere_area(k, area):
    assert sphere_area(k) == pytest.approx(area, rel=1e-14)


@given(st.integers(1, 6), st.integers(1, 50), st.integers(0, 2**32 - 1))
def test_uniform_sphere_unit_rows(dim, n, seed):
    x = uniform_sphere(np.random.default_rng(seed), n, dim)
    assert x.shape == (n, dim)
    assert np.allclose(np.linalg.norm(x, axis=1), 1.0)


@given(st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_householder_maps_e1_to_target(k, seed):
    rng = np.random.default_rng(seed)
    t = uniform_sphere(rng, 4, k)
    R = householder_e1(t)
    assert np.allclose(R[:, :, 0], t, atol=1e-12)
    assert np.allclose(np.einsum("bij,bkj->bik", R, R), np.eye(k), atol=1e-12)


def test_householder_identity_target():
    assert np.allclose(householder_e1(np.array([[1.0, 0.0, 0.0]]))[0], np.eye(3))


@pytest.mark.parametrize("k", [2, 3, 4, 5])
def test_inward_weighted_mean_cosine(k):
    # E[<u, n>] under the density <u, n>_+ is int <u,n>^2 / int <u,n>_+ over the half sphere
    rng = np.random.default_rng(k)
    n = rng.standard_normal((1, k))
    n /= np.linalg.norm(n)
    u = inward_weighted_directions(rng, np.repeat(n, 200_000, axis=0))
    c = u @ n[0]
    assert np.all(c >= 0)
    expected = (sphere_area(k - 1) / (2 * k)) / (sphere_area(k) / (2 * np.pi))
    assert c.mean() == pytest.approx(expected, abs=5 * c.std() / np.sqrt(len(c)))


@pytest.mark.parametrize("k", [2, 3, 4])
def test_rules_total_mass(k):
    _, w = sphere_rule(k, 24)
    assert w.sum() == pytest.approx(sphere_area(k - 1), rel=1e-12)
    pts, w = hemisphere_rule(k, 24)
    assert w.sum() == pytest.approx(sphere_area(k - 1) / 2, rel=1e-12)
    assert np.all(pts[:, 0] >= 0)
