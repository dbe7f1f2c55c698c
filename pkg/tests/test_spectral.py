import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from srlab.spectral import (
    GridError, cylindrical_residual, radial_problem, rayleigh_quotient, separated_eigensolve, smallest_eigenpair,
)


@pytest.mark.parametrize("case, d, exact", [("sphere", 1, 1.0), ("sphere", 2, 2.0), ("sphere", 3, 3.0),
                                             ("chf", 1, 2.0), ("chf", 2, 4.0), ("qhf", 1, 4.0), ("qhf", 2, 8.0)])
def test_separated_eigenvalues(case, d, exact):
    res = separated_eigensolve(case, d)
    assert res.exact == exact
    assert res.error < 1e-6
    assert res.eigenfunction_error < 1e-3


@pytest.mark.parametrize("case, d", [("sphere", 2), ("chf", 1), ("qhf", 1), ("chf", 3)])
def test_cylindrical_residuals(case, d):
    assert cylindrical_residual(case, d) < 1e-10


def test_residual_grid_must_avoid_singular_rings():
    with pytest.raises(GridError):
        cylindrical_residual("chf", 1, r_grid=np.linspace(0, 1, 5))
    with pytest.raises(GridError):
        cylindrical_residual("qhf", 1, angle_grid=np.linspace(0, np.pi, 5))
    with pytest.raises(ValueError):
        cylindrical_residual("torus", 1)


def test_second_order_convergence():
    res = separated_eigensolve("chf", 1, (256, 512, 1024))
    e = [abs(l - 2.0) for l in res.eigenvalues]
    assert 3.0 < e[0] / e[1] < 5.0


def test_band_flat_exact_round_below():
    flat = separated_eigensolve("band-flat", epsilon=0.1)
    rnd = separated_eigensolve("band-round", epsilon=0.1)
    assert flat.extrapolated == pytest.approx(np.pi**2 / 0.04, rel=1e-8)
    assert rnd.exact is None
    assert rnd.extrapolated < flat.extrapolated - 0.1


@settings(max_examples=10, deadline=None)
@given(st.integers(64, 400))
def test_discrete_eigenvalue_is_minimum_of_rayleigh_quotient(n):
    prob = radial_problem("chf", 1)
    lam, g, r = smallest_eigenpair(prob, n)
    assert rayleigh_quotient(prob, g, n) == pytest.approx(lam, rel=1e-10)
    assert rayleigh_quotient(prob, np.cos(r) + 0.1 * np.sin(r) * np.cos(r), n) >= lam


def test_convergence_csv(tmp_path):
    res = separated_eigensolve("sphere", 2, (64, 128, 256))
    path = tmp_path / "conv.csv"
    res.write_convergence_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "cells,lambda1"
    assert len(lines) == 5
    assert res.to_dict()["lambda1"] == res.extrapolated


def test_bad_inputs():
    with pytest.raises(ValueError):
        separated_eigensolve("chf", 1, (64, 128))
    with pytest.raises(ValueError):
        radial_problem("cube")
