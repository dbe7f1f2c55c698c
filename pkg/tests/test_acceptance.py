"""Acceptance suite: one recorded pass/fail line per criterion (printed in the terminal summary).

Each test records its outcome before asserting, so a failing criterion is
still reported with its measured values.
"""

from __future__ import annotations

import time

import numpy as np
import pytest

from conftest import ACCEPTANCE
from srlab.carnot import CarnotSpec, group_multiply, reduced_geodesic
from srlab.domains import cc_ball, euclidean_ball, hemisphere, make_domain, sample_interior
from srlab.flow import chord_data, flow_map, integrate_geodesic
from srlab.geometries import carnot_model, chf, heisenberg, martinet, qhf, round_sphere, spherical_band
from srlab.inequalities import (
    c_pk, c_pk_quadrature, cos_delta, hardy_check, isoperimetric_check, lambda1_lower_bound, pi_p,
)
from srlab.model import FrameCovector, characteristic_scan
from srlab.reduction import certify, fiber_quadrature, hemisphere_flux
from srlab.santalo import constant_one, santalo_balance, squared_derivative
from srlab.spectral import cylindrical_residual, separated_eigensolve
from srlab.spheres import sphere_area, uniform_sphere

PROPERTY_TIMES: dict[str, float] = {}


def record(number: int, text: str, passed: bool, detail: str) -> None:
    ACCEPTANCE.append((number, text, bool(passed), detail))
    assert passed, f"criterion {number} ({text}) failed: {detail}"


# ---------------------------------------------------------------- 1

def test_c01_fiber_measure_identities():
    rng = np.random.default_rng(1)
    worst, slowest = 0.0, 0.0
    for k in (2, 3, 4):
        Q = rng.standard_normal((k, k))
        Q = Q + Q.T
        e = rng.standard_normal(k)
        e /= np.linalg.norm(e)
        t0 = time.perf_counter()
        one = fiber_quadrature(k, lambda u: np.ones(len(u)))
        quad = fiber_quadrature(k, lambda u: np.einsum("pi,ij,pj->p", u, Q, u))
        flux = fiber_quadrature(k, lambda u: u @ e, half_space=e)
        slowest = max(slowest, time.perf_counter() - t0)
        area = sphere_area(k - 1)
        worst = max(
            worst,
            abs(one.value - area),
            abs(quad.value - area * np.trace(Q) / k),
            abs(flux.value - hemisphere_flux(k)),
        )
    record(1, "fiber measure identities, k = 2, 3, 4", worst < 1e-8 and slowest < 1.0,
           f"max error {worst:.2e} (< 1e-8), slowest k {slowest:.2f} s (< 1 s)")


# ---------------------------------------------------------------- 2

def test_c02_reduction_certificates():
    rng = np.random.default_rng(2)
    models = [heisenberg(1), martinet(), chf(1), qhf(1), carnot_model(CarnotSpec.random(3, 2, rng))]
    t0 = time.perf_counter()
    worst, names = 0.0, []
    ok = True
    for m in models:
        cert = certify(m, 1000, rng, tol=1e-9)
        worst = max(worst, cert.h1_residual, cert.h1_dynamic, cert.h2_residual)
        ok = ok and cert.h1_pass and cert.h2_pass
        names.append(m.id.split("(")[0])
    elapsed = time.perf_counter() - t0
    record(2, "H1/H2 certificates on " + ", ".join(names), ok and worst < 1e-9 and elapsed < 10,
           f"max residual {worst:.2e} (< 1e-9), {elapsed:.1f} s (< 10 s)")


# ---------------------------------------------------------------- 3

def _great_circle_gap(model, rng) -> float:
    q0 = uniform_sphere(rng, 1, model.dim)
    u = uniform_sphere(rng, 1, model.k)
    trace = integrate_geodesic(model, FrameCovector.reduced(q0, u, model.m), 2 * np.pi, tol=1e-12)
    w = np.einsum("bi,bij->bj", u, model.horizontal_frame(q0))[0]
    t = trace.times[:, None]
    expected = np.cos(t) * q0[0] + np.sin(t) * w
    return float(np.max(np.abs(trace.states.q - expected)))


def test_c03_reduced_geodesics_closed_forms():
    rng = np.random.default_rng(3)
    t0 = time.perf_counter()
    gaps = {name: max(_great_circle_gap(m, rng) for _ in range(3)) for name, m in (("chf", chf(1)), ("qhf", qhf(1)))}
    spec = CarnotSpec.heisenberg(1)
    model = carnot_model(spec)
    heis_gap = 0.0
    for _ in range(3):
        q0 = rng.uniform(-1, 1, (1, 3))
        u = uniform_sphere(rng, 1, 2)
        tr = integrate_geodesic(model, FrameCovector.reduced(q0, u, 1), 2.0, tol=1e-12)
        closed = reduced_geodesic(spec, q0[0], u[0], tr.times)
        heis_gap = max(heis_gap, float(np.max(np.abs(tr.states.q - closed))))
    elapsed = time.perf_counter() - t0
    ok = gaps["chf"] < 1e-7 and gaps["qhf"] < 1e-7 and heis_gap < 1e-8 and elapsed < 10
    record(3, "reduced geodesics vs great circles (chf, qhf) and left-translated lines (heisenberg)", ok,
           f"chf {gaps['chf']:.1e}, qhf {gaps['qhf']:.1e} (< 1e-7); heisenberg {heis_gap:.1e} (< 1e-8); {elapsed:.1f} s")


# ---------------------------------------------------------------- 4

def test_c04_santalo_balance_chf():
    model = chf(1)
    dom = hemisphere(model)
    rng = np.random.default_rng(4)
    N = 100_000
    t0 = time.perf_counter()
    f = cos_delta(model)
    est = {e.name: e for e in santalo_balance(
        model, dom, {"one": constant_one, "dcos": squared_derivative(model, f.gradient)}, N, N, rng, tol=1e-8)}
    elapsed = time.perf_counter() - t0
    targets = {"one": 2 * np.pi**3, "dcos": np.pi**3 / 2}
    ok, parts = elapsed < 120, []
    for name, target in targets.items():
        e = est[name]
        se = e.combined_stderr
        near = abs(e.lhs - target) <= 3 * se and abs(e.rhs - target) <= 3 * se and e.balanced(3.0)
        rel = max(e.lhs_stderr / abs(e.lhs), e.rhs_stderr / abs(e.rhs))
        ok = ok and near and rel < 5e-3
        parts.append(f"{name}: lhs {e.lhs:.4f}, rhs {e.rhs:.4f}, target {target:.4f}, 3 sigma {3 * se:.2g}, rel stderr {rel:.2%}")
    record(4, "Santalo balance on the chf(1) hemisphere, F = 1 and F = <lam, grad_H cos delta>^2, N = 1e5",
           ok, "; ".join(parts) + f"; {elapsed:.0f} s (< 120 s)")


# ---------------------------------------------------------------- 5

def test_c05_eigenvalue_chain():
    rng = np.random.default_rng(5)
    t0 = time.perf_counter()
    ok, parts = True, []
    for name, model, case, d, target in (
        ("sphere(2)", round_sphere(2), "sphere", 2, 2.0),
        ("chf(1)", chf(1), "chf", 1, 2.0),
        ("qhf(1)", qhf(1), "qhf", 1, 4.0),
    ):
        dom = hemisphere(model)
        n = 200
        q = dom.sample_interior_direct(rng, n)
        u = uniform_sphere(rng, n, model.k)
        ch = chord_data(model, dom, FrameCovector.reduced(q, u, model.m), tol=1e-11)
        L_err = float(np.max(np.abs(ch.L - np.pi)))
        L_sup = float(np.max(ch.L))
        bound = model.k * np.pi**2 / L_sup**2
        spec = separated_eigensolve(case, d, (1024, 2048, 4096))
        resid = cylindrical_residual(case, d)
        good = L_err < 1e-4 and abs(bound - target) < 1e-3 and spec.error < 1e-3 and resid < 1e-10
        ok = ok and good
        parts.append(f"{name}: |L - pi| {L_err:.1e}, k pi^2/L^2 {bound:.6f}, separated lambda1 {spec.extrapolated:.7f}, "
                     f"residual {resid:.1e}")
    elapsed = time.perf_counter() - t0
    record(5, "eigenvalue chain on hemispheres of sphere(2), chf(1), qhf(1)", ok and elapsed < 30,
           "; ".join(parts) + f"; {elapsed:.1f} s (< 30 s)")


# ---------------------------------------------------------------- 6

def test_c06_spherical_band_bound():
    model = spherical_band(0.1, "flat")
    dom = make_domain(model, "band")
    b = lambda1_lower_bound(model, dom, 500, np.random.default_rng(6), tol=1e-10)
    target = np.pi**2 / 0.04
    ok = abs(b.L_sup - 0.2) < 1e-6 and abs(b.value - target) < 1e-6
    record(6, "spherical band (eps = 0.1): k pi^2 / L^2 from measured L = 2 eps", ok,
           f"L = {b.L_sup:.12f}, bound {b.value:.9f} vs {target:.9f}, gap {abs(b.value - target):.1e} (< 1e-6)")


# ---------------------------------------------------------------- 7

def test_c07_isoperimetric():
    rng = np.random.default_rng(7)
    model = chf(1)
    rep, rep_diam = isoperimetric_check(model, hemisphere(model), rng, n_points=100, n_fiber=100, n_boundary=2000)
    equal = rep.is_equality(3.0) and rep_diam is not None and rep_diam.is_equality(3.0)
    h = heisenberg(1)
    hrep, _ = isoperimetric_check(h, cc_ball(h, 1.0), rng, n_points=30, n_fiber=32, n_boundary=1000)
    strict = hrep.ratio - 3 * hrep.ratio_stderr > 1.0
    record(7, "isoperimetric equality on the chf(1) hemisphere, strict inequality on the Heisenberg ball",
           equal and strict,
           f"chf: sigma/omega {rep.lhs:.6f} vs C theta/l {rep.rhs:.6f} (ratio {rep.ratio:.7f} +- {rep.ratio_stderr:.1e}); "
           f"heisenberg: ratio {hrep.ratio:.3f} +- {hrep.ratio_stderr:.1e}")


# ---------------------------------------------------------------- 8

def test_c08_constants():
    exact_pi = pi_p(2) == np.pi
    worst_p2 = max(abs(pi_p(2) ** 2 * c_pk(2, k) - k * np.pi**2 / sphere_area(k - 1)) for k in (2, 3, 4, 5, 6))
    worst_q = 0.0
    for p in (1.5, 2.0, 3.0):
        for k in (2, 3, 4):
            worst_q = max(worst_q, abs(c_pk(p, k) - c_pk_quadrature(p, k)) / c_pk(p, k))
    record(8, "constants: pi_2 = pi, p = 2 reduction, C_{p,k} closed form vs fiber quadrature",
           exact_pi and worst_p2 < 1e-12 and worst_q < 1e-8,
           f"pi_2 == pi: {exact_pi}; p = 2 gap {worst_p2:.1e} (< 1e-12); quadrature rel. gap {worst_q:.1e} (< 1e-8)")


# ---------------------------------------------------------------- 9

def test_c09_hardy_equality():
    model = chf(1)
    dom = hemisphere(model)
    rep_R, _ = hardy_check(model, dom, cos_delta(model), 2.0, 100_000, np.random.default_rng(9), tol=1e-8)
    s = rep_R.ratio_stderr
    ok = 1 - 3 * s <= rep_R.ratio <= 1 + 3 * s
    record(9, "Hardy equality for cos delta on the chf(1) hemisphere, N = 1e5", ok,
           f"ratio {rep_R.ratio:.5f}, sigma {s:.2e}, window [{1 - 3 * s:.5f}, {1 + 3 * s:.5f}]")


# ---------------------------------------------------------------- 10

def _timed(name, fn):
    t0 = time.perf_counter()
    ok, detail = fn()
    PROPERTY_TIMES[name] = time.perf_counter() - t0
    record(10, name, ok, f"{name}: {detail} ({PROPERTY_TIMES[name]:.1f} s)")


def test_c10_energy_conservation():
    def run():
        rng = np.random.default_rng(101)
        worst = 0.0
        for model in (chf(1), heisenberg(1), martinet()):
            q0 = uniform_sphere(rng, 1, model.dim) if model.ambient else rng.uniform(-0.5, 0.5, (1, model.dim))
            u = uniform_sphere(rng, 1, model.k)
            tr = integrate_geodesic(model, FrameCovector.reduced(q0, u, model.m), 5.0, tol=1e-11)
            worst = max(worst, tr.H_drift)
        return worst < 1e-9, f"max |2H - 1| drift {worst:.1e}"

    _timed("energy conservation", run)


def test_c10_flow_reversibility():
    def run():
        rng = np.random.default_rng(102)
        worst = 0.0
        for model in (chf(1), heisenberg(1), martinet()):
            n = 16
            q0 = uniform_sphere(rng, n, model.dim) if model.ambient else rng.uniform(-0.5, 0.5, (n, model.dim))
            lam = FrameCovector.reduced(q0, uniform_sphere(rng, n, model.k), model.m)
            back = flow_map(model, flow_map(model, lam, 1.5, tol=1e-12).reversed(), 1.5, tol=1e-12).reversed()
            worst = max(worst, float(np.max(np.abs(back.state() - lam.state()))))
        return worst < 1e-8, f"max state gap {worst:.1e}"

    _timed("flow reversibility", run)


def test_c10_chord_flow_invariance():
    def run():
        rng = np.random.default_rng(103)
        model = heisenberg(1)
        dom = cc_ball(model, 1.0)
        n = 64
        q0 = sample_interior(model, dom, rng, n)
        lam = FrameCovector.reduced(q0, uniform_sphere(rng, n, 2), 1)
        a = chord_data(model, dom, lam, tol=1e-11)
        s = 0.5 * np.min(a.ell_fwd)
        moved = flow_map(model, lam, s, tol=1e-12)
        b = chord_data(model, dom, moved, tol=1e-11)
        gap = float(np.max(np.abs(a.L - b.L)))
        return gap < 1e-7, f"max |L(lam) - L(phi_s lam)| {gap:.1e}"

    _timed("L flow-invariance", run)


def test_c10_group_associativity():
    def run():
        rng = np.random.default_rng(104)
        worst = 0.0
        for _ in range(20):
            spec = CarnotSpec.random(int(rng.integers(2, 5)), int(rng.integers(1, 4)), rng)
            p, q, r = rng.standard_normal((3, 50, spec.n))
            lhs = group_multiply(spec, group_multiply(spec, p, q), r)
            rhs = group_multiply(spec, p, group_multiply(spec, q, r))
            worst = max(worst, float(np.max(np.abs(lhs - rhs))))
        return worst < 1e-12, f"max associator {worst:.1e}"

    _timed("group associativity", run)


def test_c10_characteristic_fraction():
    def run():
        rng = np.random.default_rng(105)
        model = heisenberg(1)
        dom = euclidean_ball(model, [0.0, 0.0, 0.0], 1.0)  # characteristic at the poles (0, 0, +-1)
        eps = (0.5, 0.2, 0.1, 1e-2, 1e-3)
        fr = [characteristic_scan(model, dom, 50_000, e, rng).area_fraction for e in eps]
        decreasing = all(b <= a for a, b in zip(fr, fr[1:]))
        return decreasing and fr[0] > 0 and fr[-1] < 1e-4, "fractions " + ", ".join(
            f"{e:g}: {f:.1e}" for e, f in zip(eps, fr))

    _timed("characteristic fraction -> 0", run)


def test_c10_property_suite_budget():
    total = sum(PROPERTY_TIMES.values())
    complete = len(PROPERTY_TIMES) == 5
    if not complete:
        pytest.skip("budget check needs all five property tests in the same session")
    record(10, "property suite budget", total < 120, f"total {total:.1f} s (< 120 s)")
