"""Both sides of the Hardy-type, p-Hardy, first-eigenvalue and isoperimetric-type inequalities.

Every inequality compares an integral of |grad_H f|^p (or the perimeter
ratio sigma(dM)/omega(M)) with a weighted quantity built from chord lengths
L(lam) = l(lam) + l(-lam) and exit lengths l(lam) of reduced geodesics:

    1/R^p(q) = int 1/L^p  d eta_q,        1/r^p(q) = int 1/l^p  d eta_q.

Integrals over M x fiber are estimated jointly: q ~ omega and one uniform
momentum per sample, so that the fiber integral enters as |S^{k-1}| L^{-p}.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.special import gammaln

from .domains import Domain, sample_interior
from .flow import chord_data, exit_length
from .model import FrameCovector, Model, horizontal_gradient
from .reduction import fiber_quadrature
from .santalo import ODE_ERROR_FACTOR, boundary_covectors, domain_perimeter, domain_volume, visibility_angles
from .spheres import sphere_area, uniform_sphere


class TestFunctionError(ValueError):
    """A test function does not vanish on the boundary of its domain."""

    __test__ = False  # not a pytest class


# -------------------------------------------------------------- constants

def pi_p(p: float) -> float:
    """pi_p = 2 pi (p - 1)^{1/p} / (p sin(pi / p)), the sharp 1D L^p Poincare constant (pi_2 = pi)."""
    if p == 2:
        return float(np.pi)
    return float(2.0 * np.pi * (p - 1.0) ** (1.0 / p) / (p * np.sin(np.pi / p)))


def c_pk(p: float, k: int) -> float:
    """C_{p,k} = Gamma((k+p)/2) / (2 Gamma((1+p)/2) pi^{(k-1)/2})."""
    return float(np.exp(gammaln(0.5 * (k + p)) - gammaln(0.5 * (1 + p)) - 0.5 * (k - 1) * np.log(np.pi)) / 2.0)


def c_pk_via_sphere(p: float, k: int) -> float:
    """Second closed form: k / |S^{k-1}| * sqrt(pi) Gamma((k+p)/2) / (2 Gamma((1+p)/2) Gamma(k/2 + 1))."""
    g = np.exp(gammaln(0.5 * (k + p)) - gammaln(0.5 * (1 + p)) - gammaln(0.5 * k + 1.0))
    return float(k / sphere_area(k - 1) * np.sqrt(np.pi) * g / 2.0)


def c_pk_quadrature(p: float, k: int, **kwargs) -> float:
    """C_{p,k} as the inverse of 2 int_{S^{k-1}, u1 > 0} u1^p computed by fiber quadrature."""
    e = np.zeros(k)
    e[0] = 1.0
    half = fiber_quadrature(k, lambda u: np.clip(u[:, 0], 0.0, None) ** p, half_space=e, **kwargs)
    return 1.0 / (2.0 * half.value)


def hardy_constant(p: float, k: int, which: str = "R") -> float:
    """Constant in front of int |f|^p / R^p (``which='R'``) or int |f|^p / r^p (``'r'``)."""
    if which == "R":
        return pi_p(p) ** p * c_pk(p, k)
    if which == "r":
        return ((p - 1.0) / p) ** p * c_pk(p, k)
    raise ValueError("which must be 'R' or 'r'")


def isoperimetric_constant(k: int) -> float:
    """C = 2 pi |S^{k-1}| / |S^k|."""
    return 2.0 * np.pi * sphere_area(k - 1) / sphere_area(k)


# --------------------------------------------------------- test functions

@dataclass(frozen=True)
class TestFunction:
    """Smooth function with an exact chart/ambient gradient, vanishing on dM."""

    __test__ = False  # not a pytest class

    name: str
    value: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]
    params: dict = field(default_factory=dict)

    def horizontal_gradient(self, model: Model, q: np.ndarray) -> np.ndarray:
        return horizontal_gradient(model, q, self.gradient(q))


def cos_delta(model: Model) -> TestFunction:
    """cos of the round distance from the pole e_0 of a sphere model, i.e. the coordinate x_0."""
    if model.kind != "sphere":
        raise ValueError("cos-delta is defined on sphere models")
    e0 = np.zeros(model.dim)
    e0[0] = 1.0
    return TestFunction(
        "cos-delta",
        lambda q: np.atleast_2d(q)[:, 0].copy(),
        lambda q: np.broadcast_to(e0, np.atleast_2d(q).shape).copy(),
    )


def bump(center, radii, name: str = "bump") -> TestFunction:
    """(1 - s)^3 on the ellipsoid s = sum ((q - c) / a)^2 < 1, zero outside (C^2)."""
    c = np.asarray(center, dtype=float)
    a = np.broadcast_to(np.asarray(radii, dtype=float), c.shape).copy()

    def s_of(q):
        return np.sum(((np.atleast_2d(q) - c) / a) ** 2, axis=1)

    def value(q):
        return np.clip(1.0 - s_of(q), 0.0, None) ** 3

    def gradient(q):
        q = np.atleast_2d(q)
        w = np.clip(1.0 - s_of(q), 0.0, None) ** 2
        return -3.0 * w[:, None] * 2.0 * (q - c) / a**2

    return TestFunction(name, value, gradient, {"center": c.tolist(), "radii": a.tolist()})


def band_cosine(model: Model) -> TestFunction:
    """cos(pi (theta - pi/2) / (2 eps)) on the theta band of the spherical-band model."""
    if model.kind != "band":
        raise ValueError("band-cosine is defined on the spherical-band model")
    eps = float(model.params["epsilon"])
    w = 0.5 * np.pi / eps

    def value(q):
        return np.cos(w * (np.atleast_2d(q)[:, 0] - 0.5 * np.pi))

    def gradient(q):
        q = np.atleast_2d(q)
        g = np.zeros_like(q)
        g[:, 0] = -w * np.sin(w * (q[:, 0] - 0.5 * np.pi))
        return g

    return TestFunction("band-cosine", value, gradient, {"epsilon": eps})


TEST_FUNCTIONS = ("cos-delta", "bump", "band-cosine")


def make_test_function(model: Model, domain: Domain, name: str, **params) -> TestFunction:
    """Registered test functions with per-model default supports.

    ``bump`` defaults: a cap of ambient radius 0.5 around the pole on
    spheres; on the Heisenberg ball of radius R the ellipsoid with horizontal
    semi-axes 0.45 R and vertical semi-axis 0.02 R^2 (inside the ball since
    d((x, z), 0) <= |x| + sqrt(4 pi |z|)).  Other domains need explicit
    ``center`` and ``radii``.
    """
    if name == "cos-delta":
        return cos_delta(model)
    if name == "band-cosine":
        return band_cosine(model)
    if name == "bump":
        if "center" in params:
            return bump(params["center"], params["radii"])
        if model.kind == "sphere":
            c = np.zeros(model.dim)
            c[0] = 1.0
            return bump(c, params.get("radius", 0.5))
        if domain.name.startswith("cc-ball"):
            R = 0.5 * float(domain.known["diam_H"])
            return bump(np.zeros(3), [0.45 * R, 0.45 * R, 0.02 * R * R])
        raise ValueError(f"no default bump for domain {domain.name}")
    raise ValueError(f"unknown test function {name!r}")


def check_vanishes_on_boundary(
    model: Model, domain: Domain, f: TestFunction, rng: np.random.Generator, n: int = 2000, tol: float = 1e-10
) -> float:
    """Max |f| over boundary samples; raises :class:`TestFunctionError` above ``tol``."""
    q = domain.sample_boundary_reference(rng, n)
    worst = float(np.max(np.abs(f.value(q))))
    if worst > tol:
        raise TestFunctionError(f"test function {f.name} is {worst:.3g} on the boundary")
    return worst


# ------------------------------------------------------------------ radii

@dataclass
class RadiiField:
    """1/R^p and 1/r^p at points (fiber integrals of L^{-p} and l^{-p}).

    ``stderr_*`` are zero for the deterministic fiber rule.  Capped directions
    contribute 0 (1 / inf).
    """

    points: np.ndarray
    p: float
    inv_R_p: np.ndarray
    inv_r_p: np.ndarray
    stderr_R: np.ndarray
    stderr_r: np.ndarray
    capped_fraction: float

    def to_csv(self, path) -> None:
        cols = [self.points, self.inv_R_p[:, None], self.inv_r_p[:, None], self.stderr_R[:, None], self.stderr_r[:, None]]
        header = ",".join([f"q_{i + 1}" for i in range(self.points.shape[1])] + ["inv_R_p", "inv_r_p", "stderr_R", "stderr_r"])
        np.savetxt(path, np.hstack(cols), delimiter=",", header=header, comments="")


def _fiber_directions(k: int, n_fiber: int, rng: Optional[np.random.Generator]):
    """Equal-weight directions: an equispaced circle for k = 2, two atoms for k = 1, random otherwise."""
    if k == 1:
        return np.array([[1.0], [-1.0]]), False
    if k == 2:
        t = 2 * np.pi * (np.arange(n_fiber) + 0.5) / n_fiber
        return np.stack([np.cos(t), np.sin(t)], axis=1), False
    return uniform_sphere(rng, n_fiber, k), True


def radii(
    model: Model,
    domain: Domain,
    q: np.ndarray,
    p: float = 2.0,
    n_fiber: int = 64,
    rng: Optional[np.random.Generator] = None,
    t_max: Optional[float] = None,
    tol: float = 1e-9,
) -> RadiiField:
    """Fiber integrals of 1/L^p and 1/l^p at interior points q.

    Directions are an equispaced rule on the circle (k = 2), the two atoms of
    S^0 (k = 1) or uniform random directions (k >= 3, with standard errors).
    """
    rng = np.random.default_rng() if rng is None else rng
    q = np.atleast_2d(q)
    if np.any(domain.defining(q) <= 0.0):
        raise ValueError("radii are defined at interior points (1/r^p diverges on the boundary)")
    P = len(q)
    dirs, random = _fiber_directions(model.k, n_fiber, rng)
    nf = len(dirs)
    if random:
        dirs = uniform_sphere(rng, P * nf, model.k)
    else:
        dirs = np.tile(dirs, (P, 1))
    lam = FrameCovector.reduced(np.repeat(q, nf, axis=0), dirs, model.m)
    ch = chord_data(model, domain, lam, t_max=t_max, tol=tol)
    area = sphere_area(model.k - 1)
    invL = np.where(np.isfinite(ch.L), ch.L, np.inf) ** (-p)
    invl = ch.ell_fwd ** (-p)
    invL = np.where(np.isfinite(ch.L), invL, 0.0).reshape(P, nf)
    invl = np.where(np.isfinite(ch.ell_fwd), invl, 0.0).reshape(P, nf)
    sR = area * invL.std(axis=1, ddof=1) / np.sqrt(nf) if random else np.zeros(P)
    sr = area * invl.std(axis=1, ddof=1) / np.sqrt(nf) if random else np.zeros(P)
    return RadiiField(q, p, area * invL.mean(axis=1), area * invl.mean(axis=1), sR, sr,
                      float(np.mean(ch.capped | ch.capped_bwd)))


def radii_table(
    model: Model, domain: Domain, n_points: int, rng: np.random.Generator, p: float = 2.0,
    n_fiber: int = 64, collar: float = 1e-3, **kwargs,
) -> RadiiField:
    """Radii at omega-distributed points outside a boundary collar of ``collar`` length scales."""
    q = sample_interior(model, domain, rng, n_points, collar=collar * float(domain.length_scale))
    return radii(model, domain, q, p=p, n_fiber=n_fiber, rng=rng, **kwargs)


# ------------------------------------------------------------------ reports

@dataclass
class InequalityReport:
    """lhs >= rhs for one inequality; ``passed`` iff ratio >= 1 - 3 ratio_stderr."""

    name: str
    lhs: float
    rhs: float
    ratio: float
    ratio_stderr: float
    lhs_stderr: float = 0.0
    rhs_stderr: float = 0.0
    constants: dict = field(default_factory=dict)
    test_function: Optional[str] = None
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return bool(self.ratio >= 1.0 - 3.0 * self.ratio_stderr)

    def is_equality(self, n_sigma: float = 3.0) -> bool:
        return bool(abs(self.ratio - 1.0) <= n_sigma * self.ratio_stderr)

    def to_dict(self) -> dict:
        return {
            "inequality": self.name,
            "lhs": self.lhs,
            "lhs_stderr": self.lhs_stderr,
            "rhs": self.rhs,
            "rhs_stderr": self.rhs_stderr,
            "ratio": self.ratio,
            "ratio_stderr": self.ratio_stderr,
            "passed": self.passed,
            "constants": self.constants,
            "test_function": self.test_function,
            "notes": list(self.notes),
        }


def ratio_of_means(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    """mean(a) / mean(b) and its delta-method standard error for paired samples."""
    n = len(a)
    ma, mb = float(np.mean(a)), float(np.mean(b))
    if mb == 0.0:
        return float("inf"), 0.0
    cov = np.cov(np.stack([a, b]), ddof=1)
    r = ma / mb
    var = (cov[0, 0] - 2 * r * cov[0, 1] + r * r * cov[1, 1]) / (n * mb * mb)
    return r, float(np.sqrt(max(var, 0.0)))


def hardy_check(
    model: Model,
    domain: Domain,
    f: TestFunction,
    p: float = 2.0,
    n: int = 20_000,
    rng: Optional[np.random.Generator] = None,
    t_max: Optional[float] = None,
    tol: float = 1e-8,
) -> tuple[InequalityReport, InequalityReport]:
    """Joint Monte-Carlo evaluation of the R- and r-weighted (p-)Hardy inequalities.

    lhs = int |grad_H f|^p omega; rhs_R = pi_p^p C_{p,k} int |f|^p / R^p omega and
    rhs_r = ((p-1)/p)^p C_{p,k} int |f|^p / r^p omega.  With p = 2 the
    constants are k pi^2 / |S^{k-1}| and k / (4 |S^{k-1}|).
    """
    rng = np.random.default_rng() if rng is None else rng
    check_vanishes_on_boundary(model, domain, f, rng)
    volume = domain_volume(model, domain, rng)
    q = sample_interior(model, domain, rng, n)
    u = uniform_sphere(rng, n, model.k)
    ch = chord_data(model, domain, FrameCovector.reduced(q, u, model.m), t_max=t_max, tol=tol)
    area = sphere_area(model.k - 1)
    grad_p = np.linalg.norm(f.horizontal_gradient(model, q), axis=1) ** p
    fp = np.abs(f.value(q)) ** p
    invL = np.where(np.isfinite(ch.L), 1.0 / np.where(np.isfinite(ch.L), ch.L, 1.0) ** p, 0.0)
    invl = np.where(np.isfinite(ch.ell_fwd), 1.0 / np.where(np.isfinite(ch.ell_fwd), ch.ell_fwd, 1.0) ** p, 0.0)
    lhs = volume.value * float(np.mean(grad_p))
    lhs_se = volume.value * float(np.std(grad_p, ddof=1)) / np.sqrt(n)
    reports = []
    capped = float(np.mean(ch.capped | ch.capped_bwd))
    for which, inv in (("R", invL), ("r", invl)):
        const = hardy_constant(p, model.k, which)
        weighted = const * area * fp * inv
        ratio, ratio_se = ratio_of_means(grad_p, weighted)
        rhs = volume.value * float(np.mean(weighted))
        reports.append(
            InequalityReport(
                name=f"hardy-{which}" + ("" if p == 2 else f"(p={p:g})"),
                lhs=lhs,
                rhs=rhs,
                ratio=ratio,
                ratio_stderr=float(np.hypot(ratio_se, ODE_ERROR_FACTOR * tol * ratio)),
                lhs_stderr=lhs_se,
                rhs_stderr=volume.value * float(np.std(weighted, ddof=1)) / np.sqrt(n),
                constants={"k": model.k, "p": p, "pi_p": pi_p(p), "C_pk": c_pk(p, model.k), "constant": const},
                test_function=f.name,
                notes=[f"omega(M) from {volume.source}", f"capped fraction {capped:.3g}"],
            )
        )
    return reports[0], reports[1]


# ------------------------------------------------------------ eigenvalues

@dataclass
class Lambda1Bound:
    """k pi^2 / L_sup^2 from sampled chord lengths.

    The sampled maximum underestimates the true supremum, so ``value`` is an
    upper estimate of the bound (labelled empirical); ``analytic`` uses the
    domain's known L (or horizontal diameter) when available.
    """

    value: float
    L_sup: float
    k: int
    n_samples: int
    capped: int
    analytic_L: Optional[float] = None

    @property
    def analytic(self) -> Optional[float]:
        if self.analytic_L is None:
            return None
        return self.k * np.pi**2 / self.analytic_L**2

    def to_dict(self) -> dict:
        return {
            "lambda1_bound_empirical": self.value,
            "L_sup_empirical": self.L_sup,
            "k": self.k,
            "n_samples": self.n_samples,
            "capped": self.capped,
            "L_analytic": self.analytic_L,
            "lambda1_bound_analytic": self.analytic,
            "direction": "empirical L_sup is a lower estimate, so the bound is an upper estimate",
        }


def lambda1_lower_bound(
    model: Model,
    domain: Domain,
    n: int = 2000,
    rng: Optional[np.random.Generator] = None,
    t_max: Optional[float] = None,
    tol: float = 1e-10,
) -> Lambda1Bound:
    """k pi^2 / L_sup^2 with L_sup the largest sampled chord; 0 if any chord is capped."""
    rng = np.random.default_rng() if rng is None else rng
    q = sample_interior(model, domain, rng, n)
    u = uniform_sphere(rng, n, model.k)
    ch = chord_data(model, domain, FrameCovector.reduced(q, u, model.m), t_max=t_max, tol=tol)
    capped = int(np.sum(ch.capped | ch.capped_bwd))
    finite = np.isfinite(ch.L)
    L_sup = float(np.max(ch.L[finite], initial=0.0)) if capped == 0 else float("inf")
    value = 0.0 if capped or L_sup == 0.0 else model.k * np.pi**2 / L_sup**2
    known = domain.known
    analytic_L = known.get("L", known.get("diam_H"))
    return Lambda1Bound(value, L_sup, model.k, n, capped, None if analytic_L is None else float(analytic_L))


# ------------------------------------------------------------ isoperimetry

def isoperimetric_check(
    model: Model,
    domain: Domain,
    rng: Optional[np.random.Generator] = None,
    n_points: int = 100,
    n_fiber: int = 100,
    n_boundary: int = 2000,
    t_max: Optional[float] = None,
    tol: float = 1e-9,
) -> tuple[InequalityReport, Optional[InequalityReport]]:
    """sigma(dM)/omega(M) against C theta_vis / l_sup and C theta~_vis / diam^r.

    theta_vis is the least visibility angle over ``n_points`` interior points
    with ``n_fiber`` directions each; l_sup the largest exit length over
    inward boundary covectors (and the backward visibility runs); diam^r the
    largest l-tilde, available on models with a cut hook.  Sampled maxima
    underestimate the suprema, so the right-hand sides are upper estimates.
    """
    rng = np.random.default_rng() if rng is None else rng
    volume = domain_volume(model, domain, rng)
    perimeter = domain_perimeter(model, domain, rng)
    ratio = perimeter.value / volume.value
    ratio_rel = float(np.hypot(perimeter.stderr / perimeter.value, volume.stderr / volume.value))
    pts = sample_interior(model, domain, rng, n_points)
    vis = visibility_angles(model, domain, pts, n_fiber, rng, t_max=t_max, tol=tol)
    lam, _ = boundary_covectors(model, domain, n_boundary, rng)
    ex = exit_length(model, domain, lam, t_max=t_max, tol=tol)
    C = isoperimetric_constant(model.k)
    numeric = ODE_ERROR_FACTOR * tol
    if np.any(ex.capped):
        ell_sup = float("inf")
    else:
        ell_sup = max(float(np.max(ex.ell_fwd)), vis.ell_max)
    constants = {"k": model.k, "C": C, "theta_vis": vis.theta_min, "theta_vis_cap_as_visible": vis.theta_upper_min,
                 "ell_sup": ell_sup}
    notes = [f"omega(M) from {volume.source}", f"sigma(dM) from {perimeter.source}",
             f"visibility capped fraction {vis.capped_fraction:.3g}"]
    rhs1 = 0.0 if not np.isfinite(ell_sup) else C * vis.theta_min / ell_sup
    theta_rel = vis.stderr / vis.theta_min if vis.theta_min > 0 else 0.0
    rel1 = float(np.sqrt(ratio_rel**2 + theta_rel**2 + numeric**2))
    rep1 = InequalityReport(
        "isoperimetric-exit", ratio, rhs1, ratio / rhs1 if rhs1 > 0 else float("inf"),
        (ratio / rhs1) * rel1 if rhs1 > 0 else 0.0, ratio * ratio_rel, rhs1 * theta_rel,
        constants, None, notes,
    )
    rep2 = None
    if vis.theta_tilde is not None:
        diam_r = max(float(np.max(ex.ell_tilde)), vis.ell_tilde_max)
        theta_t = vis.theta_tilde_min
        rhs2 = C * theta_t / diam_r if diam_r > 0 else 0.0
        t_rel = np.sqrt(max(theta_t * (1 - theta_t), 0.0) / n_fiber) / theta_t if theta_t > 0 else 0.0
        rel2 = float(np.sqrt(ratio_rel**2 + t_rel**2 + numeric**2))
        rep2 = InequalityReport(
            "isoperimetric-diameter", ratio, rhs2, ratio / rhs2 if rhs2 > 0 else float("inf"),
            (ratio / rhs2) * rel2 if rhs2 > 0 else 0.0, ratio * ratio_rel, rhs2 * t_rel,
            {**constants, "theta_vis_optimal": theta_t, "diam_r": diam_r}, None, notes,
        )
    return rep1, rep2


# --------------------------------------------------------- volume change

def reweight_volume(model: Model, domain: Domain, log_factor: float) -> tuple[Model, Domain]:
    """The model with omega replaced by e^c omega for a constant c, and its domain's measures rescaled.

    For constant c the min/max ratio of the weight is 1, so every inequality
    report must be unchanged.
    """
    s = float(np.exp(log_factor))
    density = model.volume_density
    new_model = replace(model, volume_density=lambda q: s * density(q), id=f"{model.id}*exp({log_factor:g})")
    new_domain = replace(
        domain,
        density_bound=domain.density_bound * s,
        volume=None if domain.volume is None else domain.volume * s,
        perimeter=None if domain.perimeter is None else domain.perimeter * s,
        rho_bound=None if domain.rho_bound is None else domain.rho_bound * s,
        known={**domain.known, **{k: domain.known[k] * s for k in ("omega", "sigma") if k in domain.known}},
    )
    return new_model, new_domain
