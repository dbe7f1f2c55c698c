"""Compact domains M = {U >= 0} with samplers and deterministic measures.

A :class:`Domain` bundles the defining function and its gradient with
samplers that are uniform for a *reference* measure (chart Lebesgue measure,
or the round measure for sphere models) together with the total reference
mass, so that Monte-Carlo and quadrature paths for omega(M) and sigma(dM) can
be cross-checked.  Builders know the model they are attached to and supply
the analytic answers that are known for it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

import numpy as np
from scipy import integrate

from .model import Model, SamplingError, horizontal_gradient, surface_density
from .spheres import sphere_area, uniform_sphere

Sampler = Callable[[np.random.Generator, int], np.ndarray]


@dataclass(frozen=True)
class Domain:
    """Defining function, samplers and measures of a compact domain.

    ``sample_reference`` draws points uniformly (for the reference measure) in a
    region of mass ``reference_volume`` containing M; ``sample_boundary_reference``
    draws boundary points uniformly for the reference surface measure of total
    mass ``boundary_reference_area``.  ``volume``/``perimeter`` are deterministic
    values of omega(M) and sigma(dM) when available.  ``rho_bound`` bounds the
    density of sigma relative to the reference surface measure and
    ``density_bound`` the density of omega.
    """

    name: str
    defining: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]
    sample_reference: Sampler
    reference_volume: float
    sample_boundary_reference: Sampler
    boundary_reference_area: float
    length_scale: float
    density_bound: float = 1.0
    volume: Optional[float] = None
    perimeter: Optional[float] = None
    rho_bound: Optional[float] = None
    sample_interior_direct: Optional[Sampler] = None
    known: Mapping = field(default_factory=dict)
    notes: tuple = ()

    def contains(self, q: np.ndarray, tol: float = 0.0) -> np.ndarray:
        return self.defining(np.atleast_2d(q)) >= -tol


# --------------------------------------------------------------- sampling

def sample_interior(
    model: Model,
    domain: Domain,
    rng: np.random.Generator,
    n: int,
    collar: float = 0.0,
    max_rounds: int = 200,
) -> np.ndarray:
    """n points distributed as omega restricted to M (optionally minus a boundary collar).

    Uses the domain's direct sampler when present, otherwise rejection from the
    reference sampler with acceptance omega-density / density_bound.  The
    collar removes points with U < collar * |grad U|, i.e. within roughly
    ``collar`` of the boundary.
    """
    out, have = [], 0
    for _ in range(max_rounds):
        batch = max(2 * (n - have), 256)
        if domain.sample_interior_direct is not None:
            q = domain.sample_interior_direct(rng, batch)
            keep = np.ones(batch, dtype=bool)
        else:
            q = domain.sample_reference(rng, batch)
            inside = domain.defining(q) >= 0.0
            dens = np.zeros(batch)
            dens[inside] = model.volume_density(q[inside])
            keep = inside & (rng.random(batch) * domain.density_bound < dens)
        if collar > 0.0:
            g = np.linalg.norm(domain.gradient(q), axis=1)
            keep &= domain.defining(q) >= collar * g
        q = q[keep]
        out.append(q)
        have += len(q)
        if have >= n:
            return np.concatenate(out)[:n]
    raise SamplingError(f"interior sampler for {domain.name} produced {have} < {n} points")


def estimate_rho_bound(model: Model, domain: Domain, rng: np.random.Generator, n: int = 4096) -> float:
    if domain.rho_bound is not None:
        return domain.rho_bound
    q = domain.sample_boundary_reference(rng, n)
    return 1.05 * float(np.max(surface_density(model, domain, q)))


def sample_boundary(
    model: Model,
    domain: Domain,
    rng: np.random.Generator,
    n: int,
    eps_char: float = 1e-8,
    max_rounds: int = 200,
) -> tuple[np.ndarray, float]:
    """n boundary points distributed as sigma / sigma(dM), by rejection on the density of sigma.

    Returns the points and the fraction of proposals discarded as characteristic
    (|grad_H U| < eps_char).
    """
    bound = estimate_rho_bound(model, domain, rng)
    out, have, proposed, characteristic = [], 0, 0, 0
    for _ in range(max_rounds):
        batch = max(2 * (n - have), 256)
        q = domain.sample_boundary_reference(rng, batch)
        rho = surface_density(model, domain, q)

        gH = np.linalg.norm(horizontal_gradient(model, q, domain.gradient(q)), axis=1)
        char = gH < eps_char
        proposed += batch
        characteristic += int(np.sum(char))
        keep = (~char) & (rng.random(batch) * bound < rho)
        out.append(q[keep])
        have += int(np.sum(keep))
        if have >= n:
            return np.concatenate(out)[:n], characteristic / proposed
    raise SamplingError(f"boundary sampler for {domain.name} produced {have} < {n} points")


def volume_mc(model: Model, domain: Domain, rng: np.random.Generator, n: int) -> tuple[float, float]:
    """omega(M) by Monte-Carlo over the reference region: (estimate, stderr)."""
    q = domain.sample_reference(rng, n)
    inside = domain.defining(q) >= 0.0
    vals = np.zeros(n)
    vals[inside] = model.volume_density(q[inside])
    vals *= domain.reference_volume
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(n))


def perimeter_mc(model: Model, domain: Domain, rng: np.random.Generator, n: int) -> tuple[float, float]:
    """sigma(dM) by Monte-Carlo over the reference boundary measure: (estimate, stderr)."""
    q = domain.sample_boundary_reference(rng, n)
    vals = domain.boundary_reference_area * surface_density(model, domain, q)
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(n))


# ------------------------------------------------------------ hemispheres

def _projection_moment(D: int, p: int, power: float) -> float:
    """E[(1 - |y|^2)^power] for y the first p coordinates of a uniform point of S^{D-1}.

    The projection has density proportional to (1 - |y|^2)^{(D-p-2)/2} on the
    unit ball of R^p; the expectation is computed by 1D radial quadrature.
    """
    if p == 0:
        return 1.0
    a = 0.5 * (D - p - 2)
    f = lambda r, e: r ** (p - 1) * (1.0 - r * r) ** e
    num = integrate.quad(f, 0.0, 1.0, args=(a + power,), epsabs=0, epsrel=1e-13, limit=200)[0]
    den = integrate.quad(f, 0.0, 1.0, args=(a,), epsabs=0, epsrel=1e-13, limit=200)[0]
    return num / den


def hemisphere(model: Model) -> Domain:
    """The closed hemisphere {x_0 >= 0} of a round or Hopf sphere, x_0 = Re z_0."""
    if model.kind != "sphere":
        raise ValueError("hemisphere domains need a sphere model")
    N, n, k = model.dim, model.n, model.k
    m = int(model.params["m"])
    e0 = np.zeros(N)
    e0[0] = 1.0

    def defining(q):
        return np.atleast_2d(q)[:, 0]

    def gradient(q):
        return np.broadcast_to(e0, np.atleast_2d(q).shape).copy()

    def sample_sphere(rng, size):
        return uniform_sphere(rng, size, N)

    def sample_interior(rng, size):
        q = uniform_sphere(rng, size, N)
        q[:, 0] = np.abs(q[:, 0])
        return q

    def sample_boundary(rng, size):
        q = np.zeros((size, N))
        q[:, 1:] = uniform_sphere(rng, size, N - 1)
        return q

    # On the boundary |grad_H x_0|^2 = 1 - |Im z_0|^2 and the tangential gradient is e_0.
    boundary_area = sphere_area(n - 1)
    perimeter = boundary_area * _projection_moment(N - 1, m - 1, 0.5)
    volume = 0.5 * sphere_area(n)
    return Domain(
        name="hemisphere",
        defining=defining,
        gradient=gradient,
        sample_reference=sample_sphere,
        reference_volume=sphere_area(n),
        sample_boundary_reference=sample_boundary,
        boundary_reference_area=boundary_area,
        length_scale=np.pi,
        volume=volume,
        perimeter=perimeter,
        rho_bound=1.0,
        sample_interior_direct=sample_interior,
        known={
            "L": np.pi,
            "ell_max": np.pi,
            "diam_r": np.pi,
            "lambda1": float(k),
            "omega": volume,
            "sigma": perimeter,
            "theta_vis": 1.0,
        },
    )


def sphere_band(model: Model, epsilon: float) -> Domain:
    """Band {|x_0| <= sin eps} around a great sphere of a round sphere (ambient model)."""
    if model.kind != "sphere" or model.params["m"] != 1:
        raise ValueError("ambient bands are defined for round spheres")
    N, n = model.dim, model.n
    s = np.sin(epsilon)

    def defining(q):
        q = np.atleast_2d(q)
        return s * s - q[:, 0] ** 2

    def gradient(q):
        q = np.atleast_2d(q)
        g = np.zeros_like(q)
        g[:, 0] = -2.0 * q[:, 0]
        return g

    def sample_boundary(rng, size):
        q = np.zeros((size, N))
        q[:, 0] = np.where(rng.random(size) < 0.5, s, -s)
        q[:, 1:] = uniform_sphere(rng, size, N - 1) * np.cos(epsilon)
        return q

    # mass of the band: P(|x_0| <= sin eps) for a uniform point
    D = N
    a = 0.5 * (D - 3)
    dens = lambda x: (1.0 - x * x) ** a
    frac = integrate.quad(dens, -s, s, epsabs=0, epsrel=1e-13)[0] / integrate.quad(dens, -1, 1, epsabs=0, epsrel=1e-13)[0]
    volume = sphere_area(n) * frac
    area = 2.0 * sphere_area(n - 1) * np.cos(epsilon) ** (n - 1)
    return Domain(
        name=f"band({epsilon:g})",
        defining=defining,
        gradient=gradient,
        sample_reference=lambda rng, size: uniform_sphere(rng, size, N),
        reference_volume=sphere_area(n),
        sample_boundary_reference=sample_boundary,
        boundary_reference_area=area,
        length_scale=2.0 * epsilon,
        volume=volume,
        perimeter=area,
        rho_bound=1.0,
        known={"omega": volume, "sigma": area, "meridian_L": 2.0 * epsilon},
    )


def theta_band(model: Model, epsilon: Optional[float] = None) -> Domain:
    """Band |theta - pi/2| <= eps in the (theta, phi) chart of the spherical-band model."""
    if model.kind != "band":
        raise ValueError("theta bands need the spherical-band model")
    eps = float(model.params["epsilon"] if epsilon is None else epsilon)
    mid = 0.5 * np.pi

    def defining(q):
        q = np.atleast_2d(q)
        return eps * eps - (q[:, 0] - mid) ** 2

    def gradient(q):
        q = np.atleast_2d(q)
        g = np.zeros_like(q)
        g[:, 0] = -2.0 * (q[:, 0] - mid)
        return g

    def sample_reference(rng, size):
        return np.stack([mid + eps * (2.0 * rng.random(size) - 1.0), 2.0 * np.pi * rng.random(size)], axis=1)

    def sample_boundary(rng, size):
        th = np.where(rng.random(size) < 0.5, mid - eps, mid + eps)
        return np.stack([th, 2.0 * np.pi * rng.random(size)], axis=1)

    round_volume = model.params["volume"] == "round"
    volume = 4.0 * np.pi * np.sin(eps) if round_volume else 4.0 * np.pi * eps
    perimeter = 4.0 * np.pi * (np.cos(eps) if round_volume else 1.0)
    return Domain(
        name=f"theta-band({eps:g})",
        defining=defining,
        gradient=gradient,
        sample_reference=sample_reference,
        reference_volume=4.0 * np.pi * eps,
        sample_boundary_reference=sample_boundary,
        boundary_reference_area=4.0 * np.pi,
        length_scale=2.0 * eps,
        density_bound=1.0,
        volume=volume,
        perimeter=perimeter,
        rho_bound=1.0,
        known={
            "L": 2.0 * eps,
            "ell_max": 2.0 * eps,
            "lambda1_bound": np.pi**2 / (2.0 * eps) ** 2,
            "omega": volume,
            "sigma": perimeter,
            "theta_vis": 1.0,
        },
    )


# ------------------------------------------------------ Heisenberg CC ball

def _profile(phi):
    """s(phi) = 2 sin(phi/2)/phi, t(phi) = (phi - sin phi)/(2 phi^2) and derivatives (phi >= 0)."""
    phi = np.asarray(phi, dtype=float)
    small = phi < 1e-2
    p = np.where(small, 1.0, phi)
    s = np.where(small, 1 - phi**2 / 24 + phi**4 / 1920, 2 * np.sin(p / 2) / p)
    ds = np.where(small, -phi / 12 + phi**3 / 480, (p * np.cos(p / 2) - 2 * np.sin(p / 2)) / p**2)
    t = np.where(small, phi / 12 - phi**3 / 240 + phi**5 / 10080, (p - np.sin(p)) / (2 * p**2))
    dt = np.where(
        small, 1 / 12 - phi**2 / 80 + phi**4 / 2016, ((1 - np.cos(p)) * p - 2 * (p - np.sin(p))) / (2 * p**3)
    )
    return s, ds, t, dt


def _tau(phi):
    small = phi < 1e-2
    p = np.where(small, 1.0, phi)
    return np.where(small, phi / 12 + phi**3 / 360 + phi**5 / 10080, (p - np.sin(p)) / (8 * np.sin(p / 2) ** 2))


def cc_distance(q: np.ndarray, with_gradient: bool = False):
    """Carnot-Caratheodory distance from the origin in the first Heisenberg group.

    Frame X_1 = d/dx - y/2 d/dz, X_2 = d/dy + x/2 d/dz.  A point at horizontal
    radius r and height z is reached by a geodesic of length rho turning by
    phi in [0, 2 pi): r = rho s(phi), |z| = rho^2 t(phi).  phi solves
    t/s^2 = |z|/r^2 (bisection); the gradient follows by implicit differentiation.
    """
    q = np.atleast_2d(q)
    x, y, z = q[:, 0], q[:, 1], q[:, 2]
    r = np.hypot(x, y)
    Z = np.abs(z)
    axis = r < 1e-300
    ratio = np.where(axis, np.inf, Z / np.where(axis, 1.0, r) ** 2)
    lo = np.zeros_like(r)
    hi = np.full_like(r, 2 * np.pi)
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        up = _tau(mid) < ratio
        lo = np.where(up, mid, lo)
        hi = np.where(up, hi, mid)
    phi = 0.5 * (lo + hi)
    s, ds, t, dt = _profile(phi)
    with np.errstate(divide="ignore", invalid="ignore"):
        rho = np.where(axis, np.sqrt(4 * np.pi * Z), r / s)
        # near phi = 2 pi, s -> 0: use rho^2 = |z| / t instead
        rho = np.where((~axis) & (s < 1e-3), np.sqrt(Z / t), rho)
    if not with_gradient:
        return rho
    with np.errstate(divide="ignore", invalid="ignore"):
        den = s * dt - 2 * t * ds
        d_r = dt / den
        d_Z = -ds / (rho * den)
        g = np.zeros_like(q)
        g[:, 0] = np.where(axis, 0.0, d_r * x / np.where(axis, 1.0, r))
        g[:, 1] = np.where(axis, 0.0, d_r * y / np.where(axis, 1.0, r))
        g[:, 2] = np.where(axis, 2 * np.pi / np.where(rho > 0, rho, 1.0), d_Z) * np.sign(z)
    return rho, g


def cc_ball(model: Model, radius: float = 1.0) -> Domain:
    """Sub-Riemannian ball of radius R about the identity of the first Heisenberg group."""
    if model.id != "heisenberg(1)":
        raise ValueError("CC balls are implemented for heisenberg(1)")
    R = float(radius)
    zmax = R * R / (2 * np.pi)  # the profile height peaks at phi = pi

    def defining(q):
        return R - cc_distance(q)

    def gradient(q):
        return -cc_distance(q, with_gradient=True)[1]

    def profile_point(phi):
        a = np.abs(phi)
        s, ds, t, dt = _profile(a)
        sgn = np.sign(phi)
        return R * s, R * R * t * sgn, R * ds * sgn, R * R * dt

    def area_density(phi):
        r, _, dr, dz = profile_point(phi)
        return r * np.hypot(dr, dz)

    grid = np.linspace(-2 * np.pi, 2 * np.pi, 4001)
    dens_max = 1.05 * float(np.max(area_density(grid)))
    profile_area = integrate.quad(area_density, -2 * np.pi, 2 * np.pi, points=[0.0], limit=200, epsrel=1e-13)[0]

    def sample_boundary(rng, size):
        out, have = [], 0
        while have < size:
            phi = rng.uniform(-2 * np.pi, 2 * np.pi, 4 * size)
            keep = rng.random(4 * size) * dens_max < area_density(phi)
            out.append(phi[keep])
            have += int(keep.sum())
        phi = np.concatenate(out)[:size]
        r, z, _, _ = profile_point(phi)
        alpha = 2 * np.pi * rng.random(size)
        return np.stack([r * np.cos(alpha), r * np.sin(alpha), z], axis=1)

    def rho_on_profile(phi):
        r, z, _, _ = profile_point(np.atleast_1d(phi))
        q = np.stack([r, np.zeros_like(r), z], axis=1)
        g = gradient(q)
        gH = np.hypot(g[:, 0] - 0.5 * q[:, 1] * g[:, 2], g[:, 1] + 0.5 * q[:, 0] * g[:, 2])
        return gH / np.linalg.norm(g, axis=1)

    perimeter = 2 * np.pi * integrate.quad(
        lambda p: float(rho_on_profile(p)[0] * area_density(p)), -2 * np.pi, 2 * np.pi, points=[0.0], limit=400, epsrel=1e-11
    )[0]

    def dz_dphi(p):
        return profile_point(p)[3]

    volume = 2 * np.pi * integrate.quad(
        lambda p: float(profile_point(p)[0] ** 2 * dz_dphi(p)), 0.0, 2 * np.pi, limit=200, epsrel=1e-13
    )[0]

    def sample_reference(rng, size):
        lo = np.array([-R, -R, -zmax])
        return lo + (2 * np.array([R, R, zmax])) * rng.random((size, 3))

    return Domain(
        name=f"cc-ball({R:g})",
        defining=defining,
        gradient=gradient,
        sample_reference=sample_reference,
        reference_volume=8 * R * R * zmax,
        sample_boundary_reference=sample_boundary,
        boundary_reference_area=2 * np.pi * profile_area,
        length_scale=2 * R,
        volume=volume,
        perimeter=perimeter,
        known={"diam_H": 2 * R, "lambda1_bound": 2 * np.pi**2 / (2 * R) ** 2, "iso_bound": np.pi / (2 * R), "theta_vis": 1.0},
    )


# ------------------------------------------------------- chart primitives

def euclidean_ball(model: Model, center, radius: float) -> Domain:
    """Euclidean ball in the chart coordinates of a chart model."""
    if model.ambient:
        raise ValueError("Euclidean balls are chart domains")
    c = np.asarray(center, dtype=float).reshape(model.dim)
    R = float(radius)
    n = model.dim

    def defining(q):
        q = np.atleast_2d(q)
        return R * R - np.sum((q - c) ** 2, axis=1)

    def gradient(q):
        return -2.0 * (np.atleast_2d(q) - c)

    def sample_reference(rng, size):
        return c - R + 2 * R * rng.random((size, n))

    def sample_boundary(rng, size):
        return c + R * uniform_sphere(rng, size, n)

    def sample_direct(rng, size):
        dirs = uniform_sphere(rng, size, n)
        return c + R * dirs * rng.random(size)[:, None] ** (1.0 / n)

    ball_volume = sphere_area(n - 1) * R**n / n
    constant_density = model.kind in ("carnot", "martinet")
    return Domain(
        name=f"euclidean-ball({R:g})",
        defining=defining,
        gradient=gradient,
        sample_reference=sample_reference,
        reference_volume=(2 * R) ** n,
        sample_boundary_reference=sample_boundary,
        boundary_reference_area=sphere_area(n - 1) * R ** (n - 1),
        length_scale=2 * R,
        volume=ball_volume if constant_density else None,
        sample_interior_direct=sample_direct if constant_density else None,
        known={"euclidean_diameter": 2 * R, "theta_vis": 1.0},
    )


def box(model: Model, lo, hi, face_nodes: int = 96) -> Domain:
    """Coordinate box [lo, hi] in a chart; the boundary is the union of its faces.

    U is the signed distance to the nearest face, its gradient the inward
    normal of that face.  Boundary samples are drawn face-wise with probability
    proportional to face area; sigma(dM) is computed face-wise by tensor
    Gauss-Legendre quadrature of the density of sigma.
    """
    if model.ambient:
        raise ValueError("boxes are chart domains")
    lo = np.asarray(lo, dtype=float).reshape(model.dim)
    hi = np.asarray(hi, dtype=float).reshape(model.dim)
    if np.any(hi <= lo):
        raise ValueError("box needs lo < hi")
    n = model.dim
    size = hi - lo

    def _face_values(q):
        return np.concatenate([q - lo, hi - q], axis=1)  # (B, 2n)

    def defining(q):
        return np.min(_face_values(np.atleast_2d(q)), axis=1)

    def gradient(q):
        q = np.atleast_2d(q)
        idx = np.argmin(_face_values(q), axis=1)
        g = np.zeros_like(q)
        axis = idx % n
        g[np.arange(len(q)), axis] = np.where(idx < n, 1.0, -1.0)
        return g

    face_area = np.array([np.prod(np.delete(size, i)) for i in range(n)])
    areas = np.concatenate([face_area, face_area])

    def sample_boundary(rng, count):
        face = rng.choice(2 * n, size=count, p=areas / areas.sum())
        q = lo + size * rng.random((count, n))
        axis = face % n
        q[np.arange(count), axis] = np.where(face < n, lo[axis], hi[axis])
        return q

    # Deterministic sigma(dM): tensor Gauss-Legendre on each face.

    x, w = np.polynomial.legendre.leggauss(face_nodes if n <= 3 else max(8, int(2e5 ** (1 / (n - 1)))))
    perimeter = 0.0
    for f in range(2 * n):
        axis = f % n
        others = [i for i in range(n) if i != axis]
        grids = np.meshgrid(*[lo[i] + 0.5 * size[i] * (x + 1) for i in others], indexing="ij")
        wts = np.ones_like(grids[0])
        for j, i in enumerate(others):
            shape = [1] * len(others)
            shape[j] = -1
            wts = wts * (0.5 * size[i] * w).reshape(shape)
        pts = np.zeros((wts.size, n))
        for j, i in enumerate(others):
            pts[:, i] = grids[j].ravel()
        pts[:, axis] = lo[axis] if f < n else hi[axis]
        g = np.zeros_like(pts)
        g[:, axis] = 1.0
        rho = model.volume_density(pts) * np.linalg.norm(horizontal_gradient(model, pts, g), axis=1)
        perimeter += float(np.sum(wts.ravel() * rho))

    constant_density = model.kind in ("carnot", "martinet")
    volume = float(np.prod(size)) if constant_density else None
    return Domain(
        name="box",
        defining=defining,
        gradient=gradient,
        sample_reference=lambda rng, count: lo + size * rng.random((count, n)),
        reference_volume=float(np.prod(size)),
        sample_boundary_reference=sample_boundary,
        boundary_reference_area=float(areas.sum()),
        length_scale=float(np.linalg.norm(size)),
        volume=volume,
        perimeter=perimeter,
        sample_interior_direct=(lambda rng, count: lo + size * rng.random((count, n))) if constant_density else None,
        known={"euclidean_diameter": float(np.linalg.norm(size)), "theta_vis": 1.0},
        notes=("sigma(dM) by face-wise Gauss-Legendre quadrature; corners carry no mass",),
    )


DOMAIN_IDS = ("hemisphere", "band", "cc-ball", "euclidean-ball", "box")


def make_domain(model: Model, domain_id: str, **params) -> Domain:
    """Build a registered domain for a model."""
    if domain_id == "hemisphere":
        return hemisphere(model)
    if domain_id == "band":
        if model.kind == "band":
            return theta_band(model, params.get("epsilon"))
        return sphere_band(model, float(params.get("epsilon", 0.1)))
    if domain_id == "cc-ball":
        return cc_ball(model, float(params.get("radius", 1.0)))
    if domain_id == "euclidean-ball":
        center = params.get("center", [0.0] * model.dim)
        return euclidean_ball(model, center, float(params.get("radius", 1.0)))
    if domain_id == "box":
        return box(model, params["lo"], params["hi"])
    raise KeyError(f"unknown domain {domain_id!r}; known: {', '.join(DOMAIN_IDS)}")
