"""Numerical certificates for the reduction hypotheses and the reduced fiber measure.

(H1) asks that the reduced bundle {v = 0} be invariant under the geodesic
flow; in frame coordinates v_j' = sum_i u_i a_ij^l u_l on {v = 0}.  (H2) asks
that the reduced Liouville volume be invariant; its Lie derivative is minus
the divergence coefficient

    sum_i u_i ( sum_j d_ij^j - X_i log(omega / vol_g) )

times the volume itself, where vol_g is the Riemannian volume of the frame.
The reduced fiber measure at a point is the round measure of the unit sphere
S^{k-1} of horizontal momenta, so every fiber integral is a sphere integral.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .flow import flow_map
from .model import FrameCovector, Model, bracket_tensors, fd_brackets
from .spheres import hemisphere_rule, householder_e1, sphere_area, sphere_rule, uniform_sphere

DEFAULT_TOL = 1e-9


class QuadratureError(ArithmeticError):
    """A deterministic fiber quadrature did not converge under refinement."""


# ------------------------------------------------------------ point samplers

def certificate_points(model: Model, rng: np.random.Generator, n: int) -> np.ndarray:
    """Points of the model's chart at which certificates are evaluated.

    Spheres: uniform on the sphere (inside the chart).  Carnot and Martinet
    models: uniform in the cube [-1, 1]^n.  Spherical band: uniform in the
    band of the model's half-width around the equator.
    """
    if model.kind == "sphere":
        out = np.empty((0, model.dim))
        while len(out) < n:
            q = uniform_sphere(rng, 2 * n, model.dim)
            out = np.concatenate([out, q[model.in_chart(q)]])
        return out[:n]
    if model.kind in ("carnot", "martinet"):
        return rng.uniform(-1.0, 1.0, size=(n, model.dim))
    if model.kind == "band":
        eps = float(model.params["epsilon"])
        theta = 0.5 * np.pi + eps * rng.uniform(-1.0, 1.0, n)
        return np.stack([theta, 2.0 * np.pi * rng.random(n)], axis=1)
    raise ValueError(f"no certificate sampler for model kind {model.kind!r}")


# ------------------------------------------------------------- certificates

@dataclass
class ReductionCertificate:
    """Residuals of the reduction hypotheses over sampled points and momenta.

    ``h1_residual`` is the max |v'| on {v = 0}; ``h1_dynamic`` the max |v(t)|
    per unit length along integrated reduced geodesics; ``h2_residual`` the max
    |divergence coefficient|.  ``skew_residual`` (max |d_ij^l + d_il^j|) and
    ``trace_residual`` (max |tr ad X_i|) are structural diagnostics; entries
    that were not computed are None.
    """

    model_id: str
    n_samples: int
    tolerance: float
    h1_residual: Optional[float] = None
    h1_dynamic: Optional[float] = None
    h2_residual: Optional[float] = None
    skew_residual: Optional[float] = None
    trace_residual: Optional[float] = None
    rotated_h2_residual: Optional[float] = None
    extra: dict = field(default_factory=dict)

    @property
    def h1_pass(self) -> Optional[bool]:
        if self.h1_residual is None:
            return None
        dyn = self.h1_dynamic if self.h1_dynamic is not None else 0.0
        return bool(self.h1_residual < self.tolerance and dyn < self.tolerance)

    @property
    def h2_pass(self) -> Optional[bool]:
        if self.h2_residual is None:
            return None
        return bool(self.h2_residual < self.tolerance)

    def merge(self, other: "ReductionCertificate") -> "ReductionCertificate":
        """Combine an H1 and an H2 certificate of the same model."""
        values = {
            name: getattr(other, name) if getattr(self, name) is None else getattr(self, name)
            for name in (
                "h1_residual", "h1_dynamic", "h2_residual", "skew_residual",
                "trace_residual", "rotated_h2_residual",
            )
        }
        return replace(self, n_samples=max(self.n_samples, other.n_samples), extra={**other.extra, **self.extra}, **values)

    def to_dict(self) -> dict:
        return {
            "model": self.model_id,
            "n_samples": self.n_samples,
            "tolerance": self.tolerance,
            "h1_residual": self.h1_residual,
            "h1_dynamic": self.h1_dynamic,
            "h2_residual": self.h2_residual,
            "skew_residual": self.skew_residual,
            "trace_residual": self.trace_residual,
            "rotated_h2_residual": self.rotated_h2_residual,
            "h1_pass": self.h1_pass,
            "h2_pass": self.h2_pass,
            **self.extra,
        }


def reduced_vertical_velocity(model: Model, q: np.ndarray, u: np.ndarray) -> np.ndarray:
    """v_j' = sum_il u_i a_ij^l u_l at (q, u, v = 0), shape (B, n - k)."""
    br = bracket_tensors(model, q)
    return np.einsum("bi,bijl,bl->bj", u, br.a, u)


def divergence_coefficient(model: Model, q: np.ndarray, u: np.ndarray, brackets=None) -> np.ndarray:
    """sum_i u_i (sum_j d_ij^j - X_i log(omega / vol_g)) at reduced covectors (q, u, 0)."""
    br = bracket_tensors(model, q) if brackets is None else brackets
    trace_d = np.einsum("bijj->bi", br.d) if model.m else np.zeros_like(u)
    if model.volume_log_derivative is not None:
        trace_d = trace_d - model.volume_log_derivative(q)
    return np.einsum("bi,bi->b", u, trace_d)


def check_H1(
    model: Model,
    n_samples: int = 1000,
    rng: Optional[np.random.Generator] = None,
    tol: float = DEFAULT_TOL,
    n_dynamic: int = 16,
    length: float = 1.0,
    ode_tol: float = 1e-11,
) -> ReductionCertificate:
    """Static and dynamic evidence that {v = 0} is flow invariant.

    The static residual is max |v'| over random reduced unit covectors.  The
    dynamic witness integrates ``n_dynamic`` of them for ``length`` and reports
    the largest |v| reached divided by the length.
    """
    rng = np.random.default_rng() if rng is None else rng
    q = certificate_points(model, rng, n_samples)
    u = uniform_sphere(rng, n_samples, model.k)
    if model.m == 0:
        static = 0.0
    else:
        static = float(np.max(np.abs(reduced_vertical_velocity(model, q, u)), initial=0.0))
    dynamic = None
    if n_dynamic and model.m:
        lam = FrameCovector.reduced(q[:n_dynamic], u[:n_dynamic], model.m)
        end = flow_map(model, lam, length, tol=ode_tol)
        dynamic = float(np.max(np.abs(end.v), initial=0.0)) / length
    return ReductionCertificate(
        model_id=model.id, n_samples=n_samples, tolerance=tol, h1_residual=static, h1_dynamic=dynamic,
    )


def rotated_vertical_model(model: Model, rng: np.random.Generator) -> Model:
    """The model with its vertical frame rotated by a smooth point-dependent rotation.

    The rotation is the Cayley transform of s(q) A with A a random skew matrix
    and s(q) = sin(<w, q>) for a random w.  Brackets come from finite
    differences of the rotated frames.
    """
    m = model.m
    A = rng.standard_normal((m, m))
    A = A - A.T
    w = rng.standard_normal(model.dim)
    eye = np.eye(m)

    def rotation(q):
        S = np.sin(np.atleast_2d(q) @ w)[:, None, None] * A
        return np.linalg.solve(eye - S, eye + S)

    def vertical(q):
        return np.einsum("bjm,bmd->bjd", rotation(q), model.vertical_frame(q))

    rotated = replace(model, vertical_frame=vertical, geodesic_field=None, id=model.id + "+rotated")
    return replace(rotated, bracket_oracle=lambda q: fd_brackets(rotated, q))


def check_H2(
    model: Model,
    n_samples: int = 1000,
    rng: Optional[np.random.Generator] = None,
    tol: float = DEFAULT_TOL,
    rotated_samples: int = 32,
) -> ReductionCertificate:
    """Divergence coefficient of the reduced Liouville volume and structural residuals.

    Also reports max |d_ij^l + d_il^j| (zero for totally geodesic foliations),
    max |tr ad X_i| (zero for Carnot groups) and, for models with at least two
    vertical directions, the divergence coefficient after a random smooth
    rotation of the vertical frame (finite-difference brackets).
    """
    rng = np.random.default_rng() if rng is None else rng
    q = certificate_points(model, rng, n_samples)
    u = uniform_sphere(rng, n_samples, model.k)
    br = bracket_tensors(model, q)
    div = divergence_coefficient(model, q, u, br)
    skew = float(np.max(np.abs(br.d + np.swapaxes(br.d, 2, 3)), initial=0.0)) if model.m else 0.0
    trace = None
    if model.kind == "carnot":
        tr = np.einsum("bijj->bi", br.b) + (np.einsum("bijj->bi", br.d) if model.m else 0.0)
        trace = float(np.max(np.abs(tr), initial=0.0))
    rotated = None
    if rotated_samples and model.m >= 2:
        rot = rotated_vertical_model(model, rng)
        qr, ur = q[:rotated_samples], u[:rotated_samples]
        rotated = float(np.max(np.abs(divergence_coefficient(rot, qr, ur)), initial=0.0))
    return ReductionCertificate(
        model_id=model.id,
        n_samples=n_samples,
        tolerance=tol,
        h2_residual=float(np.max(np.abs(div), initial=0.0)),
        skew_residual=skew,
        trace_residual=trace,
        rotated_h2_residual=rotated,
    )


def certify(model: Model, n_samples: int = 1000, rng: Optional[np.random.Generator] = None,
            tol: float = DEFAULT_TOL) -> ReductionCertificate:
    """Both hypotheses in one certificate."""
    rng = np.random.default_rng() if rng is None else rng
    return check_H1(model, n_samples, rng, tol).merge(check_H2(model, n_samples, rng, tol))


# ---------------------------------------------------------- fiber quadrature

@dataclass(frozen=True)
class FiberIntegral:
    """Value of a fiber integral; ``stderr`` is 0 for deterministic rules and
    ``refinement`` the change against the rule with half the nodes."""

    value: float
    stderr: float
    scheme: str
    n_points: int
    refinement: float = 0.0


def _rule(k: int, nodes: int, half_space: Optional[np.ndarray]):
    if half_space is None:
        return sphere_rule(k, nodes)
    pts, wts = hemisphere_rule(k, nodes)
    R = householder_e1(np.asarray(half_space, dtype=float)[None, :])[0]
    return pts @ R.T, wts


def fiber_quadrature(
    k: int,
    integrand: Callable[[np.ndarray], np.ndarray],
    scheme: str = "auto",
    nodes: Optional[int] = None,
    n_mc: int = 200_000,
    rng: Optional[np.random.Generator] = None,
    half_space: Optional[np.ndarray] = None,
    refine_tol: float = 1e-6,
) -> FiberIntegral:
    """Integral of ``integrand`` (unit momenta (P, k) -> (P,)) against the round measure of S^{k-1}.

    ``half_space`` restricts the integral to {<u, e> >= 0} for the unit vector
    e.  The deterministic scheme (default for k <= 4) is a Gauss-Legendre
    product rule in polar angles, checked against the rule with half the
    nodes; a relative change above ``refine_tol`` raises
    :class:`QuadratureError`.  The Monte-Carlo scheme (default for k > 4)
    reports a standard error.
    """
    if scheme == "auto":
        scheme = "product" if k <= 4 else "mc"
    if scheme == "product":
        nodes = nodes or (64 if k <= 3 else 40)
        pts, wts = _rule(k, nodes, half_space)
        value = float(np.dot(wts, integrand(pts)))
        coarse_pts, coarse_wts = _rule(k, max(nodes // 2, 2), half_space)
        coarse = float(np.dot(coarse_wts, integrand(coarse_pts)))
        change = abs(value - coarse)
        if change > refine_tol * max(1.0, abs(value)):
            raise QuadratureError(f"fiber quadrature changed by {change:.3g} under refinement")
        return FiberIntegral(value, 0.0, "product", len(wts), change)
    if scheme == "mc":
        rng = np.random.default_rng() if rng is None else rng
        u = uniform_sphere(rng, n_mc, k)
        area = sphere_area(k - 1)
        f = np.asarray(integrand(u), dtype=float)
        if half_space is not None:
            f = np.where(u @ np.asarray(half_space, dtype=float) >= 0.0, f, 0.0)
        return FiberIntegral(area * float(np.mean(f)), area * float(np.std(f, ddof=1)) / np.sqrt(n_mc), "mc", n_mc)
    raise ValueError(f"unknown fiber quadrature scheme {scheme!r}")


def hemisphere_flux(k: int) -> float:
    """Closed form of the integral of <u, n>_+ over S^{k-1}: |S^k| / (2 pi)."""
    return sphere_area(k) / (2.0 * np.pi)
