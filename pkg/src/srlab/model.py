"""Core data types for (sub-)Riemannian structures given by orthonormal frames.

A structure is described by a horizontal frame X_1..X_k, a vertical frame
Z_1..Z_{n-k} completing it to an orthonormal frame of a Riemannian extension,
the structural functions of their Lie brackets, and a volume density.  Points
live either in a coordinate chart of R^n or, for sphere models, on the unit
sphere of an ambient Euclidean space.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, Mapping, Optional

import numpy as np

if TYPE_CHECKING:  # pragma: no cover
    from .domains import Domain


class ChartDomainError(ValueError):
    """A point lies outside the chart on which a model is defined."""


class BoundaryPreconditionError(ValueError):
    """A point expected on the boundary lies off it."""


class SamplingError(RuntimeError):
    """A rejection sampler ran out of retries."""


@dataclass(frozen=True)
class Brackets:
    """Structural functions of the frame at a batch of points.

    With X the horizontal and Z the vertical frame:
    [X_i, X_j] = b_ij^l X_l + c_ij^l Z_l, [X_i, Z_j] = a_ij^l X_l + d_ij^l Z_l,
    [Z_i, Z_j] = e_ij^l Z_l.  Arrays carry a leading batch axis.
    """

    b: np.ndarray
    c: np.ndarray
    a: np.ndarray
    d: np.ndarray
    e: np.ndarray

    def max_abs_difference(self, other: "Brackets") -> float:
        return max(
            float(np.max(np.abs(getattr(self, name) - getattr(other, name)), initial=0.0))
            for name in "bcade"
        )


@dataclass(frozen=True)
class FrameCovector:
    """Covectors in frame coordinates: u_i = <lam, X_i>, v_j = <lam, Z_j> (batched)."""

    q: np.ndarray
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", np.atleast_2d(np.asarray(self.q, dtype=float)))
        object.__setattr__(self, "u", np.atleast_2d(np.asarray(self.u, dtype=float)))
        v = np.asarray(self.v, dtype=float)
        if v.ndim < 2:
            v = v.reshape(self.q.shape[0], -1)
        object.__setattr__(self, "v", v)

    def __len__(self) -> int:
        return self.q.shape[0]

    def reversed(self) -> "FrameCovector":
        return FrameCovector(self.q, -self.u, -self.v)

    def state(self) -> np.ndarray:
        return np.concatenate([self.q, self.u, self.v], axis=1)

    @classmethod
    def from_state(cls, y: np.ndarray, dim: int, k: int) -> "FrameCovector":
        y = np.atleast_2d(y)
        return cls(y[:, :dim], y[:, dim : dim + k], y[:, dim + k :])

    @classmethod
    def reduced(cls, q: np.ndarray, u: np.ndarray, n_vertical: int) -> "FrameCovector":
        q = np.atleast_2d(q)
        return cls(q, u, np.zeros((q.shape[0], n_vertical)))


@dataclass(frozen=True)
class Model:
    """An immutable (sub-)Riemannian structure with its frames and hooks.

    ``dim`` is the number of coordinates of a point: n for chart models and
    n + 1 for sphere models (``ambient=True``), whose points are unit vectors.
    Frame maps take points of shape (B, dim) and return (B, count, dim).
    ``volume_log_derivative`` gives X_i(log(omega / Riemannian volume)) and
    ``geodesic_field`` optionally evaluates the Hamilton vector field
    (q', u', v') directly, bypassing the full bracket tensors.
    """

    id: str
    n: int
    k: int
    dim: int
    ambient: bool
    horizontal_frame: Callable[[np.ndarray], np.ndarray]
    vertical_frame: Callable[[np.ndarray], np.ndarray]
    bracket_oracle: Callable[[np.ndarray], Brackets]
    volume_density: Callable[[np.ndarray], np.ndarray]
    in_chart: Callable[[np.ndarray], np.ndarray]
    cut_hook: Optional[Callable[[FrameCovector], np.ndarray]] = None
    volume_log_derivative: Optional[Callable[[np.ndarray], np.ndarray]] = None
    geodesic_field: Optional[Callable] = None
    kind: str = "generic"
    params: Mapping = field(default_factory=dict)

    @property
    def m(self) -> int:
        """Number of vertical directions n - k."""
        return self.n - self.k

    def frame(self, q: np.ndarray) -> np.ndarray:
        """Full frame (B, n, dim): horizontal fields followed by vertical ones."""
        q = np.atleast_2d(q)
        if self.m == 0:
            return self.horizontal_frame(q)
        return np.concatenate([self.horizontal_frame(q), self.vertical_frame(q)], axis=1)

    def project(self, q: np.ndarray) -> np.ndarray:
        """Map a point back onto the constraint set (unit sphere for ambient models)."""
        if self.ambient:
            return q / np.linalg.norm(q, axis=-1, keepdims=True)
        return q

    def check_chart(self, q: np.ndarray) -> None:
        q = np.atleast_2d(q)
        if not np.all(self.in_chart(q)):
            raise ChartDomainError(f"point outside the chart of {self.id}")


def hamiltonian(model: Model, lam: FrameCovector) -> np.ndarray:
    """H = |u|^2 / 2 for each covector of the batch."""
    model.check_chart(lam.q)
    return 0.5 * np.einsum("bi,bi->b", lam.u, lam.u)


def bracket_tensors(model: Model, q: np.ndarray) -> Brackets:
    """Structural functions (b, c, a, d, e) of the model's frame at points q."""
    q = np.atleast_2d(np.asarray(q, dtype=float))
    model.check_chart(q)
    return model.bracket_oracle(q)


def expand_in_frame(model: Model, q: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    """Frame coefficients of vectors (B, P, dim) at points q, shape (B, P, n)."""
    F = model.frame(q)
    if model.ambient:
        return np.einsum("bpd,bnd->bpn", vectors, F)
    return np.linalg.solve(np.swapaxes(F, 1, 2)[:, None], vectors[..., None])[..., 0]


def fd_brackets(model: Model, q: np.ndarray, step: float = 1e-5) -> Brackets:
    """Structural functions from central finite-difference Lie brackets of the frame.

    [A, B] = DB.A - DA.B with Jacobians from central differences of step
    ``step * (|q| + 1)``; used as a generic fallback and a consistency check.
    """
    q = np.atleast_2d(np.asarray(q, dtype=float))
    B, dim = q.shape
    n, k = model.n, model.k
    h = step * (np.linalg.norm(q, axis=1) + 1.0)
    F = model.frame(q)
    jac = np.empty((B, n, dim, dim))  # jac[b, f, :, c] = d F_f / d q_c
    for c in range(dim):
        dq = np.zeros_like(q)
        dq[:, c] = h
        jac[:, :, :, c] = (model.frame(q + dq) - model.frame(q - dq)) / (2.0 * h[:, None, None])
    # directional derivative of field g along field f: D[b, f, g] = jac[g] @ F[f]
    D = np.einsum("bgdc,bfc->bfgd", jac, F)
    brackets = D - np.swapaxes(D, 1, 2)  # [F_f, F_g]
    coef = expand_in_frame(model, q, brackets.reshape(B, n * n, dim)).reshape(B, n, n, n)
    return split_structure(coef, k)


def split_structure(coef: np.ndarray, k: int) -> Brackets:
    """Split full-frame bracket coefficients coef[b, f, g, h] into (b, c, a, d, e)."""
    return Brackets(
        b=coef[:, :k, :k, :k],
        c=coef[:, :k, :k, k:],
        a=coef[:, :k, k:, :k],
        d=coef[:, :k, k:, k:],
        e=coef[:, k:, k:, k:],
    )


def horizontal_gradient(model: Model, q: np.ndarray, grad: np.ndarray) -> np.ndarray:
    """Frame components X_i(U) of the horizontal gradient from a chart gradient of U."""
    return np.einsum("bid,bd->bi", model.horizontal_frame(np.atleast_2d(q)), np.atleast_2d(grad))


@dataclass(frozen=True)
class NormalResult:
    """Horizontal normals at boundary points.

    ``u`` holds frame components of the inward unit horizontal normal (rows
    with ``characteristic`` set are zero), ``vector`` its chart/ambient vector,
    ``grad_norm`` the size |grad_H U|.
    """

    u: np.ndarray
    vector: np.ndarray
    grad_norm: np.ndarray
    characteristic: np.ndarray


def horizontal_normal(
    model: Model,
    domain: "Domain",
    q: np.ndarray,
    eps_char: float = 1e-8,
    boundary_tol: float = 1e-10,
) -> NormalResult:
    """Inward unit horizontal normal n_q = grad_H U / |grad_H U| at boundary points."""
    q = np.atleast_2d(np.asarray(q, dtype=float))
    model.check_chart(q)
    U = domain.defining(q)
    scale = np.maximum(np.linalg.norm(domain.gradient(q), axis=1), 1.0)
    if np.any(np.abs(U) > boundary_tol * scale):
        raise BoundaryPreconditionError("point is not on the boundary")
    gH = horizontal_gradient(model, q, domain.gradient(q))
    norm = np.linalg.norm(gH, axis=1)
    char = norm < eps_char
    u = np.where(char[:, None], 0.0, gH / np.where(char, 1.0, norm)[:, None])
    vec = np.einsum("bi,bid->bd", u, model.horizontal_frame(q))
    return NormalResult(u=u, vector=vec, grad_norm=norm, characteristic=char)


def reference_gradient_norm(model: Model, q: np.ndarray, grad: np.ndarray) -> np.ndarray:
    """Norm of dU in the reference metric of the boundary sampler.

    Chart models: Euclidean norm of the chart gradient.  Sphere models: the
    norm of its projection on the tangent space of the sphere.
    """
    if model.ambient:
        grad = grad - np.einsum("bd,bd->b", grad, q)[:, None] * q
    return np.linalg.norm(grad, axis=1)


def surface_density(model: Model, domain: "Domain", q: np.ndarray) -> np.ndarray:
    """Density of sigma = i_n omega with respect to the reference surface measure."""
    q = np.atleast_2d(q)
    grad = domain.gradient(q)
    gH = np.linalg.norm(horizontal_gradient(model, q, grad), axis=1)
    return model.volume_density(q) * gH / reference_gradient_norm(model, q, grad)


@dataclass(frozen=True)
class CharacteristicScan:
    fraction: float
    area_fraction: float
    min_grad: float
    median_grad: float
    n_samples: int
    eps_char: float


def characteristic_scan(
    model: Model,
    domain: "Domain",
    n_samples: int,
    eps_char: float = 1e-6,
    rng: np.random.Generator | None = None,
) -> CharacteristicScan:
    """Fraction of boundary samples where the horizontal gradient of U nearly vanishes.

    ``fraction`` weights samples by the density of sigma (the sigma-fraction);
    ``area_fraction`` is the plain fraction of reference-uniform samples.
    """
    rng = np.random.default_rng() if rng is None else rng
    q = domain.sample_boundary_reference(rng, n_samples)
    gH = np.linalg.norm(horizontal_gradient(model, q, domain.gradient(q)), axis=1)
    rho = surface_density(model, domain, q)
    mask = gH < eps_char
    total = float(np.sum(rho))
    return CharacteristicScan(
        fraction=float(np.sum(rho[mask]) / total) if total > 0 else 0.0,
        area_fraction=float(np.mean(mask)),
        min_grad=float(np.min(gH)),
        median_grad=float(np.median(gH)),
        n_samples=n_samples,
        eps_char=eps_char,
    )
