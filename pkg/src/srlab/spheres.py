"""Round spheres: areas, uniform sampling, importance sampling and product quadrature rules."""

from __future__ import annotations

import numpy as np
from scipy.special import gammaln


def sphere_area(k: int) -> float:
    """Surface area of the unit sphere S^k in R^{k+1} (|S^0| = 2)."""
    return float(2.0 * np.exp(0.5 * (k + 1) * np.log(np.pi) - gammaln(0.5 * (k + 1))))


def uniform_sphere(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    """n points uniform on S^{dim-1} in R^dim."""
    x = rng.standard_normal((n, dim))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def householder_e1(target: np.ndarray) -> np.ndarray:
    """Orthogonal matrices (batch) mapping e1 to each unit row of ``target``.

    Uses a Householder reflection; the returned array has shape (B, k, k)
    and acts on column vectors, so ``R @ e1 == target``.
    """
    target = np.atleast_2d(target)
    B, k = target.shape
    e1 = np.zeros(k)
    e1[0] = 1.0
    w = e1 - target
    nw = np.einsum("bi,bi->b", w, w)
    R = np.broadcast_to(np.eye(k), (B, k, k)).copy()
    ok = nw > 1e-30
    w = w[ok] / np.sqrt(nw[ok])[:, None]
    R[ok] -= 2.0 * w[:, :, None] * w[:, None, :]
    return R


def inward_weighted_directions(rng: np.random.Generator, normals: np.ndarray) -> np.ndarray:
    """Unit vectors on the hemisphere around each normal with density proportional to <u, n>.

    Under the round measure the component u1 = <u, n> has density proportional
    to (1 - u1^2)^{(k-3)/2}; weighting by u1 and inverting the distribution
    function gives u1 = sqrt(1 - V^{2/(k-1)}) with V uniform.  The orthogonal
    part is uniform on the (k-2)-sphere scaled by sqrt(1 - u1^2).  The weight
    <u, n> integrates to |S^{k-2}| / (k-1) = |S^k| / (2 pi) over the half-sphere.
    """
    B, k = normals.shape
    if k == 1:
        return normals.copy()
    u1 = np.sqrt(1.0 - rng.random(B) ** (2.0 / (k - 1)))
    rest = uniform_sphere(rng, B, k - 1) * np.sqrt(1.0 - u1 * u1)[:, None]
    local = np.concatenate([u1[:, None], rest], axis=1)
    R = householder_e1(normals)
    return np.einsum("bij,bj->bi", R, local)


def _full_rule(k: int, nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Product rule on S^{k-1} (points (P, k), weights (P,)) summing to |S^{k-1}|."""
    if k == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if k == 2:
        m = 2 * nodes
        t = 2.0 * np.pi * (np.arange(m) + 0.5) / m
        return np.stack([np.cos(t), np.sin(t)], axis=1), np.full(m, 2.0 * np.pi / m)
    pts, wts = hemisphere_rule(k, nodes)
    mirror = pts.copy()
    mirror[:, 0] *= -1.0
    return np.concatenate([pts, mirror]), np.concatenate([wts, wts])


def hemisphere_rule(k: int, nodes: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """Product rule on the closed half {u1 >= 0} of S^{k-1}.

    Points are u = (cos psi, sin psi * w) with w from a rule on S^{k-2}; the
    weight carries the Jacobian sin^{k-2} psi.  The polar angle is
    psi = pi/2 (1 - (1 - s)^3) with s Gauss-Legendre on [0, 1]: the grading
    towards the equator u1 = 0 keeps integrands such as u1^p with fractional
    p accurate.  For k = 1 the half-sphere is the single atom u = +1.
    """
    if k == 1:
        return np.array([[1.0]]), np.array([1.0])
    x, w = np.polynomial.legendre.leggauss(nodes)
    s = 0.5 * (x + 1.0)
    psi = 0.5 * np.pi * (1.0 - (1.0 - s) ** 3)
    wpsi = 0.5 * w * 1.5 * np.pi * (1.0 - s) ** 2 * np.sin(psi) ** (k - 2)
    sub_pts, sub_w = _full_rule(k - 1, nodes)
    pts = np.concatenate(
        [
            np.repeat(np.cos(psi), len(sub_w))[:, None],
            (np.sin(psi)[:, None, None] * sub_pts[None, :, :]).reshape(-1, k - 1),
        ],
        axis=1,
    )
    wts = (wpsi[:, None] * sub_w[None, :]).ravel()
    return pts, wts


def sphere_rule(k: int, nodes: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic product quadrature on S^{k-1}; weights sum to |S^{k-1}|."""
    return _full_rule(k, nodes)
