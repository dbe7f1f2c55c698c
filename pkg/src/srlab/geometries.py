"""Concrete structures: round spheres, complex/quaternionic Hopf spheres, step-2 Carnot
groups, the Martinet distribution and the meridian distribution on a spherical band.

Hopf spheres are treated uniformly over K in {R, C, H}: a point of
S^{m(d+1)-1} is a vector z = (z_0, ..., z_d) in K^{d+1}, stored with shape
(d+1, m).  The vertical fields u_s z (s ranging over the imaginary units of K)
span the fibres of z -> [z]; the horizontal frame is obtained from the
coordinate directions e_a, a = 1..d, by subtracting their components along
z + e_0 with a K-valued coefficient chosen so that the result is orthogonal to
every fibre direction.  The frame is smooth away from z = -e_0.
"""

from __future__ import annotations

from functools import partial

import numpy as np

from .model import Brackets, FrameCovector, Model, split_structure


# ---------------------------------------------------------------- algebra

class _Algebra:
    """Arithmetic in K = R, C or H on numpy arrays.

    Real numbers are float arrays, complex numbers complex arrays, and a
    quaternion a + b j (a, b complex) is a complex array with a leading axis
    of length 2 (Cayley-Dickson form, (a + b j)(c + d j) = (ac - b conj d) +
    (ad + b conj c) j).  Real coordinates are ordered 1, i, j, k.
    """

    def __init__(self, m: int):
        if m not in (1, 2, 4):
            raise ValueError("only R, C, H (m = 1, 2, 4) are supported")
        self.m = m

    def from_real(self, x: np.ndarray):
        if self.m == 1:
            return x[..., 0]
        if self.m == 2:
            return x[..., 0] + 1j * x[..., 1]
        return np.stack([x[..., 0] + 1j * x[..., 1], x[..., 2] + 1j * x[..., 3]])

    def to_real(self, a) -> np.ndarray:
        if self.m == 1:
            return a[..., None]
        if self.m == 2:
            return np.stack([a.real, a.imag], axis=-1)
        return np.stack([a[0].real, a[0].imag, a[1].real, a[1].imag], axis=-1)

    def expand(self, a, axis: int):
        """Insert a broadcasting axis into the element shape."""
        if self.m == 4:
            return np.expand_dims(a, axis + 1 if axis >= 0 else axis)
        return np.expand_dims(a, axis)

    def take(self, a, index):
        """Index the element shape (the pair axis of quaternions is kept)."""
        if self.m == 4:
            return a[(slice(None),) + (index if isinstance(index, tuple) else (index,))]
        return a[index]

    def mul(self, a, b):
        if self.m < 4:
            return a * b
        return np.stack([a[0] * b[0] - a[1] * np.conj(b[1]), a[0] * b[1] + a[1] * np.conj(b[0])])

    def conj(self, a):
        if self.m == 1:
            return a
        if self.m == 2:
            return np.conj(a)
        return np.stack([np.conj(a[0]), -a[1]])

    def norm2(self, a):
        if self.m == 1:
            return a * a
        if self.m == 2:
            return a.real**2 + a.imag**2
        return a[0].real**2 + a[0].imag**2 + a[1].real**2 + a[1].imag**2

    def inv(self, a):
        c = self.conj(a)
        return c / self.norm2(a)

    def unit_mul(self, s: int, a):
        """Left multiplication by the s-th unit (1, i, j, k)."""
        if s == 0:
            return a
        if self.m == 2:
            return 1j * a
        if s == 1:
            return 1j * a
        if s == 2:
            return np.stack([-np.conj(a[1]), np.conj(a[0])])
        return np.stack([-1j * np.conj(a[1]), 1j * np.conj(a[0])])

    def sum(self, a, axis: int):
        return a.sum(axis=axis + 1 if (self.m == 4 and axis >= 0) else axis)


# ------------------------------------------------------------ sphere family

class _HopfSphere:
    """Frames and their derivatives for the Hopf structure on S^{m(d+1)-1}."""

    def __init__(self, d: int, m: int):
        self.d, self.m = d, m
        self.alg = _Algebra(m)
        self.N = m * (d + 1)
        self.k = m * d
        self.n = self.N - 1

    def _to_k(self, q):
        """Real points (..., N) to K-vectors with element shape (..., d+1)."""
        return self.alg.from_real(q.reshape(q.shape[:-1] + (self.d + 1, self.m)))

    def _to_real(self, a, lead):
        """K-vectors with element shape lead + (d+1,) to real arrays lead + (N,)."""
        return self.alg.to_real(a).reshape(lead + (self.N,))

    def _coefficients(self, z):
        """(1 + conj z_0)^{-1}, c_a = conj(z_a)(1 + conj z_0)^{-1}, and z + e_0."""
        A = self.alg
        z0 = A.take(z, (Ellipsis, 0))
        shift = A.conj(z0)
        if self.m == 4:
            shift = shift.copy()
            shift[0] += 1.0
        else:
            shift = shift + 1.0
        qinv = A.inv(shift)
        c = A.mul(A.conj(A.take(z, (Ellipsis, slice(1, None)))), A.expand(qinv, -1))  # (..., d)
        zp = z.copy()
        if self.m == 4:
            zp[0][..., 0] += 1.0
        else:
            zp[..., 0] += 1.0
        return qinv, c, zp

    def _w(self, z):
        A = self.alg
        _, c, zp = self._coefficients(z)
        # w_a,i = delta_ai - c_a (z_i + delta_i0): element shape (..., d, d+1)
        w = -A.mul(A.expand(c, -1), A.expand(zp, -2))
        idx = np.arange(self.d)
        if self.m == 4:
            w[0][..., idx, idx + 1] += 1.0
        else:
            w[..., idx, idx + 1] += 1.0
        return w

    def _lift_horizontal(self, w, lead):
        """Real fields e_s w_a ordered (a, s): element shape lead + (d, d+1) -> lead + (k, N)."""
        A = self.alg
        parts = [self._to_real(A.unit_mul(s, w), lead + (self.d,)) for s in range(self.m)]
        return np.stack(parts, axis=-2).reshape(lead + (self.k, self.N))

    def _lift_vertical(self, z, lead):
        A = self.alg
        parts = [self._to_real(A.unit_mul(s, z), lead) for s in range(1, self.m)]
        return np.stack(parts, axis=-2)

    def horizontal(self, q):
        return self._lift_horizontal(self._w(self._to_k(q)), q.shape[:-1])

    def vertical(self, q):
        if self.m == 1:
            return np.zeros(q.shape[:-1] + (0, self.N))
        return self._lift_vertical(self._to_k(q), q.shape[:-1])

    def frame(self, q):
        return np.concatenate([self.horizontal(q), self.vertical(q)], axis=-2)

    def _dw(self, qinv, c, zp, Y):
        """D w_a[Y] for K-directions Y (element shape (B, P, d+1)) -> (B, P, d, d+1)."""
        A = self.alg
        Dc = A.mul(A.conj(A.take(Y, (Ellipsis, slice(1, None)))), A.expand(qinv, -1)) - A.mul(
            c, A.expand(A.mul(A.conj(A.take(Y, (Ellipsis, 0))), qinv), -1)
        )
        return -A.mul(A.expand(Dc, -1), A.expand(zp, -2)) - A.mul(A.expand(c, -1), A.expand(Y, -2))

    def frame_derivative(self, q, Y):
        """Directional derivatives of every frame field along every vector of Y.

        q: (B, N); Y: (B, P, N).  Returns (B, P, n, N) where entry [b, p, f]
        is D F_f(q)[Y_p].
        """
        A = self.alg
        B, P = Y.shape[:2]
        z = A.expand(self._to_k(q), 1)  # element shape (B, 1, d+1)
        Yk = self._to_k(Y)
        qinv, c, zp = self._coefficients(z)
        DX = self._lift_horizontal(self._dw(qinv, c, zp, Yk), (B, P))
        if self.m == 1:
            return DX
        return np.concatenate([DX, self._lift_vertical(Yk, (B, P))], axis=2)

    def geodesic_field(self, q, u, v):
        """Hamilton vector field (q', u', v') without forming all brackets.

        With Q = sum u_i X_i and P = Q + sum v_j Z_j, the momentum equations
        read u_i' = <[Q, X_i], P> and v_j' = <[Q, Z_j], P>, and
        [Q, F] = DF[Q] - DQ_u[F] where u is frozen in DQ_u.  Writing
        Q = sum_a U_a w_a with K-valued U_a = sum_s u_(a,s) e_s, this needs
        derivatives along Q and along the n frame fields only.
        """
        A = self.alg
        B = q.shape[0]
        z = self._to_k(q)
        qinv, c, zp = self._coefficients(z)
        w = -A.mul(A.expand(c, -1), A.expand(zp, -2))
        idx = np.arange(self.d)
        if self.m == 4:
            w[0][..., idx, idx + 1] += 1.0
        else:
            w[..., idx, idx + 1] += 1.0
        X = self._lift_horizontal(w, (B,))
        F = X if self.m == 1 else np.concatenate([X, self._lift_vertical(z, (B,))], axis=1)
        Q = np.einsum("bi,bid->bd", u, X)
        P = Q if self.m == 1 else Q + np.einsum("bj,bjd->bd", v, F[:, self.k :])
        # derivatives of all fields along Q
        z1, qinv1, c1, zp1 = (A.expand(t, 1) for t in (z, qinv, c, zp))
        Qk = self._to_k(Q[:, None, :])
        along_Q = self._lift_horizontal(self._dw(qinv1, c1, zp1, Qk), (B, 1))[:, 0]
        if self.m > 1:
            along_Q = np.concatenate([along_Q, self._lift_vertical(Qk, (B, 1))[:, 0]], axis=1)
        # derivative of Q (u frozen) along every field
        Dw = self._dw(qinv1, c1, zp1, self._to_k(F))  # element shape (B, n, d, d+1)
        U = A.from_real(u.reshape(B, 1, self.d, self.m))  # element shape (B, 1, d)
        DQ = A.sum(A.mul(A.expand(U, -1), Dw), axis=2)  # (B, n, d+1)
        DQ = self._to_real(DQ, (B, self.n))
        vel = np.einsum("bfd,bd->bf", along_Q - DQ, P)
        return Q, vel[:, : self.k], vel[:, self.k :]

    def brackets(self, q):
        F = self.frame(q)  # (B, n, N)
        D = self.frame_derivative(q, F)  # D[b, f, g] = D F_g [F_f]
        br = D - np.swapaxes(D, 1, 2)  # [F_f, F_g]
        coef = np.einsum("bfgd,bhd->bfgh", br, F)
        return split_structure(coef, self.k)


def _sphere_in_chart(q, tol=1e-6):
    q = np.atleast_2d(q)
    # the frame is singular only at the point -e_0
    return (np.abs(np.linalg.norm(q, axis=1) - 1.0) < tol) & (np.linalg.norm(q - _minus_e0(q.shape[1]), axis=1) > 1e-6)


def _minus_e0(N):
    e = np.zeros(N)
    e[0] = -1.0
    return e


def _const_density(q, value=1.0):
    return np.full(np.atleast_2d(q).shape[0], value)


def _zero_log_derivative(q, k):
    return np.zeros((np.atleast_2d(q).shape[0], k))


def _pi_cut(lam: FrameCovector):
    return np.full(len(lam), np.pi)


def _inf_cut(lam: FrameCovector):
    return np.full(len(lam), np.inf)


def hopf_sphere(d: int, m: int) -> Model:
    """Round sphere S^d (m=1), complex (m=2) or quaternionic (m=4) Hopf sphere."""
    if d < 1:
        raise ValueError("d must be >= 1")
    geo = _HopfSphere(d, m)
    name = {1: "round-sphere", 2: "chf", 4: "qhf"}[m]
    return Model(
        id=f"{name}({d})",
        n=geo.n,
        k=geo.k,
        dim=geo.N,
        ambient=True,
        horizontal_frame=geo.horizontal,
        vertical_frame=geo.vertical,
        bracket_oracle=geo.brackets,
        volume_density=_const_density,
        in_chart=_sphere_in_chart,
        cut_hook=_pi_cut,
        volume_log_derivative=partial(_zero_log_derivative, k=geo.k),
        geodesic_field=geo.geodesic_field,
        kind="sphere",
        params={"d": d, "m": m},
    )


def round_sphere(d: int = 2) -> Model:
    return hopf_sphere(d, 1)


def chf(d: int = 1) -> Model:
    return hopf_sphere(d, 2)


def qhf(d: int = 1) -> Model:
    return hopf_sphere(d, 4)


# ---------------------------------------------------------- step-2 Carnot

def carnot_model(spec) -> Model:
    """Left-invariant frame of a step-2 Carnot group in exponential coordinates.

    X_i = d/dx_i + 1/2 sum_j x_j c_ji^l d/dz_l and Z_l = d/dz_l, so that
    [X_i, X_j] = c_ij^l Z_l and every other bracket vanishes.
    """
    k, m2 = spec.k, spec.m
    n = k + m2
    c = np.asarray(spec.c, dtype=float)

    def horizontal(q):
        q = np.atleast_2d(q)
        X = np.zeros((q.shape[0], k, n))
        X[:, np.arange(k), np.arange(k)] = 1.0
        X[:, :, k:] = 0.5 * np.einsum("bj,jil->bil", q[:, :k], c)
        return X

    def vertical(q):
        q = np.atleast_2d(q)
        Z = np.zeros((q.shape[0], m2, n))
        Z[:, np.arange(m2), k + np.arange(m2)] = 1.0
        return Z

    def brackets(q):
        B = np.atleast_2d(q).shape[0]
        return Brackets(
            b=np.zeros((B, k, k, k)),
            c=np.broadcast_to(c, (B, k, k, m2)).copy(),
            a=np.zeros((B, k, m2, k)),
            d=np.zeros((B, k, m2, m2)),
            e=np.zeros((B, m2, m2, m2)),
        )

    return Model(
        id=spec.name,
        n=n,
        k=k,
        dim=n,
        ambient=False,
        horizontal_frame=horizontal,
        vertical_frame=vertical,
        bracket_oracle=brackets,
        volume_density=_const_density,
        in_chart=lambda q: np.all(np.isfinite(np.atleast_2d(q)), axis=1),
        cut_hook=_inf_cut,
        volume_log_derivative=partial(_zero_log_derivative, k=k),
        kind="carnot",
        params={"spec": spec},
    )


def heisenberg(d: int = 1) -> Model:
    from .carnot import CarnotSpec

    return carnot_model(CarnotSpec.heisenberg(d))


# ---------------------------------------------------------------- Martinet

def martinet() -> Model:
    """X_1 = d/dx, X_2 = d/dy + x^2/2 d/dz, with d/dz completing the frame."""

    def horizontal(q):
        q = np.atleast_2d(q)
        X = np.zeros((q.shape[0], 2, 3))
        X[:, 0, 0] = 1.0
        X[:, 1, 1] = 1.0
        X[:, 1, 2] = 0.5 * q[:, 0] ** 2
        return X

    def vertical(q):
        q = np.atleast_2d(q)
        Z = np.zeros((q.shape[0], 1, 3))
        Z[:, 0, 2] = 1.0
        return Z

    def brackets(q):
        q = np.atleast_2d(q)
        B = q.shape[0]
        c = np.zeros((B, 2, 2, 1))
        c[:, 0, 1, 0] = q[:, 0]
        c[:, 1, 0, 0] = -q[:, 0]
        return Brackets(
            b=np.zeros((B, 2, 2, 2)), c=c, a=np.zeros((B, 2, 1, 2)),
            d=np.zeros((B, 2, 1, 1)), e=np.zeros((B, 1, 1, 1)),
        )

    return Model(
        id="martinet",
        n=3,
        k=2,
        dim=3,
        ambient=False,
        horizontal_frame=horizontal,
        vertical_frame=vertical,
        bracket_oracle=brackets,
        volume_density=_const_density,
        in_chart=lambda q: np.all(np.isfinite(np.atleast_2d(q)), axis=1),
        cut_hook=None,
        volume_log_derivative=partial(_zero_log_derivative, k=2),
        kind="martinet",
    )


# ------------------------------------------------------------ spherical band

def spherical_band(epsilon: float = 0.1, volume: str = "round") -> Model:
    """Meridian line field d/dtheta on the round 2-sphere in (theta, phi) coordinates.

    The vertical field is the unit parallel direction (1/sin theta) d/dphi.
    ``volume`` selects the area form: ``"round"`` (sin theta dtheta dphi) or
    ``"flat"`` (dtheta dphi).  The distribution has rank one and is not
    bracket generating; the flow machinery applies unchanged.
    """
    if volume not in ("round", "flat"):
        raise ValueError("volume must be 'round' or 'flat'")

    def horizontal(q):
        q = np.atleast_2d(q)
        X = np.zeros((q.shape[0], 1, 2))
        X[:, 0, 0] = 1.0
        return X

    def vertical(q):
        q = np.atleast_2d(q)
        Z = np.zeros((q.shape[0], 1, 2))
        Z[:, 0, 1] = 1.0 / np.sin(q[:, 0])
        return Z

    def brackets(q):
        q = np.atleast_2d(q)
        B = q.shape[0]
        d = np.zeros((B, 1, 1, 1))
        d[:, 0, 0, 0] = -1.0 / np.tan(q[:, 0])
        return Brackets(
            b=np.zeros((B, 1, 1, 1)), c=np.zeros((B, 1, 1, 1)), a=np.zeros((B, 1, 1, 1)),
            d=d, e=np.zeros((B, 1, 1, 1)),
        )

    def density(q):
        q = np.atleast_2d(q)
        return np.sin(q[:, 0]) if volume == "round" else np.ones(q.shape[0])

    def log_derivative(q):
        # X(log(omega / Riemannian area)); the Riemannian area density is sin theta
        q = np.atleast_2d(q)
        if volume == "round":
            return np.zeros((q.shape[0], 1))
        return (-1.0 / np.tan(q[:, 0]))[:, None]

    return Model(
        id=f"spherical-band({epsilon:g})",
        n=2,
        k=1,
        dim=2,
        ambient=False,
        horizontal_frame=horizontal,
        vertical_frame=vertical,
        bracket_oracle=brackets,
        volume_density=density,
        in_chart=lambda q: (np.atleast_2d(q)[:, 0] > 1e-9) & (np.atleast_2d(q)[:, 0] < np.pi - 1e-9),
        cut_hook=_pi_cut,
        volume_log_derivative=log_derivative,
        kind="band",
        params={"epsilon": epsilon, "volume": volume},
    )


# ----------------------------------------------------------------- registry

MODEL_IDS = ("round-sphere", "chf", "qhf", "heisenberg", "carnot-step2", "martinet", "spherical-band")


def make_model(model_id: str, **params) -> Model:
    """Build a registered model from its identifier and parameters."""
    if model_id == "round-sphere":
        return round_sphere(int(params.get("d", 2)))
    if model_id == "chf":
        return chf(int(params.get("d", 1)))
    if model_id == "qhf":
        return qhf(int(params.get("d", 1)))
    if model_id == "heisenberg":
        return heisenberg(int(params.get("d", 1)))
    if model_id == "carnot-step2":
        from .carnot import CarnotSpec

        spec = params.get("spec")
        if spec is None:
            spec = CarnotSpec.from_file(params["carnot_file"])
        return carnot_model(spec)
    if model_id == "martinet":
        return martinet()
    if model_id == "spherical-band":
        return spherical_band(float(params.get("epsilon", 0.1)), str(params.get("volume", "round")))
    raise KeyError(f"unknown model {model_id!r}; known: {', '.join(MODEL_IDS)}")
