"""Step-2 Carnot groups in exponential coordinates: group law, reduced geodesics,
horizontal diameter and the diameter-based eigenvalue/isoperimetric bounds."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


class CarnotSpecError(ValueError):
    """Malformed structure constants."""


@dataclass(frozen=True)
class CarnotSpec:
    """Structure constants c[i, j, l] = c_ij^l of a step-2 stratified algebra.

    First layer of dimension k, second layer of dimension m; [X_i, X_j] = c_ij^l Z_l.
    """

    k: int
    m: int
    c: np.ndarray
    name: str = "carnot-step2"

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        if c.shape != (self.k, self.k, self.m):
            raise CarnotSpecError(f"structure constants must have shape {(self.k, self.k, self.m)}, got {c.shape}")
        if not np.allclose(c, -np.swapaxes(c, 0, 1), atol=1e-14):
            raise CarnotSpecError("structure constants must be skew-symmetric in (i, j)")
        object.__setattr__(self, "c", c)

    @property
    def n(self) -> int:
        return self.k + self.m

    def is_bracket_generating(self) -> bool:
        """Whether the brackets of the first layer span the second layer."""
        if self.m == 0:
            return True
        iu = np.triu_indices(self.k, 1)
        cols = self.c[iu[0], iu[1], :]  # one row per pair i < j
        return bool(cols.size and np.linalg.matrix_rank(cols) == self.m)

    @classmethod
    def heisenberg(cls, d: int = 1) -> "CarnotSpec":
        k = 2 * d
        c = np.zeros((k, k, 1))
        c[np.arange(d), d + np.arange(d), 0] = 1.0
        c[d + np.arange(d), np.arange(d), 0] = -1.0
        return cls(k, 1, c, name=f"heisenberg({d})")

    @classmethod
    def abelian(cls, k: int, m: int = 0) -> "CarnotSpec":
        return cls(k, m, np.zeros((k, k, m)), name=f"abelian({k},{m})")

    @classmethod
    def random(cls, k: int, m: int, rng: np.random.Generator) -> "CarnotSpec":
        a = rng.standard_normal((k, k, m))
        return cls(k, m, a - np.swapaxes(a, 0, 1), name=f"carnot-step2(random {k},{m})")

    @classmethod
    def from_text(cls, text: str, name: str = "carnot-step2") -> "CarnotSpec":
        """Parse the ``k m2`` header followed by 1-based ``i j l value`` lines.

        Blank lines and ``#`` comments are ignored; the entry (j, i, l) is
        filled in with the opposite sign.  Conflicting duplicates are errors.
        """
        lines = [(no, ln.split("#", 1)[0].strip()) for no, ln in enumerate(text.splitlines(), 1)]
        lines = [(no, ln) for no, ln in lines if ln]
        if not lines:
            raise CarnotSpecError("empty structure-constant file")
        no, head = lines[0]
        try:
            k, m = (int(t) for t in head.split())
        except ValueError as exc:
            raise CarnotSpecError(f"line {no}: header must be 'k m2'") from exc
        if k < 1 or m < 0:
            raise CarnotSpecError(f"line {no}: need k >= 1 and m2 >= 0")
        c = np.zeros((k, k, m))
        seen = np.zeros((k, k, m), dtype=bool)
        for no, ln in lines[1:]:
            parts = ln.split()
            if len(parts) != 4:
                raise CarnotSpecError(f"line {no}: expected 'i j l value'")
            try:
                i, j, l = (int(t) - 1 for t in parts[:3])
                val = float(parts[3])
            except ValueError as exc:
                raise CarnotSpecError(f"line {no}: cannot parse {ln!r}") from exc
            if not (0 <= i < k and 0 <= j < k and 0 <= l < m):
                raise CarnotSpecError(f"line {no}: index out of range")
            if i == j and val != 0.0:
                raise CarnotSpecError(f"line {no}: diagonal constants must vanish")
            for (a, b, s) in ((i, j, 1.0), (j, i, -1.0)):
                if seen[a, b, l] and c[a, b, l] != s * val:
                    raise CarnotSpecError(f"line {no}: conflicts with an earlier entry")
                c[a, b, l] = s * val
                seen[a, b, l] = True
        return cls(k, m, c, name=name)

    @classmethod
    def from_file(cls, path) -> "CarnotSpec":
        path = Path(path)
        return cls.from_text(path.read_text(), name=f"carnot-step2({path.stem})")

    def to_text(self) -> str:
        out = [f"{self.k} {self.m}"]
        for i in range(self.k):
            for j in range(i + 1, self.k):
                for l in range(self.m):
                    if self.c[i, j, l] != 0.0:
                        out.append(f"{i + 1} {j + 1} {l + 1} {float(self.c[i, j, l])!r}")
        return "\n".join(out) + "\n"


def bch_correction(spec: CarnotSpec, x: np.ndarray, xp: np.ndarray) -> np.ndarray:
    """f(x, x')_l = 1/2 sum_ij x_i c_ij^l x'_j."""
    return 0.5 * np.einsum("...i,ijl,...j->...l", x, spec.c, xp)


def group_multiply(spec: CarnotSpec, p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Group product (x, z) * (x', z') = (x + x', z + z' + f(x, x')) in exponential coordinates."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape[-1] != spec.n or q.shape[-1] != spec.n:
        raise ValueError(f"points must have {spec.n} coordinates")
    x, z = p[..., : spec.k], p[..., spec.k :]
    xp, zp = q[..., : spec.k], q[..., spec.k :]
    return np.concatenate([x + xp, z + zp + bch_correction(spec, x, xp)], axis=-1)


def group_inverse(spec: CarnotSpec, p: np.ndarray) -> np.ndarray:
    return -np.asarray(p, dtype=float)


def reduced_geodesic(spec: CarnotSpec, q: np.ndarray, u: np.ndarray, t) -> np.ndarray:
    """Point q * (u t, 0) of the left-translated line through q with unit direction u.

    ``t`` may be a scalar or an array; the result broadcasts q, u against t[..., None].
    """
    q = np.asarray(q, dtype=float)
    u = np.asarray(u, dtype=float)
    t = np.asarray(t, dtype=float)
    x = u * t[..., None]
    step = np.concatenate([x, np.zeros(x.shape[:-1] + (spec.m,))], axis=-1)
    return group_multiply(spec, np.broadcast_to(q, step.shape), step)


# ------------------------------------------------------- chords and diameter

def line_chord(
    spec: CarnotSpec, defining, q: np.ndarray, u: np.ndarray, t_max: float,
    n_grid: int = 64, n_bisect: int = 40,
) -> tuple[np.ndarray, np.ndarray]:
    """Forward and backward exit parameters of t -> q * (u t, 0) from {defining >= 0}.

    The line is scanned on ``n_grid`` steps of [0, t_max] in each direction and
    the first sign change is refined by bisection.  Points whose line does not
    leave the domain within ``t_max`` get ``inf``.  Returns (ell_fwd, ell_bwd).
    """
    q = np.atleast_2d(np.asarray(q, dtype=float))
    u = np.atleast_2d(np.asarray(u, dtype=float))
    B = q.shape[0]
    ts = np.linspace(0.0, t_max, n_grid + 1)[1:]
    out = []
    for sign in (1.0, -1.0):
        pts = reduced_geodesic(spec, q[:, None, :], sign * u[:, None, :], ts[None, :])
        vals = defining(pts.reshape(-1, spec.n)).reshape(B, n_grid)
        outside = vals < 0
        found = outside.any(axis=1)
        first = np.argmax(outside, axis=1)
        hi = ts[first]
        lo = np.where(first > 0, ts[np.maximum(first - 1, 0)], 0.0)
        for _ in range(n_bisect):
            mid = 0.5 * (lo + hi)
            inside = defining(reduced_geodesic(spec, q, sign * u, mid)) >= 0
            lo = np.where(inside, mid, lo)
            hi = np.where(inside, hi, mid)
        out.append(np.where(found, 0.5 * (lo + hi), np.inf))
    return out[0], out[1]


def _sample_inside(domain, rng: np.random.Generator, n: int) -> np.ndarray:
    got, have = [], 0
    while have < n:
        p = domain.sample_reference(rng, max(2 * n, 64))
        p = p[domain.defining(p) >= 0]
        got.append(p)
        have += len(p)
    return np.concatenate(got)[:n]


@dataclass
class DiameterEstimate:
    """Horizontal diameter bracket from sampled chords plus a local refinement.

    ``lower`` is the longest chord actually found (a genuine chord, hence a
    lower bound for diam_H); ``upper`` adds the refinement margin, the larger of
    the gain achieved by the refinement and the final pattern-search step.
    """

    lower: float
    upper: float
    sampled: float
    n_samples: int
    iterations: int
    argmax_q: np.ndarray
    argmax_u: np.ndarray
    capped: int = 0

    def to_dict(self) -> dict:
        return {
            "diam_H_lower": self.lower,
            "diam_H_upper": self.upper,
            "diam_H_sampled": self.sampled,
            "n_samples": self.n_samples,
            "refinement_iterations": self.iterations,
            "argmax_q": self.argmax_q.tolist(),
            "argmax_u": self.argmax_u.tolist(),
            "capped": self.capped,
        }


def horizontal_diameter(
    spec: CarnotSpec,
    domain,
    n_samples: int = 4000,
    rng: np.random.Generator | None = None,
    iterations: int = 200,
    t_max: float | None = None,
) -> DiameterEstimate:
    """Longest chord of the domain along left-translated first-layer lines.

    Monte-Carlo over basepoints q (uniform in the domain) and unit directions
    u, followed by a coordinate-wise pattern search in (q, u) started from the
    best sample.
    """
    rng = np.random.default_rng() if rng is None else rng
    scale = float(domain.length_scale)
    t_max = 1.05 * scale if t_max is None else float(t_max)

    def chords(q, u):
        f, b = line_chord(spec, domain.defining, q, u, t_max)
        return f + b

    q = _sample_inside(domain, rng, n_samples)
    u = rng.standard_normal((n_samples, spec.k))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    L = chords(q, u)
    capped = int(np.sum(~np.isfinite(L)))
    if capped:
        i = int(np.argmax(~np.isfinite(L)))
        return DiameterEstimate(np.inf, np.inf, np.inf, n_samples, 0, q[i], u[i], capped)
    i = int(np.argmax(L))
    best_q, best_u, best = q[i].copy(), u[i].copy(), float(L[i])
    sampled = best

    # pattern search over (q, u): +-step along every coordinate plus random
    # directions; the step grows after a success and halves after a failure
    dim = spec.n + spec.k
    step0 = 0.05 * scale
    step = step0
    eye = np.eye(dim)
    used = 0
    for used in range(1, iterations + 1):
        rand = rng.standard_normal((2 * dim, dim))
        rand /= np.linalg.norm(rand, axis=1, keepdims=True)
        trial = np.concatenate([best_q, best_u])[None, :] + step * np.concatenate([eye, -eye, rand])
        tq, tu = trial[:, : spec.n], trial[:, spec.n :]
        tu = tu / np.linalg.norm(tu, axis=1, keepdims=True)
        ok = domain.defining(tq) >= 0
        Lt = np.full(len(tq), -np.inf)
        if ok.any():
            Lt[ok] = chords(tq[ok], tu[ok])
        Lt[~np.isfinite(Lt)] = -np.inf
        j = int(np.argmax(Lt))
        if Lt[j] > best:
            best_q, best_u, best = tq[j], tu[j], float(Lt[j])
            step = min(2.0 * step, step0)
        else:
            step *= 0.5
        if step < 1e-10 * scale:
            break
    margin = max(best - sampled, step, 1e-10 * scale)
    return DiameterEstimate(best, best + margin, sampled, n_samples, used, best_q, best_u)


@dataclass
class CarnotBounds:
    """Diameter-based lower bounds for lambda_1 and for sigma(dM)/omega(M).

    Both bounds use the upper diameter bracket, so they are valid whenever the
    bracket is; ``perimeter_ratio`` is evaluated independently.
    """

    k: int
    diameter: DiameterEstimate
    lambda1_bound: float
    isoperimetric_bound: float
    perimeter_ratio: float
    perimeter_ratio_stderr: float

    @property
    def isoperimetric_holds(self) -> bool:
        return bool(self.perimeter_ratio + 3 * self.perimeter_ratio_stderr >= self.isoperimetric_bound)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            **self.diameter.to_dict(),
            "lambda1_bound": self.lambda1_bound,
            "isoperimetric_bound": self.isoperimetric_bound,
            "perimeter_ratio": self.perimeter_ratio,
            "perimeter_ratio_stderr": self.perimeter_ratio_stderr,
            "isoperimetric_holds": self.isoperimetric_holds,
            "direction": "bounds use the upper diameter bracket (conservative)",
        }


def carnot_bounds(
    spec: CarnotSpec,
    domain,
    rng: np.random.Generator | None = None,
    n_samples: int = 4000,
    diameter: DiameterEstimate | None = None,
) -> CarnotBounds:
    """k pi^2 / diam_H^2 and 2 pi |S^{k-1}| / (|S^k| diam_H), with sigma(dM)/omega(M) for comparison."""
    from .geometries import carnot_model
    from .inequalities import isoperimetric_constant
    from .santalo import domain_perimeter, domain_volume

    rng = np.random.default_rng() if rng is None else rng
    diam = horizontal_diameter(spec, domain, n_samples, rng) if diameter is None else diameter
    D = diam.upper
    model = carnot_model(spec)
    vol = domain_volume(model, domain, rng)
    per = domain_perimeter(model, domain, rng)
    ratio = per.value / vol.value
    ratio_se = ratio * float(np.hypot(per.stderr / per.value, vol.stderr / vol.value))
    return CarnotBounds(
        k=spec.k,
        diameter=diam,
        lambda1_bound=spec.k * np.pi**2 / D**2,
        isoperimetric_bound=isoperimetric_constant(spec.k) / D,
        perimeter_ratio=ratio,
        perimeter_ratio_stderr=ratio_se,
    )
