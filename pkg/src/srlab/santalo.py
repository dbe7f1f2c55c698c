"""Monte-Carlo evaluation of both sides of the reduced Santalo formula and visibility angles.

For a function F on reduced unit covectors the two sides are

    lhs = int_{visible reduced covectors} F  d(eta x omega)
    rhs = int_{dM} int_{inward half-fiber} ( int_0^{l(lam)} F(phi_t lam) dt ) <lam, n_q> d eta  d sigma

The left side samples q ~ omega / omega(M) and u uniform on S^{k-1}, and keeps
the sample when the backward geodesic reaches the boundary before t_max.  The
right side samples q ~ sigma / sigma(dM) and u with density proportional to
<u, n_q> on the inward half-fiber (total weight |S^k| / (2 pi)), and integrates
F along the forward geodesic as an extra component of the ODE state.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .domains import Domain, perimeter_mc, sample_boundary, sample_interior, volume_mc
from .flow import exit_length
from .model import FrameCovector, Model, horizontal_gradient, horizontal_normal
from .spheres import sphere_area, uniform_sphere

ODE_ERROR_FACTOR = 100.0

CovectorFunction = Callable[[np.ndarray, np.ndarray], np.ndarray]


class CharacteristicWarning(UserWarning):
    """Too many boundary samples were discarded as characteristic."""


@dataclass(frozen=True)
class Measure:
    """A total mass with its standard error and where it came from."""

    value: float
    stderr: float
    source: str


def domain_volume(model: Model, domain: Domain, rng: np.random.Generator, n: int = 200_000) -> Measure:
    """omega(M): deterministic value when the domain has one, Monte-Carlo otherwise."""
    if domain.volume is not None:
        return Measure(float(domain.volume), 0.0, "quadrature")
    v, s = volume_mc(model, domain, rng, n)
    return Measure(v, s, "monte-carlo")


def domain_perimeter(model: Model, domain: Domain, rng: np.random.Generator, n: int = 200_000) -> Measure:
    """sigma(dM): deterministic value when the domain has one, Monte-Carlo otherwise."""
    if domain.perimeter is not None:
        return Measure(float(domain.perimeter), 0.0, "quadrature")
    v, s = perimeter_mc(model, domain, rng, n)
    return Measure(v, s, "monte-carlo")


# ------------------------------------------------------- covector functions

def constant_one(q: np.ndarray, u: np.ndarray) -> np.ndarray:
    return np.ones(len(q))


def squared_derivative(model: Model, gradient: Callable[[np.ndarray], np.ndarray]) -> CovectorFunction:
    """F(lam) = <lam, grad_H f>^2 for f with the given chart/ambient gradient."""

    def F(q, u):
        gH = horizontal_gradient(model, q, gradient(q))
        return np.einsum("bi,bi->b", u, gH) ** 2

    return F


def half_fiber_indicator(e: np.ndarray) -> CovectorFunction:
    """F(lam) = 1 if <u, e> > 0 else 0 for a fixed frame direction e."""
    e = np.asarray(e, dtype=float)

    def F(q, u):
        return (u @ e > 0.0).astype(float)

    return F


def _stack(Fs: Sequence[CovectorFunction]):
    def integrand(q, u, v):
        return np.column_stack([F(q, u) for F in Fs])

    return integrand


def _mean_stderr(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = values.shape[0]
    mean = values.mean(axis=0)
    std = values.std(axis=0, ddof=1) if n > 1 else np.zeros_like(mean)
    return mean, std / np.sqrt(n)


def _scaled(mean, stderr, measure: Measure, factor: float):
    """(factor * measure * mean, stderr) with the measure's error propagated."""
    value = factor * measure.value * mean
    rel = np.hypot(stderr / np.where(mean != 0, np.abs(mean), 1.0), measure.stderr / measure.value)
    err = np.where(mean != 0, np.abs(value) * rel, factor * measure.value * stderr)
    return value, err


# ------------------------------------------------------------------ sides

@dataclass
class SideEstimate:
    """One side of the formula for several functions F (arrays indexed like the F list)."""

    value: np.ndarray
    stderr: np.ndarray
    n: int
    capped_fraction: float
    measure: Measure
    extra: dict = field(default_factory=dict)


def estimate_lhs(
    model: Model,
    domain: Domain,
    Fs: Sequence[CovectorFunction],
    n: int,
    rng: np.random.Generator,
    t_max: Optional[float] = None,
    tol: float = 1e-8,
    volume: Optional[Measure] = None,
) -> SideEstimate:
    """omega(M) |S^{k-1}| mean(F * [l(-lam) < t_max]) over q ~ omega, u uniform."""
    volume = domain_volume(model, domain, rng) if volume is None else volume
    q = sample_interior(model, domain, rng, n)
    u = uniform_sphere(rng, n, model.k)
    lam = FrameCovector.reduced(q, u, model.m)
    back = exit_length(model, domain, lam.reversed(), t_max=t_max, tol=tol)
    visible = ~back.capped
    vals = np.column_stack([F(q, u) for F in Fs]) * visible[:, None]
    mean, err = _mean_stderr(vals)
    value, stderr = _scaled(mean, err, volume, sphere_area(model.k - 1))
    return SideEstimate(
        value, stderr, n, float(np.mean(back.capped)), volume,
        extra={"ell_backward_max": float(np.max(back.ell_fwd[visible], initial=0.0)),
               "ell_tilde_backward_max": float(np.max(back.ell_tilde[visible], initial=0.0))},
    )


def boundary_covectors(
    model: Model,
    domain: Domain,
    n: int,
    rng: np.random.Generator,
    eps_char: float = 1e-8,
) -> tuple[FrameCovector, float]:
    """Boundary points q ~ sigma and inward momenta with density proportional to <u, n_q>.

    Returns the covectors and the fraction of boundary proposals discarded as
    characteristic; a fraction above 10% raises :class:`CharacteristicWarning`.
    """
    from .spheres import inward_weighted_directions

    q, char_fraction = sample_boundary(model, domain, rng, n, eps_char=eps_char)
    if char_fraction > 0.1:
        warnings.warn(f"{char_fraction:.1%} of boundary samples were characteristic", CharacteristicWarning)
    normal = horizontal_normal(model, domain, q, eps_char=eps_char, boundary_tol=1e-8)
    u = inward_weighted_directions(rng, normal.u)
    return FrameCovector.reduced(q, u, model.m), char_fraction


def estimate_rhs(
    model: Model,
    domain: Domain,
    Fs: Sequence[CovectorFunction],
    n: int,
    rng: np.random.Generator,
    t_max: Optional[float] = None,
    tol: float = 1e-8,
    perimeter: Optional[Measure] = None,
) -> SideEstimate:
    """sigma(dM) (|S^k| / 2 pi) mean(int_0^l F dt) over inward boundary covectors."""
    perimeter = domain_perimeter(model, domain, rng) if perimeter is None else perimeter
    lam, char_fraction = boundary_covectors(model, domain, n, rng)
    ex = exit_length(model, domain, lam, t_max=t_max, tol=tol, integrand=_stack(Fs))
    vals = ex.integral.reshape(n, len(Fs))
    mean, err = _mean_stderr(vals)
    value, stderr = _scaled(mean, err, perimeter, sphere_area(model.k) / (2.0 * np.pi))
    finite = ~ex.capped
    return SideEstimate(
        value, stderr, n, float(np.mean(ex.capped)), perimeter,
        extra={
            "characteristic_fraction": char_fraction,
            "ell_max": float(np.max(ex.ell_fwd[finite], initial=0.0)) if np.all(finite) else float("inf"),
            "ell_tilde_max": float(np.max(ex.ell_tilde, initial=0.0)),
            "ell_min": float(np.min(ex.ell_fwd, initial=np.inf)),
            "grazing": int(np.sum(ex.grazing)),
        },
    )


@dataclass
class SantaloEstimate:
    """Both sides of the formula for one function F.

    ``numerical_error`` is the error budget of the ODE integration (exit times
    and path integrals are accurate to a small multiple of the integration
    tolerance); it enters the combined standard error in quadrature so that
    zero-variance integrands are compared at the integrator's accuracy.
    """

    name: str
    lhs: float
    lhs_stderr: float
    rhs: float
    rhs_stderr: float
    N_interior: int
    N_boundary: int
    capped_fraction: float
    numerical_error: float = 0.0
    expected: Optional[float] = None

    @property
    def combined_stderr(self) -> float:
        return float(np.sqrt(self.lhs_stderr**2 + self.rhs_stderr**2 + self.numerical_error**2))

    @property
    def discrepancy(self) -> float:
        return abs(self.lhs - self.rhs)

    def balanced(self, n_sigma: float = 3.0, floor: float = 0.0) -> bool:
        """|lhs - rhs| <= n_sigma * combined stderr (+ an absolute floor)."""
        return self.discrepancy <= n_sigma * self.combined_stderr + floor

    def to_dict(self) -> dict:
        return {
            "function": self.name,
            "lhs": self.lhs,
            "lhs_stderr": self.lhs_stderr,
            "rhs": self.rhs,
            "rhs_stderr": self.rhs_stderr,
            "numerical_error": self.numerical_error,
            "combined_stderr": self.combined_stderr,
            "n_interior": self.N_interior,
            "n_boundary": self.N_boundary,
            "capped_fraction": self.capped_fraction,
            "expected": self.expected,
        }


def santalo_balance(
    model: Model,
    domain: Domain,
    functions: dict,
    n_interior: int,
    n_boundary: int,
    rng: np.random.Generator,
    t_max: Optional[float] = None,
    tol: float = 1e-8,
) -> list[SantaloEstimate]:
    """Estimate both sides for every named function, sharing all trajectories.

    The numerical error budget of each estimate is ``ODE_ERROR_FACTOR * tol``
    times the larger side.
    """
    names = list(functions)
    Fs = [functions[k] for k in names]
    lhs = estimate_lhs(model, domain, Fs, n_interior, rng, t_max=t_max, tol=tol)
    rhs = estimate_rhs(model, domain, Fs, n_boundary, rng, t_max=t_max, tol=tol)
    capped = max(lhs.capped_fraction, rhs.capped_fraction)
    return [
        SantaloEstimate(
            name, float(lhs.value[i]), float(lhs.stderr[i]), float(rhs.value[i]), float(rhs.stderr[i]),
            n_interior, n_boundary, capped,
            numerical_error=ODE_ERROR_FACTOR * tol * max(abs(float(lhs.value[i])), abs(float(rhs.value[i]))),
        )
        for i, name in enumerate(names)
    ]


# -------------------------------------------------------------- visibility

@dataclass
class VisibilityReport:
    """Visibility angles at sampled points.

    ``theta`` counts capped backward runs as invisible (a lower estimate) and
    ``theta_upper`` counts them as visible; ``theta_tilde`` (hook-equipped
    models only) additionally requires l(-lam) <= cut length, up to a slack of
    1e-6 length scales that absorbs the exit-time error.
    """

    points: np.ndarray
    theta: np.ndarray
    theta_upper: np.ndarray
    theta_tilde: Optional[np.ndarray]
    n_fiber: int
    capped_fraction: float
    ell_max: float
    ell_tilde_max: float

    @property
    def theta_min(self) -> float:
        return float(np.min(self.theta))

    @property
    def theta_upper_min(self) -> float:
        return float(np.min(self.theta_upper))

    @property
    def theta_tilde_min(self) -> Optional[float]:
        return None if self.theta_tilde is None else float(np.min(self.theta_tilde))

    @property
    def stderr(self) -> float:
        """Binomial standard error of the least sampled angle."""
        t = self.theta_min
        return float(np.sqrt(max(t * (1 - t), 0.0) / self.n_fiber))

    def to_dict(self) -> dict:
        return {
            "n_points": int(len(self.points)),
            "n_fiber": self.n_fiber,
            "theta_vis": self.theta_min,
            "theta_vis_cap_as_visible": self.theta_upper_min,
            "theta_vis_optimal": self.theta_tilde_min,
            "theta_vis_stderr": self.stderr,
            "capped_fraction": self.capped_fraction,
        }


def visibility_angles(
    model: Model,
    domain: Domain,
    points: np.ndarray,
    n_fiber: int,
    rng: np.random.Generator,
    t_max: Optional[float] = None,
    tol: float = 1e-8,
) -> VisibilityReport:
    """eta-fraction of reduced unit covectors at each point whose backward geodesic exits."""
    points = np.atleast_2d(points)
    P = len(points)
    q = np.repeat(points, n_fiber, axis=0)
    u = uniform_sphere(rng, P * n_fiber, model.k)
    lam = FrameCovector.reduced(q, -u, model.m)  # backward runs of (q, u)
    ex = exit_length(model, domain, lam, t_max=t_max, tol=tol)
    capped = ex.capped.reshape(P, n_fiber)
    theta = np.mean(~capped, axis=1)
    theta_tilde = None
    if ex.cut_known:
        slack = 1e-6 * float(domain.length_scale)
        optimal = (~ex.capped) & (ex.ell_fwd <= ex.ell_tilde + slack)
        theta_tilde = np.mean(optimal.reshape(P, n_fiber), axis=1)
    finite = ex.ell_fwd[~ex.capped]
    return VisibilityReport(
        points=points,
        theta=theta,
        theta_upper=np.ones(P),
        theta_tilde=theta_tilde,
        n_fiber=n_fiber,
        capped_fraction=float(np.mean(ex.capped)),
        ell_max=float(np.max(finite, initial=0.0)),
        ell_tilde_max=float(np.max(ex.ell_tilde[~ex.capped], initial=0.0)),
    )
