"""First Dirichlet eigenvalues of hemispheres through their cylindrical radial operators.

For functions of the form Phi = A(angle) g(r) on a hemisphere, the
(sub-)Laplacian of the round sphere, of the complex Hopf fibration and of the
quaternionic Hopf fibration acts through

    sphere(d):  g'' + (d-1) cot(r) g'                          (Phi = g(r))
    chf(d):     d_r^2 + ((2d-1) cot r - tan r) d_r + tan^2 r d_theta^2
    qhf(d):     d_r^2 + ((4d-1) cot r - 3 tan r) d_r + tan^2 r (d_eta^2 + 2 cot eta d_eta)

with Phi = cos(theta) g(r) (chf) and Phi = cos(eta) g(r) (qhf).  Separating
the lowest angular mode leaves a Sturm-Liouville problem

    -(w g')' + w V g = lambda w g   on (0, pi/2),   w'/w = a(r),

solved by a cell-centred finite-volume scheme on a mesh shifted away from the
singular end points, with Richardson extrapolation over three grids.  The same
solver handles the theta band of the spherical-band model.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
import sympy as sp
from scipy.linalg import eigh_tridiagonal


class GridError(ValueError):
    """An evaluation grid touches a coordinate singularity."""


class EigenError(ArithmeticError):
    """The discrete eigenproblem did not produce a usable eigenpair."""


CASES = ("sphere", "chf", "qhf", "band-round", "band-flat")


# ------------------------------------------------------- radial problems

@dataclass(frozen=True)
class RadialProblem:
    """-(w g')' + w V g = lambda w g on (lo, hi).

    ``left`` / ``right`` are "natural" (zero flux, used where w vanishes or by
    symmetry) or "dirichlet".  ``exact`` is the known eigenvalue and
    ``eigenfunction`` the known radial profile, when available.
    """

    name: str
    lo: float
    hi: float
    weight: Callable[[np.ndarray], np.ndarray]
    potential: Callable[[np.ndarray], np.ndarray]
    left: str
    right: str
    exact: Optional[float] = None
    eigenfunction: Optional[Callable[[np.ndarray], np.ndarray]] = None


def radial_problem(case: str, d: int = 1, epsilon: float = 0.1) -> RadialProblem:
    """Separated radial problem of a hemisphere (or of the theta band)."""
    half = 0.5 * np.pi
    if case == "sphere":
        return RadialProblem(
            f"sphere({d})", 0.0, half,
            weight=lambda r: np.sin(r) ** (d - 1),
            potential=lambda r: np.zeros_like(r),
            left="natural", right="dirichlet", exact=float(d), eigenfunction=np.cos,
        )
    if case == "chf":
        return RadialProblem(
            f"chf({d})", 0.0, half,
            weight=lambda r: np.sin(r) ** (2 * d - 1) * np.cos(r),
            potential=lambda r: np.tan(r) ** 2,
            left="natural", right="natural", exact=float(2 * d), eigenfunction=np.cos,
        )
    if case == "qhf":
        return RadialProblem(
            f"qhf({d})", 0.0, half,
            weight=lambda r: np.sin(r) ** (4 * d - 1) * np.cos(r) ** 3,
            potential=lambda r: 3.0 * np.tan(r) ** 2,
            left="natural", right="natural", exact=float(4 * d), eigenfunction=np.cos,
        )
    if case in ("band-round", "band-flat"):
        round_volume = case == "band-round"
        return RadialProblem(
            f"{case}({epsilon:g})", -epsilon, epsilon,
            weight=(lambda x: np.cos(x)) if round_volume else (lambda x: np.ones_like(x)),
            potential=lambda x: np.zeros_like(x),
            left="dirichlet", right="dirichlet",
            exact=None if round_volume else float(np.pi**2 / (2 * epsilon) ** 2),
            eigenfunction=None if round_volume else (lambda x: np.cos(0.5 * np.pi * x / epsilon)),
        )
    raise ValueError(f"unknown case {case!r}; expected one of {CASES}")


def _discretize(problem: RadialProblem, n: int):
    """Symmetric tridiagonal stiffness (diag, off) and diagonal mass on n cells."""
    h = (problem.hi - problem.lo) / n
    centers = problem.lo + (np.arange(n) + 0.5) * h
    faces = problem.lo + np.arange(n + 1) * h
    wf = problem.weight(faces)
    wc = problem.weight(centers)
    mass = wc * h
    diag = wc * problem.potential(centers) * h
    inner = wf[1:-1] / h
    diag[:-1] += inner
    diag[1:] += inner
    off = -inner
    # Dirichlet ends: ghost value -g at half a cell beyond the face
    if problem.left == "dirichlet":
        diag[0] += 2.0 * wf[0] / h
    if problem.right == "dirichlet":
        diag[-1] += 2.0 * wf[-1] / h
    return centers, diag, off, mass


def smallest_eigenpair(problem: RadialProblem, n: int) -> tuple[float, np.ndarray, np.ndarray]:
    """Smallest eigenvalue of the discrete pencil, its eigenvector (mass-normalised) and the cell centres."""
    centers, diag, off, mass = _discretize(problem, n)
    s = 1.0 / np.sqrt(mass)
    d_sym = diag * s * s
    e_sym = off * s[:-1] * s[1:]
    vals, vecs = eigh_tridiagonal(d_sym, e_sym, select="i", select_range=(0, 0))
    if not np.isfinite(vals[0]) or vals[0] <= 0:
        raise EigenError(f"no positive smallest eigenvalue on {n} cells")
    g = vecs[:, 0] * s
    g *= np.sign(g[np.argmax(np.abs(g))])
    return float(vals[0]), g, centers


def rayleigh_quotient(problem: RadialProblem, g: np.ndarray, n: int) -> float:
    """Discrete Rayleigh quotient of cell values g (an upper bound for the discrete lambda_1)."""
    _, diag, off, mass = _discretize(problem, n)
    Ag = diag * g
    Ag[:-1] += off * g[1:]
    Ag[1:] += off * g[:-1]
    return float(np.dot(g, Ag) / np.dot(g, mass * g))


@dataclass
class SpectralResult:
    """Eigenvalues on successively refined grids and their Richardson extrapolation."""

    case: str
    grids: list
    eigenvalues: list
    extrapolated: float
    exact: Optional[float]
    eigenfunction_r: np.ndarray
    eigenfunction_g: np.ndarray
    eigenfunction_error: Optional[float]
    rayleigh_analytic: Optional[float]
    richardson: list = field(default_factory=list)

    @property
    def error(self) -> Optional[float]:
        return None if self.exact is None else abs(self.extrapolated - self.exact)

    def to_dict(self) -> dict:
        return {
            "case": self.case,
            "grids": self.grids,
            "eigenvalues": self.eigenvalues,
            "richardson": self.richardson,
            "lambda1": self.extrapolated,
            "exact": self.exact,
            "error": self.error,
            "eigenfunction_max_error": self.eigenfunction_error,
            "rayleigh_quotient_of_exact_eigenfunction": self.rayleigh_analytic,
        }

    def write_convergence_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["cells", "lambda1"])
            for n, lam in zip(self.grids, self.eigenvalues):
                w.writerow([n, repr(lam)])
            w.writerow(["richardson", repr(self.extrapolated)])


def separated_eigensolve(
    case: str, d: int = 1, grids=(1024, 2048, 4096), epsilon: float = 0.1
) -> SpectralResult:
    """lambda_1 of the separated radial problem on three grids, extrapolated.

    The scheme is second order, so successive values are combined as
    (4 l_{2n} - l_n) / 3 and then once more at fourth order.
    """
    problem = radial_problem(case, d, epsilon)
    grids = [int(n) for n in grids]
    if len(grids) != 3:
        raise ValueError("separated_eigensolve uses exactly three grids")
    lams, last = [], None
    for n in grids:
        lam, g, r = smallest_eigenpair(problem, n)
        lams.append(lam)
        last = (g, r)
    ratio = grids[1] / grids[0]
    p2 = ratio**2
    rich1 = [(p2 * lams[1] - lams[0]) / (p2 - 1), (p2 * lams[2] - lams[1]) / (p2 - 1)]
    p4 = ratio**4
    extrapolated = (p4 * rich1[1] - rich1[0]) / (p4 - 1)
    g, r = last
    ef_err = rq = None
    if problem.eigenfunction is not None:
        exact_g = problem.eigenfunction(r)
        # compare on the mass-weighted normalisation
        _, _, _, mass = _discretize(problem, grids[-1])
        scale = np.dot(mass * exact_g, g) / np.dot(mass * exact_g, exact_g)
        ef_err = float(np.max(np.abs(g / scale - exact_g)))
        rq = rayleigh_quotient(problem, exact_g, grids[-1])
    return SpectralResult(
        case=problem.name,
        grids=grids,
        eigenvalues=lams,
        extrapolated=float(extrapolated),
        exact=problem.exact,
        eigenfunction_r=r,
        eigenfunction_g=g,
        eigenfunction_error=ef_err,
        rayleigh_analytic=rq,
        richardson=[float(x) for x in rich1],
    )


# ------------------------------------------------- cylindrical operators

@lru_cache(maxsize=None)
def _residual_function(case: str, d: int):
    """Lambdified (operator Phi + k Phi) for the analytic eigenfunction, not simplified."""
    r, a = sp.symbols("r a", real=True)
    if case == "sphere":
        phi = sp.cos(r)
        expr = sp.diff(phi, r, 2) + (d - 1) * sp.cot(r) * sp.diff(phi, r) + d * phi
    elif case == "chf":
        phi = sp.cos(a) * sp.cos(r)
        expr = (
            sp.diff(phi, r, 2)
            + ((2 * d - 1) * sp.cot(r) - sp.tan(r)) * sp.diff(phi, r)
            + sp.tan(r) ** 2 * sp.diff(phi, a, 2)
            + 2 * d * phi
        )
    elif case == "qhf":
        phi = sp.cos(a) * sp.cos(r)
        expr = (
            sp.diff(phi, r, 2)
            + ((4 * d - 1) * sp.cot(r) - 3 * sp.tan(r)) * sp.diff(phi, r)
            + sp.tan(r) ** 2 * (sp.diff(phi, a, 2) + 2 * sp.cot(a) * sp.diff(phi, a))
            + 4 * d * phi
        )
    else:
        raise ValueError(f"unknown case {case!r}")
    return sp.lambdify((r, a), expr, "numpy")


def eigenvalue_of_case(case: str, d: int) -> int:
    return {"sphere": d, "chf": 2 * d, "qhf": 4 * d}[case]


def cylindrical_residual(
    case: str, d: int = 1, r_grid: Optional[np.ndarray] = None, angle_grid: Optional[np.ndarray] = None
) -> float:
    """max |operator Phi + k Phi| over a grid for the analytic eigenfunction of the case.

    The radius r must avoid {0, pi/2} and the qhf angle eta must avoid {0, pi},
    otherwise :class:`GridError` is raised.  Default grids are shifted meshes
    of 200 points.
    """
    n = 200
    if r_grid is None:
        r_grid = 0.5 * np.pi * (np.arange(n) + 0.5) / n
    if angle_grid is None:
        angle_grid = (np.pi * (np.arange(n) + 0.5) / n) if case == "qhf" else (np.pi * ((np.arange(n) + 0.5) / n - 0.5))
    r_grid = np.asarray(r_grid, dtype=float)
    angle_grid = np.asarray(angle_grid, dtype=float)
    if np.any(np.isclose(r_grid, 0.0, atol=1e-12)) or np.any(np.isclose(r_grid, 0.5 * np.pi, atol=1e-12)):
        raise GridError("radial grid touches r = 0 or r = pi/2")
    if case == "qhf" and (np.any(np.isclose(angle_grid, 0.0, atol=1e-12)) or np.any(np.isclose(angle_grid, np.pi, atol=1e-12))):
        raise GridError("angular grid touches eta = 0 or eta = pi")
    R, A = np.meshgrid(r_grid, angle_grid, indexing="ij")
    values = np.broadcast_to(_residual_function(case, d)(R, A), R.shape)
    return float(np.max(np.abs(values)))
