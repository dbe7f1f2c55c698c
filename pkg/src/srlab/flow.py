"""Geodesic flow in frame coordinates with boundary-exit detection.

The state of a covector is (q, u, v) with u_i = <lam, X_i>, v_j = <lam, Z_j>.
With the structural functions of the frame the Hamilton equations of
H = |u|^2 / 2 read

    q'   = sum_i u_i X_i(q)
    u_i' = sum_j u_j (b_ji^l u_l + c_ji^l v_l)
    v_j' = sum_i u_i (a_ij^l u_l + d_ij^l v_l)

Many trajectories are integrated at once by a batched Dormand-Prince 8(5,3)
scheme (the coefficients of :class:`scipy.integrate.DOP853`) in which every
trajectory keeps its own step size, error control and dense output.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import DOP853

from .model import ChartDomainError, FrameCovector, Model

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
ERROR_EXPONENT = -1.0 / 8.0


class IntegrationError(RuntimeError):
    """Step size underflow or non-finite state."""


class ChartEscapeError(ChartDomainError):
    """A trajectory left the chart on which its model is defined."""


class GrazingWarning(UserWarning):
    """A trajectory started tangentially on the boundary."""


@dataclass
class BatchResult:
    """Outcome of a batched integration.

    ``t_end`` is the exit time for exited trajectories and ``t_max`` otherwise.
    ``traces`` (when recorded) holds per-trajectory (times, states) arrays of
    accepted steps, ending with the exit state.
    """

    t_end: np.ndarray
    y_end: np.ndarray
    exited: np.ndarray
    capped: np.ndarray
    n_steps: int
    n_rejected: int
    n_rhs: int
    traces: Optional[list] = None


def _dense(F: np.ndarray, y_old: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Evaluate DOP853 dense output; F (7, B, ny), x (B,) in [0, 1]."""
    y = np.zeros_like(y_old)
    xx = x[:, None]
    for i, f in enumerate(F[::-1]):
        y += f
        if i % 2 == 0:
            y *= xx
        else:
            y *= 1.0 - xx
    return y + y_old


def integrate_batch(
    rhs: Callable[[np.ndarray], np.ndarray],
    y0: np.ndarray,
    t_max,
    rtol: float = 1e-10,
    atol: float = 1e-10,
    event: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    project: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    valid: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    record: bool = False,
    max_step: float = np.inf,
    first_step: float = 1e-2,
    event_tol: float = 1e-10,
    min_step: float = 1e-14,
) -> BatchResult:
    """Integrate the autonomous system y' = rhs(y) for a batch of initial states.

    Integration of a trajectory stops at ``t_max`` (scalar or per trajectory)
    or at the first time the event function changes sign from non-negative to
    negative; that time is located by bisection on the dense output until
    |event| < ``event_tol`` (or the bracket reaches round-off).  At t = 0 the
    event is treated as non-negative, so trajectories starting on the boundary
    and pointing outward exit at time ~0.  ``project`` is applied to accepted
    states (e.g. renormalisation onto a sphere); ``valid`` flags states lying
    in the chart and a False value raises :class:`ChartEscapeError`.
    """
    y0 = np.array(y0, dtype=float, ndmin=2)
    B, ny = y0.shape
    t_max = np.broadcast_to(np.asarray(t_max, dtype=float), (B,)).copy()
    tab = DOP853
    A, Bw = tab.A, tab.B
    E3, E5, D = tab.E3, tab.E5, tab.D
    A_EX, C_EX = tab.A_EXTRA, tab.C_EXTRA
    S = tab.n_stages

    t = np.zeros(B)
    y = y0.copy()
    f = rhs(y)
    n_rhs = 1
    h = np.minimum(np.full(B, first_step), np.minimum(max_step, np.maximum(t_max, 1e-300)))
    active = t_max > 0
    exited = np.zeros(B, dtype=bool)
    capped = np.zeros(B, dtype=bool)
    t_end = t_max.copy()
    y_end = y0.copy()
    y_end[~active] = y0[~active]
    n_steps = n_rejected = 0
    traces = [[(0.0, y0[i].copy())] for i in range(B)] if record else None

    while np.any(active):
        idx = np.nonzero(active)[0]
        yi, fi, ti = y[idx], f[idx], t[idx]
        hi = np.minimum(h[idx], t_max[idx] - ti)
        K = np.empty((S + 1, len(idx), ny))
        K[0] = fi
        for s in range(1, S):
            dy = np.tensordot(A[s, :s], K[:s], axes=(0, 0)) * hi[:, None]
            K[s] = rhs(yi + dy)
        y_new = yi + hi[:, None] * np.tensordot(Bw, K[:S], axes=(0, 0))
        f_new = rhs(y_new)
        K[S] = f_new
        n_rhs += S
        scale = atol + np.maximum(np.abs(yi), np.abs(y_new)) * rtol
        e5 = np.tensordot(E5, K, axes=(0, 0)) / scale
        e3 = np.tensordot(E3, K, axes=(0, 0)) / scale
        n5 = np.sum(e5 * e5, axis=1)
        n3 = np.sum(e3 * e3, axis=1)
        denom = np.sqrt((n5 + 0.01 * n3) * ny)
        with np.errstate(divide="ignore", invalid="ignore"):
            err = np.where(n5 > 0, np.abs(hi) * n5 / denom, 0.0)
        finite = np.all(np.isfinite(y_new), axis=1)
        err = np.where(finite, err, np.inf)
        ok = err < 1.0
        with np.errstate(divide="ignore"):
            grow = np.where(err == 0, MAX_FACTOR, np.minimum(MAX_FACTOR, SAFETY * err**ERROR_EXPONENT))
            shrink = np.maximum(MIN_FACTOR, SAFETY * np.where(np.isfinite(err), err, 1e300) ** ERROR_EXPONENT)
        h[idx] = np.minimum(np.where(ok, hi * grow, hi * shrink), max_step)
        n_steps += int(ok.sum())
        n_rejected += int((~ok).sum())
        if np.any(h[idx] < min_step):
            raise IntegrationError("step size underflow")
        if not np.any(ok):
            continue

        acc = idx[ok]
        ya, yn, Ka, ha = yi[ok], y_new[ok], K[:, ok], hi[ok]
        if project is not None:
            yn = project(yn)
        if valid is not None and not np.all(valid(yn)):
            raise ChartEscapeError("trajectory left the chart")
        t_new = t[acc] + ha
        crossing = np.zeros(len(acc), dtype=bool)
        if event is not None:
            g_new = event(yn)
            crossing = g_new < 0.0
        if np.any(crossing):
            ci = np.nonzero(crossing)[0]
            Kc = np.empty((S + 4, len(ci), ny))
            Kc[: S + 1] = Ka[:, ci]
            hc = ha[ci][:, None]
            for s_, (a, c) in enumerate(zip(A_EX, C_EX), start=S + 1):
                dy = np.tensordot(a[:s_], Kc[:s_], axes=(0, 0)) * hc
                Kc[s_] = rhs(ya[ci] + dy)
            n_rhs += 3
            dlt = yn[ci] - ya[ci]
            Fd = np.empty((7, len(ci), ny))
            Fd[0] = dlt
            Fd[1] = hc * Kc[0] - dlt
            Fd[2] = 2 * dlt - hc * (Kc[S] + Kc[0])
            Fd[3:] = hc[None] * np.tensordot(D, Kc, axes=(1, 0))
            lo = np.zeros(len(ci))
            hi_x = np.ones(len(ci))
            for _ in range(60):
                mid = 0.5 * (lo + hi_x)
                gm = event(_dense(Fd, ya[ci], mid))
                inside = gm >= 0.0
                lo = np.where(inside, mid, lo)
                hi_x = np.where(inside, hi_x, mid)
                if np.all(np.abs(gm) < event_tol) and np.all((hi_x - lo) * ha[ci] < 1e-13):
                    break
            x_exit = 0.5 * (lo + hi_x)
            y_exit = _dense(Fd, ya[ci], x_exit)
            if project is not None:
                y_exit = project(y_exit)
            gi = acc[ci]
            exited[gi] = True
            t_end[gi] = t[gi] + x_exit * ha[ci]
            y_end[gi] = y_exit
            active[gi] = False
            if record:
                for j, g in enumerate(gi):
                    traces[g].append((t_end[g], y_exit[j].copy()))
        keep = ~crossing
        ka = acc[keep]
        t[ka] = t_new[keep]
        y[ka] = yn[keep]
        f[ka] = f_new[ok][keep]
        if record:
            for j, g in enumerate(ka):
                traces[g].append((t[g], y[g].copy()))
        done = ka[t[ka] >= t_max[ka] * (1 - 1e-15)]
        capped[done] = event is not None
        t_end[done] = t_max[done]
        y_end[done] = y[done]
        active[done] = False

    if record:
        traces = [
            (np.array([p[0] for p in tr]), np.array([p[1] for p in tr])) for tr in traces
        ]
    return BatchResult(t_end, y_end, exited, capped, n_steps, n_rejected, n_rhs, traces)


# -------------------------------------------------------------- geodesics

def geodesic_rhs(model: Model, integrand: Optional[Callable] = None) -> Callable[[np.ndarray], np.ndarray]:
    """Right-hand side of the frame-coordinate Hamilton equations.

    When ``integrand`` (a function of (q, u, v) returning (B,) or (B, r)
    values) is given, extra state components accumulate its integral along
    the trajectory.
    """
    dim, k, m = model.dim, model.k, model.m

    def rhs(y):
        q = y[:, :dim]
        u = y[:, dim : dim + k]
        v = y[:, dim + k : dim + k + m]
        if model.geodesic_field is not None:
            parts = list(model.geodesic_field(q, u, v))
            if integrand is not None:
                parts.append(_columns(integrand(q, u, v)))
            return np.concatenate(parts, axis=1)
        X = model.horizontal_frame(q)
        br = model.bracket_oracle(q)
        qdot = np.einsum("bi,bid->bd", u, X)
        ub = np.einsum("bj,bjil->bil", u, br.b)
        udot = np.einsum("bil,bl->bi", ub, u)
        ua = np.einsum("bi,bijl->bjl", u, br.a)
        vdot = np.einsum("bjl,bl->bj", ua, u)
        if m:
            uc = np.einsum("bj,bjil->bil", u, br.c)
            udot = udot + np.einsum("bil,bl->bi", uc, v)
            ud = np.einsum("bi,bijl->bjl", u, br.d)
            vdot = vdot + np.einsum("bjl,bl->bj", ud, v)
        parts = [qdot, udot, vdot]
        if integrand is not None:
            parts.append(_columns(integrand(q, u, v)))
        return np.concatenate(parts, axis=1)

    return rhs


def _columns(values) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    return values[:, None] if values.ndim == 1 else values


def _project_state(model: Model):
    if not model.ambient:
        return None
    dim = model.dim

    def project(y):
        y = y.copy()
        y[:, :dim] /= np.linalg.norm(y[:, :dim], axis=1, keepdims=True)
        return y

    return project


def _valid_state(model: Model):
    dim = model.dim
    return lambda y: model.in_chart(y[:, :dim])


@dataclass
class GeodesicTrace:
    """Sampled extremal: accepted-step times and covectors with conservation diagnostics."""

    times: np.ndarray
    states: FrameCovector
    H_drift: float
    v_drift: float
    exit_event: Optional[tuple] = None


def integrate_geodesic(
    model: Model,
    lam0: FrameCovector,
    t_max: float,
    tol: float = 1e-10,
    domain=None,
    max_step: float = np.inf,
) -> GeodesicTrace:
    """Integrate a single unit covector up to t_max (or its exit from ``domain``)."""
    if len(lam0) != 1:
        raise ValueError("integrate_geodesic takes a single covector")
    if abs(float(np.sum(lam0.u**2)) - 1.0) > 1e-12:
        raise ValueError("initial covector must satisfy |u| = 1")
    model.check_chart(lam0.q)
    event = None
    if domain is not None:
        dim = model.dim
        event = lambda y: domain.defining(y[:, :dim])
    res = integrate_batch(
        geodesic_rhs(model),
        lam0.state(),
        t_max,
        rtol=tol,
        atol=tol,
        event=event,
        project=_project_state(model),
        valid=_valid_state(model),
        record=True,
        max_step=max_step,
    )
    times, ys = res.traces[0]
    states = FrameCovector.from_state(ys, model.dim, model.k)
    twoH = np.sum(states.u**2, axis=1)
    exit_event = (float(res.t_end[0]), states.q[-1].copy()) if res.exited[0] else None
    return GeodesicTrace(
        times=times,
        states=states,
        H_drift=float(np.max(np.abs(twoH - twoH[0]))),
        v_drift=float(np.max(np.abs(states.v), initial=0.0)),
        exit_event=exit_event,
    )


def flow_map(model: Model, lam: FrameCovector, t, tol: float = 1e-10) -> FrameCovector:
    """phi_t(lam) for a batch of covectors (no boundary)."""
    res = integrate_batch(
        geodesic_rhs(model), lam.state(), t, rtol=tol, atol=tol,
        project=_project_state(model), valid=_valid_state(model),
    )
    return FrameCovector.from_state(res.y_end, model.dim, model.k)


# ------------------------------------------------------------ exit lengths

@dataclass
class ExitData:
    """Exit lengths of a batch of covectors.

    ``ell_fwd`` = l(lam), ``ell_bwd`` = l(-lam) (None when only the forward run
    was requested), ``L`` their sum, ``ell_tilde`` = min(l(lam), cut length)
    (equal to ``ell_fwd`` with ``cut_known`` False when the model has no cut
    hook).  Capped trajectories report infinity.  ``integral`` holds the
    integral of the supplied integrand along the forward run up to its exit
    (or up to t_max when capped): shape (B,) for scalar integrands, (B, r)
    for integrands returning r columns.
    """

    ell_fwd: np.ndarray
    ell_bwd: Optional[np.ndarray]
    L: Optional[np.ndarray]
    ell_tilde: np.ndarray
    capped: np.ndarray
    capped_bwd: Optional[np.ndarray]
    cut_known: bool
    grazing: np.ndarray
    integral: Optional[np.ndarray] = None
    q_exit: Optional[np.ndarray] = None
    stats: dict = field(default_factory=dict)


def default_t_max(domain) -> float:
    return 8.0 * float(domain.length_scale)


def _tilt_tangential(model, domain, lam: FrameCovector, tilt: float, tol: float):
    """Indices of covectors starting on the boundary tangentially, and tilted copies.

    Boundary-tangent starts are resolved by continuity: the direction is tilted
    inward by ``tilt`` (radians) along the horizontal normal.
    """
    from .model import horizontal_gradient

    q = lam.q
    U = domain.defining(q)
    grad = domain.gradient(q)
    gH = horizontal_gradient(model, q, grad)
    ngH = np.linalg.norm(gH, axis=1)
    on_bdry = np.abs(U) <= tol * np.maximum(np.linalg.norm(grad, axis=1), 1.0)
    unit = np.where(ngH[:, None] > 0, gH / np.where(ngH > 0, ngH, 1.0)[:, None], 0.0)
    along = np.einsum("bi,bi->b", lam.u, unit)
    tangential = on_bdry & (ngH > 1e-12) & (np.abs(along) < 1e-12)
    u = lam.u.copy()
    u[tangential] = np.cos(tilt) * u[tangential] + np.sin(tilt) * unit[tangential]
    u[tangential] /= np.linalg.norm(u[tangential], axis=1, keepdims=True)
    return tangential, FrameCovector(lam.q, u, lam.v)


def exit_length(
    model: Model,
    domain,
    lam: FrameCovector,
    t_max: Optional[float] = None,
    tol: float = 1e-10,
    integrand: Optional[Callable] = None,
    max_step: Optional[float] = None,
) -> ExitData:
    """Forward exit length l(lam) = sup{t >= 0 : gamma_lam([0, t]) in M} for a batch.

    Trajectories that reach ``t_max`` without exiting get l = inf and the
    ``capped`` flag.  Tangential boundary starts take the inward limit (see
    :func:`_tilt_tangential`) and are flagged in ``grazing``.
    """
    t_max = default_t_max(domain) if t_max is None else float(t_max)
    max_step = 0.25 * float(domain.length_scale) if max_step is None else max_step
    q = lam.q
    model.check_chart(q)
    U0 = domain.defining(q)
    if np.any(U0 < -1e-8 * np.maximum(np.linalg.norm(domain.gradient(q), axis=1), 1.0)):
        raise ValueError("exit_length: base point outside the domain")
    grazing, lam = _tilt_tangential(model, domain, lam, 1e-7, 1e-10)
    if np.any(grazing):
        warnings.warn(f"{int(grazing.sum())} boundary-tangent start(s) resolved by inward limit", GrazingWarning)
    y0 = lam.state()
    n_int = 0
    if integrand is not None:
        n_int = _columns(integrand(lam.q, lam.u, lam.v)).shape[1]
        y0 = np.concatenate([y0, np.zeros((len(lam), n_int))], axis=1)
    dim = model.dim
    res = integrate_batch(
        geodesic_rhs(model, integrand),
        y0,
        t_max,
        rtol=tol,
        atol=tol,
        event=lambda y: domain.defining(y[:, :dim]),
        project=_project_state(model),
        valid=_valid_state(model),
        max_step=max_step,
    )
    ell = np.where(res.capped, np.inf, res.t_end)
    if model.cut_hook is not None:
        ell_tilde = np.minimum(ell, model.cut_hook(lam))
    else:
        ell_tilde = ell.copy()
    return ExitData(
        ell_fwd=ell,
        ell_bwd=None,
        L=None,
        ell_tilde=ell_tilde,
        capped=res.capped,
        capped_bwd=None,
        cut_known=model.cut_hook is not None,
        grazing=grazing,
        integral=_integral_columns(res.y_end, n_int),
        q_exit=res.y_end[:, :dim].copy(),
        stats={"steps": res.n_steps, "rejected": res.n_rejected, "rhs_evals": res.n_rhs, "t_max": t_max},
    )


def _integral_columns(y_end: np.ndarray, n_int: int):
    if n_int == 0:
        return None
    cols = y_end[:, y_end.shape[1] - n_int :].copy()
    return cols[:, 0] if n_int == 1 else cols


def chord_data(
    model: Model,
    domain,
    lam: FrameCovector,
    t_max: Optional[float] = None,
    tol: float = 1e-10,
    max_step: Optional[float] = None,
) -> ExitData:
    """Forward and backward exit lengths, the chord length L and l-tilde for a batch."""
    B = len(lam)
    both = FrameCovector(
        np.concatenate([lam.q, lam.q]), np.concatenate([lam.u, -lam.u]), np.concatenate([lam.v, -lam.v])
    )
    ex = exit_length(model, domain, both, t_max=t_max, tol=tol, max_step=max_step)
    fwd, bwd = ex.ell_fwd[:B], ex.ell_fwd[B:]
    return ExitData(
        ell_fwd=fwd,
        ell_bwd=bwd,
        L=fwd + bwd,
        ell_tilde=ex.ell_tilde[:B],
        capped=ex.capped[:B],
        capped_bwd=ex.capped[B:],
        cut_known=ex.cut_known,
        grazing=ex.grazing[:B] | ex.grazing[B:],
        q_exit=ex.q_exit[:B],
        stats=ex.stats,
    )


def export_trace_csv(trace: GeodesicTrace, path) -> None:
    """Write a trace as CSV columns t, q_1.., u_1.., v_1.., H (one row per accepted step)."""
    s = trace.states
    H = 0.5 * np.sum(s.u**2, axis=1)
    data = np.column_stack([trace.times, s.q, s.u, s.v, H])
    header = ",".join(
        ["t"] + [f"q_{i + 1}" for i in range(s.q.shape[1])] + [f"u_{i + 1}" for i in range(s.u.shape[1])]
        + [f"v_{i + 1}" for i in range(s.v.shape[1])] + ["H"]
    )
    np.savetxt(path, data, delimiter=",", header=header, comments="")
