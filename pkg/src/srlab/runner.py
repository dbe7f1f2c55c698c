"""Execute a scenario: build model and domain, run the declared checks, assemble a report.

Each check draws from its own generator, spawned from the scenario seed by
position in the check list, so results do not depend on whether checks run
sequentially or in a thread pool.
"""

from __future__ import annotations

import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .config import ConfigError, Scenario
from .domains import make_domain
from .geometries import make_model
from .report import CheckReport, RunReport, number, quantity

NUMERIC_ERRORS = (ArithmeticError, FloatingPointError, np.linalg.LinAlgError)


class Context:
    """Model, domain and output location shared by the checks of one run."""

    def __init__(self, scenario: Scenario, out_dir: Optional[Path]):
        self.scenario = scenario
        self.out_dir = out_dir
        try:
            self.model = make_model(scenario.model, **scenario.model_params)
            self.domain = make_domain(self.model, scenario.domain, **scenario.domain_params)
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"scenario {scenario.name}: {exc}") from exc
        self._test_function = None

    def test_function(self):
        if self._test_function is None:
            from .inequalities import make_test_function

            s = self.scenario
            self._test_function = make_test_function(self.model, self.domain, s.test_function, **s.test_function_params)
        return self._test_function

    def csv_path(self, name: str) -> Optional[Path]:
        if self.out_dir is None or not self.scenario.write_csv:
            return None
        self.out_dir.mkdir(parents=True, exist_ok=True)
        return self.out_dir / f"{self.scenario.name}.{name}.csv"


# ----------------------------------------------------------------- checks

def check_reduction(ctx: Context, rng: np.random.Generator) -> CheckReport:
    from .reduction import certify

    s = ctx.scenario
    cert = certify(ctx.model, s.samples.reduction, rng, s.tolerances.reduction)
    tol = s.tolerances.reduction
    q = {
        "h1_residual": quantity(cert.h1_residual, tolerance=tol, provenance="frame-identity"),
        "h1_dynamic": quantity(cert.h1_dynamic, tolerance=tol, provenance="ode"),
        "h2_residual": quantity(cert.h2_residual, tolerance=tol, provenance="frame-identity"),
    }
    return CheckReport("reduction", cert.h1_pass and cert.h2_pass, q, details=cert.to_dict())


def check_santalo(ctx: Context, rng: np.random.Generator) -> CheckReport:
    from .santalo import constant_one, santalo_balance, squared_derivative

    s = ctx.scenario
    functions = {}
    for name in s.santalo_functions:
        if name == "one":
            functions["one"] = constant_one
        elif name == "test":
            functions["test"] = squared_derivative(ctx.model, ctx.test_function().gradient)
        else:
            raise ConfigError(f"santalo_functions: unknown function {name!r} (use 'one' or 'test')")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        estimates = santalo_balance(
            ctx.model, ctx.domain, functions, s.samples.santalo_interior, s.samples.santalo_boundary,
            rng, t_max=s.t_max, tol=s.tolerances.ode,
        )
    q, caveats = {}, [str(w.message) for w in caught]
    for e in estimates:
        se = e.combined_stderr
        q[f"{e.name}.lhs"] = quantity(e.lhs, e.lhs_stderr, provenance="monte-carlo")
        q[f"{e.name}.rhs"] = quantity(e.rhs, e.rhs_stderr, provenance="monte-carlo")
        q[f"{e.name}.discrepancy"] = quantity(e.discrepancy, se, s.tolerances.n_sigma * se, "monte-carlo")
        if e.capped_fraction > 0:
            caveats.append(f"{e.name}: capped fraction {e.capped_fraction:.3g}")
    passed = all(e.balanced(s.tolerances.n_sigma) for e in estimates)
    return CheckReport("santalo", passed, q, caveats, {"estimates": [e.to_dict() for e in estimates]})


def _hardy_quantities(reports, prefix: str = "") -> dict:
    q = {}
    lhs = reports[0]
    q[f"{prefix}lhs"] = quantity(lhs.lhs, lhs.lhs_stderr, provenance="monte-carlo")
    for rep, which in zip(reports, ("R", "r")):
        q[f"{prefix}{which}.rhs"] = quantity(rep.rhs, rep.rhs_stderr, provenance="monte-carlo")
        q[f"{prefix}{which}.ratio"] = quantity(rep.ratio, rep.ratio_stderr, provenance="monte-carlo")
    return q


def check_hardy(ctx: Context, rng: np.random.Generator) -> CheckReport:
    from .inequalities import hardy_check, radii_table

    s = ctx.scenario
    f = ctx.test_function()
    reps = hardy_check(ctx.model, ctx.domain, f, 2.0, s.samples.hardy, rng, t_max=s.t_max, tol=s.tolerances.ode)
    check = CheckReport("hardy", all(r.passed for r in reps), _hardy_quantities(reps),
                        details={"reports": [r.to_dict() for r in reps],
                                 "equality_R": reps[0].is_equality(s.tolerances.n_sigma)})
    path = ctx.csv_path("radii")
    if path is not None and s.samples.radii_points > 0:
        field_ = radii_table(ctx.model, ctx.domain, s.samples.radii_points, rng, n_fiber=s.samples.radii_fiber,
                             t_max=s.t_max)
        field_.to_csv(path)
        check.files.append(path.name)
    return check


def check_p_hardy(ctx: Context, rng: np.random.Generator) -> CheckReport:
    from .inequalities import hardy_check

    s = ctx.scenario
    f = ctx.test_function()
    q, details, passed = {}, [], True
    for p in s.p_values:
        reps = hardy_check(ctx.model, ctx.domain, f, float(p), s.samples.hardy, rng, t_max=s.t_max, tol=s.tolerances.ode)
        q.update(_hardy_quantities(reps, prefix=f"p={float(p):g}."))
        details.extend(r.to_dict() for r in reps)
        passed = passed and all(r.passed for r in reps)
    return CheckReport("p-hardy", passed, q, details={"reports": details})


def check_lambda1(ctx: Context, rng: np.random.Generator) -> CheckReport:
    from .inequalities import lambda1_lower_bound

    s = ctx.scenario
    b = lambda1_lower_bound(ctx.model, ctx.domain, s.samples.lambda1, rng, t_max=s.t_max, tol=min(s.tolerances.ode, 1e-10))
    q = {
        "L_sup": quantity(b.L_sup, provenance="ode+monte-carlo"),
        "bound": quantity(b.value, provenance="ode+monte-carlo"),
    }
    if b.analytic is not None:
        q["bound_analytic"] = quantity(b.analytic, provenance="closed-form")
    passed = b.capped == 0 and np.isfinite(b.value) and b.value > 0
    caveats = []
    known = ctx.domain.known.get("lambda1")
    if known is not None:
        q["lambda1_known"] = quantity(float(known), provenance="closed-form")
        # the bound is a lower bound for lambda_1; allow the ODE error on L
        passed = passed and b.value <= float(known) * (1 + 100 * s.tolerances.ode)
    if b.capped:
        caveats.append(f"{b.capped} chords capped at t_max; no finite bound")
    return CheckReport("lambda1", bool(passed), q, caveats, b.to_dict())


def check_isoperimetric(ctx: Context, rng: np.random.Generator) -> CheckReport:
    from .inequalities import isoperimetric_check

    s = ctx.scenario
    rep1, rep2 = isoperimetric_check(
        ctx.model, ctx.domain, rng, s.samples.visibility_points, s.samples.visibility_fiber, s.samples.boundary,
        t_max=s.t_max, tol=min(s.tolerances.ode, 1e-9),
    )
    q = {
        "perimeter_ratio": quantity(rep1.lhs, rep1.lhs_stderr, provenance="quadrature-or-monte-carlo"),
        "exit.rhs": quantity(rep1.rhs, rep1.rhs_stderr, provenance="ode+monte-carlo"),
        "exit.ratio": quantity(rep1.ratio, rep1.ratio_stderr, provenance="ode+monte-carlo"),
    }
    reports = [rep1]
    if rep2 is not None:
        q["diameter.rhs"] = quantity(rep2.rhs, rep2.rhs_stderr, provenance="ode+monte-carlo")
        q["diameter.ratio"] = quantity(rep2.ratio, rep2.ratio_stderr, provenance="ode+monte-carlo")
        reports.append(rep2)
    caveats = list(ctx.domain.notes) + [n for n in rep1.notes if "capped" in n and not n.endswith(" 0")]
    return CheckReport("isoperimetric", all(r.passed for r in reports), q, caveats,
                       {"reports": [r.to_dict() for r in reports],
                        "equality_exit": rep1.is_equality(s.tolerances.n_sigma)})


def _spectral_cases(ctx: Context) -> list:
    s = ctx.scenario
    if s.spectral.cases:
        return list(s.spectral.cases)
    kind = ctx.model.id.split("(")[0]
    if kind in ("round-sphere", "sphere"):
        return ["sphere"]
    if kind in ("chf", "qhf"):
        return [kind]
    if ctx.model.kind == "band":
        return ["band-flat", "band-round"]
    raise ConfigError(f"spectral: no separated problem for model {ctx.model.id}; list spectral.cases explicitly")


def check_spectral(ctx: Context, rng: np.random.Generator) -> CheckReport:
    from .spectral import cylindrical_residual, separated_eigensolve

    s = ctx.scenario
    d = int(s.model_params.get("d", s.spectral.d))
    eps = float(s.model_params.get("epsilon", s.spectral.epsilon))
    q, details, caveats, files, passed = {}, [], [], [], True
    for case in _spectral_cases(ctx):
        res = separated_eigensolve(case, d, s.spectral.grids, epsilon=eps)
        tol = s.tolerances.spectral if res.exact is not None else None
        q[f"{case}.lambda1"] = quantity(res.extrapolated, tolerance=tol, provenance="finite-volume+richardson")
        if res.exact is not None:
            q[f"{case}.exact"] = quantity(res.exact, provenance="closed-form")
            passed = passed and res.error <= s.tolerances.spectral
        if case in ("sphere", "chf", "qhf"):
            r = cylindrical_residual(case, d)
            q[f"{case}.cylindrical_residual"] = quantity(r, tolerance=s.tolerances.residual, provenance="symbolic+grid")
            passed = passed and r < s.tolerances.residual
        if case == "band-round":
            flat = np.pi**2 / (2 * eps) ** 2
            caveats.append(
                f"band with the round volume: lambda1 = {res.extrapolated:.6f} < pi^2/(2 eps)^2 = {flat:.6f}; "
                "the chord bound is not attained for this volume"
            )
        details.append(res.to_dict())
        path = ctx.csv_path(f"spectral-{case}")
        if path is not None:
            res.write_convergence_csv(path)
            files.append(path.name)
    return CheckReport("spectral", bool(passed), q, caveats, {"results": details}, files=files)


def check_carnot(ctx: Context, rng: np.random.Generator) -> CheckReport:
    from .carnot import carnot_bounds

    if ctx.model.kind != "carnot":
        raise ConfigError(f"carnot: model {ctx.model.id} is not a Carnot group")
    s = ctx.scenario
    spec = ctx.model.params["spec"]
    b = carnot_bounds(spec, ctx.domain, rng, s.samples.carnot)
    q = {
        "diam_H_lower": quantity(b.diameter.lower, provenance="closed-form-chords+search"),
        "diam_H_upper": quantity(b.diameter.upper, provenance="closed-form-chords+search"),
        "lambda1_bound": quantity(b.lambda1_bound, provenance="closed-form-chords+search"),
        "lambda1_bound_at_lower": quantity(spec.k * np.pi**2 / b.diameter.lower**2, provenance="closed-form-chords+search"),
        "isoperimetric_bound": quantity(b.isoperimetric_bound, provenance="closed-form-chords+search"),
        "perimeter_ratio": quantity(b.perimeter_ratio, b.perimeter_ratio_stderr, provenance="quadrature-or-monte-carlo"),
    }
    passed = b.isoperimetric_holds and np.isfinite(b.diameter.upper)
    known = ctx.domain.known.get("diam_H")
    if known is not None:
        passed = passed and b.diameter.lower <= float(known) * (1 + 1e-9)
    return CheckReport("carnot", bool(passed), q, ["bounds use the upper diameter bracket"], b.to_dict())


CHECK_FUNCTIONS: dict[str, Callable[[Context, np.random.Generator], CheckReport]] = {
    "reduction": check_reduction,
    "santalo": check_santalo,
    "hardy": check_hardy,
    "p-hardy": check_p_hardy,
    "lambda1": check_lambda1,
    "isoperimetric": check_isoperimetric,
    "spectral": check_spectral,
    "carnot": check_carnot,
}


def _run_check(ctx: Context, name: str, seed_seq: np.random.SeedSequence) -> tuple[CheckReport, float]:
    start = time.perf_counter()
    rng = np.random.default_rng(seed_seq)
    try:
        with np.errstate(all="ignore"):
            report = CHECK_FUNCTIONS[name](ctx, rng)
    except ConfigError:
        raise
    except NUMERIC_ERRORS as exc:
        report = CheckReport(name, False, error=f"{type(exc).__name__}: {exc}", numeric_error=True)
    except Exception as exc:  # a failing check must not abort the report
        report = CheckReport(name, False, error=f"{type(exc).__name__}: {exc}")
    return report, time.perf_counter() - start


def compare_expected(scenario: Scenario, checks: list[CheckReport]) -> list[dict]:
    """Compare report quantities with the scenario's expected-value table."""
    by_name = {c.name: c for c in checks}
    out = []
    for key, e in scenario.expected.items():
        check, qname = key.split(".", 1)
        c = by_name.get(check)
        observed, allowed, passed = None, e.tolerance, False
        if c is not None and qname in c.quantities:
            qv = c.quantities[qname]
            observed = qv["value"]
            allowed = e.tolerance + e.n_sigma * number(qv["stderr"] or 0.0)
            passed = bool(abs(number(observed) - e.value) <= allowed)
        out.append({"key": key, "expected": e.value, "observed": observed, "tolerance": allowed,
                    "provenance": e.provenance, "passed": passed})
    return out


def run_scenario(scenario: Scenario, out_dir=None, threads: int = 1, seed: Optional[int] = None) -> RunReport:
    """Run every declared check in order; the report lists them in declared order."""
    if seed is not None:
        scenario.seed = int(seed)
    out_dir = None if out_dir is None else Path(out_dir)
    started = datetime.now(timezone.utc).isoformat()
    t0 = time.perf_counter()
    ctx = Context(scenario, out_dir)
    seeds = np.random.SeedSequence(scenario.seed).spawn(len(scenario.checks))
    jobs = list(zip(scenario.checks, seeds))
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda job: _run_check(ctx, *job), jobs))
    else:
        results = [_run_check(ctx, *job) for job in jobs]
    checks = [r for r, _ in results]
    timing = {
        "started": started,
        "finished": datetime.now(timezone.utc).isoformat(),
        "wall_seconds": time.perf_counter() - t0,
        "checks": {c.name: t for c, t in zip(checks, (t for _, t in results))},
    }
    return RunReport(scenario.to_dict(), scenario.seed, checks, compare_expected(scenario, checks), timing)
