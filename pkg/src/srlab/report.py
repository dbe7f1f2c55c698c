"""Machine-readable run reports.

Every numeric result is a quantity ``{value, stderr, tolerance, provenance}``.
Reports serialise deterministically: keys keep their insertion order, floats
use ``repr`` precision and non-finite numbers become the strings "inf",
"-inf" and "nan".  Wall times and timestamps live under ``timing`` only, so
two runs with the same scenario and seed compare equal once ``timing`` is
dropped.
"""

from __future__ import annotations

import json
import math
import platform
import sys
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

import numpy as np

SCHEMA_VERSION = "1.0"


def plain(obj):
    """Convert numpy scalars/arrays, tuples and non-finite floats to JSON-ready data."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def number(x) -> float:
    """Inverse of :func:`plain` for a single number."""
    if isinstance(x, str):
        return float(x)
    return float(x)


def quantity(value, stderr=None, tolerance=None, provenance: str = "computed") -> dict:
    return {"value": value, "stderr": stderr, "tolerance": tolerance, "provenance": provenance}


@dataclass
class CheckReport:
    """Outcome of one check: quantities, pass/fail, caveats and raw details."""

    name: str
    passed: bool
    quantities: dict = field(default_factory=dict)
    caveats: list = field(default_factory=list)
    details: dict = field(default_factory=dict)
    error: Optional[str] = None
    numeric_error: bool = False
    files: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return plain(
            {
                "name": self.name,
                "passed": self.passed,
                "quantities": self.quantities,
                "caveats": self.caveats,
                "details": self.details,
                "error": self.error,
                "numeric_error": self.numeric_error,
                "files": self.files,
            }
        )


def environment_fingerprint() -> dict:
    import scipy
    import sympy

    return {
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "sympy": sympy.__version__,
        "platform": platform.platform(),
        "machine": platform.machine(),
    }


@dataclass
class RunReport:
    scenario: dict
    seed: int
    checks: list
    expected: list = field(default_factory=list)
    timing: dict = field(default_factory=dict)
    environment: dict = field(default_factory=environment_fingerprint)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks) and all(e["passed"] for e in self.expected)

    @property
    def numeric_error(self) -> bool:
        return any(c.numeric_error for c in self.checks)

    def to_dict(self) -> dict:
        return plain(
            {
                "schema_version": SCHEMA_VERSION,
                "scenario": self.scenario,
                "seed": self.seed,
                "passed": self.passed,
                "checks": [c.to_dict() for c in self.checks],
                "expected": self.expected,
                "environment": self.environment,
                "timing": self.timing,
            }
        )

    def to_json(self) -> str:
        return dumps(self.to_dict())


def dumps(data: dict) -> str:
    return json.dumps(data, indent=2, allow_nan=False) + "\n"


def without_timing(report: dict) -> dict:
    return {k: v for k, v in report.items() if k != "timing"}


def diff_reports(a: dict, b: dict, path: str = "") -> list[str]:
    """Paths at which two reports (with ``timing`` removed at top level) differ."""
    if not path:
        a, b = without_timing(a), without_timing(b)
    if isinstance(a, dict) and isinstance(b, dict):
        out = []
        for k in list(a) + [k for k in b if k not in a]:
            if k not in a or k not in b:
                out.append(f"{path}/{k}")
            else:
                out.extend(diff_reports(a[k], b[k], f"{path}/{k}"))
        return out
    if isinstance(a, list) and isinstance(b, list):
        if len(a) != len(b):
            return [f"{path} (length {len(a)} != {len(b)})"]
        out = []
        for i, (x, y) in enumerate(zip(a, b)):
            out.extend(diff_reports(x, y, f"{path}/{i}"))
        return out
    return [] if a == b else [path or "/"]


def load_schema() -> dict:
    return json.loads(resources.files("srlab").joinpath("data/report.schema.json").read_text())
