"""Scenario files: one TOML document per scenario, validated into dataclasses.

A scenario names a model and a domain, the checks to run (in order), the
seed, sample counts, tolerances and optional expected values::

    name = "chf-1"
    model = "chf"
    domain = "hemisphere"
    checks = ["reduction", "santalo", "lambda1"]
    seed = 7

    [model_params]
    d = 1

    [samples]
    santalo_interior = 20000

    [expected."lambda1.L_sup"]
    value = 3.141592653589793
    tolerance = 1e-4
    provenance = "analytic"
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


CHECKS = ("reduction", "santalo", "hardy", "p-hardy", "lambda1", "isoperimetric", "spectral", "carnot")
PROVENANCE = ("analytic", "derived", "trivial")


class ConfigError(ValueError):
    """Invalid scenario file; the message names the offending line or field."""


@dataclass
class Samples:
    reduction: int = 1000
    santalo_interior: int = 20_000
    santalo_boundary: int = 20_000
    hardy: int = 20_000
    lambda1: int = 2000
    visibility_points: int = 100
    visibility_fiber: int = 100
    boundary: int = 2000
    carnot: int = 2000
    radii_points: int = 0
    radii_fiber: int = 32


@dataclass
class Tolerances:
    ode: float = 1e-8
    reduction: float = 1e-9
    spectral: float = 1e-3
    residual: float = 1e-10
    n_sigma: float = 3.0


@dataclass
class SpectralConfig:
    cases: list = field(default_factory=list)
    d: int = 1
    grids: list = field(default_factory=lambda: [1024, 2048, 4096])
    epsilon: float = 0.1


@dataclass
class Expected:
    value: float
    tolerance: float = 0.0
    n_sigma: float = 0.0
    provenance: str = "derived"


@dataclass
class Scenario:
    name: str
    model: str
    domain: str
    seed: int
    checks: list = field(default_factory=list)
    model_params: dict = field(default_factory=dict)
    domain_params: dict = field(default_factory=dict)
    test_function: str = "cos-delta"
    test_function_params: dict = field(default_factory=dict)
    santalo_functions: list = field(default_factory=lambda: ["one", "test"])
    p_values: list = field(default_factory=list)
    t_max: Optional[float] = None
    samples: Samples = field(default_factory=Samples)
    tolerances: Tolerances = field(default_factory=Tolerances)
    spectral: SpectralConfig = field(default_factory=SpectralConfig)
    expected: dict = field(default_factory=dict)
    output_dir: Optional[str] = None
    write_csv: bool = True

    def to_dict(self) -> dict:
        """Plain-data echo of the scenario (used in reports)."""
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "expected":
                v = {k: vars(e).copy() for k, e in v.items()}
            elif hasattr(v, "__dataclass_fields__"):
                v = vars(v).copy()
            out[f.name] = v
        return out


_SCALAR_TYPES = {int: (int,), float: (int, float), str: (str,), bool: (bool,)}


def _coerce(where: str, value, annotation):
    """Check a TOML value against a simple field annotation."""
    ann = annotation if isinstance(annotation, str) else getattr(annotation, "__name__", str(annotation))
    ann = ann.replace("Optional[", "").rstrip("]")
    if value is None:
        return None
    if ann in ("int", "float", "str", "bool"):
        py = {"int": int, "float": float, "str": str, "bool": bool}[ann]
        if isinstance(value, bool) and py is not bool:
            raise ConfigError(f"{where}: expected {ann}, got a boolean")
        if not isinstance(value, _SCALAR_TYPES[py]):
            raise ConfigError(f"{where}: expected {ann}, got {type(value).__name__}")
        return float(value) if py is float else value
    if ann == "list":
        if not isinstance(value, list):
            raise ConfigError(f"{where}: expected an array")
        return value
    if ann == "dict":
        if not isinstance(value, dict):
            raise ConfigError(f"{where}: expected a table")
        return value
    raise ConfigError(f"{where}: unsupported field type {ann}")


def _build(cls, data: dict, where: str):
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")
    kwargs = {}
    for name, f in known.items():
        if name not in data:
            continue
        kwargs[name] = _coerce(f"{where}.{name}" if where else name, data[name], f.type)
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{where or 'scenario'}: {exc}") from exc


def parse_scenario(text: str, source: str = "<string>") -> Scenario:
    """Parse and validate scenario text."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    data = dict(data)
    nested = {}
    for key, cls in (("samples", Samples), ("tolerances", Tolerances), ("spectral", SpectralConfig)):
        if key in data:
            if not isinstance(data[key], dict):
                raise ConfigError(f"{source}: [{key}] must be a table")
            try:
                nested[key] = _build(cls, data.pop(key), key)
            except ConfigError as exc:
                raise ConfigError(f"{source}: {exc}") from exc
    expected = {}
    for key, entry in data.pop("expected", {}).items():
        if not isinstance(entry, dict):
            raise ConfigError(f"{source}: expected.{key} must be a table")
        try:
            e = _build(Expected, entry, f"expected.{key}")
        except ConfigError as exc:
            raise ConfigError(f"{source}: {exc}") from exc
        if e.provenance not in PROVENANCE:
            raise ConfigError(f"{source}: expected.{key}.provenance must be one of {PROVENANCE}")
        if "." not in key:
            raise ConfigError(f"{source}: expected key {key!r} must look like 'check.quantity'")
        expected[key] = e
    missing = [k for k in ("name", "model", "domain", "seed") if k not in data]
    if missing:
        raise ConfigError(f"{source}: missing required key(s) {', '.join(missing)}")
    try:
        scenario = _build(Scenario, data, "")
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    for k, v in nested.items():
        setattr(scenario, k, v)
    scenario.expected = expected
    validate(scenario, source)
    return scenario


def validate(scenario: Scenario, source: str = "<scenario>") -> None:
    bad = [c for c in scenario.checks if c not in CHECKS]
    if bad:
        raise ConfigError(f"{source}: checks: unknown check(s) {', '.join(bad)}; known: {', '.join(CHECKS)}")
    if len(set(scenario.checks)) != len(scenario.checks):
        raise ConfigError(f"{source}: checks: each check may appear only once")
    if not (0 <= scenario.seed < 2**64):
        raise ConfigError(f"{source}: seed must be an unsigned 64-bit integer")
    for name in ("ode", "reduction", "spectral", "residual", "n_sigma"):
        if getattr(scenario.tolerances, name) <= 0:
            raise ConfigError(f"{source}: tolerances.{name} must be positive")
    for f in fields(Samples):
        if getattr(scenario.samples, f.name) < 0:
            raise ConfigError(f"{source}: samples.{f.name} must be non-negative")
    for p in scenario.p_values:
        if isinstance(p, bool) or not isinstance(p, (int, float)) or p <= 1:
            raise ConfigError(f"{source}: p_values entries must be numbers > 1")
    if "p-hardy" in scenario.checks and not scenario.p_values:
        raise ConfigError(f"{source}: the p-hardy check needs p_values")
    if len(scenario.spectral.grids) != 3:
        raise ConfigError(f"{source}: spectral.grids must list three grid sizes")
    for key in scenario.expected:
        if key.split(".", 1)[0] not in CHECKS:
            raise ConfigError(f"{source}: expected.{key}: unknown check prefix")


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    return parse_scenario(text, str(path))
