"""Shared fixtures and the acceptance summary printed at the end of a run."""

from __future__ import annotations

import numpy as np
import pytest

from srlab.geometries import chf, heisenberg, martinet, qhf, round_sphere

# (criterion number, description, passed, detail) recorded by tests/test_acceptance.py
ACCEPTANCE: list[tuple[int, str, bool, str]] = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def chf1():
    return chf(1)


@pytest.fixture(scope="session")
def qhf1():
    return qhf(1)


@pytest.fixture(scope="session")
def sphere2():
    return round_sphere(2)


@pytest.fixture(scope="session")
def heis():
    return heisenberg(1)


@pytest.fixture(scope="session")
def mart():
    return martinet()


def pytest_terminal_summary(terminalreporter):
    """One line per criterion; criteria checked by several tests are combined."""
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    grouped: dict[int, list] = {}
    for number, text, passed, detail in ACCEPTANCE:
        grouped.setdefault(number, []).append((text, passed, detail))
    for number in sorted(grouped):
        rows = grouped[number]
        passed = all(r[1] for r in rows)
        text = rows[0][0] if len(rows) == 1 else "; ".join(r[0] for r in rows)
        detail = "; ".join(r[2] for r in rows)
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] criterion {number:2d}: {text} -- {detail}")
