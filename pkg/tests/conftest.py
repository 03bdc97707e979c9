"""Shared fixtures and the acceptance-criteria summary hook."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from horoflow import AmbientCurvature, FlowParams

settings.register_profile(
    "numeric",
    deadline=None,
    max_examples=50,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.filter_too_much],
)
settings.load_profile("numeric")

# One line per acceptance criterion, emitted in the terminal summary so the
# pass/fail verdicts survive output capture.
ACCEPTANCE_LINES: list[tuple[int, str]] = []


def record_acceptance(index: int, ok: bool, detail: str) -> bool:
    ACCEPTANCE_LINES.append(
        (index, f"criterion {index:2d} {'PASS' if ok else 'FAIL'}: {detail}")
    )
    return ok


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _idx, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def ac() -> AmbientCurvature:
    return AmbientCurvature(kappa=-1.0)


@pytest.fixture(scope="session")
def params_n2m1(ac) -> FlowParams:
    return FlowParams(n=2, m=1, beta=1.0, ac=ac)


@pytest.fixture(scope="session")
def params_n2m2(ac) -> FlowParams:
    return FlowParams(n=2, m=2, beta=1.0, ac=ac)


@pytest.fixture(scope="session")
def params_n3m2(ac) -> FlowParams:
    return FlowParams(n=3, m=2, beta=1.0, ac=ac)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20260817)
