import json

import numpy as np
import pytest

from cavity_hom.dynamics import TimeGrid, simulate
from cavity_hom.models import GaussianDrive, LambdaParams, TwoLevelParams, build_lambda, build_two_level

from oracles import FROZEN_PATH

DRIVE = GaussianDrive(6.0, 15.0, 5.0)
REFERENCE = LambdaParams(g=5.0, kappa=1.25, gamma=1.0)
INTERFERED = LambdaParams(g=4.0, kappa=4.5, gamma=1.0)

_ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def frozen():
    return json.loads(FROZEN_PATH.read_text())


@pytest.fixture(scope="session")
def grid():
    return TimeGrid()


@pytest.fixture(scope="session")
def two_level_pure(grid):
    return simulate(build_two_level(TwoLevelParams()), grid)


@pytest.fixture(scope="session")
def lambda_pure(grid):
    return simulate(build_lambda(LambdaParams(), DRIVE), grid)


@pytest.fixture(scope="session")
def reference_emission(grid):
    return simulate(build_lambda(REFERENCE, DRIVE), grid)


@pytest.fixture(scope="session")
def interfered_emission(grid):
    return simulate(build_lambda(INTERFERED, DRIVE), grid)


@pytest.fixture
def acceptance():
    """Record one acceptance line: ``acceptance(n, passed, detail)``."""

    def record(n: int, passed: bool, detail: str):
        _ACCEPTANCE[n] = (bool(passed), detail)
        print(f"criterion {n}: {'PASS' if passed else 'FAIL'}  {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")


def rng(seed=0):
    return np.random.default_rng(seed)
