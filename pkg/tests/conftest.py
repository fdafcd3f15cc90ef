import functools
import sys
import time
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hdlssd import optimizers
from hdlssd.optimizers import dwd as _dwd
from hdlssd.optimizers import svm as _svm

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

SESSION_START = time.perf_counter()

# acceptance lines collected by tests/test_acceptance.py
ACCEPTANCE_LINES = []

# (kind, certificate report) for every solver call that returned a solution
SOLVES = []


def _record_solves(module, name, kind):
    inner = getattr(module, name)

    @functools.wraps(inner)
    def wrapper(*args, **kwargs):
        sol = inner(*args, **kwargs)
        ds = args[0] if args else kwargs["ds"]
        SOLVES.append((kind, optimizers.certificate(sol, ds)))
        return sol

    setattr(module, name, wrapper)
    return wrapper


# installed before the test modules import the solvers
optimizers.solve_dwd = _record_solves(_dwd, "solve_dwd", "dwd")
optimizers.solve_svm_dual = _record_solves(_svm, "solve_svm_dual", "svm")


def pytest_collection_modifyitems(items):
    # acceptance runs last so its certificate check sees the whole suite
    items.sort(key=lambda item: item.path.name == "test_acceptance.py")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def solve_log():
    return SOLVES


@pytest.fixture(scope="session")
def session_start():
    return SESSION_START


@pytest.fixture(scope="session")
def acceptance():
    """``report(k, ok, detail)``: record and print one criterion line, then assert."""

    def report(k, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {k}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return report
