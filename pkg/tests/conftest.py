import functools

import pytest
from hypothesis import settings

from lzkit import analysis
from lzkit.model import SECOND_PARAMS, SSH_PARAMS
from lzkit.propagator import SolverSettings

# reproducible property runs
settings.register_profile("lzkit", derandomize=True)
settings.load_profile("lzkit")


@functools.lru_cache(maxsize=None)
def solved(params, settings=SolverSettings()):
    """Cached :func:`analysis.solve_point`; both arguments are frozen dataclasses."""
    return analysis.solve_point(params, settings)


@pytest.fixture(scope="session")
def ssh_sweep():
    return analysis.run_sweep(SSH_PARAMS)


@pytest.fixture(scope="session")
def second_sweep():
    return analysis.run_sweep(SECOND_PARAMS)


#: ``(criterion, passed, detail)`` lines filled in by test_acceptance.py
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n, ok, detail in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
