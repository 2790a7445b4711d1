from __future__ import annotations

import pytest
from hypothesis import HealthCheck, settings

from powerpolicy.constraints import default_constraints
from powerpolicy.device import default_profile

settings.register_profile("repo", deadline=None, max_examples=150,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


@pytest.fixture(scope="session")
def caps():
    return default_profile()


@pytest.fixture(scope="session")
def pack():
    return default_constraints()


def pytest_terminal_summary(terminalreporter):
    from verdicts import LINES
    if LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(LINES):
            terminalreporter.write_line(LINES[n])
