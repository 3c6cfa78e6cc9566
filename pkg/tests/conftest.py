import numpy as np
import pytest
from hypothesis import settings

# numba compiles on first call; per-example deadlines would measure that
settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture(params=["numba", "numpy"])
def backend(request, monkeypatch):
    """Run a test once per kernel backend."""
    if request.param == "numpy":
        monkeypatch.setenv("PREINT_DISABLE_NUMBA", "1")
    else:
        monkeypatch.delenv("PREINT_DISABLE_NUMBA", raising=False)
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# acceptance lines, repeated in the terminal summary so they survive capture
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
