import numpy as np
import pytest

from mc4nls.grid import make_grid
from mc4nls.ground_state import solve_ground_state

# filled by tests/test_acceptance.py, printed at the end of the session
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def ground_state_1d():
    return solve_ground_state(1, make_grid(1, 1024, 20.0))


@pytest.fixture
def run_root(tmp_path, monkeypatch):
    monkeypatch.setenv("MC4NLS_OUTPUT_ROOT", str(tmp_path))
    return tmp_path
