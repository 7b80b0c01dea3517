import numpy as np
import pytest

from ppnfolio.synthetic import bundled_panel, panel_from_closes


@pytest.fixture(scope="session")
def bundled():
    return bundled_panel()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def panel_from_relatives(rel_rows):
    """Panel whose consecutive closes reproduce the given risky relatives (rows = periods)."""
    rel = np.asarray(rel_rows, dtype=np.float64).T  # (m, T)
    closes = np.concatenate([np.ones((rel.shape[0], 1)), np.cumprod(rel, axis=1)], axis=1)
    return panel_from_closes(closes)


ACCEPTANCE = []


@pytest.fixture
def criterion():
    """Record one acceptance verdict line; the lines are printed in the terminal summary."""
    def record(number, title, passed, detail):
        line = f"CRITERION {number} {'PASS' if passed else 'FAIL'}: {title} | {detail}"
        ACCEPTANCE.append(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda l: int(l.split()[1])):
            terminalreporter.write_line(line)
