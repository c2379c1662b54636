from fractions import Fraction

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fractal_energy.measure import GridMeasure

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_measure(rng, n_max=200, dim=1, span=64, step=Fraction(1, 64)):
    """Random masses on at most ``n_max`` distinct lattice points."""
    n = int(rng.integers(1, n_max + 1))
    pts = rng.integers(-span, span + 1, size=(n, dim))
    pts = np.unique(pts, axis=0)
    masses = rng.random(pts.shape[0])
    return GridMeasure(dim, step, (0,) * dim, pts, masses / masses.sum())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


@pytest.fixture
def verdict(capsys):
    """Record one acceptance line and fail the test when the criterion fails."""

    def record(num, title, ok, detail, seconds):
        line = f"{'PASS' if ok else 'FAIL'} [{num:2d}] {title}: {detail} ({seconds:.1f} s)"
        ACCEPTANCE_LINES.append((num, line))
        with capsys.disabled():
            print("\n" + line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
