import math

import numpy as np
import pytest

from whitney_walk.body import AxisBox, HPolytope, LpBall


def random_polytope(rng, n, m=None):
    """Random bounded polytope containing a ball around the origin."""
    m = m or 3 * n + 2
    A = rng.normal(size=(m, n))
    A /= np.linalg.norm(A, axis=1)[:, None]
    b = rng.uniform(0.3, 1.0, size=m)
    # close it off with a loose box so it is always bounded
    A = np.vstack([A, np.eye(n), -np.eye(n)])
    b = np.concatenate([b, np.full(2 * n, 1.5)])
    return HPolytope(A, b)


@pytest.fixture
def square():
    return LpBall(np.zeros(2), 0.4, math.inf)


@pytest.fixture
def unit_box():
    return AxisBox([-1.0, -1.0], [1.0, 1.0])


@pytest.fixture
def simplex2():
    return HPolytope([[1.0, 1.0], [-1.0, 0.0], [0.0, -1.0]], [1.0, 0.0, 0.0])


_CRITERIA = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_CRITERIA] = {}


@pytest.fixture
def criterion(request):
    """``record(k, ok, detail)`` stores a PASS/FAIL line for acceptance criterion ``k``."""

    def record(k, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {k}: {detail}"
        request.config.stash[_CRITERIA][k] = line
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_CRITERIA, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for k in sorted(lines):
            terminalreporter.write_line(lines[k])
