import numpy as np
import pytest

from commuting import SpatialUnit, StudyArea
from commuting.synthetic import ensure_room


def make_area(s_out, s_in, res_xy=None, out_xy=None, areas=None, distances=None):
    """Small study area; residence units come first in ``s_in``."""
    n = len(s_out)
    m = len(s_in) - n
    res_xy = res_xy if res_xy is not None else [(1000.0 * k, 0.0) for k in range(n)]
    out_xy = out_xy if out_xy is not None else [(1000.0 * (n + k), 0.0) for k in range(m)]
    areas = areas if areas is not None else [1.0] * n
    res = [SpatialUnit(f"r{k}", *res_xy[k], areas[k], int(s_in[k]), int(s_out[k]))
           for k in range(n)]
    out = [SpatialUnit(f"o{k}", *out_xy[k], None, int(s_in[n + k]))
           for k in range(m)]
    return StudyArea(res, out, "projected", distances)


def random_area(rng, n, m, total):
    """Random feasible instance with exclude-self slack."""
    xy = rng.uniform(0, 50_000, size=(n + m, 2))
    s_out = rng.multinomial(total, rng.dirichlet(np.ones(n)))
    cap = total + int(rng.integers(total // 10 + 1, total + 2))
    s_in = rng.multinomial(cap, rng.dirichlet(np.ones(n + m)))
    ensure_room(s_in, s_out)
    return make_area(s_out, s_in, [tuple(p) for p in xy[:n]], [tuple(p) for p in xy[n:]])


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
