import numpy as np
import pytest

from deepquench import (
    ControlBounds,
    ControlPair,
    CostData,
    InitialData,
    StateModel,
    StripGrid,
    TimeGrid,
)
from deepquench.grid import trace

ACCEPTANCE_LINES = {}


def record_criterion(number, passed, detail):
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])


def make_problem(nx=16, ny=4, nt=10, amp_target=1.2, amp_y0=0.5, beta=(1, 1, 1, 1, 1)):
    """A small instance of the default experiment: cosine targets, symmetric unit box."""
    g = StripGrid(nx, ny)
    tg = TimeGrid(1.0, nt)
    model = StateModel(g, tg)
    xx = np.broadcast_to(g.x, g.shape)
    d = InitialData.from_bulk(amp_y0 * np.cos(xx), g)
    z_t = amp_target * np.cos(xx)
    z_q = np.tile(z_t, (nt, 1, 1))
    cd = CostData(beta, z_q, trace(z_q, g), z_t, trace(z_t, g))
    bounds = ControlBounds.box(g, tg)
    return model, d, cd, bounds


def random_control(model, rng, low=-1.0, high=1.0):
    g, tg = model.grid, model.time
    return ControlPair(
        rng.uniform(low, high, (tg.nt,) + g.shape),
        rng.uniform(low, high, (tg.nt,) + g.surface_shape),
    )


@pytest.fixture
def small():
    return make_problem()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
