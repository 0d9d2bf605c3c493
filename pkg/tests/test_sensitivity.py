import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_problem, random_control
from deepquench import ControlPair
from deepquench.errors import GridError
from deepquench.grid import integrate_bulk
from deepquench.sensitivity import solve_linearized
from deepquench.state import regularized_initial_data, solve_state_alpha, solve_state_obstacle

ALPHA = 0.1


@pytest.fixture(scope="module")
def base():
    model, d, _, _ = make_problem(nx=12, ny=3, nt=8)
    d = regularized_initial_data(d, ALPHA, model.options)
    u = random_control(model, np.random.default_rng(7))
    return model, d, u, solve_state_alpha(u, d, ALPHA, model)


def l2q(f, model):
    return np.sqrt(model.time.dt * integrate_bulk(f[1:] ** 2, model.grid).sum())


def test_zero_direction(base):
    model, _, _, traj = base
    out = solve_linearized(traj, ControlPair.zeros(model.grid, model.time), ALPHA, model)
    assert np.all(out.bulk == 0.0)


def test_rejects_foreign_bases(base):
    model, d, u, traj = base
    k = ControlPair.zeros(model.grid, model.time)
    with pytest.raises(GridError):
        solve_linearized(traj, k, 0.5, model)
    with pytest.raises(GridError):
        solve_linearized(solve_state_obstacle(u, d, model), k, ALPHA, model)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-3, 3))
def test_linearity(base, seed, c):
    model, _, _, traj = base
    rng = np.random.default_rng(seed)
    k1, k2 = random_control(model, rng), random_control(model, rng)
    a = solve_linearized(traj, k1, ALPHA, model).bulk
    b = solve_linearized(traj, k2, ALPHA, model).bulk
    ab = solve_linearized(traj, k1 * c + k2, ALPHA, model).bulk
    assert np.allclose(ab, c * a + b, atol=1e-10 * (1 + abs(c)))


def test_taylor_remainder_is_second_order(base):
    model, d, u, traj = base
    k = random_control(model, np.random.default_rng(3))
    ydot = solve_linearized(traj, k, ALPHA, model).bulk
    rem = []
    for eps in (1e-2, 1e-3, 1e-4):
        y_eps = solve_state_alpha(u + k * eps, d, ALPHA, model).bulk
        rem.append(l2q(y_eps - traj.bulk - eps * ydot, model))
    orders = np.log10(np.array(rem[:-1]) / np.array(rem[1:]))
    assert np.all(orders >= 1.9), orders
