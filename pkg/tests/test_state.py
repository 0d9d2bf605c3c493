import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from deepquench import ControlPair, InitialData, StateModel, StripGrid, TimeGrid
from deepquench.errors import DomainError, ValidationError
from deepquench.potentials import PotentialSet, subdifferential_violations
from deepquench.state import (
    energy_diagnostics,
    regularized_initial_data,
    solve_state_alpha,
    solve_state_obstacle,
    truncate_initial_data,
    weak_form_residual,
)

G = StripGrid(8, 3)


def model(nt=8, g=G, **kw):
    return StateModel(g, TimeGrid(1.0, nt), **kw)


def const_data(g, v):
    return InitialData.from_bulk(np.full(g.shape, float(v)), g)


def test_truncation_examples():
    d = truncate_initial_data(const_data(G, 1.0), 0.1)
    assert np.allclose(d.bulk, 0.9) and np.allclose(d.surface, 0.9)
    z = const_data(G, 0.0)
    assert np.array_equal(truncate_initial_data(z, 0.3).bulk, z.bulk)
    with pytest.raises(DomainError):
        truncate_initial_data(z, 1.0)


@settings(max_examples=40, deadline=None)
@given(st.floats(-1, 1), st.floats(1e-6, 0.99))
def test_truncation_moves_at_most_alpha(v, alpha):
    rng = np.random.default_rng(abs(hash(v)) % 2**32)
    d = InitialData.from_bulk(np.clip(v + 0.1 * rng.normal(size=G.shape), -1, 1), G)
    t = truncate_initial_data(d, alpha)
    assert np.max(np.abs(t.bulk - d.bulk)) <= alpha + 1e-15
    assert np.max(np.abs(t.bulk)) <= 1 - alpha + 1e-15


def test_zero_is_a_fixed_point():
    m = model(potentials=PotentialSet.from_coefficients([0, -1], [0.0]))
    traj = solve_state_alpha(ControlPair.zeros(G, m.time), const_data(G, 0.0), 0.5, m)
    assert np.all(traj.bulk == 0.0)


def test_regularized_requires_interior_data():
    m = model()
    with pytest.raises(DomainError):
        solve_state_alpha(ControlPair.zeros(G, m.time), const_data(G, 1.0), 0.5, m)


def _ode_oracle(y0, t_final):
    # y' = -(2 artanh y - y); spatial terms vanish on homogeneous states
    sol = solve_ivp(lambda t, y: -(2 * np.arctanh(y) - y), (0, t_final), [y0], rtol=1e-12, atol=1e-14, dense_output=True)
    return sol.sol


def test_homogeneous_state_matches_ode_to_first_order():
    oracle = _ode_oracle(0.5, 1.0)
    errs = []
    for nt in (20, 40, 80):
        m = model(nt)
        traj = solve_state_alpha(ControlPair.zeros(G, m.time), const_data(G, 0.5), 1.0, m)
        assert np.ptp(traj.bulk, axis=(1, 2)).max() < 1e-12
        errs.append(np.max(np.abs(traj.bulk[:, 0, 0] - oracle(m.time.times)[0])))
    for a, b in zip(errs, errs[1:]):
        assert 1.8 < a / b < 2.2
    assert errs[0] <= 0.2 * m.time.t_final / 20


def test_strict_interior_under_max_forcing():
    m = model(10)
    ctrl = ControlPair.constant(G, m.time, 1.0, 1.0)
    d = regularized_initial_data(const_data(G, 0.9), 0.01, m.options)
    traj = solve_state_alpha(ctrl, d, 0.01, m)
    assert np.all(traj.gap[1:] > 0)
    assert np.all(np.abs(traj.bulk) <= 1.0)
    assert np.array_equal(traj.surface[:, 0], traj.bulk[:, 0])


def test_obstacle_stationary_examples():
    m = model(5)
    top = solve_state_obstacle(ControlPair.zeros(G, m.time), const_data(G, 1.0), m)
    assert np.allclose(top.bulk, 1.0)
    assert np.allclose(top.xi, 1.0, atol=1e-10) and np.allclose(top.xi_surface, 1.0, atol=1e-10)
    zero = solve_state_obstacle(ControlPair.zeros(G, m.time), const_data(G, 0.0), m)
    assert np.allclose(zero.bulk, 0.0) and np.allclose(zero.xi, 0.0)


def test_obstacle_rejects_inadmissible_data():
    m = model(4)
    with pytest.raises(ValidationError):
        solve_state_obstacle(ControlPair.zeros(G, m.time), const_data(G, 1.5), m)


def test_regularized_states_approach_obstacle_state():
    m = model(10)
    ctrl = ControlPair.constant(G, m.time, 2.0, 2.0)
    d = const_data(G, 0.0)
    ob = solve_state_obstacle(ctrl, d, m)
    errs = [np.max(np.abs(solve_state_alpha(ctrl, d, a, m).bulk - ob.bulk)) for a in (1e-1, 1e-2, 1e-3)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 2e-3


def test_weak_form_residual_examples():
    m = model(6)
    ctrl = ControlPair.constant(G, m.time, 2.0, -0.5)
    ob = solve_state_obstacle(ctrl, const_data(G, 0.2), m)
    tol_weak = 1e-6
    assert weak_form_residual(ob, ctrl, m) <= tol_weak
    bad = ob.bulk.copy()
    bad[3, 2, 4] += 0.1
    from deepquench.fields import Trajectory

    perturbed = Trajectory(G, m.time, bad, xi=ob.xi, xi_surface=ob.xi_surface)
    assert weak_form_residual(perturbed, ctrl, m) > 10 * tol_weak
    zero = Trajectory(G, m.time, np.zeros((7,) + G.shape), xi=np.zeros((6,) + G.shape), xi_surface=np.zeros((6, 2, G.nx)))
    assert weak_form_residual(zero, ControlPair.zeros(G, m.time), m) <= 1e-12


def test_regularized_output_satisfies_weak_form():
    m = model(6)
    ctrl = ControlPair.constant(G, m.time, 0.7, -0.3)
    traj = solve_state_alpha(ctrl, const_data(G, 0.1), 0.05, m)
    assert weak_form_residual(traj, ctrl, m) < 1e-8


def test_energy_of_zero_trajectory_vanishes():
    m = model(4)
    traj = solve_state_obstacle(ControlPair.zeros(G, m.time), const_data(G, 0.0), m)
    assert all(v == 0.0 for v in energy_diagnostics(traj, m).values())


def test_energy_bounded_along_alpha_sweep():
    m = model(10)
    ctrl = ControlPair.constant(G, m.time, 2.0, 2.0)
    d = const_data(G, 0.0)
    rows = [energy_diagnostics(solve_state_alpha(ctrl, d, a, m), m) for a in (1e-1, 1e-2, 1e-3)]
    for key in rows[0]:
        vals = [r[key] for r in rows]
        assert max(vals) <= 1.5 * max(vals[0], 1e-12), key


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([1.0, 0.1, 1e-3]))
def test_random_controls_keep_states_inside(seed, alpha):
    rng = np.random.default_rng(seed)
    m = model(4)
    ctrl = ControlPair(rng.uniform(-3, 3, (4,) + G.shape), rng.uniform(-3, 3, (4, 2, G.nx)))
    d = InitialData.from_bulk(rng.uniform(-1, 1, G.shape), G)
    traj = solve_state_alpha(ctrl, regularized_initial_data(d, alpha, m.options), alpha, m)
    # 1 - |y| can underflow in double precision; its logarithm stays finite
    assert np.all(np.isfinite(traj.theta)) and np.all(traj.log_gap < 0)
    ob = solve_state_obstacle(ctrl, d, m)
    assert np.all(np.abs(ob.bulk) <= 1 + m.options.tol_active)
    assert not subdifferential_violations(ob.bulk[1:], ob.xi).any()
