"""Forward solvers for the regularized and the double-obstacle state systems.

Both systems are discretized by implicit Euler in time and by a monolithic
finite-difference scheme in space. With nodal weights ``w`` (bulk trapezoid),
``s`` (surface, nonzero on the boundary rows only), ``D = w + s`` and the
symmetric stiffness ``K`` of the bulk-plus-surface Dirichlet form, one step
reads

    D (y_m - y_{m-1}) / dt + K y_m + w F(y_m) + s F_Gamma(y_m) = w u_m + s uG_m

with ``F = phi h' + f2'`` and ``F_Gamma = psi h' + g2'`` (regularized) or
``F = xi + f2'`` with ``xi`` in the subdifferential of the indicator
(obstacle). Testing with a node delta gives the 5-point equation inside and,
on a boundary row, ``dx`` times the dynamic boundary condition plus the
half-cell bulk balance. The half-cell term makes the closure of the normal
derivative second-order accurate while keeping ``K`` symmetric, which is what
lets the adjoint be the plain transpose of the Newton matrices.

Regularized steps are solved in the variable ``theta = artanh(y)``, for which
``h'(y) = 2 theta``. Every iterate is strictly interior by construction.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import DomainError, NumericError, SolverError
from .fields import InitialData, Trajectory, sech2
from .grid import (
    StripGrid,
    TimeGrid,
    apply_bulk_laplacian,
    apply_surface_laplacian,
    bulk_gradient_pairing,
    integrate_bulk,
    integrate_surface,
    surface_gradient_pairing,
)
from .potentials import TOL_ACTIVE, TOL_MULT, PotentialSet, QuenchConfig, quench_phi, quench_psi

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverOptions:
    tol_newton: float = 1e-10
    max_newton: int = 50
    max_halvings: int = 30
    eps_int: float = 1e-14
    max_pdas: int = 100
    pdas_c: float = 1.0
    tol_active: float = TOL_ACTIVE
    tol_mult: float = TOL_MULT
    # regularized runs truncate initial data at level min(alpha, truncation_cap)
    truncation_cap: float = 0.1


@dataclass(frozen=True)
class StateModel:
    grid: StripGrid
    time: TimeGrid
    potentials: PotentialSet = field(default_factory=PotentialSet)
    quench: QuenchConfig = field(default_factory=QuenchConfig)
    options: SolverOptions = field(default_factory=SolverOptions)

    @property
    def weights(self):
        """Flattened ``(w, s, D)`` nodal weights."""
        w = self.grid.bulk_weights.ravel()
        s = self.grid.surface_weights.ravel()
        return w, s, w + s


def truncate_initial_data(d, alpha):
    """Clamp initial data to ``[-1 + alpha, 1 - alpha]``."""
    if not (0.0 < alpha < 1.0):
        raise DomainError(f"truncation level must lie in (0, 1), got {alpha}")
    lo, hi = -1.0 + alpha, 1.0 - alpha
    return InitialData(np.clip(d.bulk, lo, hi), np.clip(d.surface, lo, hi))


def regularized_initial_data(d, alpha, options):
    return truncate_initial_data(d, min(alpha, options.truncation_cap))


def forcing(ctrl, model):
    """Nodal right-hand sides ``w u_m + s uG_m``, shape ``(nt, n_nodes)``."""
    w, s, _ = model.weights
    nodes = np.zeros_like(ctrl.bulk)
    nodes[:, 0, :] = ctrl.surface[:, 0, :]
    nodes[:, -1, :] = ctrl.surface[:, 1, :]
    return ctrl.bulk.reshape(len(ctrl.bulk), -1) * w + nodes.reshape(len(ctrl.bulk), -1) * s


def _check_finite(a, what, step):
    if not np.all(np.isfinite(a)):
        raise NumericError(f"non-finite values in {what}", step=step)


class _AlphaStep:
    """Residual and Jacobian of one regularized implicit Euler step in theta."""

    def __init__(self, model, alpha):
        self.model = model
        self.phi = quench_phi(alpha, model.quench)
        self.psi = quench_psi(alpha, model.quench)
        self.w, self.s, self.D = model.weights
        self.K = model.grid.stiffness
        self.barrier = 2.0 * (self.phi * self.w + self.psi * self.s)
        self.dt = model.time.dt
        pot = model.potentials
        self.f2p, self.g2p, self.f2pp, self.g2pp = pot.f2p, pot.g2p, pot.f2pp, pot.g2pp
        self._pattern = _StiffnessPattern(self.K)

    def residual(self, theta, y_prev, rhs):
        y = np.tanh(theta)
        smooth = self.w * self.f2p(y) + self.s * self.g2p(y)
        return self.D * (y - y_prev) / self.dt + self.K @ y + self.barrier * theta + smooth - rhs

    def smooth_diagonal(self, y):
        return self.D / self.dt + self.w * self.f2pp(y) + self.s * self.g2pp(y)

    def jacobian(self, theta):
        """``(K + diag(a)) diag(sech^2) + diag(barrier)``: d residual / d theta."""
        y = np.tanh(theta)
        S = sech2(theta)
        return self._pattern.fill(S, self.smooth_diagonal(y) * S + self.barrier), S


class _StiffnessPattern:
    """CSC matrices ``K diag(col_scale) + diag(diag_add)`` on the pattern of ``K``."""

    def __init__(self, K):
        k = (K + sp.identity(K.shape[0])).tocsc()
        k.sort_indices()
        self.indices, self.indptr = k.indices, k.indptr
        base = K.tocsc()
        # re-read K's values onto the pattern that is guaranteed to hold the diagonal
        k.data[:] = 0.0
        k = k + base
        k.sort_indices()
        assert np.array_equal(k.indices, self.indices)
        self.data = k.data.copy()
        self.cols = np.repeat(np.arange(K.shape[0]), np.diff(self.indptr))
        self.diag = np.flatnonzero(self.indices == self.cols)
        self.shape = K.shape

    def fill(self, col_scale, diag_add):
        data = self.data * col_scale[self.cols]
        data[self.diag] += diag_add
        return sp.csc_matrix((data, self.indices, self.indptr), shape=self.shape)


def solve_state_alpha(ctrl, d, alpha, model):
    """Regularized state trajectory for control ``ctrl`` and initial data ``d``.

    ``d`` must be strictly inside (-1, 1); apply :func:`truncate_initial_data`
    (or :func:`regularized_initial_data`) first.
    """
    g, tg, opts = model.grid, model.time, model.options
    ctrl.check(g, tg)
    if np.any(~(np.abs(d.bulk) < 1.0)):
        raise DomainError("initial data must lie strictly inside (-1, 1); truncate first")
    step = _AlphaStep(model, alpha)
    rhs_all = forcing(ctrl, model)
    theta = np.arctanh(d.bulk.ravel())
    thetas = [theta.copy()]
    total_its = 0
    for m in range(1, tg.nt + 1):
        y_prev = np.tanh(theta)
        theta, its = _newton(step, theta, y_prev, rhs_all[m - 1], opts, m)
        total_its += its
        thetas.append(theta.copy())
    thetas = np.array(thetas).reshape((tg.nt + 1,) + g.shape)
    bulk = np.tanh(thetas)
    bulk[0] = d.bulk
    return Trajectory(g, tg, bulk, alpha=float(alpha), theta=thetas, newton_iterations=total_its)


def _newton(step, theta, y_prev, rhs, opts, m):
    D = step.D
    r = step.residual(theta, y_prev, rhs)
    res = np.max(np.abs(r / D))
    lu = None
    for it in range(opts.max_newton + 1):
        _check_finite(r, "Newton residual", m)
        if res <= opts.tol_newton:
            if lu is not None:
                # one extra chord step on the last factorization, nearly free
                trial = theta - lu.solve(r)
                r_t = step.residual(trial, y_prev, rhs)
                if np.all(np.isfinite(r_t)) and np.max(np.abs(r_t / D)) <= res:
                    theta = trial
            return theta, it
        if it == opts.max_newton:
            break
        jac, _ = step.jacobian(theta)
        try:
            lu = splu(jac, permc_spec="MMD_AT_PLUS_A")
        except RuntimeError as exc:
            raise NumericError(f"singular Newton matrix: {exc}", step=m) from exc
        delta = -lu.solve(r)
        _check_finite(delta, "Newton update", m)
        t = 1.0
        for _ in range(opts.max_halvings + 1):
            trial = theta + t * delta
            r_t = step.residual(trial, y_prev, rhs)
            res_t = np.max(np.abs(r_t / D)) if np.all(np.isfinite(r_t)) else np.inf
            if res_t < res or res_t <= opts.tol_newton:
                break
            t *= 0.5
        else:
            raise SolverError(f"Newton step-halving failed at residual {res:.3e}", step=m)
        theta, r, res = trial, r_t, res_t
    raise SolverError(f"Newton did not converge in {opts.max_newton} iterations (residual {res:.3e})", step=m)


def solve_state_obstacle(ctrl, d, model):
    """Double-obstacle trajectory and multipliers by a primal-dual active set method.

    At each step the complementarity condition
    ``nu = max(0, nu + c (y - 1)) + min(0, nu + c (y + 1))`` is solved jointly
    with the discrete equations; ``nu`` is the multiplier per unit of nodal
    mass ``D``. On the boundary rows the bulk and surface selections are taken
    equal, ``xi = xi_Gamma = nu``; only their weighted sum is determined by the
    discrete system. The constant ``c`` of the options acts on ``dt * nu``.
    """
    g, tg, opts = model.grid, model.time, model.options
    ctrl.check(g, tg)
    d.validate(g)
    w, s, D = model.weights
    K = g.stiffness
    dt = tg.dt
    pot = model.potentials
    rhs_all = forcing(ctrl, model)
    y = d.bulk.ravel().copy()
    states, mults = [y.copy()], []
    total_its = 0
    for m in range(1, tg.nt + 1):
        y_prev = y.copy()
        rhs = rhs_all[m - 1]

        def resid(v):
            return D * (v - y_prev) / dt + K @ v + w * pot.f2p(v) + s * pot.g2p(v) - rhs

        y, nu, its = _pdas(resid, K, D, w, s, pot, dt, y_prev, opts, m)
        total_its += its
        if np.any(np.abs(y) > 1.0 + opts.tol_active):
            raise NumericError("obstacle state leaves [-1, 1] after pinning", step=m)
        states.append(y.copy())
        mults.append(nu)
    bulk = np.array(states).reshape((tg.nt + 1,) + g.shape)
    xi = np.array(mults).reshape((tg.nt,) + g.shape)
    xi_surface = np.stack([xi[:, 0, :], xi[:, -1, :]], axis=1)
    return Trajectory(g, tg, bulk, xi=xi, xi_surface=xi_surface, newton_iterations=total_its)


def _pdas(resid, K, D, w, s, pot, dt, y, opts, m):
    # the complementarity function sees dt * nu, the multiplier in the scaling
    # where the step matrix is I + dt A; nu itself is O(|u|) and with c = 1
    # nodes resting on one bound would be flipped to the other
    c = opts.pdas_c / dt
    n = y.size
    nu = np.zeros(n)
    for it in range(1, opts.max_pdas + 1):
        upper = nu + c * (y - 1.0) > 0.0
        lower = nu + c * (y + 1.0) < 0.0
        inactive = ~(upper | lower)
        a = sp.diags(D / dt + w * pot.f2pp(y) + s * pot.g2pp(y))
        A = (K + a).tocsr()
        y_new = y.copy()
        y_new[upper] = 1.0
        y_new[lower] = -1.0
        if inactive.any():
            r = resid(y)
            rhs = -r - A @ (y_new - y)
            idx = np.flatnonzero(inactive)
            sub = A[idx][:, idx].tocsc()
            try:
                step = splu(sub).solve(rhs[idx])
            except RuntimeError as exc:
                raise NumericError(f"singular active-set system: {exc}", step=m) from exc
            y_new[idx] = y[idx] + step
        _check_finite(y_new, "active-set iterate", m)
        r_new = resid(y_new)
        nu = np.zeros(n)
        nu[~inactive] = -r_new[~inactive] / D[~inactive]
        y = y_new
        res = np.max(np.abs(r_new[inactive] / D[inactive])) if inactive.any() else 0.0
        same = np.array_equal(nu + c * (y - 1.0) > 0.0, upper) and np.array_equal(nu + c * (y + 1.0) < 0.0, lower)
        if same and res <= opts.tol_newton:
            return y, nu, it
    raise SolverError(f"active-set iteration did not settle in {opts.max_pdas} iterations", step=m)


def multiplier_nodes(traj, model):
    """Nodal multiplier term ``w xi + s xi_Gamma``, shape ``(nt, n_nodes)``."""
    w, s, _ = model.weights
    nt = model.time.nt
    if traj.is_obstacle:
        xi = traj.xi.reshape(nt, -1)
        xs = np.zeros((nt,) + model.grid.shape)
        xs[:, 0, :] = traj.xi_surface[:, 0, :]
        xs[:, -1, :] = traj.xi_surface[:, 1, :]
        return w * xi + s * xs.reshape(nt, -1)
    phi = quench_phi(traj.alpha, model.quench)
    psi = quench_psi(traj.alpha, model.quench)
    theta = traj.theta[1:].reshape(nt, -1)
    return 2.0 * (phi * w + psi * s) * theta


def step_residuals(traj, ctrl, model, multipliers=None):
    """Per-step nodal residuals of the discrete weak form, shape ``(nt, n_nodes)``.

    Entry ``n`` of step ``m`` is the weak form tested with the nodal hat
    function at ``n``; the stiffness term is the exact discrete counterpart of
    ``int grad y . grad z + int_Gamma grad_Gamma y . grad_Gamma z``.
    """
    g, tg = model.grid, model.time
    w, s, D = model.weights
    pot = model.potentials
    y = traj.bulk.reshape(tg.nt + 1, -1)
    if multipliers is None:
        mult = multiplier_nodes(traj, model)
    else:
        xi, xi_s = multipliers
        xs = np.zeros((tg.nt,) + g.shape)
        xs[:, 0, :] = xi_s[:, 0, :]
        xs[:, -1, :] = xi_s[:, 1, :]
        mult = w * np.reshape(xi, (tg.nt, -1)) + s * xs.reshape(tg.nt, -1)
    yn = y[1:]
    stiff = (g.stiffness @ yn.T).T
    return D * (yn - y[:-1]) / tg.dt + stiff + w * pot.f2p(yn) + s * pot.g2p(yn) + mult - forcing(ctrl, model)


def weak_form_residual(traj, ctrl, model, multipliers=None):
    """Largest weak-form residual over the fixed test fields and all time steps."""
    r = step_residuals(traj, ctrl, model, multipliers)
    basis = np.array([f.ravel() for _, f in model.grid.test_fields()])
    return float(np.max(np.abs(r @ basis.T))) if r.size else 0.0


def energy_diagnostics(traj, model):
    """Discrete counterparts of the norms bounded uniformly in alpha.

    For obstacle trajectories the potential terms report the multipliers.
    """
    g, tg = model.grid, model.time
    dt = tg.dt
    y = traj.bulk
    ys = traj.surface
    dy_dt = np.diff(y, axis=0) / dt
    dys_dt = np.diff(ys, axis=0) / dt
    v_norm = np.sqrt(integrate_bulk(y**2, g) + bulk_gradient_pairing(y, y, g))
    vs_norm = np.sqrt(integrate_surface(ys**2, g) + surface_gradient_pairing(ys, ys, g))
    lap = apply_bulk_laplacian(y[1:], g)
    lap_s = apply_surface_laplacian(ys[1:], g)
    if traj.is_obstacle:
        pot_b, pot_s = traj.xi, traj.xi_surface
    else:
        phi = quench_phi(traj.alpha, model.quench)
        psi = quench_psi(traj.alpha, model.quench)
        pot_b = 2.0 * phi * traj.theta[1:]
        th = traj.theta[1:]
        pot_s = 2.0 * psi * np.stack([th[:, 0, :], th[:, -1, :]], axis=1)

    def l2q(f):
        return float(np.sqrt(dt * integrate_bulk(f**2, g).sum()))

    def l2s(f):
        return float(np.sqrt(dt * integrate_surface(f**2, g).sum()))

    return {
        "dt_bulk": l2q(dy_dt),
        "sup_v_bulk": float(v_norm.max()),
        "lap_bulk": l2q(lap),
        "dt_surface": l2s(dys_dt),
        "sup_v_surface": float(vs_norm.max()),
        "lap_surface": l2s(lap_s),
        "potential_bulk": l2q(pot_b),
        "potential_surface": l2s(pot_s),
    }
