"""Deep-quench continuation over a decreasing schedule of alphas, with limit diagnostics."""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .adjoint import LambdaPair, compute_lambda
from .errors import DomainError, NumericError, SolverError, ValidationError
from .fields import ControlPair, Trajectory, control_norm
from .grid import integrate_bulk, integrate_surface, trace
from .optimize import (
    OptimizationResult,
    anchor_penalty,
    evaluate_cost,
    optimize_P_alpha,
    project_control,
    vi_residual,
)
from .potentials import quench_phi, quench_psi
from .state import energy_diagnostics, regularized_initial_data, solve_state_alpha, solve_state_obstacle

log = logging.getLogger(__name__)

DEFAULT_SCHEDULE = (1.0, 1e-1, 1e-2, 1e-3, 1e-4)
TOL_PROJ = 1e-5
ANCHOR_MODES = ("none", "fixed")


@dataclass(frozen=True)
class QuenchSchedule:
    alphas: tuple = DEFAULT_SCHEDULE

    def __post_init__(self):
        alphas = tuple(float(a) for a in self.alphas)
        object.__setattr__(self, "alphas", alphas)
        if not alphas:
            raise DomainError("schedule is empty")
        if any(not (0.0 < a <= 1.0) for a in alphas):
            raise DomainError(f"schedule values must lie in (0, 1]: {alphas}")
        if any(b >= a for a, b in zip(alphas, alphas[1:])):
            raise DomainError(f"schedule must be strictly decreasing: {alphas}")

    @classmethod
    def geometric(cls, alpha0=1.0, rho=0.1, n=5):
        return cls(tuple(alpha0 * rho**k for k in range(n)))

    def __len__(self):
        return len(self.alphas)

    def __iter__(self):
        return iter(self.alphas)


@dataclass
class QuenchRecord:
    alpha: float
    failed: bool = False
    error: str = ""
    result: Optional[OptimizationResult] = None
    lam: Optional[LambdaPair] = None
    cost: float = np.nan
    adapted_cost: float = np.nan
    dist_to_anchor: float = np.nan
    energy: dict = field(default_factory=dict)
    complementarity: tuple = (np.nan, np.nan)
    concentration: tuple = (np.nan, np.nan)
    projection: Optional["ProjectionCheck"] = None

    @property
    def control(self):
        return None if self.result is None else self.result.control

    @property
    def state(self):
        return None if self.result is None else self.result.state

    @property
    def adjoint(self):
        return None if self.result is None else self.result.adjoint

    @property
    def vi_residual(self):
        return np.nan if self.result is None else self.result.vi_residual


@dataclass
class ObstacleRecord:
    control: ControlPair
    state: Trajectory
    cost: float
    adapted_cost: float
    dist_to_anchor: float
    energy: dict


@dataclass
class QuenchPath:
    schedule: QuenchSchedule
    anchor_mode: str
    records: list
    obstacle: Optional[ObstacleRecord] = None
    anchor: Optional[ControlPair] = None
    # J at the anchor control with the obstacle state; the limit of the adapted costs
    j_anchor: float = np.nan

    def successful(self):
        return [r for r in self.records if not r.failed]


@dataclass
class ProjectionCheck:
    residual: float
    asserted: bool
    passed: Optional[bool]
    reason: str = ""
    fixed_point: dict = field(default_factory=dict)


def default_phi_test(grid, time):
    """``(t / T) cos(2 pi x / lx)`` on the steps ``t_1 .. t_nt``; vanishes at ``t = 0``.

    A spatially constant field would nearly cancel against adjoints driven by
    oscillating targets, so the first Fourier mode is used instead.
    """
    ramp = time.times[1:] / time.t_final
    mode = np.cos(2.0 * np.pi * np.broadcast_to(grid.x, grid.shape) / grid.lx)
    return ramp[:, None, None] * mode


def check_complementarity(rec):
    """``(int int lambda p, int int lambda_Gamma p_Gamma)``; nonnegative node by node."""
    adj = rec.adjoint
    g, tg = adj.grid, adj.time
    q = integrate_bulk(rec.lam.bulk * adj.step_bulk, g).sum()
    s = integrate_surface(rec.lam.surface * adj.step_surface, g).sum()
    return float(tg.dt * q), float(tg.dt * s)


def check_concentration(rec, phi_test, model, tol=1e-12):
    """Integrals of ``lambda (1 - y^2) phi_test`` in Q and on Sigma.

    Also asserts the nodewise identity ``lambda (1 - y^2) = 2 phi(alpha) p``.
    """
    adj, traj = rec.adjoint, rec.state
    g, tg = adj.grid, adj.time
    phi = quench_phi(rec.alpha, model.quench)
    psi = quench_psi(rec.alpha, model.quench)
    one_minus = traj.one_minus_y2[1:]
    lhs = rec.lam.bulk * one_minus
    rhs = 2.0 * phi * adj.step_bulk
    lhs_s = rec.lam.surface * trace(one_minus, g)
    rhs_s = 2.0 * psi * adj.step_surface
    for a, b in ((lhs, rhs), (lhs_s, rhs_s)):
        gap = np.abs(a - b) - tol * np.maximum(1.0, np.abs(b))
        if np.any(gap > 0):
            raise NumericError(f"concentration identity off by {np.max(np.abs(a - b)):.3e}")
    q = integrate_bulk(lhs * phi_test, g).sum()
    s = integrate_surface(lhs_s * trace(phi_test, g), g).sum()
    return float(tg.dt * q), float(tg.dt * s)


def check_projection_formula(rec, bounds, cd, taus=(0.1, 1.0, 10.0)):
    """Distance between the box projection of ``(p, p_Gamma)`` and ``(-beta4 u, -beta5 u_Gamma)``.

    The identity is asserted (against ``TOL_PROJ``) only for a symmetric box
    with ``beta4 = beta5 = 1``; otherwise the residual is only reported.
    """
    res = rec.result
    g, tg = res.state.grid, res.state.time
    fixed_point = {tau: vi_residual(res.control, res.gradient, bounds, g, tg, tau) for tau in taus}
    _, _, _, b4, b5 = cd.beta
    if b4 == 0 or b5 == 0:
        return ProjectionCheck(np.nan, False, None, "skipped: beta4 or beta5 is zero", fixed_point)
    proj = project_control(ControlPair(res.adjoint.step_bulk, res.adjoint.step_surface), bounds)
    target = ControlPair(-b4 * res.control.bulk, -b5 * res.control.surface)
    residual = control_norm(proj - target, g, tg)
    if bounds.is_symmetric() and b4 == 1 and b5 == 1:
        return ProjectionCheck(residual, True, residual <= TOL_PROJ, "", fixed_point)
    return ProjectionCheck(residual, False, None, "reported only: box not symmetric or weights not 1", fixed_point)


def _record_diagnostics(rec, res, cd, bounds, model, anchor, phi_test):
    g, tg = model.grid, model.time
    rec.result = res
    rec.lam = compute_lambda(res.state, res.adjoint, rec.alpha, model)
    rec.cost = res.cost_plain
    rec.adapted_cost = res.cost
    if anchor is not None:
        rec.dist_to_anchor = control_norm(res.control - anchor, g, tg)
    rec.energy = energy_diagnostics(res.state, model)
    rec.complementarity = check_complementarity(rec)
    rec.concentration = check_concentration(rec, phi_test, model)
    rec.projection = check_projection_formula(rec, bounds, cd)


def run_continuation(
    sched,
    d,
    cd,
    bounds,
    model,
    anchor_mode="none",
    anchor=None,
    init=None,
    options=None,
    fail_fast=False,
    phi_test=None,
):
    """Solve the (adapted) problems along ``sched``, warm-starting each from the previous optimum.

    ``anchor_mode="fixed"`` minimizes ``J + 1/2 ||u - anchor||^2`` at every
    alpha. In ``"none"`` mode distances are measured to the optimum at the
    smallest alpha. The last successful optimum is finally re-solved with the
    obstacle system.
    """
    if anchor_mode not in ANCHOR_MODES:
        raise ValueError(f"anchor_mode must be one of {ANCHOR_MODES}, got {anchor_mode!r}")
    g, tg = model.grid, model.time
    d.validate(g)
    bounds.validate()
    if anchor_mode == "fixed":
        if anchor is None:
            raise ValueError("fixed-anchor mode needs an anchor control")
        anchor.check(g, tg)
        if not bounds.contains(anchor):
            raise ValidationError([("A1_violation", "anchor control is not admissible")])
    else:
        anchor = None
    cd.validate(g, tg, allow_zero_weights=anchor is not None)
    if phi_test is None:
        phi_test = default_phi_test(g, tg)
    u = project_control(init if init is not None else ControlPair.zeros(g, tg), bounds)

    records = []
    for alpha in sched:
        rec = QuenchRecord(alpha)
        try:
            res = optimize_P_alpha(alpha, u, d, cd, bounds, model, anchor=anchor, options=options)
            _record_diagnostics(rec, res, cd, bounds, model, anchor, phi_test)
            u = res.control
            log.info("alpha=%g J=%.10g vi=%.3e iters=%d", alpha, rec.adapted_cost, res.vi_residual, res.iterations)
        except (SolverError, NumericError, DomainError) as exc:
            if fail_fast:
                raise
            rec.failed, rec.error = True, f"{type(exc).__name__}: {exc}"
            log.warning("alpha=%g failed: %s", alpha, rec.error)
        records.append(rec)

    path = QuenchPath(sched, anchor_mode, records, anchor=anchor)
    done = path.successful()
    if anchor is None and done:
        ref = done[-1].control
        for rec in done:
            rec.dist_to_anchor = control_norm(rec.control - ref, g, tg)
    if done:
        try:
            path.obstacle = _obstacle_record(done[-1].control, d, cd, model, anchor if anchor is not None else done[-1].control)
        except (SolverError, NumericError) as exc:
            if fail_fast:
                raise
            log.warning("obstacle solve failed: %s", exc)
    if anchor is not None:
        path.j_anchor = evaluate_cost(solve_state_obstacle(anchor, d, model), anchor, cd)
    return path


def _obstacle_record(ctrl, d, cd, model, ref):
    g, tg = model.grid, model.time
    traj = solve_state_obstacle(ctrl, d, model)
    cost = evaluate_cost(traj, ctrl, cd)
    return ObstacleRecord(
        control=ctrl,
        state=traj,
        cost=cost,
        adapted_cost=cost + anchor_penalty(ctrl, ref, g, tg),
        dist_to_anchor=control_norm(ctrl - ref, g, tg),
        energy=energy_diagnostics(traj, model),
    )


@dataclass
class XiMonitor:
    alphas: list
    fields: list
    bulk: np.ndarray
    surface: np.ndarray
    obstacle_bulk: np.ndarray
    obstacle_surface: np.ndarray
    state_errors: list
    subdifferential_min: float
    subdifferential_floor: float

    def relative_errors(self, name="one"):
        k = self.fields.index(name)
        ref = self.obstacle_bulk[k]
        return [abs(v - ref) / abs(ref) if ref != 0 else abs(v) for v in self.bulk[:, k]]


def monitor_xi_convergence(path, fixed_control, d, model, samples=20, seed=0):
    """Pairings of ``phi(alpha) h'(y^alpha)`` with the test fields versus those of ``xi``.

    All states are recomputed at ``fixed_control``. Also evaluates the
    subdifferential inequality ``int int xi (y - z) >= 0`` over ``samples``
    random fields ``|z| <= 1``.
    """
    g, tg = model.grid, model.time
    fixed_control.check(g, tg)
    names = [name for name, _ in g.test_fields()]
    basis = [f for _, f in g.test_fields()]
    obstacle = solve_state_obstacle(fixed_control, d, model)

    def pair(bulk_field, surface_field):
        q = [tg.dt * integrate_bulk(bulk_field * f, g).sum() for f in basis]
        s = [tg.dt * integrate_surface(surface_field * trace(f, g), g).sum() for f in basis]
        return q, s

    rows_q, rows_s, errors = [], [], []
    for alpha in path.schedule:
        traj = solve_state_alpha(fixed_control, regularized_initial_data(d, alpha, model.options), alpha, model)
        th = traj.theta[1:]
        q, s = pair(2.0 * quench_phi(alpha, model.quench) * th, 2.0 * quench_psi(alpha, model.quench) * trace(th, g))
        rows_q.append(q)
        rows_s.append(s)
        diff = traj.bulk[1:] - obstacle.bulk[1:]
        errors.append(float(np.sqrt(tg.dt * integrate_bulk(diff**2, g).sum())))
    ob_q, ob_s = pair(obstacle.xi, obstacle.xi_surface)

    rng = np.random.default_rng(seed)
    worst = np.inf
    y, ys = obstacle.bulk[1:], obstacle.surface[1:]
    for _ in range(samples):
        z = rng.uniform(-1.0, 1.0, y.shape)
        val = integrate_bulk(obstacle.xi * (y - z), g).sum() + integrate_surface(obstacle.xi_surface * (ys - trace(z, g)), g).sum()
        worst = min(worst, float(tg.dt * val))
    measure_q = g.lx * g.height * tg.t_final
    return XiMonitor(
        alphas=list(path.schedule),
        fields=names,
        bulk=np.array(rows_q),
        surface=np.array(rows_s),
        obstacle_bulk=np.array(ob_q),
        obstacle_surface=np.array(ob_s),
        state_errors=errors,
        subdifferential_min=worst,
        subdifferential_floor=-model.options.tol_mult * measure_q,
    )
