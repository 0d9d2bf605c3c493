"""Cost functionals, reduced gradients and projected-gradient optimization."""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .adjoint import AdjointPair, solve_adjoint
from .errors import GridError, NumericError, SolverError, ValidationError
from .fields import ControlPair, Trajectory, control_inner, control_norm
from .grid import integrate_bulk, integrate_surface
from .state import regularized_initial_data, solve_state_alpha

log = logging.getLogger(__name__)


def _check_shapes(traj, ctrl, cd):
    g, tg = traj.grid, traj.time
    ctrl.check(g, tg)
    if traj.bulk.shape != (tg.nt + 1,) + g.shape:
        raise GridError(f"trajectory shape {traj.bulk.shape} does not match its grids")
    bad = [v for v in cd.violations(g, tg, allow_zero_weights=True) if "shape" in v[1]]
    if bad:
        raise GridError("; ".join(detail for _, detail in bad))


def evaluate_cost(traj, ctrl, cd):
    """Tracking functional with right-endpoint quadrature in time."""
    _check_shapes(traj, ctrl, cd)
    g, dt = traj.grid, traj.time.dt
    b1, b2, b3, b4, b5 = cd.beta
    y, ys = traj.bulk, traj.surface
    running = (
        b1 / 2 * integrate_bulk((y[1:] - cd.z_Q) ** 2, g).sum()
        + b2 / 2 * integrate_surface((ys[1:] - cd.z_Sigma) ** 2, g).sum()
        + b4 / 2 * integrate_bulk(ctrl.bulk**2, g).sum()
        + b5 / 2 * integrate_surface(ctrl.surface**2, g).sum()
    )
    terminal = b3 / 2 * (integrate_bulk((y[-1] - cd.z_T) ** 2, g) + integrate_surface((ys[-1] - cd.z_Gamma_T) ** 2, g))
    return float(dt * running + terminal)


def anchor_penalty(ctrl, anchor, grid, time):
    return 0.5 * control_norm(ctrl - anchor, grid, time) ** 2


def evaluate_adapted_cost(traj, ctrl, cd, anchor):
    anchor.check(traj.grid, traj.time)
    return evaluate_cost(traj, ctrl, cd) + anchor_penalty(ctrl, anchor, traj.grid, traj.time)


def reduced_gradient(ctrl, adj, cd, anchor=None):
    """Gradient of the reduced (adapted) cost in the control inner product."""
    ctrl.check(adj.grid, adj.time)
    _, _, _, b4, b5 = cd.beta
    bulk = adj.step_bulk + b4 * ctrl.bulk
    surface = adj.step_surface + b5 * ctrl.surface
    if anchor is not None:
        anchor.check(adj.grid, adj.time)
        bulk = bulk + (ctrl.bulk - anchor.bulk)
        surface = surface + (ctrl.surface - anchor.surface)
    return ControlPair(bulk, surface)


def project_control(ctrl, bounds):
    """Nodewise clamp onto the box; idempotent."""
    bad = [v for v in bounds.violations() if v[0] == "A1_violation"]
    if bad:
        raise ValidationError(bad)
    return ControlPair(
        np.minimum(np.maximum(ctrl.bulk, bounds.lower.bulk), bounds.upper.bulk),
        np.minimum(np.maximum(ctrl.surface, bounds.lower.surface), bounds.upper.surface),
    )


def vi_residual(ctrl, grad, bounds, grid, time, tau=1.0):
    """``|| ctrl - P(ctrl - tau grad) ||``; zero exactly at stationary points."""
    return control_norm(ctrl - project_control(ctrl - tau * grad, bounds), grid, time)


@dataclass(frozen=True)
class OptimizerOptions:
    tol_vi_rel: float = 1e-6
    max_iters: int = 500
    sigma: float = 1e-4
    backtrack: float = 0.5
    initial_step: float = 1.0
    max_backtracks: int = 40
    # iterate down to stop_factor * tol_vi; since the fixed-point residual
    # with step tau is at most max(1, tau) times the tau = 1 residual, this
    # keeps it below tol_vi for every tau <= 1 / stop_factor
    stop_factor: float = 0.1


@dataclass
class IterationRecord:
    iteration: int
    cost: float
    vi_residual: float
    step_length: float
    newton_iters_total: int


@dataclass
class OptimizationResult:
    alpha: float
    control: ControlPair
    state: Trajectory
    adjoint: AdjointPair
    gradient: ControlPair
    cost: float
    cost_plain: float
    vi_residual: float
    tol_vi: float
    iterations: int
    converged: bool
    anchor: Optional[ControlPair] = None
    log: list = field(default_factory=list)
    message: str = ""


def _failure_context(exc, it):
    cls = type(exc)
    if cls in (SolverError, NumericError):
        return cls(f"optimization iteration {it}: {exc}")
    return exc


def optimize_P_alpha(alpha, init, d, cd, bounds, model, anchor=None, options=None):
    """Projected gradient with Armijo backtracking for the (adapted) reduced cost.

    ``d`` is the untruncated initial datum; it is truncated here. With
    ``anchor`` the adapted cost ``J + 1/2 ||u - anchor||^2`` is minimized.
    """
    opts = options or OptimizerOptions()
    g, tg = model.grid, model.time
    init.check(g, tg)
    bounds.validate()
    cd.validate(g, tg, allow_zero_weights=anchor is not None)
    if not bounds.contains(init):
        raise ValidationError([("A1_violation", "initial control is not admissible")])
    if anchor is not None and not bounds.contains(anchor):
        raise ValidationError([("A1_violation", "anchor control is not admissible")])
    d_alpha = regularized_initial_data(d, alpha, model.options)
    tol_vi = opts.tol_vi_rel * (1.0 + control_norm(init, g, tg))
    stop = opts.stop_factor * tol_vi

    def cost_of(traj, u):
        plain = evaluate_cost(traj, u, cd)
        return plain + (anchor_penalty(u, anchor, g, tg) if anchor is not None else 0.0), plain

    newton_total = 0
    it = 0
    try:
        u = init.copy()
        traj = solve_state_alpha(u, d_alpha, alpha, model)
        newton_total += traj.newton_iterations
        J, J_plain = cost_of(traj, u)
        adj = solve_adjoint(traj, cd, alpha, model)
        grad = reduced_gradient(u, adj, cd, anchor)
        res = vi_residual(u, grad, bounds, g, tg)
        history = [IterationRecord(0, J, res, 0.0, newton_total)]
        converged, message = res <= stop, ""
        while not converged and it < opts.max_iters:
            it += 1
            step = opts.initial_step
            for _ in range(opts.max_backtracks + 1):
                u_new = project_control(u - step * grad, bounds)
                traj_new = solve_state_alpha(u_new, d_alpha, alpha, model)
                newton_total += traj_new.newton_iterations
                J_new, J_plain_new = cost_of(traj_new, u_new)
                if J_new <= J + opts.sigma * control_inner(grad, u_new - u, g, tg):
                    break
                step *= opts.backtrack
            else:
                message = f"line search failed at iteration {it}"
                it -= 1
                break
            u, traj, J, J_plain = u_new, traj_new, J_new, J_plain_new
            adj = solve_adjoint(traj, cd, alpha, model)
            grad = reduced_gradient(u, adj, cd, anchor)
            res = vi_residual(u, grad, bounds, g, tg)
            history.append(IterationRecord(it, J, res, step, newton_total))
            log.debug("alpha=%g it=%d J=%.12g vi=%.3e step=%g", alpha, it, J, res, step)
            converged = res <= stop
    except (SolverError, NumericError) as exc:
        raise _failure_context(exc, it) from exc
    if not converged and not message:
        message = f"no convergence in {opts.max_iters} iterations"
    return OptimizationResult(
        alpha=float(alpha),
        control=u,
        state=traj,
        adjoint=adj,
        gradient=grad,
        cost=J,
        cost_plain=J_plain,
        vi_residual=res,
        tol_vi=tol_vi,
        iterations=it,
        converged=bool(converged),
        anchor=anchor,
        log=history,
        message=message,
    )


def sampled_vi_check(result, bounds, rng, samples=100):
    """Smallest ``<grad, v - u>`` over random admissible ``v``.

    Half of the samples are uniform in the box, half are box vertices.
    """
    g, tg = result.state.grid, result.state.time
    lo, hi = bounds.lower, bounds.upper
    worst = np.inf
    for k in range(samples):
        if k % 2 == 0:
            tb, ts = rng.uniform(size=lo.bulk.shape), rng.uniform(size=lo.surface.shape)
        else:
            tb, ts = rng.integers(0, 2, lo.bulk.shape), rng.integers(0, 2, lo.surface.shape)
        v = ControlPair(lo.bulk + tb * (hi.bulk - lo.bulk), lo.surface + ts * (hi.surface - lo.surface))
        worst = min(worst, control_inner(result.gradient, v - result.control, g, tg))
    return worst
