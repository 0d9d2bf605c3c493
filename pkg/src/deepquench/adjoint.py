"""Tracking-cost data, the discrete adjoint system and the quench multipliers.

The adjoint is the transpose of the linearized implicit Euler scheme. Writing
``J_m`` for the (symmetric) Jacobian of step ``m`` with respect to ``y_m``,
the step multipliers ``P_m`` solve, backwards in ``m``,

    J_m P_m = D P_{m+1} / dt + beta1 w (y_m - zQ_m) + beta2 s (y_m - zS_m)

starting from the terminal datum ``P_{nt+1} = beta3 (y(T) - z_T)``. The
reduced gradient at control step ``m`` is then ``P_m + beta4 u_m`` (bulk) and
``P_m|Gamma + beta5 uG_m`` (surface), with respect to the same weighted inner
product used by the cost.

Time alignment (single source of truth): adjoint node ``k = 0 .. nt`` stores
``P_{k+1}``, so node ``nt`` is the terminal datum at ``T`` and node ``m - 1``
pairs with control step ``m``.

Since ``J_m = M_m + B diag(cosh^2 theta)`` with ``M_m`` the smooth part and
``B`` the barrier weights, ``P_m = sech^2(theta_m) * Z_m`` with
``(M_m sech^2 + B) Z_m = rhs``. ``Z`` stays finite where ``y`` is
indistinguishable from +-1 and gives ``lambda = 2 phi Z`` without overflow.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import splu

from .errors import GridError, NumericError, ValidationError
from .fields import _offending
from .grid import StripGrid, TimeGrid, integrate_bulk, integrate_surface, trace
from .potentials import quench_phi, quench_psi
from .sensitivity import _check_base
from .state import _AlphaStep


@dataclass
class CostData:
    """Weights ``beta1 .. beta5`` and the targets of the tracking functional.

    ``z_Q`` and ``z_Sigma`` are time-indexed on ``t_1 .. t_nt``.
    """

    beta: tuple
    z_Q: np.ndarray
    z_Sigma: np.ndarray
    z_T: np.ndarray
    z_Gamma_T: np.ndarray

    def __post_init__(self):
        self.beta = tuple(float(b) for b in self.beta)
        self.z_Q = np.asarray(self.z_Q, dtype=float)
        self.z_Sigma = np.asarray(self.z_Sigma, dtype=float)
        self.z_T = np.asarray(self.z_T, dtype=float)
        self.z_Gamma_T = np.asarray(self.z_Gamma_T, dtype=float)

    @classmethod
    def zero_targets(cls, grid, time, beta):
        return cls(
            beta,
            np.zeros((time.nt,) + grid.shape),
            np.zeros((time.nt,) + grid.surface_shape),
            np.zeros(grid.shape),
            np.zeros(grid.surface_shape),
        )

    def violations(self, grid, time, allow_zero_weights=False):
        bad = []
        if len(self.beta) != 5:
            bad.append(("A1_violation", f"expected 5 weights, got {len(self.beta)}"))
            return bad
        if any(b < 0 for b in self.beta):
            bad.append(("A1_violation", f"negative weight in {self.beta}"))
        if all(b == 0 for b in self.beta) and not allow_zero_weights:
            bad.append(("A1_violation", "weights all vanish"))
        shapes = [
            ("z_Q", self.z_Q, (time.nt,) + grid.shape),
            ("z_Sigma", self.z_Sigma, (time.nt,) + grid.surface_shape),
            ("z_T", self.z_T, grid.shape),
            ("z_Gamma_T", self.z_Gamma_T, grid.surface_shape),
        ]
        for name, arr, shape in shapes:
            if arr.shape != shape:
                bad.append(("A1_violation", f"{name} has shape {arr.shape}, expected {shape}"))
            elif not np.all(np.isfinite(arr)):
                bad.append(("A1_violation", f"{name} has non-finite entries"))
        if not bad:
            mismatch = trace(self.z_T, grid) != self.z_Gamma_T
            if np.any(mismatch):
                bad.append(("A5_violation", "z_Gamma_T differs from the trace of z_T at (circle, i) " + _offending(mismatch)))
        return bad

    def validate(self, grid, time, allow_zero_weights=False):
        bad = self.violations(grid, time, allow_zero_weights)
        if bad:
            raise ValidationError(bad)
        return self


@dataclass
class AdjointPair:
    grid: StripGrid
    time: TimeGrid
    bulk: np.ndarray
    scaled: np.ndarray
    alpha: float

    @property
    def surface(self):
        return trace(self.bulk, self.grid)

    @property
    def step_bulk(self):
        """``P_1 .. P_nt``, aligned with the control steps."""
        return self.bulk[:-1]

    @property
    def step_surface(self):
        return self.surface[:-1]


@dataclass
class LambdaPair:
    bulk: np.ndarray
    surface: np.ndarray
    pairings: dict = field(default_factory=dict)


def solve_adjoint(base, cd, alpha, model):
    _check_base(base, alpha)
    g, tg = model.grid, model.time
    cd.validate(g, tg, allow_zero_weights=True)
    b1, b2, b3, _, _ = cd.beta
    step = _AlphaStep(model, alpha)
    w, s, D = step.w, step.s, step.D
    dt = tg.dt
    y = base.bulk.reshape(tg.nt + 1, -1)
    zq = cd.z_Q.reshape(tg.nt, -1)
    zs = np.zeros((tg.nt,) + g.shape)
    zs[:, 0, :] = cd.z_Sigma[:, 0, :]
    zs[:, -1, :] = cd.z_Sigma[:, 1, :]
    zs = zs.reshape(tg.nt, -1)

    p_T = b3 * (base.bulk[-1] - cd.z_T)
    p_T_surface = b3 * (base.surface[-1] - cd.z_Gamma_T)
    terminal = w * p_T.ravel()
    terminal[: g.nx] += s[: g.nx] * p_T_surface[0]
    terminal[-g.nx :] += s[-g.nx :] * p_T_surface[1]

    P = np.zeros((tg.nt + 1, g.n_nodes))
    Z = np.zeros((tg.nt, g.n_nodes))
    P[tg.nt] = p_T.ravel()
    for m in range(tg.nt, 0, -1):
        carry = terminal if m == tg.nt else D * P[m]
        rhs = carry / dt + b1 * w * (y[m] - zq[m - 1]) + b2 * s * (y[m] - zs[m - 1])
        jac, S = step.jacobian(base.theta[m].ravel())
        try:
            Z[m - 1] = splu(jac, permc_spec="MMD_AT_PLUS_A").solve(rhs)
        except RuntimeError as exc:
            raise NumericError(f"singular adjoint system: {exc}", step=m) from exc
        P[m - 1] = S * Z[m - 1]
    if not (np.all(np.isfinite(P)) and np.all(np.isfinite(Z))):
        raise NumericError("non-finite adjoint")
    bulk = P.reshape((tg.nt + 1,) + g.shape)
    bulk[-1] = p_T
    return AdjointPair(g, tg, bulk, Z.reshape((tg.nt,) + g.shape), float(alpha))


def compute_lambda(base, adj, alpha, model):
    """``lambda = phi h''(y) p`` and ``lambda_Gamma = psi h''(y_Gamma) p_Gamma`` per step.

    Also reports the pairings of ``(lambda, lambda_Gamma)`` with the fixed test
    fields, a finite-dimensional stand-in for its dual norm.
    """
    g, tg = model.grid, model.time
    if adj.scaled.shape != (tg.nt,) + g.shape or base.bulk.shape != (tg.nt + 1,) + g.shape:
        raise GridError("trajectory and adjoint shapes do not match the model")
    if adj.alpha != alpha or base.alpha != alpha:
        raise GridError("trajectory, adjoint and alpha disagree")
    phi = quench_phi(alpha, model.quench)
    psi = quench_psi(alpha, model.quench)
    lam = 2.0 * phi * adj.scaled
    lam_s = 2.0 * psi * trace(adj.scaled, g)
    pairings = {}
    for name, f in g.test_fields():
        q = integrate_bulk(lam * f, g).sum()
        s = integrate_surface(lam_s * trace(f, g), g).sum()
        pairings[name] = float(tg.dt * (q + s))
    return LambdaPair(lam, lam_s, pairings)
