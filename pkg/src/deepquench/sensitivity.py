"""Linearized state equation: the derivative of the discrete control-to-state map."""

from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import splu

from .errors import GridError, NumericError
from .grid import StripGrid, TimeGrid, trace
from .state import _AlphaStep, forcing


@dataclass
class LinearizedPair:
    grid: StripGrid
    time: TimeGrid
    bulk: np.ndarray

    @property
    def surface(self):
        return trace(self.bulk, self.grid)


def _check_base(base, alpha):
    if base.theta is None or base.alpha is None:
        raise GridError("linearization needs a regularized base trajectory")
    if base.alpha != alpha:
        raise GridError(f"base trajectory was computed for alpha={base.alpha}, not {alpha}")


def solve_linearized(base, direction, alpha, model):
    """Directional derivative of the discrete state along ``direction``.

    Coefficients are those of the final Newton matrices of ``base``, so the
    result is the exact derivative of the discrete scheme.
    """
    _check_base(base, alpha)
    g, tg = model.grid, model.time
    direction.check(g, tg)
    step = _AlphaStep(model, alpha)
    rhs_all = forcing(direction, model)
    ydot = np.zeros((tg.nt + 1, g.n_nodes))
    for m in range(1, tg.nt + 1):
        jac, S = step.jacobian(base.theta[m].ravel())
        rhs = step.D * ydot[m - 1] / tg.dt + rhs_all[m - 1]
        try:
            dtheta = splu(jac, permc_spec="MMD_AT_PLUS_A").solve(rhs)
        except RuntimeError as exc:
            raise NumericError(f"singular linearized system: {exc}", step=m) from exc
        ydot[m] = S * dtheta
    return LinearizedPair(g, tg, ydot.reshape((tg.nt + 1,) + g.shape))
