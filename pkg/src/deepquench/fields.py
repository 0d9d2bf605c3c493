"""Containers for controls, bounds, initial data and trajectories.

Time alignment used throughout the package:

* states live on the time nodes ``t_0 .. t_nt``;
* controls, targets ``z_Q``/``z_Sigma`` and obstacle multipliers live on
  ``t_1 .. t_nt`` (index ``m - 1`` holds time step ``m``), which is the
  right-endpoint rule used both by the implicit Euler scheme and by the
  discrete cost.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import GridError, ValidationError
from .grid import StripGrid, TimeGrid, check_bulk, check_surface, integrate_bulk, integrate_surface, trace


@dataclass
class ControlPair:
    """Distributed control ``u`` on Q and boundary control ``u_Gamma`` on Sigma."""

    bulk: np.ndarray
    surface: np.ndarray

    def __post_init__(self):
        self.bulk = np.asarray(self.bulk, dtype=float)
        self.surface = np.asarray(self.surface, dtype=float)
        if self.bulk.ndim != 3 or self.surface.ndim != 3 or self.bulk.shape[0] != self.surface.shape[0]:
            raise GridError("controls must be time-indexed (nt, ...) arrays with matching nt")

    @classmethod
    def constant(cls, grid, time, bulk=0.0, surface=0.0):
        return cls(np.full((time.nt,) + grid.shape, float(bulk)), np.full((time.nt,) + grid.surface_shape, float(surface)))

    @classmethod
    def zeros(cls, grid, time):
        return cls.constant(grid, time)

    def check(self, grid, time):
        if self.bulk.shape != (time.nt,) + grid.shape or self.surface.shape != (time.nt,) + grid.surface_shape:
            raise GridError(
                f"control shapes {self.bulk.shape}/{self.surface.shape} do not match "
                f"grid {(time.nt,) + grid.shape}/{(time.nt,) + grid.surface_shape}"
            )
        return self

    def copy(self):
        return ControlPair(self.bulk.copy(), self.surface.copy())

    def __add__(self, other):
        return ControlPair(self.bulk + other.bulk, self.surface + other.surface)

    def __sub__(self, other):
        return ControlPair(self.bulk - other.bulk, self.surface - other.surface)

    def __mul__(self, c):
        return ControlPair(c * self.bulk, c * self.surface)

    __rmul__ = __mul__

    def __neg__(self):
        return ControlPair(-self.bulk, -self.surface)

    def equals(self, other):
        return np.array_equal(self.bulk, other.bulk) and np.array_equal(self.surface, other.surface)


def control_inner(a, b, grid, time):
    """Discrete inner product of the control space L2(Q) x L2(Sigma)."""
    q = integrate_bulk(a.bulk * b.bulk, grid).sum()
    s = integrate_surface(a.surface * b.surface, grid).sum()
    return float(time.dt * (q + s))


def control_norm(a, grid, time):
    return float(np.sqrt(max(control_inner(a, a, grid, time), 0.0)))


def _offending(mask, limit=10):
    idx = [tuple(int(v) for v in ix) for ix in np.argwhere(mask)[:limit]]
    more = int(mask.sum()) - len(idx)
    return f"{idx}" + (f" and {more} more" if more > 0 else "")


@dataclass
class ControlBounds:
    """Box constraints defining the admissible controls, plus the radius R."""

    lower: ControlPair
    upper: ControlPair
    radius: float

    @classmethod
    def box(cls, grid, time, lower=-1.0, upper=1.0, lower_surface=None, upper_surface=None, radius=None):
        lower_surface = lower if lower_surface is None else lower_surface
        upper_surface = upper if upper_surface is None else upper_surface
        if radius is None:
            radius = max(abs(lower), abs(upper)) + max(abs(lower_surface), abs(upper_surface))
        return cls(
            ControlPair.constant(grid, time, lower, lower_surface),
            ControlPair.constant(grid, time, upper, upper_surface),
            float(radius),
        )

    def violations(self):
        bad = []
        if np.any(self.lower.bulk > self.upper.bulk):
            bad.append(("A1_violation", "lower bulk bound exceeds upper at (m, j, i) " + _offending(self.lower.bulk > self.upper.bulk)))
        if np.any(self.lower.surface > self.upper.surface):
            mask = self.lower.surface > self.upper.surface
            bad.append(("A1_violation", "lower surface bound exceeds upper at (m, circle, i) " + _offending(mask)))
        sup_q = max(np.abs(self.lower.bulk).max(), np.abs(self.upper.bulk).max())
        sup_s = max(np.abs(self.lower.surface).max(), np.abs(self.upper.surface).max())
        if not self.radius > 0 or sup_q + sup_s > self.radius * (1 + 1e-12):
            bad.append(("A4_violation", f"sup|u| + sup|u_Gamma| = {sup_q + sup_s:g} exceeds R = {self.radius:g}"))
        return bad

    def validate(self):
        bad = self.violations()
        if bad:
            raise ValidationError(bad)
        return self

    def contains(self, ctrl, tol=0.0):
        return bool(
            np.all(ctrl.bulk >= self.lower.bulk - tol)
            and np.all(ctrl.bulk <= self.upper.bulk + tol)
            and np.all(ctrl.surface >= self.lower.surface - tol)
            and np.all(ctrl.surface <= self.upper.surface + tol)
        )

    def is_symmetric(self):
        return np.array_equal(self.lower.bulk, -self.upper.bulk) and np.array_equal(self.lower.surface, -self.upper.surface)


@dataclass
class InitialData:
    bulk: np.ndarray
    surface: np.ndarray

    def __post_init__(self):
        self.bulk = np.asarray(self.bulk, dtype=float)
        self.surface = np.asarray(self.surface, dtype=float)

    @classmethod
    def from_bulk(cls, bulk, grid):
        bulk = check_bulk(bulk, grid).copy()
        return cls(bulk, trace(bulk, grid))

    def violations(self, grid):
        check_bulk(self.bulk, grid)
        check_surface(self.surface, grid)
        bad = []
        if np.any(np.abs(self.bulk) > 1.0):
            bad.append(("A3_violation", "|y0| > 1 at (j, i) " + _offending(np.abs(self.bulk) > 1.0)))
        if np.any(np.abs(self.surface) > 1.0):
            bad.append(("A3_violation", "|y0_Gamma| > 1 at (circle, i) " + _offending(np.abs(self.surface) > 1.0)))
        mismatch = trace(self.bulk, grid) != self.surface
        if np.any(mismatch):
            bad.append(("A3_violation", "trace of y0 differs from y0_Gamma at (circle, i) " + _offending(mismatch)))
        return bad

    def validate(self, grid):
        bad = self.violations(grid)
        if bad:
            raise ValidationError(bad)
        return self


@dataclass
class StatePair:
    bulk: np.ndarray
    surface: np.ndarray


@dataclass
class Trajectory:
    """Discrete states on ``t_0 .. t_nt``.

    ``theta`` is set for regularized runs and holds ``artanh(y)``; since
    ``h'(y) = 2 theta`` it resolves states whose distance to +-1 is far below
    double precision, which happens routinely for small alpha. ``xi`` and
    ``xi_surface`` are set for obstacle runs and live on ``t_1 .. t_nt``.
    """

    grid: StripGrid
    time: TimeGrid
    bulk: np.ndarray
    alpha: Optional[float] = None
    theta: Optional[np.ndarray] = None
    xi: Optional[np.ndarray] = None
    xi_surface: Optional[np.ndarray] = None
    newton_iterations: int = 0
    info: dict = field(default_factory=dict)

    @property
    def surface(self):
        return trace(self.bulk, self.grid)

    @property
    def is_obstacle(self):
        return self.alpha is None

    def state(self, m):
        return StatePair(self.bulk[m], self.surface[m])

    @property
    def multipliers(self):
        if self.xi is None:
            return None
        return StatePair(self.xi, self.xi_surface)

    @property
    def gap(self):
        """``1 - |y|`` evaluated without cancellation."""
        if self.theta is None:
            return 1.0 - np.abs(self.bulk)
        e = np.exp(-2.0 * np.abs(self.theta))
        return 2.0 * e / (1.0 + e)

    @property
    def log_gap(self):
        """``log(1 - |y|)``; finite for every regularized state."""
        if self.theta is None:
            with np.errstate(divide="ignore"):
                return np.log(1.0 - np.abs(self.bulk))
        a = np.abs(self.theta)
        return np.log(2.0) - 2.0 * a - np.log1p(np.exp(-2.0 * a))

    @property
    def one_minus_y2(self):
        """``1 - y**2``, i.e. ``sech(theta)**2`` for regularized runs."""
        if self.theta is None:
            return (1.0 - self.bulk) * (1.0 + self.bulk)
        return sech2(self.theta)


def sech2(theta):
    e = np.exp(-2.0 * np.abs(theta))
    return 4.0 * e / (1.0 + e) ** 2
