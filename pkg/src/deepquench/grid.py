"""Periodic-strip geometry, time grid and the discrete operators on them.

The bulk domain is the strip ``[0, lx) x [0, height]``, periodic in ``x``. Its
boundary consists of the two lines ``y = 0`` and ``y = height``, each of which is
a circle of length ``lx``. Nodes are laid out in rows ``j = 0 .. ny+1`` and
columns ``i = 0 .. nx-1``; rows ``0`` and ``ny+1`` are the boundary circles and
are shared between the bulk field and the surface field, so the trace of a
bulk field *is* the surface field.

Bulk fields are arrays of shape ``(ny+2, nx)``, surface fields ``(2, nx)``
(circle 0 at the bottom, circle 1 at the top). All operators accept extra
leading axes (e.g. a time axis).
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import GridError


@dataclass(frozen=True)
class StripGrid:
    nx: int
    ny: int
    lx: float = 2.0 * np.pi
    height: float = 1.0

    def __post_init__(self):
        if int(self.nx) != self.nx or self.nx < 4:
            raise GridError(f"nx must be an integer >= 4, got {self.nx}")
        if int(self.ny) != self.ny or self.ny < 2:
            raise GridError(f"ny must be an integer >= 2, got {self.ny}")
        if not (self.lx > 0 and self.height > 0):
            raise GridError("lx and height must be positive")

    @property
    def dx(self):
        return self.lx / self.nx

    @property
    def dy(self):
        return self.height / (self.ny + 1)

    @property
    def shape(self):
        return (self.ny + 2, self.nx)

    @property
    def surface_shape(self):
        return (2, self.nx)

    @property
    def n_nodes(self):
        return self.nx * (self.ny + 2)

    @property
    def n_boundary(self):
        return 2 * self.nx

    @property
    def x(self):
        return np.arange(self.nx) * self.dx

    @property
    def y(self):
        return np.arange(self.ny + 2) * self.dy

    def wrap(self, i):
        return i % self.nx

    @cached_property
    def bulk_weights(self):
        """Trapezoid-in-y, uniform-in-x quadrature weights on the node layout."""
        w = np.full(self.shape, self.dx * self.dy)
        w[0] *= 0.5
        w[-1] *= 0.5
        w.flags.writeable = False
        return w

    @cached_property
    def surface_weights(self):
        """Surface quadrature weights scattered onto the node layout (zero inside)."""
        s = np.zeros(self.shape)
        s[0] = self.dx
        s[-1] = self.dx
        s.flags.writeable = False
        return s

    @cached_property
    def stiffness(self):
        """Symmetric matrix of the discrete Dirichlet form on the node layout.

        ``f @ K @ z`` equals ``bulk_gradient_pairing(f, z) + surface_gradient_pairing(f, z)``.
        Unknowns are flattened row-major, node ``(j, i) -> j * nx + i``.
        """
        nx, ny = self.nx, self.ny
        ring = _periodic_second_difference(nx)
        path = sp.diags(
            [np.r_[1.0, np.full(ny, 2.0), 1.0], -np.ones(ny + 1), -np.ones(ny + 1)],
            [0, -1, 1],
        )
        row_weight = np.ones(ny + 2)
        row_weight[[0, -1]] = 0.5
        boundary = np.zeros(ny + 2)
        boundary[[0, -1]] = 1.0
        k = (
            sp.kron(sp.diags(row_weight), ring) * (self.dy / self.dx)
            + sp.kron(path, sp.identity(nx)) * (self.dx / self.dy)
            + sp.kron(sp.diags(boundary), ring) / self.dx
        )
        return k.tocsr()

    def test_fields(self):
        """Fixed finite basis of smooth test fields used by the weak-form checks.

        Returns ``(name, field)`` pairs: the constant, the first two Fourier modes
        in ``x`` and the field linear in the vertical coordinate.
        """
        xx = np.broadcast_to(self.x, self.shape)
        yy = np.broadcast_to(self.y[:, None], self.shape)
        k = 2.0 * np.pi / self.lx
        return [
            ("one", np.ones(self.shape)),
            ("cos1", np.cos(k * xx)),
            ("sin1", np.sin(k * xx)),
            ("cos2", np.cos(2 * k * xx)),
            ("sin2", np.sin(2 * k * xx)),
            ("linear_y", yy / self.height),
        ]


@dataclass(frozen=True)
class TimeGrid:
    t_final: float
    nt: int

    def __post_init__(self):
        if int(self.nt) != self.nt or self.nt < 1:
            raise GridError(f"nt must be an integer >= 1, got {self.nt}")
        if not self.t_final > 0:
            raise GridError("t_final must be positive")

    @property
    def dt(self):
        return self.t_final / self.nt

    @property
    def times(self):
        t = np.arange(self.nt + 1) * self.dt
        t[-1] = self.t_final
        return t


def _periodic_second_difference(n):
    """The matrix of ``-(f[i+1] - 2 f[i] + f[i-1])`` with wraparound (unscaled)."""
    m = sp.diags([2.0 * np.ones(n), -np.ones(n - 1), -np.ones(n - 1)], [0, -1, 1], format="lil")
    m[0, n - 1] = -1.0
    m[n - 1, 0] = -1.0
    return m.tocsr()


def check_bulk(f, g):
    f = np.asarray(f, dtype=float)
    if f.shape[-2:] != g.shape:
        raise GridError(f"bulk field has shape {f.shape}, grid expects (..., {g.shape[0]}, {g.shape[1]})")
    return f


def check_surface(f, g):
    f = np.asarray(f, dtype=float)
    if f.shape[-2:] != g.surface_shape:
        raise GridError(f"surface field has shape {f.shape}, grid expects (..., 2, {g.nx})")
    return f


def _xx(f, dx):
    return (np.roll(f, -1, axis=-1) - 2.0 * f + np.roll(f, 1, axis=-1)) / dx**2


def apply_bulk_laplacian(f, g):
    """5-point Laplacian on the interior rows; boundary rows are left at zero."""
    f = check_bulk(f, g)
    out = np.zeros_like(f)
    inner = f[..., 1:-1, :]
    out[..., 1:-1, :] = _xx(inner, g.dx) + (f[..., 2:, :] - 2.0 * inner + f[..., :-2, :]) / g.dy**2
    return out


def apply_surface_laplacian(f, g):
    """Periodic second difference along each boundary circle."""
    f = check_surface(f, g)
    return _xx(f, g.dx)


def trace(f, g):
    f = check_bulk(f, g)
    return np.stack([f[..., 0, :], f[..., -1, :]], axis=-2)


def normal_derivative(f, g):
    """Outward normal derivative by the second-order one-sided stencil.

    Bottom circle: outward normal ``-e_y``; top circle: ``+e_y``.
    """
    f = check_bulk(f, g)
    if g.ny < 2:
        raise GridError("normal_derivative needs ny >= 2")
    bottom = (3.0 * f[..., 0, :] - 4.0 * f[..., 1, :] + f[..., 2, :]) / (2.0 * g.dy)
    top = (3.0 * f[..., -1, :] - 4.0 * f[..., -2, :] + f[..., -3, :]) / (2.0 * g.dy)
    return np.stack([bottom, top], axis=-2)


def integrate_bulk(f, g):
    f = check_bulk(f, g)
    return np.sum(f * g.bulk_weights, axis=(-2, -1))


def integrate_surface(f, g):
    f = check_surface(f, g)
    return np.sum(f, axis=(-2, -1)) * g.dx


def bulk_gradient_pairing(f, z, g):
    """Discrete ``int grad f . grad z dx`` matching the trapezoid weights."""
    f = check_bulk(f, g)
    z = check_bulk(z, g)
    dfx = (np.roll(f, -1, axis=-1) - f) / g.dx
    dzx = (np.roll(z, -1, axis=-1) - z) / g.dx
    dfy = np.diff(f, axis=-2) / g.dy
    dzy = np.diff(z, axis=-2) / g.dy
    return integrate_bulk(dfx * dzx, g) + np.sum(dfy * dzy, axis=(-2, -1)) * g.dx * g.dy


def surface_gradient_pairing(f, z, g):
    f = check_surface(f, g)
    z = check_surface(z, g)
    dfx = (np.roll(f, -1, axis=-1) - f) / g.dx
    dzx = (np.roll(z, -1, axis=-1) - z) / g.dx
    return integrate_surface(dfx * dzx, g)


def to_nodes(bulk, surface, g):
    """Scatter a surface field onto the boundary rows of a copy of ``bulk``.

    Used for nodal vectors whose boundary entries carry surface data.
    """
    out = np.array(check_bulk(bulk, g), copy=True)
    surface = check_surface(surface, g)
    out[..., 0, :] = surface[..., 0, :]
    out[..., -1, :] = surface[..., 1, :]
    return out


def surface_to_nodes(surface, g):
    """Surface field scattered onto the node layout, zeros inside."""
    surface = check_surface(surface, g)
    out = np.zeros(surface.shape[:-2] + g.shape)
    out[..., 0, :] = surface[..., 0, :]
    out[..., -1, :] = surface[..., 1, :]
    return out
