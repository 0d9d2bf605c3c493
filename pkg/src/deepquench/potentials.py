"""Logarithmic potential, quench scalings and the double-obstacle subdifferential."""

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Polynomial

from .errors import DomainError

TOL_ACTIVE = 1e-9
TOL_MULT = 1e-8


def eval_h(r):
    """(1-r) ln(1-r) + (1+r) ln(1+r) on [-1, 1], with 0 ln 0 = 0."""
    r = np.asarray(r, dtype=float)
    if np.any(np.abs(r) > 1.0) or np.any(np.isnan(r)):
        raise DomainError("h is defined on [-1, 1] only")
    a, b = 1.0 - r, 1.0 + r
    # log1p keeps h(r) ~ r**2 accurate near 0
    out = np.where(a > 0, a * np.log1p(-np.where(a > 0, r, 0.0)), 0.0)
    out = out + np.where(b > 0, b * np.log1p(np.where(b > 0, r, 0.0)), 0.0)
    return out[()] if out.ndim == 0 else out


def _open_interval(r):
    r = np.asarray(r, dtype=float)
    if np.any(~(np.abs(r) < 1.0)):
        raise DomainError("derivatives of h exist on (-1, 1) only")
    return r


def eval_h_prime(r):
    r = _open_interval(r)
    out = np.log1p(r) - np.log1p(-r)
    return out[()] if out.ndim == 0 else out


def eval_h_second(r):
    r = _open_interval(r)
    out = 2.0 / ((1.0 - r) * (1.0 + r))
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class QuenchConfig:
    """phi(alpha) = alpha**p scales the bulk potential, psi(alpha) = alpha**q the surface one."""

    p: float = 1.0
    q: float = 1.0
    c_phipsi: float = 1.0

    def __post_init__(self):
        if not (self.p > 0 and self.q > 0):
            raise DomainError("quench exponents must be positive")
        if self.p < self.q:
            raise DomainError("need p >= q so that phi <= C psi on (0, 1]")
        if self.c_phipsi < 1.0:
            raise DomainError("c_phipsi must be >= 1")

    def check(self, alphas):
        """Return violated conditions on a sample of alphas (empty list if fine)."""
        bad = []
        prev = None
        for a in alphas:
            phi, psi = quench_phi(a, self), quench_psi(a, self)
            if not (0 < phi <= 1 and 0 < psi <= 1):
                bad.append(f"phi/psi outside (0, 1] at alpha={a}")
            if phi > self.c_phipsi * psi * (1 + 1e-15):
                bad.append(f"phi > C psi at alpha={a}")
            if prev is not None and a < prev[0] and not (phi <= prev[1] and psi <= prev[2]):
                bad.append(f"phi/psi not decreasing towards alpha={a}")
            prev = (a, phi, psi)
        return bad


def _check_alpha(alpha):
    if not (0.0 < alpha <= 1.0):
        raise DomainError(f"alpha must lie in (0, 1], got {alpha}")


def quench_phi(alpha, cfg):
    _check_alpha(alpha)
    return float(alpha) ** cfg.p


def quench_psi(alpha, cfg):
    _check_alpha(alpha)
    return float(alpha) ** cfg.q


def _default_poly():
    return Polynomial([0.0, -1.0])


@dataclass(frozen=True)
class PotentialSet:
    """Derivatives of the smooth potential parts, as polynomials on [-1, 1].

    The defaults ``f2'(r) = g2'(r) = -r`` give the classical double-obstacle
    Allen-Cahn potential ``I_[-1,1](r) - r**2 / 2``.
    """

    f2p: Polynomial = field(default_factory=_default_poly)
    g2p: Polynomial = field(default_factory=_default_poly)

    def __post_init__(self):
        for poly in (self.f2p, self.g2p):
            if not np.all(np.isfinite(poly.coef)):
                raise DomainError("polynomial coefficients must be finite")

    @classmethod
    def from_coefficients(cls, f2p, g2p):
        """Coefficients in increasing degree, e.g. ``[0, -1]`` for ``-r``."""
        return cls(Polynomial(np.asarray(f2p, dtype=float)), Polynomial(np.asarray(g2p, dtype=float)))

    @property
    def f2pp(self):
        return self.f2p.deriv()

    @property
    def g2pp(self):
        return self.g2p.deriv()


def subdifferential_contains(v, eta, tol_active=TOL_ACTIVE, tol_mult=TOL_MULT):
    """Whether ``eta`` lies in the subdifferential of I_[-1,1] at ``v``."""
    if abs(v) > 1.0 + tol_active:
        raise DomainError(f"|v| = {abs(v)} exceeds 1")
    if v >= 1.0 - tol_active:
        return eta >= -tol_mult
    if v <= -1.0 + tol_active:
        return eta <= tol_mult
    return abs(eta) <= tol_mult


def subdifferential_violations(y, xi, tol_active=TOL_ACTIVE, tol_mult=TOL_MULT):
    """Vectorised membership test; returns a boolean mask of offending nodes."""
    y = np.asarray(y, dtype=float)
    xi = np.asarray(xi, dtype=float)
    upper = y >= 1.0 - tol_active
    lower = y <= -1.0 + tol_active
    inside = ~(upper | lower)
    bad = np.abs(y) > 1.0 + tol_active
    bad |= upper & (xi < -tol_mult)
    bad |= lower & (xi > tol_mult)
    bad |= inside & (np.abs(xi) > tol_mult)
    return bad
