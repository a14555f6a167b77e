"""Phase-space rescaling, linear scaling exponents, rescaled stationary states
and the kinetic interpolation inequality."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import gamma

from .errors import NegativeDensityError


def sphere_area(d: int) -> float:
    """|S^{d-1}| = 2 pi^{d/2} / Gamma(d/2)."""
    return 2 * math.pi ** (d / 2) / gamma(d / 2)


def ball_volume(d: int) -> float:
    return sphere_area(d) / d


class PhasePoint(NamedTuple):
    x: np.ndarray
    v: np.ndarray


class RescaledPoint(NamedTuple):
    xi: np.ndarray
    eta: np.ndarray


def to_rescaled(p: PhasePoint, R, Rdot, d: int) -> RescaledPoint:
    """xi = x/R, eta = R^{d/2-1} (v - (Rdot/R) x). Arrays broadcast."""
    x = np.asarray(p.x, float)
    v = np.asarray(p.v, float)
    return RescaledPoint(x / R, R ** (0.5 * d - 1) * (v - (Rdot / R) * x))


def from_rescaled(q: RescaledPoint, R, Rdot, d: int) -> PhasePoint:
    xi = np.asarray(q.xi, float)
    eta = np.asarray(q.eta, float)
    x = R * xi
    return PhasePoint(x, R ** (1 - 0.5 * d) * eta + Rdot * xi)


def mass_preserving_constraint(lam: float, mu: float, d: int, rtol: float = 1e-12) -> bool:
    if lam <= 0 or mu <= 0:
        raise ValueError("scale factors must be positive")
    return math.isclose(lam * lam, mu ** d, rel_tol=rtol)


@dataclass(frozen=True)
class LinearScalingExponents:
    """Factors of the two-parameter family
    f_l(t,x,v) = l^{2-d} mu^d f(l t, mu x, mu v / l)."""
    lam: float
    mu: float
    d: int

    @property
    def f(self):
        return self.lam ** (2 - self.d) * self.mu ** self.d

    @property
    def rho(self):
        return self.lam ** 2

    @property
    def U(self):
        return self.lam ** 2 * self.mu ** -2

    @property
    def dU(self):
        return self.lam ** 2 / self.mu

    def mass_factor(self):
        """Total mass is multiplied by lam^2 mu^{-d}."""
        return self.rho * self.mu ** -self.d


@dataclass(frozen=True)
class StationaryState:
    """Rescaled steady profile of total mass M: density c0*d on a centered ball.

    c0 is the constant of the scaling equation; the profile and its field
    scale with it (c0=1 is the usual normalization).
    """
    M: float
    d: int
    c0: float = 1.0

    def __post_init__(self):
        if not self.M > 0:
            raise ValueError("M must be positive")

    @property
    def radius(self):
        return (self.M / (self.c0 * sphere_area(self.d))) ** (1.0 / self.d)

    def _radius_of(self, xi):
        xi = np.asarray(xi, float)
        return np.abs(xi) if self.d == 1 else np.linalg.norm(xi, axis=-1)

    def density(self, xi):
        """nu(xi); xi is a scalar position array for d=1, shape (..., d) otherwise."""
        return self.radial_density(self._radius_of(xi))

    def radial_density(self, r):
        return np.where(np.asarray(r, float) <= self.radius, self.c0 * self.d, 0.0)

    def radial_field(self, r, eps):
        """Radial component of grad W at distance r from the origin."""
        r = np.asarray(r, float)
        k = self.M / sphere_area(self.d)
        inside = r <= self.radius
        with np.errstate(divide="ignore"):
            out = k / np.where(inside, 1.0, r) ** (self.d - 1)
        return eps * np.where(inside, self.c0 * r, out)

    def field(self, xi, eps):
        """grad W: eps*c0*xi inside the ball, eps*(M/|S^{d-1}|) xi/|xi|^d outside.

        Continuous across the edge since c0*rad^d = M/|S^{d-1}|.
        """
        xi = np.asarray(xi, float)
        if self.d == 1:
            return np.sign(xi) * self.radial_field(np.abs(xi), eps)
        r = self._radius_of(xi)
        with np.errstate(divide="ignore", invalid="ignore"):
            unit = np.where(r[..., None] > 0, xi / r[..., None], 0.0)
        return self.radial_field(r, eps)[..., None] * unit

    def enclosed(self, r):
        r = np.asarray(r, float)
        return np.where(r <= self.radius, self.c0 * sphere_area(self.d) * r ** self.d, self.M)


def stationary_density(s: StationaryState, xi):
    return s.density(xi)


def stationary_field(s: StationaryState, xi, eps):
    return s.field(xi, eps)


def interpolation_constant(d: int) -> float:
    """Constant of ||rho||_{(d+2)/d} <= C ||f||_inf^{2/(d+2)} (int f|v|^2)^{d/(d+2)}.

    Split int f dv at |v| = r: rho <= ||f||_inf |B_r| + r^{-2} int f|v|^2 dv,
    then minimize in r.
    """
    w = ball_volume(d)
    return (d + 2) / 2 * w ** (2 / (d + 2)) * (2 / d) ** (d / (d + 2))


def interpolation_bound(f, xs, vs, shift: float = 0.0):
    """Both sides of the interpolation inequality for f sampled on a tensor grid.

    f has 2d axes (x_1..x_d, v_1..v_d); xs and vs are lists of uniform 1D grids.
    shift is Rdot/R: the kinetic moment uses |v - shift*x|^2.
    Returns (lhs, rhs).
    """
    f = np.asarray(f, float)
    d = len(xs)
    if len(vs) != d or f.ndim != 2 * d:
        raise ValueError("f must have one axis per position and velocity coordinate")
    if np.any(f < 0):
        raise NegativeDensityError("phase density must be non-negative")
    dx = np.prod([x[1] - x[0] for x in xs])
    dv = np.prod([v[1] - v[0] for v in vs])
    grids = np.meshgrid(*xs, *vs, indexing="ij", sparse=True)
    rel2 = sum((grids[d + i] - shift * grids[i]) ** 2 for i in range(d))
    rho = f.sum(axis=tuple(range(d, 2 * d))) * dv
    q = (d + 2) / d
    lhs = (np.sum(rho ** q) * dx) ** (1 / q)
    kin = np.sum(f * rel2) * dx * dv
    rhs = interpolation_constant(d) * f.max(initial=0.0) ** (2 / (d + 2)) * kin ** (d / (d + 2))
    return float(lhs), float(rhs)
