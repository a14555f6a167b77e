"""The scaling equation  R'' + eps*c0*R**(1-d) = 0  and everything built on it.

R(t) is the dilation factor of the time dependent change of variables,
tau(t) = int_0^t R(s)**(-d/2) ds the rescaled clock.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy import integrate
from scipy.interpolate import CubicHermiteSpline

from .errors import CollapseError, DimensionError, StepSizeError, WindowError
from .io import write_csv

DEFAULT_DT = 1e-3
COLLAPSE_FLOOR = 1e-6


@dataclass(frozen=True)
class ScalingParams:
    d: int
    eps: int = -1
    c0: float = 1.0
    R0: float = 1.0
    Rdot0: float = 0.0

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise DimensionError(f"d must be an integer >= 1, got {self.d}")
        if self.eps not in (1, -1):
            raise ValueError(f"eps must be +1 or -1, got {self.eps}")
        if not self.c0 > 0:
            raise ValueError("c0 must be positive")
        if not self.R0 > 0:
            raise ValueError("R0 must be positive")
        if not math.isfinite(self.Rdot0):
            raise ValueError("Rdot0 must be finite")

    def accel(self, R):
        return -self.eps * self.c0 * np.asarray(R, float) ** (1 - self.d)


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ScalingSolution:
    params: ScalingParams
    times: np.ndarray
    R: np.ndarray
    Rdot: np.ndarray
    tau: np.ndarray
    dt: float = DEFAULT_DT
    _spline: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        for name in ("times", "R", "Rdot", "tau"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))
        n = len(self.times)
        if not (len(self.R) == len(self.Rdot) == len(self.tau) == n):
            raise ValueError("sample arrays must have equal length")
        if n > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    @property
    def t_end(self):
        return float(self.times[-1])

    def spline(self):
        # Hermite data (R, R') gives a C1 piecewise cubic, 4th order accurate
        if not self._spline:
            self._spline.append(CubicHermiteSpline(self.times, self.R, self.Rdot))
        return self._spline[0]

    def at(self, t):
        """Interpolated (R, Rdot) at arbitrary times inside the sampled range."""
        t = np.asarray(t, float)
        if np.any(t < self.times[0] - 1e-12) or np.any(t > self.times[-1] + 1e-12):
            raise WindowError("requested time outside the sampled range")
        sp = self.spline()
        return sp(t), sp.derivative()(t)

    def energy(self):
        return _energy(self.params, self.R, self.Rdot)

    def to_csv(self, path):
        write_csv(path, ["t", "R", "Rdot", "tau", "first_integral"],
                  [self.times, self.R, self.Rdot, self.tau, self.energy()])


@numba.njit(cache=True)
def _rhs(d, eps, c0, R, V):
    return V, -eps * c0 * R ** (1.0 - d), R ** (-0.5 * d)


@numba.njit(cache=True)
def _rk4_targets(d, eps, c0, R0, V0, dt, targets, floor):
    # classical RK4 on (R, R', tau); each interval [t_k, t_{k+1}] is cut into
    # equal substeps no longer than dt so the targets are hit exactly
    n = targets.shape[0]
    out = np.empty((n, 3))
    R, V, tau, t = R0, V0, 0.0, 0.0
    k = 0
    while k < n and targets[k] <= 0.0:
        out[k, 0] = R; out[k, 1] = V; out[k, 2] = tau
        k += 1
    while k < n:
        span = targets[k] - t
        m = max(1, int(math.ceil(span / dt - 1e-9)))
        h = span / m
        for _ in range(m):
            r1, a1, s1 = _rhs(d, eps, c0, R, V)
            r2, a2, s2 = _rhs(d, eps, c0, R + 0.5 * h * r1, V + 0.5 * h * a1)
            r3, a3, s3 = _rhs(d, eps, c0, R + 0.5 * h * r2, V + 0.5 * h * a2)
            r4, a4, s4 = _rhs(d, eps, c0, R + h * r3, V + h * a3)
            R += h * (r1 + 2 * r2 + 2 * r3 + r4) / 6.0
            V += h * (a1 + 2 * a2 + 2 * a3 + a4) / 6.0
            tau += h * (s1 + 2 * s2 + 2 * s3 + s4) / 6.0
            if not R > floor:
                return out, k
        t = targets[k]
        out[k, 0] = R; out[k, 1] = V; out[k, 2] = tau
        k += 1
    return out, k


def _solve(params, targets, dt, floor_rel):
    if not dt > 0:
        raise StepSizeError(f"dt must be positive, got {dt}")
    targets = np.ascontiguousarray(targets, dtype=float)
    floor = floor_rel * params.R0 if params.eps == 1 else 0.0
    out, k = _rk4_targets(float(params.d), float(params.eps), float(params.c0),
                          float(params.R0), float(params.Rdot0), float(dt), targets, float(floor))
    sol = ScalingSolution(params, targets[:k], out[:k, 0], out[:k, 1], out[:k, 2], dt=float(dt))
    if k < len(targets):
        raise CollapseError(
            f"R fell below {floor_rel:g}*R0 before t={targets[k]:g}", partial=sol)
    return sol


def integrate_r(params: ScalingParams, t_end: float, dt: float = DEFAULT_DT,
                stride: int = 1, floor: float = COLLAPSE_FLOOR) -> ScalingSolution:
    """RK4 solution sampled every ``stride`` steps (and at t_end).

    tau is carried as a third RK4 component rather than by quadrature of the
    samples, which keeps it 4th order like R.
    """
    if not dt > 0:
        raise StepSizeError(f"dt must be positive, got {dt}")
    if not t_end > 0:
        raise StepSizeError(f"t_end must be positive, got {t_end}")
    nsteps = max(1, int(math.ceil(t_end / dt - 1e-9)))
    idx = np.arange(0, nsteps + 1, max(1, int(stride)))
    targets = np.minimum(idx * dt, t_end)
    if targets[-1] < t_end:
        targets = np.append(targets, t_end)
    return _solve(params, targets, dt, floor)


def sample_r(params: ScalingParams, times, dt: float = DEFAULT_DT,
             floor: float = COLLAPSE_FLOOR) -> ScalingSolution:
    """Solution evaluated exactly at the given increasing times (t >= 0)."""
    times = np.asarray(times, float)
    if np.any(times < 0) or np.any(np.diff(times) <= 0):
        raise ValueError("times must be non-negative and strictly increasing")
    return _solve(params, times, dt, floor)


@dataclass(frozen=True)
class PowerLawSolution:
    times: np.ndarray
    R: np.ndarray
    Rdot: np.ndarray


def power_law_r(p: float, times, R0: float = 1.0, Rdot0: float = 0.0,
                dt: float = DEFAULT_DT) -> PowerLawSolution:
    """R'' = R^p sampled at the given times (same RK4 kernel, real exponent)."""
    times = np.ascontiguousarray(times, dtype=float)
    out, k = _rk4_targets(1.0 - p, -1.0, 1.0, float(R0), float(Rdot0), float(dt), times, 0.0)
    return PowerLawSolution(times[:k], out[:k, 0], out[:k, 1])


def closed_form_r(params: ScalingParams, t):
    if params.d != 1:
        raise DimensionError("closed form exists only for d=1")
    t = np.asarray(t, float)
    a = -params.eps * params.c0
    return 0.5 * a * t * t + params.Rdot0 * t + params.R0, a * t + params.Rdot0


def _energy(params, R, Rdot):
    R = np.asarray(R, float)
    Rdot = np.asarray(Rdot, float)
    d, k = params.d, params.eps * params.c0
    if d == 1:
        return 0.5 * Rdot ** 2 + k * R
    if d == 2:
        return 0.5 * Rdot ** 2 + k * np.log(R)
    return 0.5 * Rdot ** 2 - k / (d - 2) * R ** (2 - d)


def first_integral(params: ScalingParams, R, Rdot):
    if params.d < 2:
        raise DimensionError("first_integral is defined for d >= 2; use closed_form_r for d=1")
    if np.any(np.asarray(R) <= 0):
        raise ValueError("R must be positive")
    return _energy(params, R, Rdot)


def tau_infinity(sol: ScalingSolution) -> float:
    """Total rescaled time int_0^inf R^{-d/2} dt; math.inf when it diverges.

    The tail beyond the last sample is integrated exactly in the R variable,
    dt = dR / Rdot(R), with Rdot(R) taken from the first integral.
    """
    p = sol.params
    if p.eps != -1:
        raise ValueError("tau_infinity needs the plasma case eps=-1")
    if p.d <= 2:
        return math.inf
    if sol.Rdot[-1] <= 0:
        raise WindowError("solution has not started expanding; integrate further")
    E = float(_energy(p, sol.R[-1], sol.Rdot[-1]))
    d, c0 = p.d, p.c0

    def integrand(R):
        v2 = 2 * E - 2 * c0 / (d - 2) * R ** (2 - d)
        return R ** (-0.5 * d) / math.sqrt(max(v2, 1e-300))

    tail, _ = integrate.quad(integrand, float(sol.R[-1]), math.inf, epsabs=0, epsrel=1e-12, limit=200)
    return float(sol.tau[-1] + tail)


def tail_estimate(sol: ScalingSolution) -> float:
    """Cruder tail: integrand extrapolated with R ~ R_e + Rdot_inf (t - t_e)."""
    p = sol.params
    E = float(_energy(p, sol.R[-1], sol.Rdot[-1]))
    vinf = math.sqrt(2 * E)
    return float(sol.tau[-1] + sol.R[-1] ** (1 - 0.5 * p.d) / (vinf * (0.5 * p.d - 1)))


def _fd2(f, t, h):
    return (-f(t + 2 * h) + 16 * f(t + h) - 30 * f(t) + 16 * f(t - h) - f(t - 2 * h)) / (12 * h * h)


def lambda_rescale_check(sol: ScalingSolution, lam: float, window: float | None = None,
                         h0: float = 0.03) -> float:
    """Max residual of R_l'' + eps R_l^{1-d} for R_l(t) = c0^{-1/d} l^{-2/d} R(l t).

    The second derivative is a 5 point 4th order difference whose nodes
    l*(t + k h) fall on sample times of ``sol``, so the spline only ever
    returns stored values and the check measures the ODE solution itself.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    p = sol.params
    d = p.d
    T = sol.t_end / lam if window is None else float(window)
    if lam * T > sol.t_end * (1 + 1e-12):
        raise WindowError(f"lambda*window={lam * T:g} exceeds sampled range {sol.t_end:g}")
    base = float(np.median(np.diff(sol.times)))
    # step balancing truncation error of the stencil against round-off
    j = max(1, int(round(h0 * lam ** (-(1.5 - 0.5 / d)) * lam / base)))
    h = j * base / lam
    n = int(math.floor(T / h + 1e-9))
    if n < 5:
        raise WindowError("window too short for the difference stencil")
    t = np.arange(2, n - 1) * h
    sp = sol.spline()
    scale = p.c0 ** (-1.0 / d) * lam ** (-2.0 / d)

    def f(s):
        return scale * sp(lam * s)

    res = _fd2(f, t, h) + p.eps * f(t) ** (1 - d)
    return float(np.abs(res).max())


@dataclass(frozen=True)
class GrowthLaw:
    d: int
    name: str

    def __call__(self, t):
        t = np.asarray(t, float)
        if self.d == 1:
            return t * t
        if self.d == 2:
            return t * np.sqrt(np.log(t))
        return t

    def ratio(self, times, R):
        return np.asarray(R, float) / self(times)

    def fit(self, times, R, t_min=None):
        """Fit R ~ C*g(t) on times >= t_min; returns (C, max relative deviation)."""
        times = np.asarray(times, float)
        R = np.asarray(R, float)
        sel = times > (1.0 if t_min is None else t_min)
        if sel.sum() < 2:
            raise WindowError("not enough samples in the fit window")
        lr = np.log(R[sel]) - np.log(self(times[sel]))
        C = math.exp(lr.mean())
        return C, float(np.abs(np.exp(lr) / C - 1).max())

    def variation(self, times, R, t_min):
        """(max - min)/mean of R/g(t) over t >= t_min."""
        times = np.asarray(times, float)
        q = self.ratio(times[times >= t_min], np.asarray(R)[times >= t_min])
        return float((q.max() - q.min()) / q.mean())


def asymptotic_growth(d: int) -> GrowthLaw:
    names = {1: "t^2", 2: "t*sqrt(log t)"}
    if d < 1:
        raise DimensionError("d must be >= 1")
    return GrowthLaw(d, names.get(d, "t"))


def asymptotic_slope(params: ScalingParams) -> float:
    """lim R/t for d >= 3 plasma runs, sqrt(2E) from the first integral."""
    if params.d < 3 or params.eps != -1:
        raise DimensionError("a finite asymptotic slope exists for d >= 3, eps=-1")
    return math.sqrt(2 * float(_energy(params, params.R0, params.Rdot0)))
