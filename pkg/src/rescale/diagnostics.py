"""Lyapunov functionals, dissipation identities, decay fits and weak norms.

Everything here works on plain arrays (moments, radii, weights) so the same
code serves particles, shells and wave functions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .errors import DimensionError, WindowError
from .io import write_csv
from .radial import enclosed_mass, radial_accel
from .transforms import sphere_area

LYAPUNOV_HEADER = ["t", "R", "Rdot", "K", "P", "logTerm", "L", "dLdt_formula", "dLdt_numeric"]


@dataclass(frozen=True)
class LyapunovRecord:
    t: float
    R: float
    Rdot: float
    K: float
    P: float
    logTerm: float
    L: float
    dLdt_formula: float
    dLdt_numeric: float = math.nan


@dataclass(frozen=True)
class LyapunovSeries:
    """Column form of a run's LyapunovRecords. I is the second moment."""
    t: np.ndarray
    R: np.ndarray
    Rdot: np.ndarray
    K: np.ndarray
    P: np.ndarray
    I: np.ndarray
    logTerm: np.ndarray
    L: np.ndarray
    dLdt_formula: np.ndarray
    dLdt_numeric: np.ndarray

    def __len__(self):
        return len(self.t)

    def record(self, i) -> LyapunovRecord:
        return LyapunovRecord(*(float(getattr(self, f.name)[i]) for f in fields(LyapunovRecord)))

    def records(self):
        return [self.record(i) for i in range(len(self))]

    def max_increase(self):
        """Largest one-step increase of L, relative to |L(0)|."""
        if len(self.L) < 2:
            return -math.inf
        return float(np.diff(self.L).max() / abs(self.L[0]))

    def max_deviation(self):
        return float(np.abs(self.L - self.L[0]).max() / abs(self.L[0]))

    def derivative_mismatch(self, floor=1e-8):
        """Max relative gap between formula and numerical dL/dt where |formula| > floor."""
        f = self.dLdt_formula
        sel = np.abs(f) > floor
        sel[0] = sel[-1] = False  # one-sided differences at the ends
        if not sel.any():
            return 0.0
        return float(np.max(np.abs(self.dLdt_numeric[sel] - f[sel]) / np.abs(f[sel])))

    def to_csv(self, path):
        write_csv(path, LYAPUNOV_HEADER, [getattr(self, h) for h in LYAPUNOV_HEADER])


def _check_unit_c0(c0):
    if c0 != 1:
        raise ValueError("Lyapunov functionals assume the c0=1 scaling equation")


def lyapunov_terms(R, Rdot, K, P, I, M, d, eps=-1):
    """(logTerm, L, dLdt_formula) for moments of a solution.

    K  = int f |v - (Rdot/R) x|^2   (shifted kinetic moment, no 1/2)
    P  = int rho U                   (U with Laplace U = eps rho)
    I  = int rho |x|^2
    L  = R^{d-2} (K + P) - eps I / R^2  [+ (M^2/2pi) log R when d = 2]
    dL/dt = (d-4) Rdot R^{d-3} K along R'' = -eps R^{1-d}.
    """
    R = np.asarray(R, float)
    Rdot = np.asarray(Rdot, float)
    K = np.asarray(K, float)
    if d < 2:
        raise DimensionError("the Lyapunov functional is defined for d >= 2")
    log_term = -eps * M * M / (2 * math.pi) * np.log(R) if d == 2 else np.zeros_like(R)
    L = R ** (d - 2) * (K + np.asarray(P, float)) - eps * np.asarray(I, float) / R ** 2 + log_term
    return log_term, L, (d - 4) * Rdot * R ** (d - 3) * K


def lyapunov_series(t, R, Rdot, K, P, I, M, d, eps=-1) -> LyapunovSeries:
    t = np.asarray(t, float)
    log_term, L, f = lyapunov_terms(R, Rdot, K, P, I, M, d, eps)
    num = np.gradient(L, t) if len(t) > 2 else np.full(len(t), math.nan)
    arr = lambda a: np.broadcast_to(np.asarray(a, float), t.shape).copy()
    return LyapunovSeries(t, arr(R), arr(Rdot), arr(K), arr(P), arr(I), arr(log_term), arr(L),
                          arr(f), num)


def _radial_moments(r, vr, ell, w, R, Rdot):
    K = np.sum(w * ((vr - (Rdot / R) * r) ** 2 + np.where(r > 0, ell * ell / np.maximum(r, 1e-300) ** 2, 0.0)))
    return float(K), float(np.sum(w * r * r))


def lyapunov_vp(snapshot, potential_energy, R, Rdot, M=None, t=None, eps=-1, c0=1.0) -> LyapunovRecord:
    """Single LyapunovRecord from a particle snapshot (radial or planar)."""
    _check_unit_c0(c0)
    e = snapshot
    M = float(np.sum(e.w)) if M is None else M
    if e.geometry == "radial":
        K, I = _radial_moments(e.x, e.v, e.ell, e.w, R, Rdot)
    elif e.geometry == "planar-2d":
        K = float(np.sum(e.w * np.sum((e.v - (Rdot / R) * e.x) ** 2, axis=1)))
        I = float(np.sum(e.w * np.sum(e.x ** 2, axis=1)))
    else:
        raise DimensionError("lyapunov_vp needs radial or planar-2d data (d >= 2)")
    lt, L, f = lyapunov_terms(R, Rdot, K, potential_energy, I, M, e.d, eps)
    return LyapunovRecord(e.t if t is None else t, R, Rdot, K, potential_energy, float(lt), float(L), float(f))


def lyapunov_ep(shells, potential_energy, R, Rdot, M=None, t=None, eps=-1, c0=1.0) -> LyapunovRecord:
    """Same functional with the fluid kinetic term int rho |u - (Rdot/R) x|^2."""
    _check_unit_c0(c0)
    s = shells
    M = float(np.sum(s.mass)) if M is None else M
    K, I = _radial_moments(s.r, s.vr, np.zeros_like(s.r), s.mass, R, Rdot)
    lt, L, f = lyapunov_terms(R, Rdot, K, potential_energy, I, M, s.d, eps)
    return LyapunovRecord(s.t if t is None else t, R, Rdot, K, potential_energy, float(lt), float(L), float(f))


def lower_bound_2d(M: float) -> float:
    """Lower bound of the d=2 plasma functional: M^2/4pi (1 - log(M/2pi))."""
    if not M > 0:
        raise ValueError("M must be positive")
    return M * M / (4 * math.pi) * (1 - math.log(M / (2 * math.pi)))


@dataclass(frozen=True)
class StrichartzResult:
    t: np.ndarray
    running: np.ndarray
    total: float
    last_decade_gain: float
    bounded: bool


def strichartz_integral(series: LyapunovSeries, d: int, tol: float = 0.05) -> StrichartzResult:
    """Running int_0^t Rdot R^{d-3} K dt (trapezoid) and a boundedness verdict:
    the last decade of time adds less than ``tol`` of the total."""
    if d not in (2, 3):
        raise DimensionError("the time-integrated kinetic bound is stated for d = 2, 3")
    t = np.asarray(series.t)
    g = series.Rdot * series.R ** (d - 3) * series.K
    run = np.concatenate([[0.0], np.cumsum(0.5 * (g[1:] + g[:-1]) * np.diff(t))])
    total = float(run[-1])
    k = np.searchsorted(t, t[-1] / 10.0)
    gain = float((total - run[k]) / total) if total > 0 else 0.0
    return StrichartzResult(t, run, total, gain, gain < tol)


@dataclass(frozen=True)
class DecayFit:
    exponent: float
    prefactor: float
    residual: float
    window: tuple


def fit_decay(t, value, R=None, t_min: float = 10.0, t_max: float = math.inf) -> DecayFit:
    """Least squares slope of log(value) against log(R) (or log t when R is None)."""
    t = np.asarray(t, float)
    y = np.asarray(value, float)
    X = t if R is None else np.asarray(R, float)
    sel = (t >= t_min) & (t <= t_max)
    if sel.sum() < 3:
        raise WindowError("fit window holds fewer than 3 samples")
    if np.any(y[sel] <= 0) or np.any(X[sel] <= 0):
        raise ValueError("decay fits need positive data")
    lx, ly = np.log(X[sel]), np.log(y[sel])
    A = np.column_stack([lx, np.ones_like(lx)])
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - ly) ** 2)))
    return DecayFit(float(coef[0]), float(math.exp(coef[1])), resid,
                    (float(t[sel][0]), float(t[sel][-1])))


def liminf_window(t, series, window: float, h=None):
    """Trailing minimum of series over [t - window, t]; with h (a function of t)
    the minimum of h(t)*series is returned as a second array."""
    t = np.asarray(t, float)
    s = np.asarray(series, float)
    lo = np.searchsorted(t, t - window, side="left")
    out = np.array([s[lo[i]:i + 1].min() for i in range(len(t))])
    if h is None:
        return out
    hs = h(t) * s
    return out, np.array([hs[lo[i]:i + 1].min() for i in range(len(t))])


def log_weight(t):
    return np.log(np.asarray(t, float) + 2.0)


def dual_norm_d12(r, w, d: int) -> float:
    """||grad U||_{L^2} for radial elements (an upper bound for the
    D^{1,2}-dual norm of rho).  Exact for the piecewise constant enclosed mass."""
    if d < 3:
        raise DimensionError("the D^{1,2} dual norm is used for d >= 3 only")
    r = np.asarray(r, float)
    w = np.asarray(w, float)
    if len(r) == 0 or w.sum() == 0:
        return 0.0
    o = np.argsort(r)
    rs = r[o]
    m = np.cumsum(w[o])  # mass inside (r_k, r_{k+1})
    S = sphere_area(d)
    # int_a^b m^2 r^{1-d} dr / S = m^2 (a^{2-d} - b^{2-d}) / ((d-2) S)
    a = rs[:-1]
    b = rs[1:]
    inner = np.sum(m[:-1] ** 2 * (a ** (2 - d) - b ** (2 - d))) / ((d - 2) * S)
    tail = m[-1] ** 2 * rs[-1] ** (2 - d) / ((d - 2) * S)
    return float(math.sqrt(inner + tail))


def dual_norm_d12_profile(r, rho, d: int) -> float:
    """Same quantity for a density sampled on a radial grid r (starting near 0)."""
    from scipy.integrate import cumulative_trapezoid, trapezoid
    if d < 3:
        raise DimensionError("the D^{1,2} dual norm is used for d >= 3 only")
    r = np.asarray(r, float)
    rho = np.asarray(rho, float)
    S = sphere_area(d)
    m = cumulative_trapezoid(S * rho * r ** (d - 1), r, initial=0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        g = np.where(r > 0, m * m / (S * r ** (d - 1)), 0.0)
    tail = m[-1] ** 2 * r[-1] ** (2 - d) / ((d - 2) * S)
    return float(math.sqrt(trapezoid(g, r) + tail))


@dataclass(frozen=True)
class SupportVerdict:
    ratio: np.ndarray
    inf_ratio: float
    chain_ok: bool
    ok: bool


def support_growth_check(t, r_series, R_series, L=None, M=None, t_min: float = 0.0,
                         rel_tol: float = 1e-9) -> SupportVerdict:
    """C(t) = r(t)/R(t) must stay bounded away from 0 on t >= t_min.

    With L and M given, the chain (M^2/2pi)(log R - log 2r) <= L(t) <= L(0)
    is checked at every sample as well.
    """
    t = np.asarray(t, float)
    ratio = np.asarray(r_series, float) / np.asarray(R_series, float)
    win = ratio[t >= t_min]
    if len(win) == 0:
        raise WindowError("empty support window")
    chain = True
    if L is not None and M is not None:
        L = np.asarray(L, float)
        lhs = M * M / (2 * math.pi) * (np.log(R_series) - np.log(2 * np.asarray(r_series)))
        tol = rel_tol * max(1.0, abs(L[0]))
        chain = bool(np.all(lhs <= L + tol) and np.all(L <= L[0] + tol))
    inf_r = float(win.min())
    # a support that keeps pace with R has a ratio that does not trend to 0:
    # require the last value to retain at least half of the window maximum
    ok = inf_r > 0 and win[-1] >= 0.5 * win.max() and chain
    return SupportVerdict(ratio, inf_r, chain, bool(ok))


def virial_2d(r, w, eps=-1):
    """-int rho x . grad U for radial d=2 data; equals M^2/4pi for eps=-1."""
    r = np.asarray(r, float)
    w = np.asarray(w, float)
    a = radial_accel(r, enclosed_mass(r, w), 2, eps)
    return float(np.sum(w * r * a))


def radial_density_norm(r, w, d: int, q: float, per_bin: int = 100) -> float:
    """||rho||_{L^q} for radial particle data, density from equal-count shells."""
    r = np.sort(np.asarray(r, float))
    w = np.asarray(w, float)
    n = len(r)
    nb = max(1, n // per_bin)
    edges_idx = np.linspace(0, n, nb + 1).astype(int)
    wm = w.mean() if np.allclose(w, w[0]) else None
    if wm is None:
        raise ValueError("equal weights expected")
    S = sphere_area(d)
    edges = np.concatenate([[0.0], 0.5 * (r[edges_idx[1:-1] - 1] + r[edges_idx[1:-1]]), [r[-1]]])
    mass = np.diff(edges_idx) * wm
    vol = S / d * (edges[1:] ** d - edges[:-1] ** d)
    rho = mass / vol
    return float(np.sum(mass * rho ** (q - 1)) ** (1 / q))


def generalized_exponents(d: int):
    """(weight exponent of B = R^{d-2-theta}, exponent p of R'' = R^p), theta = max(0, d-4)."""
    theta = max(0, d - 4)
    return d - 2 - theta, theta - (d - 1)


def log_limits_extrapolate(t, ratio, R, frac: float = 0.5):
    """Fit ratio = a + b/log R on the last ``frac`` of the samples; returns (raw, a)."""
    t = np.asarray(t, float)
    sel = t >= t[0] + (1 - frac) * (t[-1] - t[0])
    x = 1.0 / np.log(np.asarray(R, float)[sel])
    y = np.asarray(ratio, float)[sel]
    b, a = np.polyfit(x, y, 1)
    return float(y[-1]), float(a)


@dataclass(frozen=True)
class LogLimits:
    potential: tuple
    kinetic: tuple
    second_moment: tuple
    target: float


def ep_log_limits_2d(t, R, P, K, I, M) -> LogLimits:
    """Limits of P/log R, K/log R and I/(t^2 log R) for a d=2 plasma run.

    The targets are -M^2/2pi, M^2/2pi and M^2/2pi.  The approach is
    logarithmically slow, so each entry is (value at t_end, value
    extrapolated in 1/log R).  K here is the unshifted kinetic moment.
    """
    t = np.asarray(t, float)
    R = np.asarray(R, float)
    lr = np.log(R)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.asarray(P) / lr
        k = np.asarray(K) / lr
        i = np.asarray(I) / (t * t * lr)
    ok = t > 1
    return LogLimits(log_limits_extrapolate(t[ok], p[ok], R[ok]),
                     log_limits_extrapolate(t[ok], k[ok], R[ok]),
                     log_limits_extrapolate(t[ok], i[ok], R[ok]),
                     M * M / (2 * math.pi))
