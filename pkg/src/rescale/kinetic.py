"""Particle solvers for Vlasov-Poisson: the exact 1D sheet model, radially
symmetric shells with angular momentum in d = 2, 3, 4, and planar 2D data in a
constant perpendicular magnetic field."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import ndtri
from scipy.stats import qmc

from . import diagnostics as dg
from .errors import MassMismatchError
from .io import write_csv
from .radial import enclosed_mass, potential_energy, radial_accel
from .scaling_ode import ScalingParams, sample_r
from .transforms import StationaryState, ball_volume, sphere_area

GEOMETRIES = ("cartesian-1d", "radial", "planar-2d")


class CFLWarning(RuntimeWarning):
    pass


class SymmetryWarning(RuntimeWarning):
    pass


def _ro(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ParticleEnsemble:
    """Weighted particles.

    cartesian-1d: x, v scalars per particle.
    radial:       x = r >= 0, v = radial velocity, ell = |angular momentum|.
    planar-2d:    x, v of shape (N, 2).
    """
    geometry: str
    x: np.ndarray
    v: np.ndarray
    w: np.ndarray
    d: int
    ell: np.ndarray | None = None
    t: float = 0.0

    def __post_init__(self):
        if self.geometry not in GEOMETRIES:
            raise ValueError(f"unknown geometry {self.geometry!r}")
        for k in ("x", "v", "w") + (("ell",) if self.ell is not None else ()):
            object.__setattr__(self, k, _ro(getattr(self, k)))
        if np.any(self.w <= 0):
            raise ValueError("weights must be positive")
        if self.geometry == "radial":
            if self.ell is None:
                object.__setattr__(self, "ell", _ro(np.zeros_like(self.x)))
            if np.any(self.x < 0):
                raise ValueError("radial positions must be >= 0")
        if self.geometry == "cartesian-1d" and self.d != 1:
            raise ValueError("cartesian-1d geometry has d=1")
        if self.geometry == "planar-2d" and self.d != 2:
            raise ValueError("planar-2d geometry has d=2")

    @property
    def N(self):
        return len(self.w)

    @property
    def M(self):
        return float(self.w.sum())

    def radii(self):
        if self.geometry == "planar-2d":
            return np.hypot(self.x[:, 0], self.x[:, 1])
        return np.abs(self.x) if self.geometry == "cartesian-1d" else self.x

    def to_csv(self, path, append=False):
        """Snapshot rows t,id,x...,v...,weight (radial data adds the ell column)."""
        ids = np.arange(self.N)
        tt = np.full(self.N, self.t)
        if self.geometry == "planar-2d":
            hdr = ["t", "id", "x1", "x2", "v1", "v2", "weight"]
            cols = [tt, ids, self.x[:, 0], self.x[:, 1], self.v[:, 0], self.v[:, 1], self.w]
        elif self.geometry == "radial":
            hdr = ["t", "id", "r", "vr", "ell", "weight"]
            cols = [tt, ids, self.x, self.v, self.ell, self.w]
        else:
            hdr = ["t", "id", "x", "v", "weight"]
            cols = [tt, ids, self.x, self.v, self.w]
        write_csv(path, hdr, cols)


@dataclass(frozen=True)
class FieldSolution:
    """Per-particle acceleration and the potential energy P = int rho U."""
    force: np.ndarray
    potential: float
    enclosed: np.ndarray | None = None


# ---------------------------------------------------------------- fields

def sheet_field_1d(e: ParticleEnsemble, eps: int = -1) -> FieldSolution:
    """Exact 1D field: -eps*(mass to the left + half own/tied mass - M/2)."""
    if e.geometry != "cartesian-1d":
        raise ValueError("sheet_field_1d needs cartesian-1d data")
    M = e.M
    m_left = enclosed_mass(e.x, e.w)
    force = -eps * (m_left - 0.5 * M)
    # int rho U with U'' = eps rho, U = (eps/2) |x| * rho: eps * sum_{i<j} w_i w_j |x_i - x_j|
    o = np.argsort(e.x, kind="stable")
    xs, ws = e.x[o], e.w[o]
    cw = np.cumsum(ws) - ws
    cwx = np.cumsum(ws * xs) - ws * xs
    pair = np.sum(ws * (xs * cw - cwx))
    return FieldSolution(force, float(eps * pair), m_left)


def sheet_field_at(e: ParticleEnsemble, points, eps: int = -1):
    """1D field at arbitrary probe points (mass strictly left, half of ties)."""
    xs = np.sort(e.x)
    cw = np.concatenate([[0.0], np.cumsum(e.w[np.argsort(e.x, kind="stable")])])
    p = np.asarray(points, float)
    lo = cw[np.searchsorted(xs, p, "left")]
    hi = cw[np.searchsorted(xs, p, "right")]
    return -eps * (0.5 * (lo + hi) - 0.5 * e.M)


def pairwise_sheet_field(e: ParticleEnsemble, eps: int = -1):
    """O(N^2) oracle for sheet_field_1d."""
    dx = e.x[:, None] - e.x[None, :]
    return -eps * 0.5 * np.sum(e.w[None, :] * np.sign(dx), axis=1)


def radial_field(e: ParticleEnsemble, eps: int = -1, central_mass: float = 0.0) -> FieldSolution:
    """Gauss-law field for radial or planar (ring) data.

    central_mass adds a fixed point mass at the origin to the force only.
    """
    if e.geometry == "cartesian-1d":
        raise ValueError("use sheet_field_1d for 1D data")
    r = e.radii()
    m = enclosed_mass(r, e.w)
    a = radial_accel(r, m + central_mass, e.d, eps)
    P = potential_energy(r, e.w, e.d, m, eps)
    if e.geometry == "planar-2d":
        with np.errstate(invalid="ignore", divide="ignore"):
            unit = np.where(r[:, None] > 0, e.x / r[:, None], 0.0)
        a = a[:, None] * unit
    return FieldSolution(a, P, m)


def field_for(e: ParticleEnsemble, eps: int = -1, central_mass: float = 0.0) -> FieldSolution:
    if e.geometry == "cartesian-1d":
        return sheet_field_1d(e, eps)
    return radial_field(e, eps, central_mass)


def pairwise_log_energy(x, w, cutoff: float = 1e-12, eps: int = -1) -> float:
    """Point-particle 2D energy -eps * sum_{i,j} w_i w_j G(|x_i-x_j|), i != j,
    pairs closer than cutoff use the cutoff distance."""
    x = np.asarray(x, float)
    w = np.asarray(w, float)
    d = np.hypot(x[:, None, 0] - x[None, :, 0], x[:, None, 1] - x[None, :, 1])
    np.fill_diagonal(d, np.inf)
    d = np.maximum(d, cutoff)
    G = np.where(np.isfinite(d), -np.log(d) / (2 * math.pi), 0.0)
    return float(-eps * np.sum(w[:, None] * w[None, :] * G))


# ---------------------------------------------------------------- stepping

def _drift_radial(r, vr, ell, dt):
    # straight-line free flight in the orbital plane, expressed back in (r, vr)
    with np.errstate(divide="ignore", invalid="ignore"):
        vt = np.where(r > 0, ell / r, 0.0)
    px = r + vr * dt
    py = vt * dt
    rn = np.hypot(px, py)
    with np.errstate(divide="ignore", invalid="ignore"):
        vrn = np.where(rn > 0, (px * vr + py * vt) / rn, np.abs(vr))
    return rn, vrn


def _rotate(v, angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.column_stack([c * v[:, 0] + s * v[:, 1], -s * v[:, 0] + c * v[:, 1]])


def step_leapfrog(e: ParticleEnsemble, fld: FieldSolution, dt: float, eps: int = -1,
                  B0: float = 0.0, central_mass: float = 0.0):
    """One kick-drift-kick step; returns (new ensemble, field at new positions).

    Radial particles drift exactly along straight lines with their angular
    momentum, so ell is untouched and the centrifugal term is part of the
    drift.  With B0 != 0 (planar data) the velocity is rotated exactly by the
    magnetic term v x B0 e_z, split symmetrically around the drift.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    a = fld.force
    if e.geometry == "radial":
        v = e.v + 0.5 * dt * a
        x, v = _drift_radial(e.x, v, e.ell, dt)
    elif e.geometry == "planar-2d":
        v = e.v + 0.5 * dt * a
        if B0:
            v = _rotate(v, 0.5 * B0 * dt)
        x = e.x + dt * v
        if B0:
            v = _rotate(v, 0.5 * B0 * dt)
    else:
        v = e.v + 0.5 * dt * a
        x = e.x + dt * v
    mid = ParticleEnsemble(e.geometry, x, v, e.w, e.d, e.ell, e.t + dt)
    new_fld = field_for(mid, eps, central_mass)
    v = mid.v + 0.5 * dt * new_fld.force
    return replace(mid, v=v), new_fld


# ---------------------------------------------------------------- samplers

def _halton(n, dim, seed):
    return qmc.Halton(d=dim, scramble=True, seed=seed).random(n)


def _uniforms(n, dim, mode, seed):
    if mode == "halton":
        return _halton(n, dim, seed)
    if mode == "random":
        return np.random.default_rng(seed).random((n, dim))
    raise ValueError(f"unknown sampling mode {mode!r}")


def sample_cold_slab(N: int, M: float = 2.0, half_width: float = 1.0) -> ParticleEnsemble:
    """Uniform density on [-a, a] at rest, particles at cell midpoints."""
    x = -half_width + (np.arange(N) + 0.5) * (2 * half_width / N)
    return ParticleEnsemble("cartesian-1d", x, np.zeros(N), np.full(N, M / N), 1)


def sample_radial(N: int, d: int, M: float | None = None, radius: float = 1.0, sigma: float = 0.3,
                  mode: str = "halton", seed: int = 0) -> ParticleEnsemble:
    """Uniform ball of radius ``radius`` with isotropic Maxwellian velocities."""
    M = ball_volume(d) * radius ** d if M is None else M
    u = _uniforms(N, 1 + d, mode, seed)
    r = radius * u[:, 0] ** (1.0 / d)
    g = sigma * ndtri(np.clip(u[:, 1:], 1e-12, 1 - 1e-12))
    vr = g[:, 0]
    vperp = np.linalg.norm(g[:, 1:], axis=1)
    return ParticleEnsemble("radial", r, vr, np.full(N, M / N), d, ell=r * vperp)


def sample_planar(N: int, M: float | None = None, radius: float = 1.0, sigma: float = 0.3,
                  mode: str = "halton", seed: int = 0) -> ParticleEnsemble:
    """Uniform disc with isotropic Maxwellian velocities, planar coordinates."""
    M = math.pi * radius ** 2 if M is None else M
    u = _uniforms(N, 4, mode, seed)
    r = radius * np.sqrt(u[:, 0])
    th = 2 * math.pi * u[:, 1]
    x = np.column_stack([r * np.cos(th), r * np.sin(th)])
    v = sigma * ndtri(np.clip(u[:, 2:], 1e-12, 1 - 1e-12))
    return ParticleEnsemble("planar-2d", x, v, np.full(N, M / N), 2)


def dynamical_time(M: float, radius: float, d: int) -> float:
    """sqrt(radius / g) with g = M / (|S^{d-1}| radius^{d-1})."""
    S = 2.0 if d == 1 else sphere_area(d)
    return math.sqrt(S * radius ** d / M)


def time_grid(t_end: float, dt0: float, t_dyn: float, grow: bool = True):
    """Step times with dt = dt0*t_dyn*max(1, t/t_dyn) (or fixed dt0*t_dyn)."""
    ts = [0.0]
    t = 0.0
    base = dt0 * t_dyn
    while t < t_end * (1 - 1e-14):
        h = base * max(1.0, t / t_dyn) if grow else base
        t = min(t + h, t_end)
        if t_end - t < 1e-3 * h:
            t = t_end
        ts.append(t)
    return np.array(ts)


# ---------------------------------------------------------------- runs

@dataclass
class VPConfig:
    geometry: str = "radial"
    d: int = 3
    N: int = 10_000
    M: float | None = None
    radius: float = 1.0
    sigma: float = 0.3
    sampler: str = "halton"  # halton | random | cold-slab
    seed: int = 0
    t_end: float = 10.0
    dt0: float = 1e-3  # in units of the dynamical time
    grow_dt: bool = True
    eps: int = -1
    B0: float = 0.0
    cadence: int = 1  # Lyapunov samples every `cadence` steps
    snapshot_times: tuple = ()
    cfl_fraction: float = 1.0
    ode_dt: float = 1e-3


@dataclass
class VPRun:
    config: VPConfig
    times: np.ndarray
    R: np.ndarray
    Rdot: np.ndarray
    K: np.ndarray  # shifted kinetic moment
    K0: np.ndarray  # unshifted kinetic moment
    P: np.ndarray
    I: np.ndarray
    M: float
    mass: np.ndarray
    cross: np.ndarray | None
    snapshots: list = field(default_factory=list)
    final: ParticleEnsemble | None = None
    cfl_violations: int = 0
    noise0: float | None = None

    @property
    def energy(self):
        """Unscaled energy (K0 + P)/2."""
        return 0.5 * (self.K0 + self.P)

    def lyapunov(self) -> dg.LyapunovSeries:
        c = self.config
        return dg.lyapunov_series(self.times, self.R, self.Rdot, self.K, self.P, self.I, self.M,
                                  c.d, c.eps)

    def to_csv(self, path):
        self.lyapunov().to_csv(path)


def initial_ensemble(cfg: VPConfig) -> ParticleEnsemble:
    if cfg.geometry == "cartesian-1d":
        if cfg.sampler != "cold-slab":
            raise ValueError("1D runs use the cold-slab sampler")
        return sample_cold_slab(cfg.N, 2.0 if cfg.M is None else cfg.M, cfg.radius)
    if cfg.geometry == "radial":
        return sample_radial(cfg.N, cfg.d, cfg.M, cfg.radius, cfg.sigma, cfg.sampler, cfg.seed)
    return sample_planar(cfg.N, cfg.M, cfg.radius, cfg.sigma, cfg.sampler, cfg.seed)


def _cross(e, R, Rdot):
    # int (x . eta_perp) F with eta_perp = (-eta_2, eta_1): per particle -x x eta
    eta = e.v - (Rdot / R) * e.x
    c = e.x[:, 1] * eta[:, 0] - e.x[:, 0] * eta[:, 1]
    return float(np.sum(e.w * c)), float(np.sqrt(np.sum((e.w * c) ** 2)))


def _scaling_for(cfg, M, e0):
    if cfg.geometry == "cartesian-1d":
        # c0 = 2 normalization: the cold slab of mass 2 relaxes to 2*1[-1/2,1/2]
        return ScalingParams(1, cfg.eps, 2.0, 1.0, 2.0)
    return ScalingParams(cfg.d, cfg.eps, 1.0, 1.0, 0.0)


def simulate_vp(cfg: VPConfig, ensemble: ParticleEnsemble | None = None) -> VPRun:
    """Deterministic particle run with moments recorded every ``cadence`` steps."""
    e = initial_ensemble(cfg) if ensemble is None else ensemble
    if e.geometry != cfg.geometry or e.d != cfg.d:
        raise ValueError("ensemble geometry does not match the configuration")
    M = e.M
    t_dyn = dynamical_time(M, cfg.radius, cfg.d)
    ts = time_grid(cfg.t_end, cfg.dt0, t_dyn, cfg.grow_dt)
    sp = _scaling_for(cfg, M, e)
    sol = sample_r(sp, ts, dt=cfg.ode_dt)
    Rs, Vs = sol.R, sol.Rdot
    planar = e.geometry == "planar-2d"
    fld = field_for(e, cfg.eps)
    rec_idx = []
    K, K0, P, I, mass, cross = [], [], [], [], [], []
    snaps = []
    pending = sorted(cfg.snapshot_times)
    spacing0 = cfg.radius * cfg.N ** (-1.0 / cfg.d)
    n_cfl = 0
    noise0 = None
    for n in range(len(ts)):
        t, R, V = ts[n], Rs[n], Vs[n]
        if n % cfg.cadence == 0 or n == len(ts) - 1:
            rec_idx.append(n)
            if e.geometry == "radial":
                pec = e.v - (V / R) * e.x
                with np.errstate(divide="ignore", invalid="ignore"):
                    tang = np.where(e.x > 0, e.ell / e.x, 0.0) ** 2
                K.append(float(np.sum(e.w * (pec ** 2 + tang))))
                K0.append(float(np.sum(e.w * (e.v ** 2 + tang))))
                I.append(float(np.sum(e.w * e.x ** 2)))
            elif planar:
                pec = e.v - (V / R) * e.x
                K.append(float(np.sum(e.w * np.sum(pec ** 2, axis=1))))
                K0.append(float(np.sum(e.w * np.sum(e.v ** 2, axis=1))))
                I.append(float(np.sum(e.w * np.sum(e.x ** 2, axis=1))))
                c, nz = _cross(e, R, V)
                cross.append(c)
                if noise0 is None:
                    noise0 = nz
                    if abs(c) > 3 * nz:
                        warnings.warn("initial data is not radially symmetric within sampling noise",
                                      SymmetryWarning, stacklevel=2)
            else:
                pec = e.v - (V / R) * e.x
                K.append(float(np.sum(e.w * pec ** 2)))
                K0.append(float(np.sum(e.w * e.v ** 2)))
                I.append(float(np.sum(e.w * e.x ** 2)))
            P.append(fld.potential)
            mass.append(float(e.w.sum()))
        while pending and t >= pending[0] - 1e-12:
            snaps.append(e)
            pending.pop(0)
        if n == len(ts) - 1:
            break
        dt = ts[n + 1] - t
        if cfg.cfl_fraction and n % max(1, cfg.cadence) == 0:
            vmax = np.max(np.abs(e.v - (V / R) * e.x)) if e.N else 0.0
            if vmax * dt > cfg.cfl_fraction * R * spacing0:
                n_cfl += 1
                if n_cfl == 1:
                    warnings.warn(f"particles move more than {cfg.cfl_fraction:g} of the mean spacing "
                                  f"per step (t={t:g})", CFLWarning, stacklevel=2)
        e, fld = step_leapfrog(e, fld, dt, cfg.eps, cfg.B0 if planar else 0.0)
    ri = np.array(rec_idx)
    run = VPRun(cfg, ts[ri], Rs[ri], Vs[ri], np.array(K), np.array(K0), np.array(P), np.array(I), M,
                np.array(mass), np.array(cross) if planar else None, snaps, e, n_cfl, noise0)
    return run


def simulate_vpm(cfg: VPConfig, ensemble: ParticleEnsemble | None = None) -> VPRun:
    """Planar run in a constant perpendicular field B0 (cfg.B0)."""
    if cfg.geometry != "planar-2d" or cfg.d != 2:
        raise ValueError("the magnetized system is run on planar-2d data")
    return simulate_vp(cfg, ensemble)


# ---------------------------------------------------------------- weak distance

def weak_norm_distance(nu, xi, target: StationaryState, mass_tol: float = 1e-8) -> float:
    """Bounded-Lipschitz distance between a 1D density nu on the uniform grid xi
    and the stationary profile: int min(|Phi|, 1) dxi, Phi = int (nu - nu_inf)."""
    nu = np.asarray(nu, float)
    xi = np.asarray(xi, float)
    h = xi[1] - xi[0]
    # cell averages of the indicator target, exact at cells cut by the edge
    lo, hi = xi - 0.5 * h, xi + 0.5 * h
    a = target.radius
    cover = np.clip(np.minimum(hi, a) - np.maximum(lo, -a), 0.0, None) / h
    nu_inf = target.c0 * target.d * cover
    diff = (nu - nu_inf) * h
    if abs(diff.sum()) > mass_tol * target.M:
        raise MassMismatchError(f"mass mismatch {diff.sum():.3e}")
    Phi = np.cumsum(diff)
    return float(np.sum(np.minimum(np.abs(Phi), 1.0)) * h)


def cell_density_1d(x, w, xi_edges):
    """Histogram density of sheets on the given edges."""
    m, _ = np.histogram(x, bins=xi_edges, weights=w)
    return m / np.diff(xi_edges)


def field_distance_1d(e: ParticleEnsemble, R: float, target: StationaryState,
                      xi, eps: int = -1) -> float:
    """L^2 distance over the grid xi between -(field at R*xi) and the
    stationary gradient eps*c0*xi (inside) / eps*(M/2) sign(xi) (outside).

    Both are gradients of potentials, dU/dx = eps*(m_left - M/2) in 1D.
    """
    xi = np.asarray(xi, float)
    grad_u = -sheet_field_at(e, R * xi, eps)
    grad_w = target.field(xi, eps)
    h = xi[1] - xi[0]
    return float(math.sqrt(np.sum((grad_u - grad_w) ** 2) * h))
