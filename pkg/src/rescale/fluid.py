"""Radial pressureless Euler-Poisson in Lagrangian shell form, the
ball-plus-annulus counter-example, and a 1D isentropic Euler solver."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import diagnostics as dg
from .errors import ShockDetected
from .io import write_csv
from .radial import enclosed_mass, potential_energy, radial_accel
from .scaling_ode import ScalingParams, integrate_r, power_law_r, sample_r
from .transforms import sphere_area


@dataclass(frozen=True)
class ShellSystem:
    d: int
    r: np.ndarray
    vr: np.ndarray
    mass: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        for k in ("r", "vr", "mass"):
            a = np.array(getattr(self, k), float)
            a.setflags(write=False)
            object.__setattr__(self, k, a)
        if np.any(self.mass <= 0):
            raise ValueError("shell masses must be positive")
        if not np.all(np.isfinite(self.r)):
            raise ValueError("shell radii must be finite")

    @property
    def M(self):
        return float(self.mass.sum())

    def to_rows(self):
        n = len(self.r)
        return [np.full(n, self.t), np.arange(n), self.r, self.vr, self.mass]


def shell_accelerations(s: ShellSystem, eps: int = -1):
    """m(<r_i)/(|S^{d-1}| r_i^{d-1}) outward for eps=-1, half own mass at ties."""
    if np.any(s.r <= 0):
        raise ValueError("shell at zero radius: the Gauss-law force is singular there")
    return radial_accel(s.r, enclosed_mass(s.r, s.mass), s.d, eps)


def uniform_shells(d: int, K: int, r_in: float, r_out: float, density: float,
                   velocity=lambda r: 0.0 * r) -> ShellSystem:
    """K shells splitting a uniform annulus (or ball if r_in=0) into equal masses,
    each placed at the radius that halves its own mass."""
    S = sphere_area(d)
    V = lambda r: S / d * r ** d
    edges = (np.linspace(V(r_in), V(r_out), K + 1) / (S / d)) ** (1.0 / d)
    mid = ((edges[:-1] ** d + edges[1:] ** d) / 2) ** (1.0 / d)
    mass = np.full(K, density * (V(r_out) - V(r_in)) / K)
    return ShellSystem(d, mid, velocity(mid), mass)


def counterexample_shells(K_ball: int = 200, K_ann: int = 200) -> ShellSystem:
    """Density 3 on the unit ball at rest plus density 1 on 2<|x|<3 with u = x (d=3)."""
    a = uniform_shells(3, K_ball, 0.0, 1.0, 3.0)
    b = uniform_shells(3, K_ann, 2.0, 3.0, 1.0, velocity=lambda r: r)
    return ShellSystem(3, np.concatenate([a.r, b.r]), np.concatenate([a.vr, b.vr]),
                       np.concatenate([a.mass, b.mass]))


@dataclass(frozen=True)
class CounterexampleResult:
    slope_ball: float
    slope_annulus: float
    drift_ball: float
    drift_annulus: float
    ball: object
    annulus: object


def run_counterexample(t_end: float = 1e3, dt: float = 1e-3) -> CounterexampleResult:
    """Edges of the ball (R(0)=1, R'(0)=0) and of the annulus (R1(0)=2, R1'(0)=2),
    both under R'' = 1/R^2; returns R(t_end)/t_end and R1(t_end)/t_end."""
    stride = max(1, int(round(1.0 / dt)))
    ball = integrate_r(ScalingParams(3, -1, 1.0, 1.0, 0.0), t_end, dt, stride=stride)
    ann = integrate_r(ScalingParams(3, -1, 1.0, 2.0, 2.0), t_end, dt, stride=stride)
    # Rdot^2 = 2 - 2/R and Rdot^2 = 5 - 2/R1
    d1 = float(np.abs(ball.Rdot ** 2 - (2 - 2 / ball.R)).max())
    d2 = float(np.abs(ann.Rdot ** 2 - (5 - 2 / ann.R)).max())
    return CounterexampleResult(ball.R[-1] / t_end, ann.R[-1] / t_end, d1, d2, ball, ann)


def _shell_rhs(r, v, m, d, eps):
    # reflection through the center for shells that reach r < 0
    ra = np.abs(r)
    a = radial_accel(np.maximum(ra, 1e-300), enclosed_mass(ra, m), d, eps)
    return v, np.sign(r) * a


def step_shells_rk4(s: ShellSystem, dt: float, eps: int = -1) -> ShellSystem:
    r, v, m = s.r, s.vr, s.mass
    k1r, k1v = _shell_rhs(r, v, m, s.d, eps)
    k2r, k2v = _shell_rhs(r + 0.5 * dt * k1r, v + 0.5 * dt * k1v, m, s.d, eps)
    k3r, k3v = _shell_rhs(r + 0.5 * dt * k2r, v + 0.5 * dt * k2v, m, s.d, eps)
    k4r, k4v = _shell_rhs(r + dt * k3r, v + dt * k3v, m, s.d, eps)
    rn = r + dt * (k1r + 2 * k2r + 2 * k3r + k4r) / 6
    vn = v + dt * (k1v + 2 * k2v + 2 * k3v + k4v) / 6
    flip = rn < 0
    rn = np.where(flip, -rn, rn)
    vn = np.where(flip, -vn, vn)
    return ShellSystem(s.d, rn, vn, m, s.t + dt)


@dataclass
class EPConfig:
    d: int = 3
    K: int = 400
    radius: float = 1.0
    density: float = 1.0
    t_end: float = 10.0
    dt0: float = 1e-3
    grow_dt: bool = True
    cadence: int = 1
    eps: int = -1
    snapshot_times: tuple = ()


@dataclass
class EPRun:
    config: EPConfig
    times: np.ndarray
    R: np.ndarray
    Rdot: np.ndarray
    K: np.ndarray
    K0: np.ndarray
    P: np.ndarray
    I: np.ndarray
    M: float
    crossings: int
    snapshots: list = field(default_factory=list)
    final: ShellSystem | None = None

    @property
    def energy(self):
        return 0.5 * (self.K0 + self.P)

    def lyapunov(self) -> dg.LyapunovSeries:
        return dg.lyapunov_series(self.times, self.R, self.Rdot, self.K, self.P, self.I, self.M,
                                  self.config.d, self.config.eps)

    def shells_csv(self, path):
        cols = [np.concatenate(c) for c in zip(*(s.to_rows() for s in self.snapshots))] \
            if self.snapshots else [[]] * 5
        write_csv(path, ["t", "shell_id", "r", "vr", "mass"], cols)


def simulate_ep_shells(cfg: EPConfig, shells: ShellSystem | None = None) -> EPRun:
    """Shell run (RK4 per step, enclosed mass re-sorted at every stage).

    Crossings change the ordering; they are counted, not prevented.
    """
    from .kinetic import dynamical_time, time_grid
    s = uniform_shells(cfg.d, cfg.K, 0.0, cfg.radius, cfg.density) if shells is None else shells
    M = s.M
    t_dyn = dynamical_time(M, float(s.r.max()), s.d)
    ts = time_grid(cfg.t_end, cfg.dt0, t_dyn, cfg.grow_dt)
    sol = sample_r(ScalingParams(s.d, cfg.eps, 1.0, 1.0, 0.0), ts)
    K, K0, P, I, idx, snaps = [], [], [], [], [], []
    pending = sorted(cfg.snapshot_times)
    order = np.argsort(s.r, kind="stable")
    crossings = 0
    for n in range(len(ts)):
        R, V = sol.R[n], sol.Rdot[n]
        if n % cfg.cadence == 0 or n == len(ts) - 1:
            idx.append(n)
            K.append(float(np.sum(s.mass * (s.vr - V / R * s.r) ** 2)))
            K0.append(float(np.sum(s.mass * s.vr ** 2)))
            P.append(potential_energy(s.r, s.mass, s.d, eps=cfg.eps))
            I.append(float(np.sum(s.mass * s.r ** 2)))
        while pending and ts[n] >= pending[0] - 1e-12:
            snaps.append(s)
            pending.pop(0)
        if n == len(ts) - 1:
            break
        s = step_shells_rk4(s, ts[n + 1] - ts[n], cfg.eps)
        o = np.argsort(s.r, kind="stable")
        if not np.array_equal(o, order):
            crossings += 1
            order = o
    i = np.array(idx)
    return EPRun(cfg, ts[i], sol.R[i], sol.Rdot[i], np.array(K), np.array(K0), np.array(P),
                 np.array(I), M, crossings, snaps, s)


# ---------------------------------------------------------------- isentropic Euler

@dataclass(frozen=True)
class EulerState1D:
    x: np.ndarray  # cell centers of a uniform periodic grid
    rho: np.ndarray
    u: np.ndarray
    gamma: float = 2.0
    t: float = 0.0

    def __post_init__(self):
        if not self.gamma > 1:
            raise ValueError("gamma must exceed 1")
        if np.any(np.asarray(self.rho) < 0):
            raise ValueError("density must be non-negative")

    @property
    def dx(self):
        return float(self.x[1] - self.x[0])

    @property
    def mass(self):
        return float(np.sum(self.rho) * self.dx)


def gaussian_pulse(nx: int = 1500, half_width: float = 15.0, amplitude: float = 1.0,
                   gamma: float = 2.0) -> EulerState1D:
    dx = 2 * half_width / nx
    x = -half_width + (np.arange(nx) + 0.5) * dx
    return EulerState1D(x, amplitude * np.exp(-x * x), np.zeros(nx), gamma)


def _euler_rhs(rho, u, dx, gamma):
    # mass: flux form with 3rd order upwind-biased face values (positivity fallback)
    uf = 0.5 * (u + np.roll(u, -1))
    rm1, r1, r2 = np.roll(rho, 1), np.roll(rho, -1), np.roll(rho, -2)
    rp = (-rm1 + 5 * rho + 2 * r1) / 6
    rn = (2 * rho + 5 * r1 - r2) / 6
    rp = np.where(rp < 0, rho, rp)
    rn = np.where(rn < 0, r1, rn)
    F = uf * np.where(uf > 0, rp, rn)
    drho = -(F - np.roll(F, 1)) / dx
    # velocity: 3rd order upwind u u_x, 4th order centered pressure gradient
    um2, um1, up1, up2 = np.roll(u, 2), np.roll(u, 1), np.roll(u, -1), np.roll(u, -2)
    dplus = (um2 - 6 * um1 + 3 * u + 2 * up1) / (6 * dx)
    dminus = (-2 * um1 - 3 * u + 6 * up1 - up2) / (6 * dx)
    ux = np.where(u > 0, dplus, dminus)
    p = rho ** (gamma - 1)
    px = (np.roll(p, 2) - 8 * np.roll(p, 1) + 8 * np.roll(p, -1) - np.roll(p, -2)) / (12 * dx)
    return drho, -u * ux - px


def dispersion_functional(st: EulerState1D, R, Rdot, q):
    x, rho, u, g = st.x, st.rho, st.u, st.gamma
    eta = u - Rdot / R * x
    return float((R ** q * np.sum(rho * eta * eta) + np.sum(rho * x * x) / R ** 2
                  + (2 / g) * R ** q * np.sum(rho ** g)) * st.dx)


def steepness(st: EulerState1D, rel_floor: float = 1e-6):
    """(max |u_x|, max |u_x| dx / signal speed) over cells with non-negligible density."""
    mask = st.rho > rel_floor * st.rho.max()
    if not mask.any():
        return 0.0, 0.0
    ux = np.abs(np.gradient(st.u, st.dx))[mask]
    c = np.sqrt(st.gamma * st.rho[mask] ** (st.gamma - 1))
    speed = float(np.max(np.abs(st.u[mask]) + c))
    m = float(ux.max())
    return m, m * st.dx / speed


@dataclass
class EulerRun:
    times: np.ndarray
    R: np.ndarray
    Rdot: np.ndarray
    D: np.ndarray
    mass: np.ndarray
    states: list
    q: float
    stop_reason: str  # "t_end" or "shock"
    final: EulerState1D

    @property
    def shock_detected(self):
        return self.stop_reason == "shock"

    def max_increase(self):
        if len(self.D) < 2:
            return -math.inf
        return float(np.diff(self.D).max() / self.D[0])

    def functional_csv(self, path):
        write_csv(path, ["t", "R", "Rdot", "D"], [self.times, self.R, self.Rdot, self.D])

    def states_csv(self, path):
        cols = [np.concatenate(c) for c in zip(*((np.full(len(s.x), s.t), s.x, s.rho, s.u)
                                                 for s in self.states))]
        write_csv(path, ["t", "x", "rho", "u"], cols)


def simulate_euler_gas(state: EulerState1D, dt: float | None, t_end: float, d: int = 1,
                       cfl: float = 0.2, cadence: int = 0, max_dt_steep: float = 0.5,
                       max_cell_jump: float = 0.05, raise_on_shock: bool = False) -> EulerRun:
    """SSP-RK3 method of lines for rho_t + (rho u)_x = 0, u_t + u u_x = -(rho^{gamma-1})_x.

    Records D(t) with q = min(2, (gamma-1) d) and R'' = R^{-(q+1)}, R(0)=1, R'(0)=0.
    The run stops at the first step where either max|u_x| dt > max_dt_steep or
    the velocity jump across one cell exceeds max_cell_jump times the local
    signal speed max(|u| + c): past that point the profile is no longer
    resolved and the classical-solution estimate does not apply.
    """
    g = state.gamma
    q = min(2.0, (g - 1) * d)
    dx = state.dx
    if dt is None:
        c = math.sqrt(g * float(state.rho.max()) ** (g - 1))
        dt = cfl * dx / (c + float(np.abs(state.u).max()) + 1.0)
    n = max(1, int(math.ceil(t_end / dt - 1e-9)))
    dt = t_end / n
    ts = np.arange(n + 1) * dt
    rs = power_law_r(-(q + 1), ts, dt=min(dt, 1e-3))
    rho, u = state.rho.copy(), state.u.copy()
    D, mass, states, kept = [], [], [], []
    reason = "t_end"
    st = state
    for i in range(n + 1):
        st = EulerState1D(state.x, rho, u, g, ts[i])
        D.append(dispersion_functional(st, rs.R[i], rs.Rdot[i], q))
        mass.append(float(np.sum(rho) * dx))
        kept.append(i)
        if cadence and i % cadence == 0:
            states.append(st)
        m, jump = steepness(st)
        if i > 0 and (m * dt > max_dt_steep or jump > max_cell_jump):
            reason = "shock"
            break
        if i == n:
            break
        k1r, k1u = _euler_rhs(rho, u, dx, g)
        r1, u1 = rho + dt * k1r, u + dt * k1u
        k2r, k2u = _euler_rhs(r1, u1, dx, g)
        r2, u2 = 0.75 * rho + 0.25 * (r1 + dt * k2r), 0.75 * u + 0.25 * (u1 + dt * k2u)
        k3r, k3u = _euler_rhs(r2, u2, dx, g)
        rho = rho / 3 + 2 / 3 * (r2 + dt * k3r)
        u = u / 3 + 2 / 3 * (u2 + dt * k3u)
    if cadence and states[-1].t != st.t:
        states.append(st)
    k = np.array(kept)
    run = EulerRun(ts[k], rs.R[k], rs.Rdot[k], np.array(D), np.array(mass), states, q, reason, st)
    if reason == "shock" and raise_on_shock:
        raise ShockDetected(f"steepness monitor tripped at t={st.t:.4g}", partial=run)
    return run
