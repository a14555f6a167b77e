"""Split-step solvers for i hbar psi_t = -(hbar^2/2) Laplace psi + V psi.

Periodic boxes in 1D/2D use FFTs.  Radially symmetric 3D fields are stored as
phi = r psi on r_j = j h (j = 1..n) with phi = 0 at r = 0 and r = r_max, so the
radial Laplacian becomes phi'' and the kinetic step is diagonal in a DST-I basis.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.fft as sfft
from scipy.special import gamma as gamma_fn

from .diagnostics import LyapunovRecord, lyapunov_terms
from .errors import BoundaryReached, ExponentRangeError
from .io import write_csv
from .scaling_ode import ScalingParams, power_law_r, sample_r

QUANTUM_HEADER = ["t", "mass", "kinetic_shifted", "potential", "x2", "L", "PCL"]


class AliasingWarning(RuntimeWarning):
    pass


class OffCriticalWarning(RuntimeWarning):
    pass


# ---------------------------------------------------------------- grids

@dataclass(frozen=True)
class PeriodicGrid:
    n: tuple
    half_width: float

    @property
    def d(self):
        return len(self.n)

    @property
    def h(self):
        return 2 * self.half_width / np.array(self.n)

    @property
    def cell(self):
        return float(np.prod(self.h))

    def axes(self):
        return [-self.half_width + np.arange(m) * hh for m, hh in zip(self.n, self.h)]

    def coords(self):
        return np.meshgrid(*self.axes(), indexing="ij")

    def r2(self):
        return sum(c * c for c in self.coords())

    def wavenumbers(self):
        return np.meshgrid(*[2 * np.pi * np.fft.fftfreq(m, hh) for m, hh in zip(self.n, self.h)],
                           indexing="ij")

    def k2(self):
        return sum(k * k for k in self.wavenumbers())

    def integrate(self, f):
        return float(np.sum(f).real * self.cell)

    def scaled(self, factor):
        return PeriodicGrid(self.n, self.half_width * factor)

    def boundary_mask(self, frac=0.05):
        m = np.zeros(self.n, bool)
        for ax, c in enumerate(self.coords()):
            m |= np.abs(c) > (1 - frac) * self.half_width
        return m


@dataclass(frozen=True)
class RadialGrid:
    """3D radial grid r_j = j h, j = 1..n, h = r_max/(n+1)."""
    n: int
    r_max: float

    d = 3

    @property
    def h(self):
        return self.r_max / (self.n + 1)

    @property
    def r(self):
        return np.arange(1, self.n + 1) * self.h

    def r2(self):
        return self.r ** 2

    def kvals(self):
        return np.pi * np.arange(1, self.n + 1) / self.r_max

    def integrate(self, f):
        """int f dx for a radial function sampled on r."""
        return float(4 * math.pi * np.sum(np.real(f) * self.r ** 2) * self.h)

    def boundary_mask(self, frac=0.05):
        return self.r > (1 - frac) * self.r_max


@dataclass(frozen=True)
class WaveField:
    grid: object
    psi: np.ndarray
    hbar: float = 1.0
    t: float = 0.0

    def __post_init__(self):
        a = np.array(self.psi, dtype=complex)
        a.setflags(write=False)
        object.__setattr__(self, "psi", a)
        if not self.hbar > 0:
            raise ValueError("hbar must be positive")

    @property
    def density(self):
        return np.abs(self.psi) ** 2

    @property
    def mass(self):
        return self.grid.integrate(self.density)

    def with_psi(self, psi, dt=0.0):
        return WaveField(self.grid, psi, self.hbar, self.t + dt)


@dataclass(frozen=True)
class PotentialSpec:
    """kind: 'none', 'external-linear' (V = E0 . x), 'poisson' (-Laplace V = |psi|^2),
    or 'power' (V = g |psi|^{p-1}, g > 0 defocusing)."""
    kind: str = "none"
    g: float = 1.0
    p: float = 3.0
    E0: tuple = ()
    eps: int = -1

    def __post_init__(self):
        if self.kind not in ("none", "external-linear", "poisson", "power"):
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.kind == "power" and not self.p > 1:
            raise ExponentRangeError("power nonlinearity needs p > 1")
        if self.kind == "poisson" and self.eps != -1:
            raise ValueError("only the repulsive (electrostatic) Poisson coupling is supported")


# ---------------------------------------------------------------- potentials

def poisson_potential(density, grid):
    """V with -Laplace V = density: spectral with zero mean on periodic boxes,
    Green's function m(<r)/(4 pi r) + int_r^inf n s ds on the 3D radial grid."""
    n = np.asarray(density, float)
    if isinstance(grid, RadialGrid):
        r = np.concatenate([[0.0], grid.r])
        nn = np.concatenate([[n[0]], n])
        h = grid.h
        # cumulative trapezoid of n r^2 and of n r
        a = nn * r * r
        m = 4 * math.pi * np.concatenate([[0.0], np.cumsum(0.5 * h * (a[1:] + a[:-1]))])
        b = nn * r
        inner = np.concatenate([[0.0], np.cumsum(0.5 * h * (b[1:] + b[:-1]))])
        tail = inner[-1] - inner
        return (m[1:] / (4 * math.pi * r[1:])) + tail[1:]
    k2 = grid.k2()
    nh = np.fft.fftn(n)
    with np.errstate(divide="ignore", invalid="ignore"):
        vh = np.where(k2 > 0, nh / k2, 0.0)
    return np.real(np.fft.ifftn(vh))


def potential_of(w: WaveField, pot: PotentialSpec):
    if pot.kind == "none":
        return np.zeros(np.shape(w.psi))
    if pot.kind == "power":
        return pot.g * np.abs(w.psi) ** (pot.p - 1)
    if pot.kind == "poisson":
        return poisson_potential(w.density, w.grid)
    coords = w.grid.coords() if isinstance(w.grid, PeriodicGrid) else [w.grid.r]
    return sum(e * c for e, c in zip(pot.E0, coords))


# ---------------------------------------------------------------- stepping

def _kinetic_phase(grid, hbar, dt):
    if isinstance(grid, RadialGrid):
        return np.exp(-0.5j * hbar * grid.kvals() ** 2 * dt)
    return np.exp(-0.5j * hbar * grid.k2() * dt)


def _drift(grid, psi, phase):
    if isinstance(grid, RadialGrid):
        r = grid.r
        a = sfft.dst(psi * r, type=1, norm="ortho") * phase
        return sfft.dst(a, type=1, norm="ortho") / r, a
    a = np.fft.fftn(psi) * phase
    return np.fft.ifftn(a), a


def spectral_tail(a, frac=2 / 3):
    """Fraction of spectral mass beyond frac of the largest resolved wavenumber."""
    p = np.abs(a) ** 2
    idx = np.meshgrid(*[np.abs(np.fft.fftfreq(m)) * 2 for m in a.shape], indexing="ij")
    high = np.zeros(a.shape, bool)
    for i in idx:
        high |= i > frac
    tot = p.sum()
    return float(p[high].sum() / tot) if tot > 0 else 0.0


def _radial_tail(a, frac=2 / 3):
    p = np.abs(a) ** 2
    k = np.arange(1, len(a) + 1)
    tot = p.sum()
    return float(p[k > frac * len(a)].sum() / tot) if tot > 0 else 0.0


def split_step(w: WaveField, pot: PotentialSpec, dt: float, check_aliasing: bool = False,
               _phase=None) -> WaveField:
    """Strang step: half kick, spectral drift, half kick.  Self-consistent
    potentials are recomputed from the density before each half kick; the
    density does not change during a kick, so both kicks are exact."""
    return _strang(w, pot, dt, check_aliasing, _phase)[0]


def _strang(w, pot, dt, check_aliasing=False, phase=None, V=None):
    hb = w.hbar
    V = potential_of(w, pot) if V is None else V
    psi = w.psi * np.exp(-0.5j * V * dt / hb)
    phase = _kinetic_phase(w.grid, hb, dt) if phase is None else phase
    psi, a = _drift(w.grid, psi, phase)
    if check_aliasing:
        tail = _radial_tail(a) if isinstance(w.grid, RadialGrid) else spectral_tail(a)
        if tail > 1e-8:
            warnings.warn(f"spectral tail holds {tail:.2e} of the mass", AliasingWarning, stacklevel=3)
    nxt = w.with_psi(psi, dt)
    V = potential_of(nxt, pot) if pot.kind in ("power", "poisson") else V
    # |psi| is unchanged by the kick, so V stays valid for the next step
    return nxt.with_psi(psi * np.exp(-0.5j * V * dt / hb)), V


def boundary_fraction(w: WaveField, frac=0.05):
    n = w.density
    peak = n.max()
    return float(n[w.grid.boundary_mask(frac)].max() / peak) if peak > 0 else 0.0


# ---------------------------------------------------------------- moments

def _grad_norm2(w: WaveField, psi=None):
    """int |grad psi|^2, spectrally."""
    psi = w.psi if psi is None else psi
    g = w.grid
    if isinstance(g, RadialGrid):
        a = sfft.dst(psi * g.r, type=1, norm="ortho")
        return float(4 * math.pi * g.h * np.sum(np.abs(a) ** 2 * g.kvals() ** 2))
    a = np.fft.fftn(psi)
    return float(np.sum(np.abs(a) ** 2 * g.k2()) * g.cell / psi.size)


def _radial_derivative(grid, psi):
    """d psi / dr from the DST-I expansion of phi = r psi."""
    r = grid.r
    a = sfft.dst(psi * r, type=1, norm="ortho")
    b = np.concatenate([[0.0], a * grid.kvals(), [0.0]])
    dphi = sfft.dct(b, type=1)[1:-1] * math.sqrt(0.5 / (grid.n + 1))
    return dphi / r - psi / r


def shifted_kinetic(w: WaveField, omega: float):
    """int |(hbar grad - i omega x) psi|^2, with spectral derivatives (a chirp
    exp(-i omega |x|^2/2 hbar) would alias for large omega)."""
    g = w.grid
    if isinstance(g, RadialGrid):
        c = w.hbar * _radial_derivative(g, w.psi) - 1j * omega * g.r * w.psi
        return g.integrate(np.abs(c) ** 2)
    a = np.fft.fftn(w.psi)
    tot = 0.0
    for k, x in zip(g.wavenumbers(), g.coords()):
        c = w.hbar * np.fft.ifftn(1j * k * a) - 1j * omega * x * w.psi
        tot += np.sum(np.abs(c) ** 2)
    return float(tot * g.cell)


def wigner_moments(w: WaveField, R: float = 1.0, Rdot: float = 0.0):
    """(mass, int |(hbar grad - i (Rdot/R) x) psi|^2, int |x|^2 |psi|^2).

    These are the phase-space moments of the Wigner transform: total mass,
    int |v - (Rdot/R) x|^2 w and int |x|^2 w."""
    n = w.density
    return w.mass, shifted_kinetic(w, Rdot / R), w.grid.integrate(w.grid.r2() * n)


def lp_norm(w: WaveField, p: float):
    return w.grid.integrate(np.abs(w.psi) ** p) ** (1.0 / p)


def free_invariant(w: WaveField, t: float):
    """||(x + i t hbar grad) psi||^2 = t^2 ||(hbar grad - i x/t) psi||^2 (t > 0)."""
    if t == 0:
        return w.grid.integrate(w.grid.r2() * w.density)
    return t * t * shifted_kinetic(w, 1.0 / t)


def lyapunov_sp(w: WaveField, V, R: float, Rdot: float, d: int, M: float | None = None) -> LyapunovRecord:
    """Kinetic Lyapunov functional evaluated on wave-function moments
    (repulsive Poisson coupling, R'' = R^{1-d}, R(0)=1, R'(0)=0)."""
    M = w.mass if M is None else M
    _, K, I = wigner_moments(w, R, Rdot)
    P = w.grid.integrate(np.asarray(V) * w.density)
    lt, L, f = lyapunov_terms(R, Rdot, K, P, I, M, d, -1)
    return LyapunovRecord(w.t, R, Rdot, K, P, float(lt), float(L), float(f))


def nls_energy(w: WaveField, g: float, p: float):
    """(1/2) int |hbar grad psi|^2 + (2g/(p+1)) int |psi|^{p+1}."""
    return 0.5 * w.hbar ** 2 * _grad_norm2(w) + 2 * g / (p + 1) * w.grid.integrate(np.abs(w.psi) ** (p + 1))


def nls_q(p: float, d: int) -> float:
    return min((p - 1) * d / 2, 2.0)


def nls_lyapunov(w: WaveField, R: float, Rdot: float, g: float, p: float):
    """R^q [K + (4g/(p+1)) int |psi|^{p+1}] + R^{-2} int |x|^2 |psi|^2,
    the bracket being twice the energy in the shifted frame; non-increasing
    along R'' = R^{-(q+1)} for defocusing g > 0."""
    d = w.grid.d
    q = nls_q(p, d)
    _, K, I = wigner_moments(w, R, Rdot)
    N = w.grid.integrate(np.abs(w.psi) ** (p + 1))
    return R ** q * (K + 4 * g / (p + 1) * N) + I / R ** 2


# ---------------------------------------------------------------- pseudo-conformal

@dataclass(frozen=True)
class ConformalFrame:
    """omega(t) = omega0/(1 + c omega0 t), R(t) = R0 (1 + c omega0 t),
    tau(t) = t/(R0^2 (1 + c omega0 t)) + tau0.

    c = 2 a for the equation i hbar u_t = -a hbar^2 Laplace u + ...; the
    solvers here use a = 1/2, i.e. c = 1 (see ``for_solver``)."""
    omega0: float
    R0: float = 1.0
    rate: float = 2.0
    tau0: float = 0.0

    @classmethod
    def for_solver(cls, omega0, R0=1.0, tau0=0.0):
        return cls(omega0, R0, 1.0, tau0)

    def omega(self, t):
        return self.omega0 / (1 + self.rate * self.omega0 * t)

    def R(self, t):
        return self.R0 * (1 + self.rate * self.omega0 * t)

    def tau(self, t):
        return t / (self.R0 ** 2 * (1 + self.rate * self.omega0 * t)) + self.tau0


def is_critical(p: float, d: int) -> bool:
    return math.isclose(p - 1, 4 / d)


def pseudo_conformal_transform(w: WaveField, frame: ConformalFrame, t: float, alpha: float | None = None,
                               p: float | None = None, inverse: bool = False) -> WaveField:
    """u(t, x) = R^{-alpha} exp(i omega |x|^2 / 2 hbar) v(tau, x/R).

    Forward: w holds v on a xi-grid; the result holds u on the grid scaled by
    R(t), so no interpolation is needed.  inverse=True goes from u to v.
    """
    g = w.grid
    d = g.d
    alpha = d / 2 if alpha is None else alpha
    if p is not None and not is_critical(p, d):
        warnings.warn("p - 1 != 4/d: the transformed equation is not the same NLS",
                      OffCriticalWarning, stacklevel=2)
    if not isinstance(g, PeriodicGrid):
        raise TypeError("pseudo_conformal_transform works on periodic grids")
    R, om = frame.R(t), frame.omega(t)
    if inverse:
        ng = g.scaled(1 / R)
        psi = R ** alpha * np.exp(-0.5j * om * g.r2() / w.hbar) * w.psi
        return WaveField(ng, psi, w.hbar, frame.tau(t))
    ng = g.scaled(R)
    psi = R ** -alpha * np.exp(0.5j * om * ng.r2() / w.hbar) * w.psi
    return WaveField(ng, psi, w.hbar, t)


def pcl_functional(w: WaveField, t: float, frame: ConformalFrame | None, g: float, p: float):
    """Pseudo-conformal quantity (solver units, a = 1/2):

    frame given: R^2 [ (1/2) int |(hbar grad - i omega x) u|^2 + (2g/(p+1)) int |u|^{p+1} ]
    frame None : (1/2) ||(x + i t hbar grad) u||^2 + t^2 (2g/(p+1)) int |u|^{p+1}
    Both are constant for critical p - 1 = 4/d.
    """
    N = w.grid.integrate(np.abs(w.psi) ** (p + 1))
    if frame is None:
        return 0.5 * free_invariant(w, t) + t * t * 2 * g / (p + 1) * N
    R, om = frame.R(t), frame.omega(t)
    return R * R * (0.5 * shifted_kinetic(w, om) + 2 * g / (p + 1) * N)


# ---------------------------------------------------------------- interpolation lemma

def sobolev_constant(d: int) -> float:
    """Sharp constant of ||f||_{2d/(d-2)} <= S ||grad f||_2."""
    return (math.pi * d * (d - 2)) ** -0.5 * (gamma_fn(d) / gamma_fn(d / 2)) ** (1.0 / d)


def interpolation_lemma_check(u: WaveField, t: float, p: float):
    """(lhs, rhs) of ||u||_p <= C ||u||_2^a ||(x + i t grad) u||_2^{1-a} t^{-(1-a)},
    a = d/p - (d-2)/2, C = S_d^{1-a} (Hoelder, sharp Sobolev, and
    ||grad|u||| <= ||grad(e^{-i|x|^2/2t} u)|| = t^{-1} ||(x + i t grad) u||).

    The operator uses hbar = 1 regardless of u.hbar."""
    d = u.grid.d
    if d < 3:
        raise ExponentRangeError("the lemma is stated for d >= 3")
    if not 2 <= p <= 2 * d / (d - 2) + 1e-12:
        raise ExponentRangeError(f"p={p} outside [2, {2 * d / (d - 2):g}]")
    if not t > 0:
        raise ValueError("t must be positive")
    a = d / p - (d - 2) / 2
    v = WaveField(u.grid, u.psi, 1.0, u.t)
    lhs = lp_norm(v, p)
    m2 = math.sqrt(v.mass)
    J = math.sqrt(free_invariant(v, t))
    rhs = sobolev_constant(d) ** (1 - a) * m2 ** a * J ** (1 - a) * t ** (-(1 - a))
    return lhs, rhs


def random_radial_profile(grid: RadialGrid, rng, max_terms: int = 3) -> WaveField:
    """Sum of 1-3 complex Gaussians exp(-r^2/2s^2 + i b r^2), s in [0.5, 3],
    b in [-1, 1]; smooth and well inside the grid for r_max >= 30."""
    r2 = grid.r2()
    psi = np.zeros(grid.n, complex)
    for _ in range(int(rng.integers(1, max_terms + 1))):
        c = rng.normal() + 1j * rng.normal()
        s = rng.uniform(0.5, 3.0)
        b = rng.uniform(-1.0, 1.0)
        psi += c * np.exp(-0.5 * r2 / s ** 2 + 1j * b * r2)
    return WaveField(grid, psi)


# ---------------------------------------------------------------- runs

@dataclass
class QuantumRun:
    times: np.ndarray
    mass: np.ndarray
    kinetic_shifted: np.ndarray
    potential: np.ndarray
    x2: np.ndarray
    L: np.ndarray
    PCL: np.ndarray
    R: np.ndarray
    Rdot: np.ndarray
    extra: dict = field(default_factory=dict)
    snapshots: list = field(default_factory=list)
    final: WaveField | None = None

    def to_csv(self, path):
        write_csv(path, QUANTUM_HEADER, [self.times, self.mass, self.kinetic_shifted, self.potential,
                                         self.x2, self.L, self.PCL])

    def max_increase(self):
        return float(np.diff(self.L).max() / abs(self.L[0])) if len(self.L) > 1 else -math.inf


def gaussian(grid, amplitude=1.0, width=1.0, omega=0.0, hbar=1.0) -> WaveField:
    r2 = grid.r2()
    psi = amplitude * np.exp(-0.5 * r2 / width ** 2) * np.exp(0.5j * omega * r2 / hbar)
    return WaveField(grid, psi, hbar)


@dataclass
class NLSConfig:
    n: int = 4096
    half_width: float = 40.0
    d: int = 1
    p: float = 5.0
    g: float = 1.0
    dt: float = 1e-3
    t_end: float = 1.0
    amplitude: float = 1.0
    width: float = 1.0
    hbar: float = 1.0
    omega0: float = 1.0
    cadence: int = 10
    boundary_tol: float = 1e-10


def simulate_nls(cfg: NLSConfig, w0: WaveField | None = None) -> QuantumRun:
    grid = PeriodicGrid((cfg.n,) * cfg.d, cfg.half_width)
    w = gaussian(grid, cfg.amplitude, cfg.width, hbar=cfg.hbar) if w0 is None else w0
    pot = PotentialSpec("power", cfg.g, cfg.p) if cfg.g != 0 else PotentialSpec("none")
    nsteps = max(1, int(round(cfg.t_end / cfg.dt)))
    dt = cfg.t_end / nsteps
    ts = np.arange(nsteps + 1) * dt
    q = nls_q(cfg.p, grid.d)
    rs = power_law_r(-(q + 1), ts, dt=min(dt, 1e-3))
    frame = ConformalFrame.for_solver(cfg.omega0)
    phase = _kinetic_phase(grid, w.hbar, dt)
    rows, free = [], []
    for i in range(nsteps + 1):
        if i % cfg.cadence == 0 or i == nsteps:
            R, V = rs.R[i], rs.Rdot[i]
            m, K, I = wigner_moments(w, R, V)
            N = grid.integrate(np.abs(w.psi) ** (cfg.p + 1))
            rows.append((ts[i], m, K, 2 * cfg.g / (cfg.p + 1) * N, I,
                         nls_lyapunov(w, R, V, cfg.g, cfg.p),
                         pcl_functional(w, ts[i], frame, cfg.g, cfg.p), R, V))
            free.append(free_invariant(w, ts[i]))
            if boundary_fraction(w) > cfg.boundary_tol:
                raise BoundaryReached(f"density reached the box edge at t={ts[i]:.4g}",
                                      partial=_pack(rows, {"free_invariant": np.array(free)}, w))
        if i == nsteps:
            break
        w = split_step(w, pot, dt, check_aliasing=(i % (50 * cfg.cadence) == 0), _phase=phase)
    return _pack(rows, {"free_invariant": np.array(free)}, w)


def _pack(rows, extra, w):
    a = np.array(rows, float).reshape(-1, 9)
    return QuantumRun(*(a[:, k] for k in range(9)), extra=extra, final=w)


@dataclass
class SPConfig:
    n: int = 2047  # n + 1 a power of two keeps the DST fast
    r_max: float = 300.0
    dt: float = 2e-3
    t_end: float = 40.0
    amplitude: float = 1.0
    width: float = 1.0
    hbar: float = 1.0
    cadence: int = 10
    boundary_tol: float = 1e-10
    norm_p: float = 10.0 / 3.0


def simulate_sp_radial(cfg: SPConfig, w0: WaveField | None = None) -> QuantumRun:
    """3D radial Schroedinger-Poisson (repulsive) with the Lyapunov functional
    along R'' = R^{-2}, R(0)=1, R'(0)=0 and the L^p norm of psi as extra series."""
    grid = RadialGrid(cfg.n, cfg.r_max)
    w = gaussian(grid, cfg.amplitude, cfg.width, hbar=cfg.hbar) if w0 is None else w0
    pot = PotentialSpec("poisson")
    nsteps = max(1, int(round(cfg.t_end / cfg.dt)))
    dt = cfg.t_end / nsteps
    ts = np.arange(nsteps + 1) * dt
    sol = sample_r(ScalingParams(3, -1, 1.0, 1.0, 0.0), ts, dt=min(dt, 1e-3))
    phase = _kinetic_phase(grid, w.hbar, dt)
    rows, norms = [], []
    M = w.mass
    V = poisson_potential(w.density, grid)
    for i in range(nsteps + 1):
        if i % cfg.cadence == 0 or i == nsteps:
            rec = lyapunov_sp(w, V, sol.R[i], sol.Rdot[i], 3, M)
            rows.append((ts[i], w.mass, rec.K, rec.P, _x2(w), rec.L, math.nan, rec.R, rec.Rdot))
            norms.append((lp_norm(w, cfg.norm_p), lp_norm(w, 2 * cfg.norm_p) ** 2))
            if boundary_fraction(w) > cfg.boundary_tol:
                raise BoundaryReached(f"density reached r_max at t={ts[i]:.4g}",
                                      partial=_pack(rows, _sp_extra(norms), w))
        if i == nsteps:
            break
        w, V = _strang(w, pot, dt, i % 1000 == 0, phase, V)
    return _pack(rows, _sp_extra(norms), w)


def _sp_extra(norms):
    # lp_norm: ||psi||_p;  density_norm: || |psi|^2 ||_p = ||psi||_{2p}^2
    a = np.array(norms, float).reshape(-1, 2)
    return {"lp_norm": a[:, 0], "density_norm": a[:, 1]}


def _x2(w):
    return w.grid.integrate(w.grid.r2() * w.density)
