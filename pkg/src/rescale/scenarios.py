"""Preset runs, one per verified statement, with their CSV and figure output.

A scenario is a default ScenarioConfig plus a runner ``fn(cfg, out_dir)``
that writes its CSV files and returns an Outcome (summary numbers and the
figures to render).  When a run aborts, the partial series carried by the
exception is written to partial.csv before re-raising.
"""
from __future__ import annotations

import difflib
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import diagnostics as dg
from . import fluid, kinetic, quantum
from .errors import ConfigError, RunAborted, WindowError
from .io import write_csv, write_rows
from .plotting import FigureSpec
from .scaling_ode import ScalingParams, closed_form_r, integrate_r, lambda_rescale_check
from .transforms import StationaryState

MODELS = ("ode", "vp1d", "vp-radial", "vpm2d", "ep-shells", "euler-gas", "nls", "sp")


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    model: str
    d: int
    eps: int = -1
    N: int = 10_000
    dt: float = 1e-3
    t_end: float = 10.0
    seed: int = 0
    cadence: int = 1

    def __post_init__(self):
        sc = REGISTRY.get(self.scenario)
        if sc is None:
            raise ConfigError(unknown_scenario_message(self.scenario))
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}; expected one of {', '.join(MODELS)}")
        if sc.defaults is not None and self.model != sc.defaults.model:
            raise ConfigError(f"scenario {self.scenario!r} runs model {sc.defaults.model!r}, "
                              f"not {self.model!r}")
        if self.eps not in (-1, 1):
            raise ConfigError("eps must be -1 or +1")
        for name in ("d", "N", "cadence"):
            v = getattr(self, name)
            if isinstance(v, bool) or int(v) != v or v <= 0:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        for name in ("dt", "t_end"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ConfigError(f"{name} must be a positive number, got {v!r}")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")

    def as_text(self):
        """Canonical key = value form, used for hashing and the manifest."""
        return "".join(f"{k} = {v!r}\n" for k, v in asdict(self).items())


@dataclass(frozen=True)
class Outcome:
    summary: dict
    figures: list = field(default_factory=list)


@dataclass(frozen=True)
class Scenario:
    id: str
    statement: str
    defaults: ScenarioConfig
    fn: object


REGISTRY: dict = {}


def unknown_scenario_message(name):
    close = difflib.get_close_matches(str(name), list(REGISTRY), n=1)
    hint = f"; did you mean {close[0]!r}?" if close else ""
    return f"unknown scenario {name!r}{hint} (use --list)"


def get(name) -> Scenario:
    if name not in REGISTRY:
        raise ConfigError(unknown_scenario_message(name))
    return REGISTRY[name]


def list_scenarios():
    """(id, model, statement) in registration order."""
    return [(s.id, s.defaults.model, s.statement) for s in REGISTRY.values()]


def make_config(name, **overrides) -> ScenarioConfig:
    base = get(name).defaults
    unknown = set(overrides) - {f.name for f in fields(ScenarioConfig)}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return replace(base, **overrides)


def run(cfg: ScenarioConfig, out_dir) -> Outcome:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        outcome = REGISTRY[cfg.scenario].fn(cfg, out)
    except RunAborted as exc:
        if hasattr(exc.partial, "to_csv"):
            exc.partial.to_csv(out / "partial.csv")
        raise
    write_summary(out / "summary.csv", outcome.summary)
    return outcome


def write_summary(path, summary):
    rows = []
    for k, v in summary.items():
        rows.append(f"{k},{v!r}" if isinstance(v, float) else f"{k},{v}")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write("key,value\n" + "\n".join(rows) + "\n")


def _register(id, statement, model, d, **kw):
    def deco(fn):
        REGISTRY[id] = Scenario(id, statement, None, fn)  # placeholder so the config validates
        REGISTRY[id] = Scenario(id, statement, ScenarioConfig(id, model, d, **kw), fn)
        return fn
    return deco


def _snapshot_times(t_end, t_first=1.0, n=31):
    t_first = min(t_first, 0.5 * t_end)
    return tuple(float(t) for t in np.concatenate([[0.0], np.geomspace(t_first, t_end, n)]))


def _safe_fit(t, y, R=None, t_min=10.0):
    try:
        return dg.fit_decay(t, y, R, t_min=t_min)
    except (WindowError, ValueError):
        return dg.DecayFit(math.nan, math.nan, math.nan, (math.nan, math.nan))


def _lyapunov_figure(ly, name="lyapunov", extra=()):
    return FigureSpec(name, ly.t, (("L(t)", ly.L),) + tuple(extra), ylabel="L")


# ---------------------------------------------------------------- scaling equation

@_register("scaling-d1", "closed-form parabola and logarithmic rescaled time of the d=1 scaling "
           "equation", "ode", 1, dt=1e-3, t_end=10.0)
def _scaling_d1(cfg, out):
    p = ScalingParams(1, cfg.eps, 1.0, 1.0, 0.0)
    sol = integrate_r(p, cfg.t_end, cfg.dt, stride=max(1, cfg.cadence))
    Rc, Vc = closed_form_r(p, sol.times)
    # c0 = 2, R = (1+t)^2 normalization for the rescaled time
    q = ScalingParams(1, -1, 2.0, 1.0, 2.0)
    sq = integrate_r(q, cfg.t_end, cfg.dt, stride=max(1, cfg.cadence))
    tau_exact = np.log1p(sq.times)
    write_csv(out / "scaling.csv", ["t", "R", "R_closed", "Rdot", "Rdot_closed", "tau_c0_2", "log1p_t"],
              [sol.times, sol.R, Rc, sol.Rdot, Vc, sq.tau, tau_exact])
    err_r = float(np.abs(sol.R - Rc).max())
    err_tau = float(np.abs(sq.tau - tau_exact).max())
    figs = [FigureSpec("scaling", sol.times, (("R numeric", sol.R), ("R closed form", Rc)), ylabel="R"),
            FigureSpec("tau", sq.times, (("tau", sq.tau), ("log(1+t)", tau_exact)), ylabel="tau")]
    return Outcome({"max_error_R": err_r, "max_error_tau": err_tau}, figs)


@_register("scaling-lambda", "invariance of the scaling equation under the rescaling "
           "R_l(t) = l^(-2/d) R(l t)", "ode", 3, dt=1e-3, t_end=100.0)
def _scaling_lambda(cfg, out):
    rows = []
    for d in (2, 3):
        sol = integrate_r(ScalingParams(d, cfg.eps, 1.0, 1.0, 0.0), cfg.t_end, cfg.dt)
        for lam in (0.5, 2.0, 10.0):
            rows.append((d, lam, lambda_rescale_check(sol, lam)))
    write_rows(out / "lambda_residuals.csv", ["d", "lambda", "residual"], rows)
    return Outcome({"max_residual": max(r[2] for r in rows)})


# ---------------------------------------------------------------- fluid

@_register("counterexample-d3", "counter-example: a ball and a fast annulus spread at rates "
           "sqrt(2) t and sqrt(5) t, so no single rescaled profile attracts", "ep-shells", 3,
           dt=1e-3, t_end=1000.0)
def _counterexample(cfg, out):
    res = fluid.run_counterexample(cfg.t_end, cfg.dt)
    b, a = res.ball, res.annulus
    t = b.times
    with np.errstate(divide="ignore", invalid="ignore"):
        sb = np.where(t > 0, b.R / t, np.nan)
        sa = np.where(t > 0, a.R / t, np.nan)
    write_csv(out / "counterexample.csv", ["t", "R_ball", "R_annulus", "slope_ball", "slope_annulus"],
              [t, b.R, a.R, sb, sa])
    figs = [FigureSpec("slopes", t[1:], (("ball edge R/t", sb[1:]), ("annulus edge R/t", sa[1:])),
                       ylabel="R/t", logx=True)]
    return Outcome({"slope_ball": res.slope_ball, "slope_annulus": res.slope_annulus,
                    "first_integral_drift": max(res.drift_ball, res.drift_annulus)}, figs)


def _ep(cfg, out):
    ec = fluid.EPConfig(d=cfg.d, K=cfg.N, t_end=cfg.t_end, dt0=cfg.dt, cadence=cfg.cadence,
                        eps=cfg.eps, snapshot_times=_snapshot_times(cfg.t_end, n=11))
    run = fluid.simulate_ep_shells(ec)
    ly = run.lyapunov()
    ly.to_csv(out / "lyapunov.csv")
    run.shells_csv(out / "shells.csv")
    e = run.energy
    s = {"L0": float(ly.L[0]), "max_increase": ly.max_increase(), "crossings": run.crossings,
         "energy_drift": float(np.abs(e - e[0]).max() / abs(e[0]))}
    return run, ly, s


@_register("ep-shells-d3", "Lyapunov functional of the pressureless plasma fluid is non-increasing "
           "(d=3 shells)", "ep-shells", 3, N=400, dt=1e-3, t_end=100.0)
def _ep3(cfg, out):
    run, ly, s = _ep(cfg, out)
    return Outcome(s, [_lyapunov_figure(ly)])


@_register("ep-shells-d2", "d=2 plasma fluid: functional with log R term stays above "
           "M^2/4pi (1 - log(M/2pi)); logarithmic limits of P, K, I", "ep-shells", 2,
           N=400, dt=1e-3, t_end=100.0)
def _ep2(cfg, out):
    run, ly, s = _ep(cfg, out)
    bound = dg.lower_bound_2d(run.M)
    lim = dg.ep_log_limits_2d(run.times, run.R, run.P, run.K0, run.I, run.M)
    s.update({"lower_bound": bound, "min_L": float(ly.L.min()),
              "P_over_logR": lim.potential[1], "K_over_logR": lim.kinetic[1],
              "I_over_t2logR": lim.second_moment[1], "log_limit_target": lim.target})
    fig = _lyapunov_figure(ly, extra=(("lower bound", np.full(len(ly.t), bound)),))
    return Outcome(s, [fig])


@_register("euler-gas", "isentropic gas (gamma=2): dispersion functional non-increasing up to "
           "shock formation", "euler-gas", 1, N=1500, dt=1e-3, t_end=3.0, cadence=100)
def _euler(cfg, out):
    st = fluid.gaussian_pulse(nx=cfg.N)
    run = fluid.simulate_euler_gas(st, cfg.dt, cfg.t_end, cadence=cfg.cadence)
    run.functional_csv(out / "functional.csv")
    run.states_csv(out / "states.csv")
    s = {"stop_reason": run.stop_reason, "t_stop": float(run.times[-1]),
         "max_increase": run.max_increase(),
         "mass_drift": float(np.abs(run.mass - run.mass[0]).max() / run.mass[0])}
    return Outcome(s, [FigureSpec("functional", run.times, (("D(t)", run.D),), ylabel="D")])


# ---------------------------------------------------------------- kinetic

@_register("vp1d-cold-slab", "d=1 sheet model: the rescaled field of a cold slab converges to "
           "the stationary field at rate 1/(1+t)", "vp1d", 1, N=10_000, dt=0.05, t_end=1000.0)
def _vp1d(cfg, out):
    vc = kinetic.VPConfig(geometry="cartesian-1d", d=1, N=cfg.N, sampler="cold-slab", seed=cfg.seed,
                          t_end=cfg.t_end, dt0=cfg.dt, cadence=cfg.cadence, eps=cfg.eps,
                          snapshot_times=_snapshot_times(cfg.t_end), cfl_fraction=0.0)
    run = kinetic.simulate_vp(vc)
    target = StationaryState(run.M, 1, 2.0)
    xi = np.linspace(-1.5, 1.5, 3001)
    edges = np.linspace(-2.0, 2.0, 4001)
    centers = 0.5 * (edges[1:] + edges[:-1])
    ts = np.array([e.t for e in run.snapshots])
    Rs = (1 + ts) ** 2
    fd = [kinetic.field_distance_1d(e, R, target, xi, cfg.eps) for e, R in zip(run.snapshots, Rs)]
    wd = [kinetic.weak_norm_distance(kinetic.cell_density_1d(e.x / R, e.w, edges), centers, target)
          for e, R in zip(run.snapshots, Rs)]
    write_csv(out / "distances.csv", ["t", "R", "field_distance", "weak_distance"], [ts, Rs, fd, wd])
    write_csv(out / "moments.csv", ["t", "R", "Rdot", "K", "P", "energy"],
              [run.times, run.R, run.Rdot, run.K, run.P, run.energy])
    fit = _safe_fit(1 + ts, fd, t_min=10.0)
    e = run.energy
    s = {"field_exponent": fit.exponent, "fit_residual": fit.residual,
         "energy_drift": float(np.abs(e - e[0]).max() / abs(e[0]))}
    fig = FigureSpec("distances", 1 + ts[1:], (("field L2", np.array(fd[1:])), ("weak", np.array(wd[1:]))),
                     xlabel="1+t", ylabel="distance", logx=True, logy=True, style="o-")
    return Outcome(s, [fig])


def _vp_config(cfg, **kw):
    return kinetic.VPConfig(d=cfg.d, N=cfg.N, seed=cfg.seed, t_end=cfg.t_end, dt0=cfg.dt,
                            cadence=cfg.cadence, eps=cfg.eps, **kw)


def _vp_summary(run, ly):
    e = run.energy
    return {"L0": float(ly.L[0]), "max_increase": ly.max_increase(), "max_deviation": ly.max_deviation(),
            "derivative_mismatch": ly.derivative_mismatch(),
            "energy_drift": float(np.abs(e - e[0]).max() / abs(e[0])),
            "cfl_violations": run.cfl_violations}


@_register("vp-radial-d3", "Lyapunov functional of the radial plasma is non-increasing (d=3)",
           "vp-radial", 3, N=10_000, dt=1e-3, t_end=10.0)
def _vp3(cfg, out):
    run = kinetic.simulate_vp(_vp_config(cfg))
    ly = run.lyapunov()
    ly.to_csv(out / "lyapunov.csv")
    return Outcome(_vp_summary(run, ly), [_lyapunov_figure(ly)])


@_register("vp-radial-d4", "Lyapunov functional of the radial plasma is constant (d=4)",
           "vp-radial", 4, N=10_000, dt=1e-3, t_end=10.0)
def _vp4(cfg, out):
    return _vp3(cfg, out)


@_register("vp-radial-d2", "d=2 plasma: functional with log R term is non-increasing and bounded "
           "below by M^2/4pi (1 - log(M/2pi)); virial identity M^2/4pi", "vp-radial", 2,
           N=10_000, dt=1e-3, t_end=10.0)
def _vp2(cfg, out):
    run = kinetic.simulate_vp(_vp_config(cfg))
    ly = run.lyapunov()
    ly.to_csv(out / "lyapunov.csv")
    s = _vp_summary(run, ly)
    bound = dg.lower_bound_2d(run.M)
    f = run.final
    s.update({"lower_bound": bound, "min_L": float(ly.L.min()),
              "virial": dg.virial_2d(f.x, f.w, cfg.eps), "virial_target": run.M ** 2 / (4 * math.pi)})
    fig = _lyapunov_figure(ly, extra=(("lower bound", np.full(len(ly.t), bound)),))
    return Outcome(s, [fig])


@_register("vp-dispersion-d3", "d=3 dispersion: time-integrated kinetic bound stays finite and "
           "||rho||_{5/3} decays at least like R^(-3/5)", "vp-radial", 3,
           N=10_000, dt=1e-3, t_end=1000.0)
def _vp_disp(cfg, out):
    snaps = tuple(float(t) for t in np.geomspace(min(10.0, cfg.t_end / 10), cfg.t_end, 21))
    run = kinetic.simulate_vp(_vp_config(cfg, snapshot_times=snaps))
    ly = run.lyapunov()
    ly.to_csv(out / "lyapunov.csv")
    st = dg.strichartz_integral(ly, 3)
    write_csv(out / "strichartz.csv", ["t", "running_integral"], [st.t, st.running])
    ts = np.array([e.t for e in run.snapshots])
    Rs = np.interp(ts, run.times, run.R)
    rho = [dg.radial_density_norm(e.x, e.w, 3, 5 / 3) for e in run.snapshots]
    dual = [dg.dual_norm_d12(e.x / R, e.w, 3) for e, R in zip(run.snapshots, Rs)]
    write_csv(out / "norms.csv", ["t", "R", "rho_norm_5_3", "rescaled_dual_norm"], [ts, Rs, rho, dual])
    fit = _safe_fit(ts, rho, Rs)
    s = _vp_summary(run, ly)
    s.update({"strichartz_total": st.total, "strichartz_last_decade_gain": st.last_decade_gain,
              "rho_exponent_vs_R": fit.exponent, "fit_residual": fit.residual})
    figs = [FigureSpec("strichartz", st.t, (("running integral", st.running),), ylabel="integral"),
            FigureSpec("rho_norm", Rs, (("||rho||_5/3", np.array(rho)), ("R^-3/5", rho[0] * (Rs / Rs[0]) ** -0.6)),
                       xlabel="R", ylabel="norm", logx=True, logy=True, style="o-")]
    return Outcome(s, figs)


@_register("vpm-b1", "magnetized plasma in a constant field B0=1: symmetric data keep the angular "
           "cross-term at noise level and the functional non-increasing", "vpm2d", 2,
           N=10_000, dt=1e-3, t_end=10.0, cadence=10)
def _vpm(cfg, out):
    run = kinetic.simulate_vpm(_vp_config(cfg, geometry="planar-2d", B0=1.0))
    ly = run.lyapunov()
    ly.to_csv(out / "lyapunov.csv")
    write_csv(out / "cross_term.csv", ["t", "cross", "noise_floor"],
              [run.times, run.cross, np.full(len(run.times), run.noise0)])
    s = _vp_summary(run, ly)
    s.update({"noise_floor": run.noise0,
              "max_cross_over_noise": float(np.abs(run.cross).max() / run.noise0)})
    figs = [_lyapunov_figure(ly),
            FigureSpec("cross_term", run.times, (("cross-term", run.cross),
                                                 ("3x noise floor", np.full(len(run.times), 3 * run.noise0))),
                       ylabel="int (x . eta_perp) f")]
    return Outcome(s, figs)


# ---------------------------------------------------------------- quantum

@_register("nls-critical-d1", "critical defocusing NLS (p=5, d=1): the pseudo-conformal law is "
           "conserved; free control conserves ||(x + i t hbar grad) psi||^2", "nls", 1,
           N=4096, dt=1e-3, t_end=1.0, cadence=10)
def _nls(cfg, out):
    base = quantum.NLSConfig(n=cfg.N, dt=cfg.dt, t_end=cfg.t_end, cadence=cfg.cadence, g=-cfg.eps * 1.0)
    run = quantum.simulate_nls(base)
    free = quantum.simulate_nls(replace(base, g=0.0))
    run.to_csv(out / "nls.csv")
    fi = free.extra["free_invariant"]
    write_csv(out / "pcl.csv", ["t", "PCL", "free_invariant"], [run.times, run.PCL, fi])
    s = {"pcl_drift": float(np.abs(run.PCL - run.PCL[0]).max() / abs(run.PCL[0])),
         "free_invariant_drift": float(np.abs(fi - fi[0]).max() / abs(fi[0])),
         "mass_drift": float(np.abs(run.mass - run.mass[0]).max() / run.mass[0]),
         "L_max_increase": run.max_increase()}
    figs = [FigureSpec("pcl", run.times, (("PCL / PCL(0) - 1", run.PCL / run.PCL[0] - 1),
                                          ("free invariant / value(0) - 1", fi / fi[0] - 1)),
                       ylabel="relative drift")]
    return Outcome(s, figs)


@_register("sp-radial-d3", "Schroedinger-Poisson (d=3, radial): Lyapunov functional "
           "non-increasing and ||psi||_{10/3} bounded by R^(-3/10)", "sp", 3,
           N=2047, dt=2e-3, t_end=40.0, cadence=10)
def _sp(cfg, out):
    sc = quantum.SPConfig(n=cfg.N, dt=cfg.dt, t_end=cfg.t_end, cadence=cfg.cadence)
    if cfg.eps != -1:
        raise ConfigError("the Schroedinger-Poisson scenario is repulsive (eps = -1)")
    run = quantum.simulate_sp_radial(sc)
    run.to_csv(out / "sp.csv")
    M = float(run.mass[0])
    ly = dg.lyapunov_series(run.times, run.R, run.Rdot, run.kinetic_shifted, run.potential, run.x2, M, 3)
    ly.to_csv(out / "lyapunov.csv")
    ln, dn = run.extra["lp_norm"], run.extra["density_norm"]
    write_csv(out / "norms.csv", ["t", "R", "psi_norm_10_3", "density_norm_10_3"], [run.times, run.R, ln, dn])
    f1 = _safe_fit(run.times, ln, run.R)
    f2 = _safe_fit(run.times, dn, run.R)
    s = {"L0": float(ly.L[0]), "max_increase": ly.max_increase(),
         "mass_drift": float(np.abs(run.mass - M).max() / M),
         "psi_norm_exponent_vs_R": f1.exponent, "density_norm_exponent_vs_R": f2.exponent,
         "bound_exponent_vs_R": -0.3}
    figs = [_lyapunov_figure(ly),
            FigureSpec("norms", run.R[1:], (("||psi||_10/3", ln[1:]), ("|| |psi|^2 ||_10/3", dn[1:])),
                       xlabel="R", ylabel="norm", logx=True, logy=True)]
    return Outcome(s, figs)


@_register("interpolation-lemma-d3", "interpolation lemma: ||u||_p <= C ||u||_2^a "
           "||(x + i t grad) u||_2^(1-a) t^(a-1) on random radial profiles", "sp", 3,
           N=50, dt=1.0, t_end=10.0)
def _lemma(cfg, out):
    rng = np.random.default_rng(cfg.seed)
    grid = quantum.RadialGrid(4095, 60.0)
    rows = []
    ts = [t for t in (0.1, 1.0, 10.0) if t <= cfg.t_end] or [cfg.t_end]
    for k in range(cfg.N):
        u = quantum.random_radial_profile(grid, rng)
        for p in (2.0, 3.0, 6.0):
            for t in ts:
                lhs, rhs = quantum.interpolation_lemma_check(u, t, p)
                rows.append((k, p, t, lhs, rhs, lhs / rhs))
    write_rows(out / "lemma.csv", ["profile", "p", "t", "lhs", "rhs", "ratio"], rows)
    ratios = np.array([r[5] for r in rows])
    s = {"checks": len(rows), "max_ratio": float(ratios.max()),
         "violations": int(np.sum(ratios > 1 + 1e-12))}
    fig = FigureSpec("lemma_ratios", np.arange(len(rows)), (("lhs / rhs", ratios),), xlabel="check",
                     ylabel="ratio", style=".")
    return Outcome(s, [fig])
