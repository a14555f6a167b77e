import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from rescale.errors import MassMismatchError
from rescale.io import read_csv
from rescale.kinetic import (CFLWarning, ParticleEnsemble, SymmetryWarning, VPConfig, cell_density_1d,
                             dynamical_time, field_distance_1d, pairwise_log_energy, pairwise_sheet_field,
                             radial_field, sample_cold_slab, sample_planar, sample_radial, sheet_field_1d,
                             sheet_field_at, simulate_vp, simulate_vpm, step_leapfrog, time_grid,
                             weak_norm_distance)
from rescale.radial import enclosed_mass, pairwise_potential_energy, potential_energy
from rescale.transforms import StationaryState, ball_volume


def _brute_enclosed(r, w):
    return np.array([w[r < ri].sum() + 0.5 * w[r == ri].sum() for ri in r])


def test_enclosed_mass_with_ties(rng):
    r = rng.integers(0, 20, 500).astype(float)
    w = rng.random(500)
    assert np.allclose(enclosed_mass(r, w), _brute_enclosed(r, w), rtol=0, atol=1e-12)


@given(arrays(float, st.integers(1, 60), elements=st.floats(0, 10)), st.randoms(use_true_random=False))
def test_enclosed_mass_permutation_invariant(r, rnd):
    w = np.linspace(1, 2, len(r))
    m = enclosed_mass(r, w)
    p = np.array(rnd.sample(range(len(r)), len(r)))
    assert np.allclose(enclosed_mass(r[p], w[p]), m[p], atol=1e-12)
    # half of each element sees the other half: total of m_i w_i is M^2/2
    assert np.sum(m * w) == pytest.approx(0.5 * w.sum() ** 2, rel=1e-12)


@pytest.mark.parametrize("d", [2, 3, 4])
def test_potential_energy_matches_pairwise(d, rng):
    r = rng.random(300) + 0.01
    w = rng.random(300)
    assert potential_energy(r, w, d) == pytest.approx(pairwise_potential_energy(r, w, d), rel=1e-12)


def test_sheet_field_matches_pairwise(rng):
    N = 10_000
    x = rng.normal(size=N)
    x[:50] = x[50:100]  # coincident sheets
    e = ParticleEnsemble("cartesian-1d", x, np.zeros(N), rng.random(N) + 0.5, 1)
    fast = sheet_field_1d(e).force
    err = 0.0
    for s in range(0, N, 1000):
        dx = e.x[s:s + 1000, None] - e.x[None, :]
        slow = 0.5 * np.sum(e.w[None, :] * np.sign(dx), axis=1)
        err = max(err, np.abs(fast[s:s + 1000] - slow).max())
    assert err < 1e-12 * e.M
    small = ParticleEnsemble("cartesian-1d", x[:500], np.zeros(500), e.w[:500], 1)
    assert np.allclose(sheet_field_1d(small, 1).force, pairwise_sheet_field(small, 1), atol=1e-12)
    assert np.allclose(sheet_field_at(small, small.x, 1), pairwise_sheet_field(small, 1), atol=1e-12)


@given(arrays(float, st.integers(2, 80), elements=st.floats(-100, 100)))
def test_sheet_field_has_no_net_force(x):
    w = np.linspace(0.5, 1.5, len(x))
    e = ParticleEnsemble("cartesian-1d", x, np.zeros(len(x)), w, 1)
    f = sheet_field_1d(e, -1)
    assert abs(np.sum(w * f.force)) < 1e-10 * w.sum() ** 2
    # potential energy is eps * sum_{i<j} w_i w_j |x_i - x_j|
    pair = 0.5 * np.sum(w[:, None] * w[None, :] * np.abs(x[:, None] - x[None, :]))
    assert f.potential == pytest.approx(-pair, rel=1e-9, abs=1e-9)


def test_two_shell_acceleration():
    m1, m2, r = 1.3, 0.7, np.array([0.5, 2.0])
    e = ParticleEnsemble("radial", r, np.zeros(2), np.array([m1, m2]), 3)
    a = radial_field(e, eps=1).force
    assert a[0] == pytest.approx(-(m1 / 2) / (4 * math.pi * 0.25))
    assert a[1] == pytest.approx(-(m1 + m2 / 2) / (4 * math.pi * 4.0))


def test_pairwise_log_energy_two_points():
    x = np.array([[0.0, 0.0], [2.0, 0.0]])
    E = pairwise_log_energy(x, np.array([1.0, 3.0]), eps=-1)
    assert E == pytest.approx(2 * 3 * (-math.log(2) / (2 * math.pi)))


def _circular(dt, T, r0=1.0, Mc=2.0):
    ell = math.sqrt(Mc * r0 / (4 * math.pi))
    e = ParticleEnsemble("radial", [r0], [0.0], [1e-30], 3, ell=[ell])
    fld = radial_field(e, 1, Mc)
    for _ in range(int(round(T / dt))):
        e, fld = step_leapfrog(e, fld, dt, eps=1, central_mass=Mc)
    return abs(e.x[0] - r0)


def test_circular_orbit_second_order():
    e1, e2 = _circular(0.02, 5.0), _circular(0.01, 5.0)
    assert e1 < 1e-3
    assert 3.0 < e1 / e2 < 5.0


def test_magnetic_rotation_stays_on_circle():
    e = ParticleEnsemble("planar-2d", [[0.3, -0.2]], [[1.0, 0.5]], [1e-300], 2)
    fld = radial_field(e, -1)
    pts = [e.x[0]]
    for _ in range(500):
        e, fld = step_leapfrog(e, fld, 0.03, eps=-1, B0=2.0)
        pts.append(e.x[0])
    p = np.array(pts)
    # circumcentre of the first three points
    a, b, c = p[0], p[1], p[2]
    A = 2 * np.array([b - a, c - a])
    rhs = np.array([b @ b - a @ a, c @ c - a @ a])
    ctr = np.linalg.solve(A, rhs)
    rad = np.linalg.norm(p - ctr, axis=1)
    assert np.ptp(rad) < 1e-10


def test_vpm_without_field_is_vp():
    cfg = VPConfig(geometry="planar-2d", d=2, N=300, t_end=1.0, B0=0.0)
    a, b = simulate_vp(cfg), simulate_vpm(cfg)
    assert np.array_equal(a.final.x, b.final.x) and np.array_equal(a.final.v, b.final.v)
    assert np.array_equal(a.K, b.K) and np.array_equal(a.cross, b.cross)


def test_vpm_rejects_non_planar():
    with pytest.raises(ValueError):
        simulate_vpm(VPConfig(geometry="radial", d=3))


def test_ensemble_validation_and_read_only():
    e = sample_radial(100, 3)
    with pytest.raises(ValueError):
        e.x[0] = 1.0
    with pytest.raises(ValueError):
        ParticleEnsemble("radial", [-1.0], [0.0], [1.0], 3)
    with pytest.raises(ValueError):
        ParticleEnsemble("cartesian-1d", [0.0], [0.0], [0.0], 1)
    with pytest.raises(ValueError):
        ParticleEnsemble("spherical", [0.0], [0.0], [1.0], 3)


@pytest.mark.parametrize("d", [2, 3, 4])
def test_samplers_mass_and_support(d):
    e = sample_radial(2000, d, radius=1.5)
    assert e.M == pytest.approx(ball_volume(d) * 1.5 ** d)
    assert e.x.max() <= 1.5
    assert np.all(e.ell >= 0)
    p = sample_planar(500, M=2.0, mode="random", seed=3)
    assert p.M == pytest.approx(2.0) and p.x.shape == (500, 2)
    s = sample_cold_slab(10, 2.0)
    assert np.allclose(s.x, np.linspace(-0.9, 0.9, 10))


def test_same_seed_same_sample():
    a = sample_radial(300, 3, mode="random", seed=7)
    b = sample_radial(300, 3, mode="random", seed=7)
    assert np.array_equal(a.x, b.x) and np.array_equal(a.v, b.v)


def test_time_grid():
    ts = time_grid(10.0, 1e-2, 1.0)
    assert ts[0] == 0 and ts[-1] == 10.0
    h = np.diff(ts)
    assert np.all(h > 0) and h[-2] > h[0]
    fixed = time_grid(1.0, 1e-2, 1.0, grow=False)
    assert len(fixed) == 101
    assert dynamical_time(4 * math.pi / 3, 1.0, 3) == pytest.approx(math.sqrt(3.0))


def test_energy_conserved_1d_sheets():
    cfg = VPConfig(geometry="cartesian-1d", d=1, N=400, sampler="cold-slab", eps=-1, t_end=5.0,
                   dt0=1e-3, cfl_fraction=0)
    run = simulate_vp(cfg)
    E = run.energy
    assert np.abs(E - E[0]).max() < 1e-6 * abs(E[0])
    assert np.allclose(run.mass, run.M)


def test_radial_energy_conserved():
    run = simulate_vp(VPConfig(geometry="radial", d=3, N=2000, t_end=2.0))
    E = run.energy
    assert np.abs(E - E[0]).max() < 1e-4 * abs(E[0])


def test_cfl_warning_raised():
    cfg = VPConfig(geometry="radial", d=3, N=5000, t_end=0.2, dt0=0.5, sigma=3.0)
    with pytest.warns(CFLWarning):
        simulate_vp(cfg)


def test_symmetry_warning_for_rotating_data():
    e = sample_planar(500)
    rot = np.column_stack([-e.x[:, 1], e.x[:, 0]])
    spun = ParticleEnsemble("planar-2d", e.x, e.v + rot, e.w, 2)
    with pytest.warns(SymmetryWarning):
        simulate_vp(VPConfig(geometry="planar-2d", d=2, N=500, t_end=0.01), spun)
    with warnings.catch_warnings():
        warnings.simplefilter("error", SymmetryWarning)
        simulate_vp(VPConfig(geometry="planar-2d", d=2, N=500, t_end=0.01))


def _slab_density(xi, a, c0, delta=0.0):
    h = xi[1] - xi[0]
    lo, hi = xi - h / 2, xi + h / 2
    return c0 * np.clip(np.minimum(hi, a + delta) - np.maximum(lo, -a + delta), 0, None) / h


def test_weak_distance_shift():
    target = StationaryState(2.0, 1, c0=2.0)
    xi = np.linspace(-3, 3, 60001)
    assert weak_norm_distance(_slab_density(xi, target.radius, 2.0), xi, target) < 1e-12
    ds = [0.001, 0.005, 0.02, 0.05]
    vals = [weak_norm_distance(_slab_density(xi, target.radius, 2.0, d), xi, target) for d in ds]
    for d, v in zip(ds, vals):
        assert v == pytest.approx(target.M * d, rel=0.05)
    assert all(np.diff(vals) > 0)
    with pytest.raises(MassMismatchError):
        weak_norm_distance(1.1 * _slab_density(xi, target.radius, 2.0), xi, target)


def test_cell_density_and_field_distance():
    e = sample_cold_slab(4000, 2.0, 0.5)
    edges = np.linspace(-1, 1, 41)
    nu = cell_density_1d(e.x, e.w, edges)
    assert np.sum(nu * np.diff(edges)) == pytest.approx(2.0)
    target = StationaryState(2.0, 1, c0=2.0)
    xi = np.linspace(-2, 2, 401)
    assert field_distance_1d(e, 1.0, target, xi) < 1e-2


def test_ensemble_csv(tmp_path):
    e = sample_radial(20, 3)
    e.to_csv(tmp_path / "p.csv")
    cols = read_csv(tmp_path / "p.csv")
    assert list(cols) == ["t", "id", "r", "vr", "ell", "weight"]
    assert np.array_equal(cols["r"], e.x)
