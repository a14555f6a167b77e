"""Gauss-law helpers shared by the particle, shell and diagnostic code.

A radially symmetric mass element at radius r (a spherical shell, a ring in
d=2, a sheet pair in d=1) only feels the mass enclosed by r.  Elements at the
same radius see half of each other, which makes the force free of self
interaction and symmetric under relabelling.
"""
from __future__ import annotations

import math

import numpy as np

from .transforms import sphere_area


def enclosed_mass(r, w, order=None):
    """Mass strictly inside r_i plus half the mass sitting exactly at r_i."""
    r = np.asarray(r, float)
    w = np.asarray(w, float)
    n = len(r)
    if n == 0:
        return np.zeros(0)
    o = np.argsort(r, kind="stable") if order is None else order
    rs = r[o]
    ws = w[o]
    cw = np.cumsum(ws)
    new = np.empty(n, bool)
    new[0] = True
    np.not_equal(rs[1:], rs[:-1], out=new[1:])
    if new.all():
        ms = cw - 0.5 * ws
    else:
        idx = np.arange(n)
        first = np.maximum.accumulate(np.where(new, idx, 0))
        last_flag = np.empty(n, bool)
        last_flag[-1] = True
        last_flag[:-1] = new[1:]
        last = np.minimum.accumulate(np.where(last_flag, idx, n)[::-1])[::-1]
        ms = 0.5 * ((cw[first] - ws[first]) + cw[last])
    m = np.empty(n)
    m[o] = ms
    return m


def green(r, d):
    """Fundamental solution of -Laplace in d >= 2, as a function of |x|."""
    r = np.asarray(r, float)
    if d == 2:
        return -np.log(r) / (2 * math.pi)
    if d >= 3:
        return r ** (2 - d) / ((d - 2) * sphere_area(d))
    raise ValueError("green(r, d) needs d >= 2")


def radial_accel(r, m_enc, d, eps=-1):
    """Radial acceleration -dU/dr with Laplace U = eps*rho: outward for eps=-1."""
    r = np.asarray(r, float)
    with np.errstate(divide="ignore", invalid="ignore"):
        a = -eps * np.asarray(m_enc, float) / (sphere_area(d) * r ** (d - 1))
    return np.where(r > 0, a, 0.0)


def potential_energy(r, w, d, m_enc=None, eps=-1):
    """int rho U for radial elements, self terms included.

    The potential of an element at r_j seen at r is eps-signed G(max(r, r_j)),
    so the double sum collapses to 2 sum_j w_j G(r_j) m_enc(r_j).
    """
    r = np.asarray(r, float)
    w = np.asarray(w, float)
    if m_enc is None:
        m_enc = enclosed_mass(r, w)
    return float(-eps * 2.0 * np.sum(w * green(np.maximum(r, 1e-300), d) * m_enc))


def pairwise_potential_energy(r, w, d, eps=-1):
    """O(N^2) version of potential_energy, used as an oracle."""
    r = np.asarray(r, float)
    w = np.asarray(w, float)
    rm = np.maximum(r[:, None], r[None, :])
    return float(-eps * np.sum(w[:, None] * w[None, :] * green(np.maximum(rm, 1e-300), d)))
