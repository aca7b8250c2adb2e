"""Martingales extracted from recorded trajectories.

``extract_dynkin_martingale`` evaluates the density martingale with the
expanded (Taylor) drift and, alongside it, the exact Dynkin martingale built
from the generator. Their difference is the integral of the drift terms that
the expansion drops; its replica mean is the systematic bias of the expanded
martingale.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..lattice import discrete_gradients, discrete_laplacian
from .pathcalc import integrate, intervals
from .simulator import JUMP_LEFT, JUMP_RIGHT


@dataclass
class MartingalePath:
    """Values of a vector martingale right after each event and at the end time."""

    times: np.ndarray
    values: np.ndarray

    @property
    def final(self) -> np.ndarray:
        return self.values[-1]


@dataclass
class DynkinResult:
    expanded: MartingalePath
    exact: MartingalePath
    omitted: np.ndarray
    bias_scale: float


def _tilt_fields(h, n):
    x = np.arange(n) / n

    def at(s):
        s = np.asarray(s, dtype=float)[:, None]
        return h.H(s, x), h.dx(s, x), h.dxx(s, x)

    return at


def extract_dynkin_martingale(result, t=None) -> DynkinResult:
    """Density martingale of every site along a recorded trajectory.

    The expanded drift is
    Delta_N X - 2 grad X dxH - (1/2)(X_{k+1} + X_{k-1} + 2 X_k) dxxH + b(X) e^H - d(X) e^{-H};
    the exact drift is the generator applied to eta_k / ell.
    """
    params = result.params
    n, ell = params.n_sites, float(params.ell)
    h = params.perturbation
    b, d = params.reaction.birth, params.reaction.death
    states, starts, ends = intervals(result, t)
    x_states = states / ell
    fields = _tilt_fields(h, n)
    n2 = float(n * n)

    def expanded(x, s):
        hh, hx, hxx = fields(s)
        cen, _, _ = discrete_gradients(x)
        avg = 0.5 * (np.roll(x, -1, axis=1) + np.roll(x, 1, axis=1) + 2.0 * x)
        return (discrete_laplacian(x) - 2.0 * cen * hx - avg * hxx
                + b(x) * np.exp(hh) - d(x) * np.exp(-hh))

    def exact(x, s):
        hh, _, _ = fields(s)
        up, dn = np.roll(hh, -1, axis=1), np.roll(hh, 1, axis=1)
        xu, xd = np.roll(x, -1, axis=1), np.roll(x, 1, axis=1)
        jump = n2 * (xu * np.exp(hh - up) + xd * np.exp(hh - dn)
                     - x * (np.exp(up - hh) + np.exp(dn - hh)))
        return jump + b(x) * np.exp(hh) - d(x) * np.exp(-hh)

    td = h.time_dependent
    i_exp = integrate(expanded, x_states, starts, ends, td)
    i_ex = integrate(exact, x_states, starts, ends, td)
    times = np.concatenate([[0.0], ends])
    # value at each event time is the post-jump state; the end time repeats the last state
    disp = np.vstack([x_states, x_states[-1:]]) - x_states[0]
    zero = np.zeros((1, n))
    z_exp = disp - np.vstack([zero, np.cumsum(i_exp, axis=0)])
    z_ex = disp - np.vstack([zero, np.cumsum(i_ex, axis=0)])
    t_end = ends[-1]
    sx, sxx = h.sup_dx(t_end), h.sup_dxx(t_end)
    scale = t_end * float(x_states.max()) * (1.0 + sx**2) * (sx + sxx) / n
    return DynkinResult(MartingalePath(times, z_exp), MartingalePath(times, z_ex),
                        z_exp[-1] - z_ex[-1], scale)


@dataclass
class QuadraticMartingales:
    times: np.ndarray
    m1: np.ndarray
    m2: np.ndarray
    m3: np.ndarray


def extract_quadratic_martingales(result, t=None) -> QuadraticMartingales:
    """The three counting martingales of every site, with exact generator rates.

    m1: net count change minus its compensator. m2: number of events that
    change eta_k minus the integrated total rate of such events. m3: number
    of jumps across the bond (k, k+1) minus the integrated rate of crossing it.
    Requires N >= 3 so that the two neighbours of a site are distinct.
    """
    params = result.params
    n, ell = params.n_sites, float(params.ell)
    if n < 3:
        raise ValueError("quadratic martingales need N >= 3")
    h = params.perturbation
    b, d = params.reaction.birth, params.reaction.death
    states, starts, ends = intervals(result, t)
    fields = _tilt_fields(h, n)
    n2 = float(n * n)

    def channel_rates(eta, s):
        hh, _, _ = fields(s)
        up, dn = np.roll(hh, -1, axis=1), np.roll(hh, 1, axis=1)
        x = eta / ell
        right = n2 * eta * np.exp(up - hh)
        left = n2 * eta * np.exp(dn - hh)
        birth = ell * b(x) * np.exp(hh)
        death = ell * d(x) * np.exp(-hh)
        return right, left, birth, death

    def rate_in(eta, s):
        r, l, _, _ = channel_rates(eta, s)
        return np.roll(r, 1, axis=1) + np.roll(l, -1, axis=1)

    def c1(eta, s):
        r, l, bi, de = channel_rates(eta, s)
        return rate_in(eta, s) - r - l + bi - de

    def c2(eta, s):
        r, l, bi, de = channel_rates(eta, s)
        return rate_in(eta, s) + r + l + bi + de

    def c3(eta, s):
        r, l, _, _ = channel_rates(eta, s)
        return r + np.roll(l, -1, axis=1)

    td = h.time_dependent
    eta = states.astype(float)
    m = len(ends)
    ev = result.events
    kinds = ev.kinds[: m - 1].astype(int)
    sites = ev.sites[: m - 1].astype(int)
    tg = ev.targets()[: m - 1]
    touch = np.zeros((m - 1, n))
    bond = np.zeros((m - 1, n))
    rows = np.arange(m - 1)
    jump = (kinds == JUMP_RIGHT) | (kinds == JUMP_LEFT)
    touch[rows, sites] += 1
    touch[rows[jump], tg[jump]] += 1
    right = kinds == JUMP_RIGHT
    left = kinds == JUMP_LEFT
    bond[rows[right], sites[right]] += 1
    bond[rows[left], tg[left]] += 1

    zero = np.zeros((1, n))
    times = np.concatenate([[0.0], ends])
    disp = np.vstack([eta, eta[-1:]]) - eta[0]
    count2 = np.vstack([zero, np.cumsum(touch, axis=0), np.cumsum(touch, axis=0)[-1:] if m > 1 else zero])
    count3 = np.vstack([zero, np.cumsum(bond, axis=0), np.cumsum(bond, axis=0)[-1:] if m > 1 else zero])
    out = []
    for fn, counts in ((c1, disp), (c2, count2), (c3, count3)):
        comp = np.vstack([zero, np.cumsum(integrate(fn, eta, starts, ends, td), axis=0)])
        out.append(counts - comp)
    return QuadraticMartingales(times, *out)
