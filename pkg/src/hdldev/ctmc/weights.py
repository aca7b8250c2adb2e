"""Radon-Nikodym weights recomputed from a recorded trajectory.

``log_rn_weight_from_events`` redoes the exact weight from the event log
(an independent route to the online accumulator of the event loop).
``log_rn_weight_taylor`` is the second-order expanded form in which the jump
exponentials are replaced by discrete derivatives of H.
"""
from __future__ import annotations

import numpy as np

from ..lattice import discrete_gradients, discrete_laplacian
from .pathcalc import integrate, intervals
from .simulator import BIRTH, DEATH, JUMP_LEFT, JUMP_RIGHT, WeightAccumulator


def _lattice(h, n):
    x = np.arange(n) / n

    def H(s):
        return h.H(np.asarray(s, dtype=float)[:, None], x)

    def dH(s):
        return h.dt(np.asarray(s, dtype=float)[:, None], x)

    return H, dH


def log_rn_weight_from_events(result, t=None) -> WeightAccumulator:
    """Exact log(dP / dP^H) rebuilt from the event log and the visited states."""
    params = result.params
    h = params.perturbation
    if h.is_zero:
        return WeightAccumulator(0.0, 0.0)
    n, ell = params.n_sites, float(params.ell)
    b, d = params.reaction.birth, params.reaction.death
    states, starts, ends = intervals(result, t)
    H, _ = _lattice(h, n)
    n2 = float(n * n)

    def excess(eta, s):
        hh = H(s)
        x = eta / ell
        up, dn = np.roll(hh, -1, axis=1), np.roll(hh, 1, axis=1)
        c = (ell * b(x) * (1.0 - np.exp(hh)) + ell * d(x) * (1.0 - np.exp(-hh))
             + n2 * eta * (2.0 - np.exp(up - hh) - np.exp(dn - hh)))
        return c.sum(axis=1)

    comp = float(integrate(excess, states.astype(float), starts, ends, h.time_dependent).sum())
    m = len(ends) - 1
    ev = result.events
    hk = H(ev.times[:m])
    rows = np.arange(m)
    s = ev.sites[:m].astype(int)
    kinds = ev.kinds[:m]
    own = hk[rows, s]
    contrib = np.zeros(m)
    right = kinds == JUMP_RIGHT
    left = kinds == JUMP_LEFT
    contrib[right] = own[right] - hk[rows[right], (s[right] + 1) % n]
    contrib[left] = own[left] - hk[rows[left], (s[left] - 1) % n]
    contrib[kinds == BIRTH] = -own[kinds == BIRTH]
    contrib[kinds == DEATH] = own[kinds == DEATH]
    return WeightAccumulator(float(contrib.sum()), comp)


def log_rn_weight_taylor(result, t=None) -> float:
    """Expanded log-weight evaluated on the lattice path.

    -ell N [ int (1/N) sum_k ( b(X)(1 - e^H) + d(X)(1 - e^{-H})
                               - X (Delta_N H + ((grad+ H)^2 + (grad- H)^2) / 2) ) ds
             + (1/N) sum_k ( H(t) X(t) - H(0) X(0) - int X dsH ds ) ]
    """
    params = result.params
    h = params.perturbation
    if h.is_zero:
        return 0.0
    n, ell = params.n_sites, float(params.ell)
    b, d = params.reaction.birth, params.reaction.death
    states, starts, ends = intervals(result, t)
    x_states = states / ell
    H, dH = _lattice(h, n)

    def bulk(x, s):
        hh = H(s)
        _, fwd, bwd = discrete_gradients(hh)
        drift = discrete_laplacian(hh) + 0.5 * (fwd**2 + bwd**2)
        val = b(x) * (1.0 - np.exp(hh)) + d(x) * (1.0 - np.exp(-hh)) - x * drift
        return val.mean(axis=1)

    def time_part(x, s):
        return (x * dH(s)).mean(axis=1)

    td = h.time_dependent
    i_bulk = float(integrate(bulk, x_states, starts, ends, td).sum())
    i_time = float(integrate(time_part, x_states, starts, ends, td).sum()) if td else 0.0
    t_end = ends[-1]
    boundary = float(np.mean(H([t_end])[0] * x_states[-1]) - np.mean(H([0.0])[0] * x_states[0]))
    return -ell * n * (i_bulk + boundary - i_time)
