"""Discrete heat semigroup on the torus and Duhamel convolutions.

The semigroup is diagonalised by the trigonometric lattice basis
phi_m = sqrt(2) cos(pi m k / N), varphi_m = sqrt(2) sin(pi m k / N) over even
m, with eigenvalues beta_m = 2 N^2 (1 - cos(pi m / N)).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import IncompletePath, NegativeTime, QuadratureBudget, TooLarge
from .lattice import laplacian_matrix

QUADRATURE_LIMIT = 10**6


@dataclass(frozen=True)
class SpectralBasis:
    """Orthonormal eigenbasis of the periodic discrete Laplacian.

    Attributes
    ----------
    n_sites : int
    modes : ndarray
        The even index m of each basis vector.
    kinds : ndarray
        ``"cos"`` or ``"sin"`` per basis vector.
    eigenvalues : ndarray
        beta_m >= 0 per basis vector (the Laplacian eigenvalue is -beta_m).
    vectors : ndarray
        (N, N) array, one basis vector per row.
    """

    n_sites: int
    modes: np.ndarray = field(init=False, repr=False)
    kinds: np.ndarray = field(init=False, repr=False)
    eigenvalues: np.ndarray = field(init=False, repr=False)
    vectors: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n = int(self.n_sites)
        if n < 2:
            raise ValueError("need at least 2 sites")
        k = np.arange(n)
        modes, kinds, rows = [], [], []
        top = n if n % 2 == 0 else n - 1
        for m in range(0, top + 1, 2):
            if m == 0:
                rows.append(np.ones(n))
                modes.append(0)
                kinds.append("cos")
            elif m == n:
                rows.append(np.cos(np.pi * k))
                modes.append(m)
                kinds.append("cos")
            else:
                arg = np.pi * m * k / n
                rows.append(math.sqrt(2.0) * np.cos(arg))
                rows.append(math.sqrt(2.0) * np.sin(arg))
                modes += [m, m]
                kinds += ["cos", "sin"]
        modes = np.array(modes)
        beta = 2.0 * n * n * (1.0 - np.cos(np.pi * modes / n))
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "kinds", np.array(kinds))
        object.__setattr__(self, "eigenvalues", beta)
        object.__setattr__(self, "vectors", np.vstack(rows))

    def __len__(self):
        return len(self.modes)

    def project(self, g) -> np.ndarray:
        """Coefficients <g, e_j>; works on the last axis."""
        return np.asarray(g, dtype=float) @ self.vectors.T / self.n_sites

    def synthesize(self, coef) -> np.ndarray:
        return np.asarray(coef, dtype=float) @ self.vectors


def semigroup_apply(basis: SpectralBasis, t: float, g) -> np.ndarray:
    """T_N(t) g = sum_m exp(-beta_m t) (<g, phi_m> phi_m + <g, varphi_m> varphi_m)."""
    if t < 0:
        raise NegativeTime(f"t = {t} < 0")
    coef = basis.project(g)
    return basis.synthesize(coef * np.exp(-basis.eigenvalues * t))


def semigroup_matrix_oracle(n_sites: int, t: float) -> np.ndarray:
    """Dense exp(t Delta_N) by scaling and squaring (test oracle, N <= 8)."""
    if n_sites > 8:
        raise TooLarge("matrix oracle is limited to N <= 8")
    if t < 0:
        raise NegativeTime(f"t = {t} < 0")
    return scipy.linalg.expm(t * laplacian_matrix(n_sites))


def _gauss_legendre(a, b, panels, nodes):
    x, w = np.polynomial.legendre.leggauss(nodes)
    edges = np.linspace(a, b, panels + 1)
    h = np.diff(edges)
    s = (0.5 * (edges[:-1] + edges[1:])[:, None] + 0.5 * h[:, None] * x).ravel()
    ws = (0.5 * h[:, None] * w).ravel()
    return s, ws


def duhamel_deterministic(basis: SpectralBasis, x0, forcing, t: float,
                          panels: int = 8, nodes: int = 4) -> np.ndarray:
    """T_N(t) x0 + int_0^t T_N(t - s) F(s) ds by composite Gauss-Legendre.

    ``forcing(s)`` returns a grid function.
    """
    if t < 0:
        raise NegativeTime(f"t = {t} < 0")
    if panels * nodes > QUADRATURE_LIMIT:
        raise QuadratureBudget(f"{panels} x {nodes} quadrature nodes exceed the budget")
    out = semigroup_apply(basis, t, x0)
    if t == 0:
        return out
    s, w = _gauss_legendre(0.0, t, panels, nodes)
    f = np.array([forcing(si) for si in s])
    coef = basis.project(f) * np.exp(-np.outer(t - s, basis.eigenvalues)) * w[:, None]
    return out + basis.synthesize(coef.sum(axis=0))


def _piece_weights(beta, t, s1, s2):
    """Closed-form per-mode pieces for int_{s1}^{s2} Delta T(t - s) (a + b (s - s1)) ds.

    Returns (wa, wb) with the integral equal to wa * a + wb * b in mode space.
    """
    e1 = np.exp(-np.outer(t - s1, beta))
    e2 = np.exp(-np.outer(t - s2, beta))
    dt = (s2 - s1)[:, None]
    wa = e1 - e2
    with np.errstate(divide="ignore", invalid="ignore"):
        wb = np.where(beta > 0, (e2 - e1) / beta, 0.0) - e2 * dt
    wb[:, beta == 0] = 0.0
    return wa, wb


def duhamel_stochastic_convolution(basis: SpectralBasis, times, values, t: float,
                                   slopes=None) -> np.ndarray:
    """Y(t) = int_0^t T_N(t - s) dZ(s) through integration by parts.

    Y(t) = int_0^t Delta_N T_N(t - s) Z(s) ds + Z(t) - Z(0), split at the
    breakpoints ``times`` (with ``times[0] == 0``). On piece i the path is
    ``values[i] + slopes[i] (s - times[i])``; omit ``slopes`` for a
    piecewise-constant path. Each piece is integrated in closed form per mode.
    """
    times = np.asarray(times, dtype=float)
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if times.ndim != 1 or len(times) != len(values) or times[0] != 0.0:
        raise IncompletePath("path must start at time 0 with one value per breakpoint")
    keep = times <= t
    times, values = times[keep], values[keep]
    if slopes is not None:
        slopes = np.atleast_2d(np.asarray(slopes, dtype=float))[keep]
    starts = times
    ends = np.append(times[1:], t)
    if np.any(ends < starts):
        raise IncompletePath("breakpoints must be sorted and not exceed t")
    beta = basis.eigenvalues
    wa, wb = _piece_weights(beta, t, starts, ends)
    zhat = basis.project(values)
    acc = (wa * zhat).sum(axis=0)
    z_end = values[-1]
    if slopes is not None:
        sl = np.atleast_2d(np.asarray(slopes, dtype=float))
        acc = acc + (wb * basis.project(sl)).sum(axis=0)
        z_end = z_end + sl[-1] * (t - starts[-1])
    return basis.synthesize(acc) + z_end - values[0]


def stochastic_convolution_path(basis: SpectralBasis, times, jumps, drifts, t_final: float):
    """Y on every breakpoint of a piecewise-linear path, by the mode recursion.

    Between breakpoints dZ = drift ds; at ``times[i]`` (i >= 1) Z jumps by
    ``jumps[i]``. Propagating each mode exactly,
    y <- exp(-beta dt) y + drift (1 - exp(-beta dt)) / beta, then y += jump,
    gives Y right before and right after each breakpoint and at ``t_final``.

    Returns
    -------
    before, after : ndarray
        (len(times), N) arrays of Y(t_i-) and Y(t_i); the last row of
        ``after`` is followed by ``Y(t_final)``, returned as the third item.
    """
    times = np.asarray(times, dtype=float)
    beta = basis.eigenvalues
    dh = basis.project(drifts)
    jh = basis.project(jumps)
    n = len(times)
    y = np.zeros_like(beta)
    before = np.empty((n, len(beta)))
    after = np.empty((n, len(beta)))
    pos = beta > 0
    for i in range(n):
        if i > 0:
            dt = times[i] - times[i - 1]
            e = np.exp(-beta * dt)
            inc = np.where(pos, -np.expm1(-beta * dt) / np.where(pos, beta, 1.0), dt)
            y = e * y + dh[i - 1] * inc
        before[i] = y
        y = y + jh[i]
        after[i] = y
    dt = t_final - times[-1]
    e = np.exp(-beta * dt)
    inc = np.where(pos, -np.expm1(-beta * dt) / np.where(pos, beta, 1.0), dt)
    y_end = e * y + dh[-1] * inc
    return basis.synthesize(before), basis.synthesize(after), basis.synthesize(y_end)
