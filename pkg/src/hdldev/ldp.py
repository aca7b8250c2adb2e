"""Rate functional, elliptic inversion and rare-event estimators."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (DegenerateReaction, DomainError, NoConvergence, PositivityViolated,
                     QuadratureBudget, SingularJacobian)
from .lattice import Perturbation, ReactionSpec

QUADRATURE_LIMIT = 10**7


def gamma_fn(y):
    """Gamma(y) = 1 - e^y + y e^y."""
    y = np.asarray(y, dtype=float)
    return 1.0 - np.exp(y) + y * np.exp(y)


def gamma_bar(x, y):
    """Gamma_bar(x, y) = 1 - e^x + x e^y; maximised in x at x = y."""
    x = np.asarray(x, dtype=float)
    return 1.0 - np.exp(x) + x * np.exp(y)


def poisson_ld_rate(x: float, lam: float) -> float:
    """Cramer rate x log(x / lam) - x + lam of a Poisson(lam) mean."""
    if not (x > 0 and lam > 0):
        raise DomainError("poisson_ld_rate needs x > 0 and lam > 0")
    return x * math.log(x / lam) - x + lam


# ----------------------------------------------------------------------------
# Space-time quadrature
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class PathFunctional:
    """Quadrature used for functionals of space-time paths.

    Trapezoid (equivalently, the mean) on ``nx`` periodic points in x and
    composite Gauss-Legendre with ``panels`` x ``nodes`` points in t.
    """

    nx: int = 256
    panels: int = 32
    nodes: int = 4

    def __post_init__(self):
        if self.nx * self.panels * self.nodes > QUADRATURE_LIMIT:
            raise QuadratureBudget("space-time quadrature exceeds the node budget")

    def refined(self) -> "PathFunctional":
        return PathFunctional(2 * self.nx, 2 * self.panels, self.nodes)

    def x(self) -> np.ndarray:
        return np.arange(self.nx) / self.nx

    def t_nodes(self, t: float):
        z, w = np.polynomial.legendre.leggauss(self.nodes)
        edges = np.linspace(0.0, t, self.panels + 1)
        h = np.diff(edges)
        s = (0.5 * (edges[:-1] + edges[1:])[:, None] + 0.5 * h[:, None] * z).ravel()
        return s, (0.5 * h[:, None] * w).ravel()

    def integrate(self, fn: Callable, t: float) -> float:
        """int_0^t int_T fn(s, x) dx ds."""
        x = self.x()
        s, w = self.t_nodes(t)
        return float(sum(wi * np.mean(fn(si, x)) for si, wi in zip(s, w)))


DEFAULT_QUADRATURE = PathFunctional()


def j_functional(u, h: Perturbation, reaction: ReactionSpec, t: float,
                 quad: PathFunctional = DEFAULT_QUADRATURE) -> float:
    """J_H(u) for a path ``u(s, x)``.

    J_H(u) = int [H(t) u(t) - H(0) u(0)] dx
             + int_0^t int [ -u (dsH + dxxH + (dxH)^2) + b(u)(1 - e^H) + d(u)(1 - e^{-H}) ] dx ds
    """
    if h.is_zero:
        return 0.0
    b, d = reaction.birth, reaction.death
    x = quad.x()
    boundary = float(np.mean(h.H(t, x) * u(t, x)) - np.mean(h.H(0.0, x) * u(0.0, x)))

    def bulk(s, x):
        v = u(s, x)
        hh = h.H(s, x)
        return (-v * (h.dt(s, x) + h.dxx(s, x) + h.dx(s, x) ** 2)
                + b(v) * (1.0 - np.exp(hh)) + d(v) * (1.0 - np.exp(-hh)))

    return boundary + quad.integrate(bulk, t)


def rate_closed_form(psi, h: Perturbation, reaction: ReactionSpec, t: float,
                     quad: PathFunctional = DEFAULT_QUADRATURE) -> float:
    """I(psi) = int_0^t int [ (dxH)^2 psi + b(psi) Gamma(H) + d(psi) Gamma(-H) ] dx ds."""
    if h.is_zero:
        return 0.0
    b, d = reaction.birth, reaction.death

    def integrand(s, x):
        v = psi(s, x)
        hh = h.H(s, x)
        return h.dx(s, x) ** 2 * v + b(v) * gamma_fn(hh) + d(v) * gamma_fn(-hh)

    return quad.integrate(integrand, t)


@dataclass
class ProbeReport:
    j_star: float
    probes: list
    values: list
    max_excess: float
    argmax: int
    passes: bool


def default_probes(h_star: Perturbation, rng: Optional[np.random.Generator] = None,
                   n_random: int = 4, eps: float = 0.1) -> list:
    """h_star, its scalings by 1 +/- eps and 0, a shifted phase, and random catalog members."""
    rng = rng or np.random.default_rng(0)
    probes = [h_star, h_star.scaled(1 + eps), h_star.scaled(1 - eps), Perturbation.zero(),
              Perturbation(h_star.amplitude, h_star.mode, "cos" if h_star.shape == "sin" else "sin",
                           h_star.temporal, h_star.rate)]
    for _ in range(n_random):
        temporal = rng.choice(["constant", "linear", "cosine"])
        rate = float(rng.uniform(-2, 2)) if temporal != "constant" else 0.0
        probes.append(Perturbation(float(rng.uniform(-0.6, 0.6)), int(rng.integers(1, 3)),
                                   str(rng.choice(["sin", "cos"])), str(temporal), rate))
    return probes


def rate_variational_probe(psi, h_star: Perturbation, probes: Sequence[Perturbation],
                           reaction: ReactionSpec, t: float, tol: float = 1e-3,
                           quad: PathFunctional = DEFAULT_QUADRATURE) -> ProbeReport:
    """Evaluate J_G over probes and check that none exceeds J_{h_star} by more than tol."""
    j_star = j_functional(psi, h_star, reaction, t, quad)
    vals = [j_functional(psi, g, reaction, t, quad) for g in probes]
    excess = [v - j_star for v in vals]
    i = int(np.argmax(excess))
    return ProbeReport(j_star, list(probes), vals, float(excess[i]), i,
                       excess[i] <= tol * max(1.0, abs(j_star)))


# ----------------------------------------------------------------------------
# Elliptic inversion
# ----------------------------------------------------------------------------


@dataclass
class ProfileSlice:
    """psi and its derivatives at one time on a uniform periodic grid."""

    psi: np.ndarray
    psi_x: np.ndarray
    psi_xx: np.ndarray
    psi_t: np.ndarray

    @property
    def m(self) -> int:
        return len(self.psi)


@dataclass
class EllipticSolveResult:
    h: np.ndarray
    residual: float
    iterations: int
    converged: bool
    history: list = field(default_factory=list)


def spectral_derivatives(values: np.ndarray):
    """First and second x-derivatives of periodic samples by FFT."""
    m = values.shape[-1]
    k = 2j * np.pi * np.fft.rfftfreq(m, 1.0 / m)
    c = np.fft.rfft(values, axis=-1)
    if m % 2 == 0:
        k1 = k.copy()
        k1[-1] = 0.0  # Nyquist mode has no odd derivative
    else:
        k1 = k
    return np.fft.irfft(k1 * c, m, axis=-1), np.fft.irfft(k * k * c, m, axis=-1)


def slice_from_samples(times: np.ndarray, values: np.ndarray, t: float) -> ProfileSlice:
    """ProfileSlice at a stored time from space-time samples on a uniform time grid.

    x-derivatives are spectral; the time derivative is the fourth-order
    central difference over the neighbouring stored samples.
    """
    i = int(np.argmin(np.abs(times - t)))
    if abs(times[i] - t) > 1e-12 * max(1.0, t):
        raise ValueError("t must be one of the stored sample times")
    if i < 2 or i > len(times) - 3:
        raise ValueError("need two stored samples on each side of t")
    dt = times[i + 1] - times[i]
    psi_t = (values[i - 2] - 8 * values[i - 1] + 8 * values[i + 1] - values[i + 2]) / (12 * dt)
    px, pxx = spectral_derivatives(values[i])
    return ProfileSlice(values[i].copy(), px, pxx, psi_t)


def _periodic_diff_matrices(m):
    hx = 1.0 / m
    e = np.ones(m)
    d1 = sp.diags([-e[:-1], e[:-1]], [-1, 1], shape=(m, m), format="lil")
    d1[0, m - 1] = -1.0
    d1[m - 1, 0] = 1.0
    d2 = sp.diags([e[:-1], -2 * e, e[:-1]], [-1, 0, 1], shape=(m, m), format="lil")
    d2[0, m - 1] = 1.0
    d2[m - 1, 0] = 1.0
    return (d1.tocsr() / (2 * hx)), (d2.tocsr() / hx**2)


def solve_elliptic_for_h(profile: ProfileSlice, reaction: ReactionSpec, eps: float = 1e-6,
                         tol: float = 1e-10, max_iter: int = 50, max_halvings: int = 8,
                         h0=None) -> EllipticSolveResult:
    """Find the tilt H reproducing a target profile at one time slice.

    Solves, on M periodic points with second-order central differences,

        H'' + (psi'/psi) H' = (psi'' - psi_t) / (2 psi) + (e^H b(psi) - e^{-H} d(psi)) / (2 psi)

    by damped Newton (step halving on residual increase). The initial guess
    is (1/2) log(d(psi_bar) / b(psi_bar)) at the mean profile when both rates
    are positive there, else zero.
    """
    psi = profile.psi
    if np.min(psi) < eps:
        raise PositivityViolated(f"profile minimum {np.min(psi):.3e} below {eps:g}")
    bv = reaction.birth(psi)
    dv = reaction.death(psi)
    if np.all(bv == 0) and np.all(dv == 0):
        raise DegenerateReaction("b and d vanish on the profile; the constant mode is free")
    m = profile.m
    d1, d2 = _periodic_diff_matrices(m)
    adv = profile.psi_x / psi
    src = (profile.psi_xx - profile.psi_t) / (2 * psi)
    lin = d2 + sp.diags(adv) @ d1

    def residual(h):
        return lin @ h - src - (np.exp(h) * bv - np.exp(-h) * dv) / (2 * psi)

    if h0 is None:
        pbar = float(np.mean(psi))
        b0 = float(reaction.birth(pbar))
        dd0 = float(reaction.death(pbar))
        h = np.full(m, 0.5 * math.log(dd0 / b0) if b0 > 0 and dd0 > 0 else 0.0)
    else:
        h = np.array(h0, dtype=float)
    r = residual(h)
    norm = float(np.max(np.abs(r)))
    history = [norm]
    it = 0
    while norm > tol and it < max_iter:
        it += 1
        jac = lin - sp.diags((np.exp(h) * bv + np.exp(-h) * dv) / (2 * psi))
        try:
            step = spla.spsolve(jac.tocsc(), -r)
        except RuntimeError as exc:
            raise SingularJacobian(str(exc)) from None
        if not np.all(np.isfinite(step)):
            raise SingularJacobian("Newton step is not finite")
        lam = 1.0
        for _ in range(max_halvings + 1):
            trial = h + lam * step
            rt = residual(trial)
            nt = float(np.max(np.abs(rt)))
            if np.isfinite(nt) and nt < norm:
                break
            lam *= 0.5
        else:
            raise NoConvergence("line search failed to reduce the residual", norm)
        h, r, norm = trial, rt, nt
        history.append(norm)
    if norm > tol:
        raise NoConvergence(f"residual {norm:.3e} after {it} iterations", norm)
    return EllipticSolveResult(h, norm, it, True, history)


def constant_profile_h(gamma: float, reaction: ReactionSpec) -> float:
    """Closed form H* = (1/2) log(d(gamma) / b(gamma)) for a constant profile."""
    b = float(reaction.birth(gamma))
    d = float(reaction.death(gamma))
    if b <= 0 or d <= 0:
        raise DegenerateReaction("need b(gamma) > 0 and d(gamma) > 0")
    return 0.5 * math.log(d / b)


# ----------------------------------------------------------------------------
# Importance sampling and entropy
# ----------------------------------------------------------------------------


@dataclass
class RateEstimate:
    n_sites: int
    ell: int
    replicas: int
    hits: int
    p_hat: float
    se: float
    cost: float
    cost_se: float
    entropy: float
    entropy_se: float
    entropy_all: float
    entropy_all_se: float
    zero_hits: bool
    rate_closed_form: Optional[float] = None
    log_weights: np.ndarray = field(default=None, repr=False)
    in_tube: np.ndarray = field(default=None, repr=False)

    def row(self):
        return (self.n_sites, self.ell, self.p_hat, self.se, self.cost, self.entropy,
                self.rate_closed_form)


def summarize_importance_sampling(log_w: np.ndarray, in_tube: np.ndarray, n_sites: int,
                                  ell: int, rate: Optional[float] = None) -> RateEstimate:
    """Turn per-replica log-weights and tube indicators into the estimator summary."""
    log_w = np.asarray(log_w, dtype=float)
    in_tube = np.asarray(in_tube, dtype=bool)
    m = len(log_w)
    scale = float(ell * n_sites)
    contrib = np.where(in_tube, np.exp(log_w), 0.0)
    p_hat = float(contrib.mean())
    se = float(contrib.std(ddof=1) / math.sqrt(m)) if m > 1 else float("nan")
    hits = int(in_tube.sum())
    if p_hat > 0:
        cost = -math.log(p_hat) / scale
        cost_se = se / p_hat / scale
    else:
        cost = cost_se = float("inf")
    ent_all = -log_w / scale
    ent_in = ent_all[in_tube]
    entropy = float(ent_in.mean()) if hits else float("nan")
    entropy_se = float(ent_in.std(ddof=1) / math.sqrt(hits)) if hits > 1 else float("nan")
    return RateEstimate(n_sites, ell, m, hits, p_hat, se, cost, cost_se, entropy, entropy_se,
                        float(ent_all.mean()),
                        float(ent_all.std(ddof=1) / math.sqrt(m)) if m > 1 else float("nan"),
                        hits == 0, rate, log_w, in_tube)


def importance_sampling_estimate(target, delta: float, params, initial, t_final: float,
                                 replicas: int, seed: int = 0, n_ref: int = 401,
                                 rate: Optional[float] = None, threads: int = 1) -> RateEstimate:
    """Estimate P[sup_t ||X^N - psi||_inf <= delta] under the untilted law.

    Replicas are drawn from the chain tilted by ``params.perturbation`` and
    reweighted by the exact likelihood ratio. ``target(t, x)`` is the tube
    centre. The entropy estimate is mean(-log w) / (ell N) over in-tube
    replicas; the all-replica mean is reported too.
    """
    from .ctmc import simulate
    from .parallel import map_replicas

    n = params.n_sites
    times = np.linspace(0.0, t_final, n_ref)
    x = np.arange(n) / n
    ref = np.array([target(t, x) for t in times])
    counts0 = initial.counts(params.grid, params.ell)

    def one(r):
        res = simulate(params, counts0, t_final, seed=seed, replica=r, record=False,
                       reference=(ref, times[1] - times[0]), n_snapshots=2)
        return res.weights.log_weight, res.sup_error <= delta

    out = map_replicas(one, replicas, threads)
    log_w = np.array([o[0] for o in out])
    tube = np.array([o[1] for o in out])
    return summarize_importance_sampling(log_w, tube, n, params.ell, rate)
