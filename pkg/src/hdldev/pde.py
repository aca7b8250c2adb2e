"""Semi-discrete approximation of the tilted reaction-diffusion equation.

On the N-site torus the scheme reads

    dpsi_k/dt = N^2 (psi_{k+1} - 2 psi_k + psi_{k-1})
                - dxH_k N (psi_{k+1} - psi_{k-1})
                - dxxH_k (psi_{k+1} + psi_{k-1} + 2 psi_k) / 2
                + e^{H_k} b(psi_k) - e^{-H_k} d(psi_k),

with psi_k(0) = gamma(k/N) and H evaluated at (t, k/N).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import Instability, TooLarge, ValidationError
from .lattice import InitialProfile, Perturbation, ReactionSpec, TorusGrid

NEG_TOL = 1e-8
MAX_REFERENCE_SITES = 4096


@dataclass(frozen=True)
class SemiDiscreteProblem:
    grid: TorusGrid
    reaction: ReactionSpec
    perturbation: Perturbation
    initial: InitialProfile
    t_final: float

    def __post_init__(self):
        if not self.t_final > 0:
            raise ValidationError("t_final must be positive")

    @property
    def n_sites(self) -> int:
        return self.grid.n_sites

    def on(self, n_sites: int) -> "SemiDiscreteProblem":
        return SemiDiscreteProblem(TorusGrid(n_sites), self.reaction, self.perturbation,
                                   self.initial, self.t_final)

    def initial_values(self) -> np.ndarray:
        return self.initial(self.grid.points())


@dataclass
class Solution:
    """psi^N sampled on a uniform time grid; ``values[i]`` is psi at ``times[i]``."""

    times: np.ndarray
    values: np.ndarray

    @property
    def n_sites(self) -> int:
        return self.values.shape[1]

    def at(self, t: float) -> np.ndarray:
        """Linear interpolation in time."""
        i = int(np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, len(self.times) - 2))
        w = (t - self.times[i]) / (self.times[i + 1] - self.times[i])
        return (1 - w) * self.values[i] + w * self.values[i + 1]


def _tilt(h: Perturbation, t, x):
    if h.is_zero:
        z = np.zeros_like(x)
        return z, z, z
    return h.H(t, x), h.dx(t, x), h.dxx(t, x)


def make_rhs(problem: SemiDiscreteProblem):
    """Right-hand side f(t, psi) of the semi-discrete system."""
    n = problem.n_sites
    x = problem.grid.points()
    h = problem.perturbation
    b, d = problem.reaction.birth, problem.reaction.death

    def coefficients(t):
        hh, hx, hxx = _tilt(h, t, x)
        return hx, hxx, np.exp(hh), np.exp(-hh)

    if h.time_dependent:
        coef = coefficients
    else:
        frozen = coefficients(0.0)
        coef = lambda t: frozen  # noqa: E731

    def rhs(t, psi):
        hx, hxx, eh, emh = coef(t)
        up = np.roll(psi, -1)
        dn = np.roll(psi, 1)
        return (n * n * (up - 2.0 * psi + dn) - hx * n * (up - dn)
                - hxx * 0.5 * (up + dn + 2.0 * psi) + eh * b(psi) - emh * d(psi))

    return rhs


def make_forcing(problem: SemiDiscreteProblem, n: int = None):
    """Non-Laplacian part F(t, psi) of the scheme on an n-site grid."""
    prob = problem if n is None else problem.on(n)
    full = make_rhs(prob)
    m = prob.n_sites

    def forcing(t, psi):
        up = np.roll(psi, -1)
        dn = np.roll(psi, 1)
        return full(t, psi) - m * m * (up - 2.0 * psi + dn)

    return forcing


def _check(psi, t):
    if not np.all(np.isfinite(psi)):
        raise Instability(f"non-finite value at t={t:g}")
    if psi.min() < -NEG_TOL:
        raise Instability(f"negative value {psi.min():.3e} at t={t:g}")


def _steps(t_final, dt_max, n_out):
    per = max(1, math.ceil(t_final / (dt_max * (n_out - 1))))
    n_steps = per * (n_out - 1)
    return n_steps, per, t_final / n_steps


def solve_semidiscrete_rk(problem: SemiDiscreteProblem, dt_factor: float = 0.25,
                          n_out: int = 101) -> Solution:
    """Classical RK4 with dt <= dt_factor / N^2, sampled at n_out uniform times."""
    if dt_factor > 0.25:
        raise ValidationError("explicit stability needs dt_factor <= 0.25")
    n = problem.n_sites
    f = make_rhs(problem)
    n_steps, per, dt = _steps(problem.t_final, dt_factor / (n * n), n_out)
    psi = problem.initial_values().astype(float)
    out = np.empty((n_out, n))
    out[0] = psi
    t = 0.0
    for i in range(1, n_steps + 1):
        k1 = f(t, psi)
        k2 = f(t + 0.5 * dt, psi + 0.5 * dt * k1)
        k3 = f(t + 0.5 * dt, psi + 0.5 * dt * k2)
        k4 = f(t + dt, psi + dt * k3)
        psi = psi + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = i * dt
        if i % per == 0:
            _check(psi, t)
            out[i // per] = psi
    return Solution(np.linspace(0.0, problem.t_final, n_out), out)


def _laplacian_symbol(n):
    j = np.arange(n // 2 + 1)
    return -2.0 * n * n * (1.0 - np.cos(2.0 * np.pi * j / n))


def _phi1(z):
    """(e^z - 1) / z, stable near 0."""
    out = np.ones_like(z)
    nz = np.abs(z) > 1e-8
    out[nz] = np.expm1(z[nz]) / z[nz]
    return out


def solve_semidiscrete_spectral(problem: SemiDiscreteProblem, panels: int = None,
                                n_out: int = 101, method: str = "midpoint") -> Solution:
    """Exponential integrator: the Laplacian is propagated exactly.

    ``method="midpoint"`` is the second-order exponential midpoint rule
    psi(s+h) = T(h) psi(s) + h phi1(h Delta) F(s + h/2, psi_mid), with the
    predictor psi_mid = T(h/2) psi(s) + (h/2) phi1(h Delta / 2) F(s, psi(s)).
    ``method="etdrk4"`` is the fourth-order scheme of Cox and Matthews with
    contour-integral coefficients, used for fine reference solutions.
    ``panels`` is the number of time steps (default: about 4 N steps).
    """
    n = problem.n_sites
    forcing = make_forcing(problem)
    if panels is None:
        panels = max(n_out - 1, 4 * n)
    n_steps, per, h = _steps(problem.t_final, problem.t_final / panels, n_out)
    lam = _laplacian_symbol(n)
    psi = problem.initial_values().astype(float)
    out = np.empty((n_out, n))
    out[0] = psi
    fft, ifft = np.fft.rfft, lambda c: np.fft.irfft(c, n)

    if method == "midpoint":
        e1, e2 = np.exp(h * lam), np.exp(0.5 * h * lam)
        p1, p2 = h * _phi1(h * lam), 0.5 * h * _phi1(0.5 * h * lam)
        t = 0.0
        for i in range(1, n_steps + 1):
            c = fft(psi)
            mid = ifft(e2 * c + p2 * fft(forcing(t, psi)))
            psi = ifft(e1 * c + p1 * fft(forcing(t + 0.5 * h, mid)))
            t = i * h
            if i % per == 0:
                _check(psi, t)
                out[i // per] = psi
    elif method == "etdrk4":
        lh = h * lam
        roots = np.exp(1j * np.pi * (np.arange(1, 33) - 0.5) / 32)
        lr = lh[:, None] + roots[None, :]
        e, e2 = np.exp(lh), np.exp(0.5 * lh)
        q = h * np.real(np.mean((np.exp(lr / 2) - 1) / lr, axis=1))
        f1 = h * np.real(np.mean((-4 - lr + np.exp(lr) * (4 - 3 * lr + lr**2)) / lr**3, axis=1))
        f2 = h * np.real(np.mean((2 + lr + np.exp(lr) * (-2 + lr)) / lr**3, axis=1))
        f3 = h * np.real(np.mean((-4 - 3 * lr - lr**2 + np.exp(lr) * (4 - lr)) / lr**3, axis=1))
        t = 0.0
        for i in range(1, n_steps + 1):
            v = fft(psi)
            nv = fft(forcing(t, psi))
            a = e2 * v + q * nv
            na = fft(forcing(t + 0.5 * h, ifft(a)))
            bb = e2 * v + q * na
            nb = fft(forcing(t + 0.5 * h, ifft(bb)))
            c = e2 * a + q * (2 * nb - nv)
            nc = fft(forcing(t + h, ifft(c)))
            psi = ifft(e * v + nv * f1 + 2 * (na + nb) * f2 + nc * f3)
            t = i * h
            if i % per == 0:
                _check(psi, t)
                out[i // per] = psi
    else:
        raise ValidationError(f"unknown method {method!r}")
    return Solution(np.linspace(0.0, problem.t_final, n_out), out)


class ReferenceSolution:
    """Fine-grid semi-discrete solution as a function of (t, x).

    Periodic cubic spline in x, linear in t between stored samples.
    """

    def __init__(self, solution: Solution):
        self.solution = solution
        self.times = solution.times
        self.values = solution.values
        m = solution.n_sites
        self.n_fine = m
        self.x = np.arange(m + 1) / m

    def __call__(self, t, x):
        vals = self.solution.at(t)
        spline = CubicSpline(self.x, np.append(vals, vals[0]), bc_type="periodic")
        return spline(np.mod(x, 1.0))

    def lattice(self, n_sites: int, times=None) -> np.ndarray:
        """Reference on the lattice k / n_sites at the given times (default: stored times)."""
        times = self.times if times is None else np.asarray(times, dtype=float)
        x = np.arange(n_sites) / n_sites
        if self.n_fine % n_sites == 0:
            stride = self.n_fine // n_sites
            if times is self.times:
                return self.values[:, ::stride].copy()
            return np.array([self.solution.at(t)[::stride] for t in times])
        return np.array([self(t, x) for t in times])

    def dx_sup(self) -> float:
        """sup over stored times and space of |d psi / dx| by spectral differentiation."""
        m = self.n_fine
        k = np.fft.rfftfreq(m, 1.0 / m)
        der = np.fft.irfft(2j * np.pi * k * np.fft.rfft(self.values, axis=1), m, axis=1)
        return float(np.max(np.abs(der)))


def reference_solution(problem: SemiDiscreteProblem, refinement: int = 8,
                       n_out: int = 101, dt: float = None) -> ReferenceSolution:
    """Solve the scheme on a ``refinement``-times finer grid (ETDRK4 in time)."""
    m = problem.n_sites * refinement
    if m > MAX_REFERENCE_SITES:
        raise TooLarge(f"reference grid of {m} sites exceeds {MAX_REFERENCE_SITES}")
    fine = problem.on(m)
    if dt is None:
        # advection and reaction stiffness are handled explicitly
        speed = 2.0 * problem.perturbation.sup_dx(problem.t_final) * m + problem.perturbation.sup_dxx(problem.t_final)
        dt = min(problem.t_final / 200, 0.5 / max(speed, 1.0))
    panels = math.ceil(problem.t_final / dt)
    return ReferenceSolution(solve_semidiscrete_spectral(fine, panels=panels, n_out=n_out, method="etdrk4"))


@dataclass(frozen=True)
class SchemeConstant:
    C_star: float
    parts: dict

    def bound(self, t_final: float, n_sites: int) -> float:
        return math.exp((3.0 * self.C_star + 1.0) * t_final) / n_sites


def scheme_constant(problem: SemiDiscreteProblem, psi_dx_sup: float) -> SchemeConstant:
    """C* from the catalog norms and an estimate of ||d psi / dx||."""
    h, t = problem.perturbation, problem.t_final
    sup_h = h.sup_H(t)
    parts = {
        "expH_lip_b": math.exp(sup_h) * problem.reaction.lip_b,
        "expmH_lip_d": math.exp(sup_h) * problem.reaction.lip_d,
        "dxH": h.sup_dx(t),
        "dxxH": h.sup_dxx(t),
        "dxpsi": float(psi_dx_sup),
    }
    return SchemeConstant(max(parts.values()), parts)


@dataclass
class StudyRow:
    n_sites: int
    error: float
    bound: float
    within_bound: bool


@dataclass
class SchemeStudy:
    rows: list
    order: float
    constant: SchemeConstant
    bound_threshold: float

    def table(self):
        return [(r.n_sites, r.error, r.bound, self.order) for r in self.rows]


def fit_order(ns, errors) -> float:
    """Least-squares slope of -log(error) against log(N)."""
    ns = np.asarray(ns, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if np.any(errors <= 1e-14):
        return float("nan")
    slope = np.polyfit(np.log(ns), np.log(errors), 1)[0]
    return float(-slope)


def scheme_error_study(problem: SemiDiscreteProblem, n_list: Sequence[int], refinement: int = 8,
                       n_out: int = 101, solver=None, reference: ReferenceSolution = None) -> SchemeStudy:
    """Sup-norm error of psi^N against one fine reference for each N in n_list.

    The reference lives on ``refinement`` times the largest N, so every coarse
    lattice point is a fine grid point and the stored sample times coincide.
    """
    n_list = sorted(int(n) for n in n_list)
    top = n_list[-1] * refinement
    if reference is None:
        reference = reference_solution(problem.on(n_list[-1]), refinement, n_out=n_out)
    if reference.n_fine < top:
        raise ValidationError("reference must be at least refinement x the largest N")
    solver = solver or solve_semidiscrete_rk
    const = scheme_constant(problem, reference.dx_sup())
    rows = []
    for n in n_list:
        sol = solver(problem.on(n), n_out=n_out)
        ref = reference.lattice(n, sol.times)
        err = float(np.max(np.abs(sol.values - ref)))
        bound = const.bound(problem.t_final, n)
        rows.append(StudyRow(n, err, bound, err <= bound))
    order = fit_order([r.n_sites for r in rows], [r.error for r in rows])
    threshold = problem.perturbation.sup_dx(problem.t_final) + 1.0
    return SchemeStudy(rows, order, const, threshold)


@dataclass
class ComparisonReport:
    passes: bool
    lower_violation: float
    upper_violation: float


def comparison_principle_check(sub, sup, solution, tol: float = 1e-8) -> ComparisonReport:
    """Check sub <= solution <= sup pointwise on a common time grid."""
    sub, sup, solution = (np.asarray(v, dtype=float) for v in (sub, sup, solution))
    lower = float(np.max(sub - solution))
    upper = float(np.max(solution - sup))
    return ComparisonReport(lower <= tol and upper <= tol, max(lower, 0.0), max(upper, 0.0))


def error_supersolution(times, c_star: float, lam: float, n_sites: int) -> np.ndarray:
    """z(t) = exp(lam C* t) / N, the barrier used for the O(1/N) estimate."""
    return np.exp(lam * c_star * np.asarray(times, dtype=float)) / n_sites
