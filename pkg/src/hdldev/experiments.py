"""Experiment suites: each returns a table plus pass/fail checks.

The defaults reproduce the desk-scale acceptance settings. Every suite is a
pure function of its arguments and ``seed``; replica r of a run with seed s
always uses the stream derived from (s, r).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .ctmc import (SimParams, extract_dynkin_martingale, extract_quadratic_martingales,
                   log_rn_weight_from_events, log_rn_weight_taylor, simulate)
from .lattice import (InitialProfile, Perturbation, RateFunction, ReactionSpec, ScalingLaw,
                      TorusGrid, laplacian_matrix, validate_perturbation_strength)
from .ldp import (PathFunctional, ProfileSlice, constant_profile_h, default_probes,
                  importance_sampling_estimate, j_functional, rate_closed_form,
                  rate_variational_probe, slice_from_samples, solve_elliptic_for_h)
from .parallel import map_replicas
from .pde import (SemiDiscreteProblem, reference_solution, scheme_error_study, solve_semidiscrete_rk,
                  solve_semidiscrete_spectral)
from .spectral import (SpectralBasis, semigroup_apply, semigroup_matrix_oracle,
                       stochastic_convolution_path)

DEFAULT_REACTION = ReactionSpec(RateFunction.logistic(1.0, 3.0), RateFunction.linear(0.5))
DEFAULT_INITIAL = InitialProfile.smooth(1.0, 0.5)
DEFAULT_TILT = Perturbation.sine_mode(0.3, 1)


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class SuiteResult:
    suite: str
    columns: Sequence[str]
    rows: list
    checks: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


@dataclass
class Setup:
    """Physics shared by the suites (overridable from a run configuration)."""

    reaction: ReactionSpec = DEFAULT_REACTION
    perturbation: Perturbation = DEFAULT_TILT
    initial: InitialProfile = DEFAULT_INITIAL

    def params(self, n, ell, tilt: Optional[Perturbation] = None) -> SimParams:
        h = self.perturbation if tilt is None else tilt
        return SimParams(TorusGrid(n), int(ell), self.reaction, h)

    def problem(self, n, t_final, tilt: Optional[Perturbation] = None) -> SemiDiscreteProblem:
        h = self.perturbation if tilt is None else tilt
        return SemiDiscreteProblem(TorusGrid(n), self.reaction, h, self.initial, t_final)


# ----------------------------------------------------------------------------
# scheme order
# ----------------------------------------------------------------------------


def run_scheme_order(setup: Setup = Setup(), n_list=(16, 32, 64, 128, 256), t_final=0.5,
                     refinement=8, order_window=(0.9, 1.3), n_out=101) -> SuiteResult:
    problem = setup.problem(n_list[0], t_final)
    study = scheme_error_study(problem, n_list, refinement=refinement, n_out=n_out)
    rows = [(r.n_sites, r.error, r.bound, study.order) for r in study.rows]
    lo, hi = order_window
    checks = [
        Check("order_in_window", lo <= study.order <= hi,
              f"fitted order {study.order:.4f}, window [{lo}, {hi}]"),
        Check("errors_within_bound",
              all(r.within_bound for r in study.rows if r.n_sites >= study.bound_threshold),
              f"C*={study.constant.C_star:.4g}"),
    ]
    coarse = solve_semidiscrete_rk(problem, n_out=n_out)
    return SuiteResult("scheme-order", ("N", "error", "bound", "order"), rows, checks,
                       {"study": study, "solution": coarse})


# ----------------------------------------------------------------------------
# semigroup
# ----------------------------------------------------------------------------


def run_semigroup(oracle_ns=range(3, 9), times=(0.0, 0.01, 0.1, 1.0),
                  invariant_ns=(2, 3, 16, 64, 255, 256), seed=0) -> SuiteResult:
    rng = np.random.default_rng(seed)
    rows = []
    worst = 0.0
    for n in oracle_ns:
        basis = SpectralBasis(n)
        for t in times:
            diff = float(np.max(np.abs(semigroup_matrix_oracle(n, t) - semigroup_apply(basis, t, np.eye(n)).T)))
            worst = max(worst, diff)
            rows.append(("oracle", n, t, diff))
    contraction = law = commute = 0.0
    for n in invariant_ns:
        basis = SpectralBasis(n)
        g = rng.normal(size=n)
        lap = laplacian_matrix(n)
        for t in (1e-4, 1e-2, 0.5):
            tg = semigroup_apply(basis, t, g)
            contraction = max(contraction, float(np.max(np.abs(tg)) - np.max(np.abs(g))))
            law = max(law, float(np.max(np.abs(semigroup_apply(basis, 0.3 * t, semigroup_apply(basis, t, g))
                                               - semigroup_apply(basis, 1.3 * t, g)))))
            c = float(np.max(np.abs(lap @ tg - semigroup_apply(basis, t, lap @ g)))) / (n * n)
            commute = max(commute, c)
        rows.append(("invariants", n, float("nan"), max(contraction, law, commute)))
    checks = [
        Check("oracle_1e-10", worst <= 1e-10, f"max diff {worst:.3e}"),
        Check("contraction", contraction <= 1e-12, f"max excess {contraction:.3e}"),
        Check("semigroup_law", law <= 1e-10, f"max diff {law:.3e}"),
        Check("commutation", commute <= 1e-9, f"max diff / N^2 {commute:.3e}"),
    ]
    return SuiteResult("semigroup", ("kind", "N", "t", "max_abs_diff"), rows, checks)


# ----------------------------------------------------------------------------
# martingales
# ----------------------------------------------------------------------------


def _mean_se(a):
    a = np.asarray(a, dtype=float)
    return a.mean(axis=0), a.std(axis=0, ddof=1) / math.sqrt(len(a))


def run_martingale(setup: Setup = Setup(), n_sites=8, ell=16, t_final=0.25, replicas=2000,
                   quad_sites=4, quad_ell=None, seed=0, threads=1, frac=0.95) -> SuiteResult:
    quad_ell = ell if quad_ell is None else quad_ell
    params = setup.params(n_sites, ell)
    c0 = setup.initial.counts(params.grid, ell)

    def dyn(r):
        res = simulate(params, c0, t_final, seed=seed, replica=r, record=True, weights=False)
        out = extract_dynkin_martingale(res)
        return out.expanded.final, out.exact.final, out.omitted, out.bias_scale

    out = map_replicas(dyn, replicas, threads)
    z_mean, z_se = _mean_se([o[0] for o in out])
    ze_mean, ze_se = _mean_se([o[1] for o in out])
    bias = np.abs(np.mean([o[2] for o in out], axis=0))
    scale = float(np.mean([o[3] for o in out]))
    ok_z = np.abs(z_mean) <= 4 * z_se + bias
    ok_ze = np.abs(ze_mean) <= 4 * ze_se
    rows = [("Z", n_sites, k, z_mean[k], z_se[k], bias[k], bool(ok_z[k])) for k in range(n_sites)]
    rows += [("Z_exact", n_sites, k, ze_mean[k], ze_se[k], 0.0, bool(ok_ze[k])) for k in range(n_sites)]

    qparams = setup.params(quad_sites, quad_ell)
    qc0 = setup.initial.counts(qparams.grid, quad_ell)

    def quad(r):
        res = simulate(qparams, qc0, t_final, seed=seed + 1, replica=r, record=True, weights=False)
        q = extract_quadratic_martingales(res)
        return q.m1[-1], q.m2[-1], q.m3[-1]

    qout = map_replicas(quad, replicas, threads)
    checks = [Check("Z_mean_zero", bool(ok_z.mean() >= frac), f"{ok_z.sum()}/{n_sites} sites; bias scale {scale:.3g}"),
              Check("Z_exact_mean_zero", bool(ok_ze.mean() >= frac), f"{ok_ze.sum()}/{n_sites} sites")]
    for j, name in enumerate(("M1", "M2", "M3")):
        m, se = _mean_se([o[j] for o in qout])
        ok = np.abs(m) <= 4 * se
        rows += [(name, quad_sites, k, m[k], se[k], 0.0, bool(ok[k])) for k in range(quad_sites)]
        checks.append(Check(f"{name}_mean_zero", bool(ok.mean() >= frac), f"{ok.sum()}/{quad_sites} sites"))
    return SuiteResult("martingale", ("process", "N", "site", "mean", "se", "bias", "ok"), rows, checks,
                       {"bias_scale": scale})


# ----------------------------------------------------------------------------
# weights
# ----------------------------------------------------------------------------

MILD_TILT = Perturbation.sine_mode(0.05, 1, "linear", 2.0)


def run_weights(setup: Setup = Setup(perturbation=MILD_TILT), n_sites=4, ell=8, t_final=0.1,
                replicas=10_000, gap_ns=(4, 8, 16), gap_replicas=100, seed=0,
                threads=1) -> SuiteResult:
    params = setup.params(n_sites, ell)
    c0 = setup.initial.counts(params.grid, ell)

    def one(r):
        res = simulate(params, c0, t_final, seed=seed, replica=r, record=False)
        return res.weights.log_weight

    lw = np.array(map_replicas(one, replicas, threads))
    w = np.exp(lw)
    mean, se = float(w.mean()), float(w.std(ddof=1) / math.sqrt(len(w)))
    rows = [("normalization", n_sites, ell, replicas, mean, se)]
    gaps = []
    route = 0.0
    for n in gap_ns:
        p = setup.params(n, ell)
        c = setup.initial.counts(p.grid, ell)

        def gap(r):
            res = simulate(p, c, t_final, seed=seed + n, replica=r, record=True)
            alt = log_rn_weight_from_events(res).log_weight
            exact = res.weights.log_weight
            return abs(exact - log_rn_weight_taylor(res)) / (ell * n), abs(exact - alt) / max(1.0, abs(exact))

        g = map_replicas(gap, gap_replicas, threads)
        gm = float(np.mean([x[0] for x in g]))
        route = max(route, max(x[1] for x in g))
        gaps.append(gm)
        rows.append(("taylor_gap", n, ell, gap_replicas, gm, float(np.std([x[0] for x in g], ddof=1) / math.sqrt(gap_replicas))))
    checks = [
        Check("mean_weight_is_1", abs(mean - 1.0) <= 3 * se, f"mean {mean:.5f} se {se:.5f}"),
        Check("gap_decays", all(a > b for a, b in zip(gaps, gaps[1:])) or not any(gaps),
              "gap/(ell N): " + ", ".join(f"{g:.3e}" for g in gaps)),
        Check("online_vs_event_log", route <= 1e-10, f"max rel diff {route:.2e}"),
    ]
    return SuiteResult("weights", ("quantity", "N", "ell", "replicas", "value", "se"), rows, checks)


# ----------------------------------------------------------------------------
# law of large numbers
# ----------------------------------------------------------------------------


def lln_errors(setup: Setup, n_sites: int, ell: int, t_final: float, replicas: int, seed: int,
               tilt: Optional[Perturbation] = None, threads: int = 1, n_ref: int = 501,
               refinement: int = 8):
    """Per-replica sup_t max_k |X_k(t) - psi(t, k/N)| against the fine reference."""
    params = setup.params(n_sites, ell, tilt)
    ref = reference_solution(setup.problem(n_sites, t_final, tilt), refinement, n_out=n_ref)
    lattice = ref.lattice(n_sites)
    dt = ref.times[1] - ref.times[0]
    c0 = setup.initial.counts(params.grid, ell)

    def one(r):
        res = simulate(params, c0, t_final, seed=seed, replica=r, record=False, weights=False,
                       reference=(lattice, dt), n_snapshots=2)
        return res.sup_error

    return np.array(map_replicas(one, replicas, threads))


def run_lln(setup: Setup = Setup(), n_list=(8, 16, 32), alpha=2.0, t_final=0.25, replicas=20,
            seed=0, threads=1, perturbed: bool = False, win_rate=0.8,
            ell_list: Optional[Sequence[int]] = None) -> SuiteResult:
    """Convergence table against the reference; with ``ell_list``, N is fixed at n_list[0]."""
    tilt = setup.perturbation if perturbed else Perturbation.zero()
    if ell_list is None:
        law = ScalingLaw.power(alpha)
        pairs = [(n, law.resolve(n)) for n in n_list]
    else:
        law = ScalingLaw.explicit(ell_list[0])
        pairs = [(n_list[0], int(e)) for e in ell_list]
    report = validate_perturbation_strength(tilt, law, t_final)
    rows, errs = [], []
    for n, ell in pairs:
        e = lln_errors(setup, n, ell, t_final, replicas, seed, tilt, threads)
        errs.append(e)
        rows.append((n, ell, replicas, float(np.median(e)), float(np.max(e))))
    meds = [r[3] for r in rows]
    wins = float(np.mean(errs[-1] < errs[0]))
    checks = [
        Check("median_decreases", all(a > b for a, b in zip(meds, meds[1:])),
              "medians " + ", ".join(f"{m:.4f}" for m in meds)),
        Check("paired_win_rate", bool(wins >= win_rate),
              f"{pairs[-1]} beats {pairs[0]} in {wins:.0%} of paired replicas"),
        Check("admissible_tilt", bool(report.passes), f"||dxH||={report.measured:.3f} bound {report.bound:.3f}"),
    ]
    return SuiteResult("lln-perturbed" if perturbed else "lln",
                       ("N", "ell", "replicas", "median_err", "max_err"), rows, checks,
                       {"errors": dict(zip(pairs, errs)), "strength": report})


# ----------------------------------------------------------------------------
# rate functional
# ----------------------------------------------------------------------------

RATE_TILTS = (Perturbation.sine_mode(0.3, 1), Perturbation.sine_mode(0.2, 1, "linear", 1.0))


def run_rate(setup: Setup = Setup(), tilts=RATE_TILTS, t_final=0.25, n_fine=256,
             refinement=4, n_out=1001, tol=1e-3) -> SuiteResult:
    rows, checks = [], []
    quad = PathFunctional()
    for i, h in enumerate(tilts):
        ref = reference_solution(setup.problem(n_fine, t_final, h), refinement, n_out=n_out)
        j = j_functional(ref, h, setup.reaction, t_final, quad)
        rate = rate_closed_form(ref, h, setup.reaction, t_final, quad)
        probe = rate_variational_probe(ref, h, default_probes(h, np.random.default_rng(i)),
                                       setup.reaction, t_final, tol, quad)
        j0 = j_functional(ref, Perturbation.zero(), setup.reaction, t_final, quad)
        rel = abs(j - rate) / abs(rate) if rate != 0 else abs(j - rate)
        rows.append((i, h.amplitude, h.temporal, j, rate, rel, probe.max_excess, j0))
        checks.append(Check(f"J_equals_I_tilt{i}", rel <= tol, f"rel diff {rel:.2e}"))
        checks.append(Check(f"probes_tilt{i}", bool(probe.passes), f"max excess {probe.max_excess:.2e}"))
        checks.append(Check(f"J0_tilt{i}", j0 == 0.0, f"J_0 = {j0!r}"))
    return SuiteResult("rate", ("tilt", "amplitude", "temporal", "J_H", "I_closed_form", "rel_diff",
                                "probe_excess", "J_0"), rows, checks)


# ----------------------------------------------------------------------------
# elliptic inversion
# ----------------------------------------------------------------------------


def run_invert_h(setup: Setup = Setup(), t_final=0.1, t_slice=0.05, m_list=(256, 512),
                 n_fine=4096, n_out=201, tol=1e-3) -> SuiteResult:
    h = setup.perturbation
    sol = solve_semidiscrete_spectral(setup.problem(n_fine, t_final), panels=4000, n_out=n_out,
                                      method="etdrk4")
    fine = slice_from_samples(sol.times, sol.values, t_slice)
    rows, errs, slices = [], {}, {}
    for m in m_list:
        s = n_fine // m
        sl = ProfileSlice(fine.psi[::s], fine.psi_x[::s], fine.psi_xx[::s], fine.psi_t[::s])
        res = solve_elliptic_for_h(sl, setup.reaction)
        x = np.arange(m) / m
        err = float(np.max(np.abs(res.h - h.H(t_slice, x))))
        errs[m] = err
        slices[m] = (x, res.h)
        rows.append(("round_trip", m, err, res.residual, res.iterations))
    gamma = setup.initial.a
    m = m_list[-1]
    flat = ProfileSlice(np.full(m, gamma), np.zeros(m), np.zeros(m), np.zeros(m))
    res = solve_elliptic_for_h(flat, setup.reaction)
    h_star = constant_profile_h(gamma, setup.reaction)
    cerr = float(np.max(np.abs(res.h - h_star)))
    rows.append(("constant_profile", m, cerr, res.residual, res.iterations))
    ratio = errs[m_list[0]] / errs[m_list[-1]]
    expected = (m_list[-1] / m_list[0]) ** 2
    checks = [
        Check("round_trip_1e-3", errs[m_list[-1]] <= tol, f"sup error {errs[m_list[-1]]:.2e}"),
        Check("second_order", abs(math.log(ratio) / math.log(expected) - 1) <= 0.15,
              f"error ratio {ratio:.2f} (M^-2 predicts {expected:.0f})"),
        Check("constant_profile_1e-10", cerr <= 1e-10, f"|H - H*| = {cerr:.1e}"),
    ]
    return SuiteResult("invert-h", ("case", "M", "sup_error", "residual", "iterations"), rows, checks,
                       {"t_slice": t_slice, "slices": slices})


# ----------------------------------------------------------------------------
# importance sampling / entropy
# ----------------------------------------------------------------------------

ENTROPY_TILT = Perturbation.sine_mode(0.3, 1)


def run_is_estimate(setup: Setup = Setup(perturbation=ENTROPY_TILT), n_sites=16, ell=64,
                    t_final=0.25, replicas=200, delta=1.0, seed=0, threads=1,
                    refinement=16) -> SuiteResult:
    h = setup.perturbation
    params = setup.params(n_sites, ell)
    ref = reference_solution(setup.problem(n_sites, t_final), refinement, n_out=401)
    rate = rate_closed_form(ref, h, setup.reaction, t_final)
    est = importance_sampling_estimate(ref, delta, params, setup.initial, t_final, replicas,
                                       seed=seed, rate=rate, threads=threads)
    tol = max(0.15 * rate, 0.02)
    diff = abs(est.entropy_all - rate)
    checks = [
        Check("entropy_matches_rate", diff <= tol,
              f"entropy/(ell N) {est.entropy_all:.4f} +/- {est.entropy_all_se:.4f}, I {rate:.4f}, tol {tol:.4f}"),
        Check("tube_hits", not est.zero_hits, f"{est.hits}/{replicas} replicas in tube"),
    ]
    return SuiteResult("is-estimate", ("N", "ell", "p_hat", "se", "cost", "entropy", "I_closed_form"),
                       [est.row()], checks, {"estimate": est})


# ----------------------------------------------------------------------------
# concentration of the stochastic convolution
# ----------------------------------------------------------------------------


def convolution_sup(result, basis: SpectralBasis) -> float:
    """sup over event times of ||Y^N||_inf for the untilted Dynkin martingale."""
    params = result.params
    ell = float(params.ell)
    states = result.states() / ell
    b, d = params.reaction.birth, params.reaction.death
    n = params.n_sites
    drift = -(n * n * (np.roll(states, -1, 1) - 2 * states + np.roll(states, 1, 1))
              + b(states) - d(states))
    jumps = np.vstack([np.zeros((1, n)), np.diff(states, axis=0)])
    times = np.concatenate([[0.0], result.events.times])
    before, after, end = stochastic_convolution_path(basis, times, jumps, drift, result.t_final)
    return float(max(np.max(np.abs(before)), np.max(np.abs(after)), np.max(np.abs(end))))


def run_concentration(setup: Setup = Setup(), n_sites=8, ells=(8, 32, 128), t_final=0.1,
                      replicas=200, quantile=0.3, seed=0, threads=1) -> SuiteResult:
    basis = SpectralBasis(n_sites)
    sups = {}
    for ell in ells:
        params = setup.params(n_sites, ell, Perturbation.zero())
        c0 = setup.initial.counts(params.grid, ell)

        def one(r):
            res = simulate(params, c0, t_final, seed=seed + ell, replica=r, record=True, weights=False)
            return convolution_sup(res, basis)

        sups[ell] = np.array(map_replicas(one, replicas, threads))
    eps = float(np.quantile(sups[ells[0]], quantile))
    probs = [float(np.mean(sups[ell] > eps)) for ell in ells]
    rows = [(n_sites, ell, replicas, eps, p, float(np.median(sups[ell]))) for ell, p in zip(ells, probs)]
    checks = [Check("tail_non_increasing", all(a >= b for a, b in zip(probs, probs[1:])),
                    "P: " + ", ".join(f"{p:.3f}" for p in probs) + f" at eps {eps:.4f}")]
    return SuiteResult("concentration", ("N", "ell", "replicas", "eps", "p_exceed", "median_sup"),
                       rows, checks, {"sups": sups})


SUITES = {
    "lln": lambda **kw: run_lln(perturbed=False, **kw),
    "lln-perturbed": lambda **kw: run_lln(perturbed=True, **kw),
    "scheme-order": run_scheme_order,
    "semigroup": run_semigroup,
    "martingale": run_martingale,
    "weights": run_weights,
    "rate": run_rate,
    "invert-h": run_invert_h,
    "is-estimate": run_is_estimate,
    "concentration": run_concentration,
}
