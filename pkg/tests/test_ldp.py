import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hdldev.errors import DegenerateReaction, DomainError, PositivityViolated
from hdldev.lattice import InitialProfile, Perturbation, RateFunction, ReactionSpec, TorusGrid
from hdldev.ldp import (PathFunctional, ProfileSlice, constant_profile_h, default_probes,
                        gamma_bar, gamma_fn, j_functional, poisson_ld_rate, rate_closed_form,
                        rate_variational_probe, slice_from_samples, solve_elliptic_for_h,
                        spectral_derivatives, summarize_importance_sampling)
from hdldev.pde import SemiDiscreteProblem, reference_solution

QUICK = PathFunctional(nx=128, panels=16)


@given(st.floats(-20, 20))
def test_gamma_nonnegative(y):
    assert gamma_fn(y) >= -1e-12 * math.exp(abs(y))


@given(st.floats(-5, 5), st.floats(-5, 5))
def test_gamma_bar_is_maximised_on_diagonal(x, y):
    assert gamma_bar(x, y) <= gamma_bar(y, y) + 1e-9 * math.exp(max(x, y))
    assert gamma_bar(y, y) == pytest.approx(gamma_fn(y), abs=1e-9 * math.exp(abs(y)))


def test_poisson_rate():
    assert poisson_ld_rate(2.0, 2.0) == 0.0
    assert poisson_ld_rate(1.0, 2.0) == pytest.approx(math.log(0.5) + 1)
    with pytest.raises(DomainError):
        poisson_ld_rate(-1.0, 1.0)


@pytest.fixture(scope="module")
def tilted_reference():
    reaction = ReactionSpec(RateFunction.logistic(1.0, 3.0), RateFunction.linear(0.5))
    h = Perturbation.sine_mode(0.3, 1)
    p = SemiDiscreteProblem(TorusGrid(128), reaction, h, InitialProfile.smooth(1.0, 0.5), 0.1)
    return reaction, h, reference_solution(p, 1, n_out=401)


def test_zero_tilt_is_exactly_zero(tilted_reference):
    reaction, _, ref = tilted_reference
    assert j_functional(ref, Perturbation.zero(), reaction, 0.1) == 0.0
    assert rate_closed_form(ref, Perturbation.zero(), reaction, 0.1) == 0.0


def test_j_equals_closed_form_rate(tilted_reference):
    reaction, h, ref = tilted_reference
    j = j_functional(ref, h, reaction, 0.1, QUICK)
    i = rate_closed_form(ref, h, reaction, 0.1, QUICK)
    assert i > 0
    assert j == pytest.approx(i, rel=2e-3)


def test_probes_do_not_beat_the_optimal_tilt(tilted_reference):
    reaction, h, ref = tilted_reference
    rep = rate_variational_probe(ref, h, default_probes(h, np.random.default_rng(3)), reaction, 0.1,
                                 tol=2e-3, quad=QUICK)
    assert rep.passes
    assert rep.values[3] == 0.0  # the zero probe


def test_spectral_derivatives_exact_on_trig():
    m = 32
    x = np.arange(m) / m
    d1, d2 = spectral_derivatives(np.sin(2 * np.pi * x))
    assert np.allclose(d1, 2 * np.pi * np.cos(2 * np.pi * x), atol=1e-10)
    assert np.allclose(d2, -4 * np.pi**2 * np.sin(2 * np.pi * x), atol=1e-9)


def test_slice_time_derivative_fourth_order():
    m = 16
    x = np.arange(m) / m
    times = np.linspace(0, 1, 41)
    vals = np.exp(times)[:, None] * (2 + np.sin(2 * np.pi * x))
    sl = slice_from_samples(times, vals, 0.5)
    assert np.allclose(sl.psi_t, vals[20], atol=1e-6)
    with pytest.raises(ValueError):
        slice_from_samples(times, vals, 0.025)


def manufactured_slice(m, reaction, h_fn):
    """psi_t chosen so that h_fn solves the inversion equation exactly."""
    x = np.arange(m) / m
    tau = 2 * np.pi
    psi = 1.0 + 0.4 * np.sin(tau * x)
    px = 0.4 * tau * np.cos(tau * x)
    pxx = -0.4 * tau**2 * np.sin(tau * x)
    h, hx, hxx = h_fn(x)
    psi_t = pxx + np.exp(h) * reaction.birth(psi) - np.exp(-h) * reaction.death(psi) \
        - 2 * psi * (hxx + px / psi * hx)
    return ProfileSlice(psi, px, pxx, psi_t), h


def _h(x):
    tau = 2 * np.pi
    return (-0.1 + 0.3 * np.sin(tau * x), 0.3 * tau * np.cos(tau * x), -0.3 * tau**2 * np.sin(tau * x))


def test_elliptic_manufactured_solution_second_order(reaction):
    errs = []
    for m in (64, 128):
        sl, h = manufactured_slice(m, reaction, _h)
        res = solve_elliptic_for_h(sl, reaction)
        assert res.converged and res.residual <= 1e-10
        errs.append(np.max(np.abs(res.h - h)))
    assert errs[1] < 1e-3
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)


def test_constant_profile_closed_form(reaction):
    h_star = constant_profile_h(1.0, reaction)
    assert h_star == pytest.approx(0.5 * math.log(0.5 / (1 - 1 / 3)))
    flat = ProfileSlice(np.ones(64), np.zeros(64), np.zeros(64), np.zeros(64))
    res = solve_elliptic_for_h(flat, reaction)
    assert np.max(np.abs(res.h - h_star)) <= 1e-10


def test_elliptic_input_errors(reaction, no_reaction):
    with pytest.raises(PositivityViolated):
        solve_elliptic_for_h(ProfileSlice(np.zeros(8), np.zeros(8), np.zeros(8), np.zeros(8)), reaction)
    with pytest.raises(DegenerateReaction):
        solve_elliptic_for_h(ProfileSlice(np.ones(8), np.zeros(8), np.zeros(8), np.zeros(8)), no_reaction)


def test_importance_summary():
    lw = np.log(np.array([0.5, 2.0, 1.0, 4.0]))
    tube = np.array([True, False, True, True])
    est = summarize_importance_sampling(lw, tube, 2, 3)
    assert est.p_hat == pytest.approx((0.5 + 1.0 + 4.0) / 4)
    assert est.hits == 3 and not est.zero_hits
    assert est.entropy == pytest.approx(-np.mean(lw[tube]) / 6)
    assert est.cost == pytest.approx(-math.log(est.p_hat) / 6)
    none = summarize_importance_sampling(lw, np.zeros(4, bool), 2, 3)
    assert none.zero_hits and none.p_hat == 0.0 and none.cost == math.inf
