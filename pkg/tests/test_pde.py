import math

import numpy as np
import pytest

from hdldev.errors import TooLarge, ValidationError
from hdldev.lattice import InitialProfile, Perturbation, RateFunction, ReactionSpec, TorusGrid
from hdldev.pde import (SemiDiscreteProblem, comparison_principle_check, error_supersolution,
                        fit_order, reference_solution, scheme_constant, scheme_error_study,
                        solve_semidiscrete_rk, solve_semidiscrete_spectral)
from hdldev.spectral import SpectralBasis, semigroup_apply

ZERO = ReactionSpec(RateFunction.zero(), RateFunction.zero())


def problem(n, reaction, h=Perturbation.zero(), init=InitialProfile.smooth(1.0, 0.5), t=0.1):
    return SemiDiscreteProblem(TorusGrid(n), reaction, h, init, t)


def test_pure_heat_matches_semigroup():
    p = problem(16, ZERO)
    sol = solve_semidiscrete_rk(p, n_out=11)
    exact = semigroup_apply(SpectralBasis(16), 0.1, p.initial_values())
    assert np.allclose(sol.values[-1], exact, atol=1e-10)
    assert sol.values[-1].sum() == pytest.approx(p.initial_values().sum(), abs=1e-10)


def test_linear_death_decays_exponentially():
    p = problem(8, ReactionSpec(RateFunction.zero(), RateFunction.linear(0.7)),
                init=InitialProfile.constant(2.0), t=0.5)
    for sol in (solve_semidiscrete_rk(p, n_out=6), solve_semidiscrete_spectral(p, n_out=6)):
        assert np.allclose(sol.values[:, 0], 2.0 * np.exp(-0.7 * sol.times), atol=1e-9)


def test_logistic_constant_profile_ode():
    # u' = u (1 - u / 3) - 0.5 u = 0.5 u (1 - u / 1.5)
    reaction = ReactionSpec(RateFunction.logistic(1.0, 3.0), RateFunction.linear(0.5))
    p = problem(4, reaction, init=InitialProfile.constant(0.5), t=1.0)
    sol = solve_semidiscrete_rk(p, n_out=5)
    t = sol.times
    exact = 1.5 / (1 + (1.5 / 0.5 - 1) * np.exp(-0.5 * t))
    assert np.allclose(sol.values[:, 2], exact, atol=1e-10)


@pytest.mark.parametrize("method", ["midpoint", "etdrk4"])
def test_spectral_solvers_agree_with_rk(reaction, tilt, method):
    p = problem(16, reaction, tilt)
    rk = solve_semidiscrete_rk(p, n_out=11)
    sp = solve_semidiscrete_spectral(p, panels=400, n_out=11, method=method)
    assert np.max(np.abs(rk.values - sp.values)) < 1e-5


def test_comparison_principle_untilted(reaction):
    lo = solve_semidiscrete_rk(problem(16, reaction, init=InitialProfile.smooth(0.5, 0.3)), n_out=21)
    hi = solve_semidiscrete_rk(problem(16, reaction, init=InitialProfile.smooth(1.0, 0.5)), n_out=21)
    rep = comparison_principle_check(lo.values, hi.values, hi.values)
    assert rep.passes
    assert comparison_principle_check(np.zeros_like(lo.values), hi.values, lo.values).passes
    bad = comparison_principle_check(hi.values, hi.values + 1, lo.values)
    assert not bad.passes and bad.lower_violation > 0


def test_solution_at_interpolates(reaction):
    sol = solve_semidiscrete_rk(problem(8, reaction), n_out=3)
    mid = sol.at(0.025)
    assert np.allclose(mid, 0.5 * (sol.values[0] + sol.values[1]))


def test_reference_lattice_and_guards(reaction, tilt):
    p = problem(8, reaction, tilt)
    ref = reference_solution(p, 4, n_out=11)
    assert ref.lattice(8).shape == (11, 8)
    assert np.allclose(ref.lattice(8)[0], p.initial_values())
    assert ref(0.0, np.array([0.125]))[0] == pytest.approx(p.initial_values()[1], abs=1e-8)
    with pytest.raises(TooLarge):
        reference_solution(p.on(1024), 8)
    with pytest.raises(ValidationError):
        solve_semidiscrete_rk(p, dt_factor=0.5)


def test_fit_order_exact():
    ns = np.array([8, 16, 32, 64])
    assert fit_order(ns, 3.0 / ns) == pytest.approx(1.0)
    assert fit_order(ns, 0.1 / ns**2) == pytest.approx(2.0)


def test_small_scheme_study(reaction, tilt):
    p = problem(8, reaction, tilt, t=0.1)
    study = scheme_error_study(p, [8, 16, 32], refinement=4, n_out=11)
    errs = [r.error for r in study.rows]
    assert errs[0] > errs[1] > errs[2]
    assert study.order > 0.9
    assert all(r.error <= r.bound for r in study.rows)


def test_scheme_constant_and_supersolution(reaction, tilt):
    c = scheme_constant(problem(8, reaction, tilt, t=0.5), psi_dx_sup=2.0)
    assert c.C_star == max(c.parts.values())
    assert c.bound(0.5, 10) == pytest.approx(math.exp((3 * c.C_star + 1) * 0.5) / 10)
    z = error_supersolution([0.0, 1.0], 2.0, 3.0, 4)
    assert z[0] == 0.25 and z[1] == pytest.approx(math.exp(6.0) / 4)
