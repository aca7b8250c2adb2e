import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from hdldev.ctmc import (SimParams, build_rates, extract_dynkin_martingale,
                         extract_quadratic_martingales, log_rn_weight_from_events,
                         log_rn_weight_taylor, read_event_log, simulate, write_event_log)
from hdldev.errors import EventBudgetExceeded, ValidationError
from hdldev.lattice import InitialProfile, Perturbation, RateFunction, ReactionSpec, TorusGrid

ZERO = ReactionSpec(RateFunction.zero(), RateFunction.zero())


def walker_generator(n, h, t=0.0):
    """Generator of one tilted walker: rate N^2 exp(H(k+-1) - H(k))."""
    x = np.arange(n) / n
    hh = h.H(t, x)
    q = np.zeros((n, n))
    for k in range(n):
        for j in ((k + 1) % n, (k - 1) % n):
            q[k, j] += n * n * math.exp(hh[j] - hh[k])
    q[np.diag_indices(n)] = -q.sum(axis=1)
    return q


def walker_positions(params, t_final, replicas, seed=0):
    c0 = np.zeros(params.n_sites, dtype=np.int64)
    c0[0] = 1
    pos, logw = [], []
    for r in range(replicas):
        res = simulate(params, c0, t_final, seed=seed, replica=r, record=False)
        pos.append(int(np.argmax(res.final_counts)))
        logw.append(res.weights.log_weight)
    return np.array(pos), np.array(logw)


def assert_law(samples, probs, weights=None, z=4.5):
    n = len(samples)
    w = np.ones(n) if weights is None else weights
    for k, p in enumerate(probs):
        v = w * (samples == k)
        se = v.std(ddof=1) / math.sqrt(n) + 1e-12
        assert abs(v.mean() - p) <= z * se + 1e-3, (k, v.mean(), p, se)


def test_single_walker_matches_heat_kernel():
    n, t = 4, 0.03
    params = SimParams(TorusGrid(n), 1, ZERO)
    pos, logw = walker_positions(params, t, 3000)
    assert np.all(logw == 0.0)
    assert_law(pos, scipy.linalg.expm(t * walker_generator(n, Perturbation.zero()))[0])


def test_tilted_walker_and_reweighting():
    n, t = 4, 0.03
    h = Perturbation.sine_mode(0.4, 1)
    params = SimParams(TorusGrid(n), 1, ZERO, h)
    pos, logw = walker_positions(params, t, 3000, seed=3)
    # law of the tilted chain
    assert_law(pos, scipy.linalg.expm(t * walker_generator(n, h))[0])
    # the weight turns it back into the untilted law
    assert_law(pos, scipy.linalg.expm(t * walker_generator(n, Perturbation.zero()))[0], np.exp(logw))


def test_time_dependent_tilt_uses_thinning_correctly():
    n, t = 4, 0.05
    h = Perturbation.sine_mode(0.5, 1, "cosine", 40.0)
    params = SimParams(TorusGrid(n), 1, ZERO, h)
    steps = 400
    prop = np.eye(n)
    for i in range(steps):
        prop = prop @ scipy.linalg.expm(t / steps * walker_generator(n, h, (i + 0.5) * t / steps))
    pos, logw = walker_positions(params, t, 3000, seed=5)
    assert_law(pos, prop[0])
    assert_law(pos, scipy.linalg.expm(t * walker_generator(n, Perturbation.zero()))[0], np.exp(logw))


def test_pure_death_mean():
    params = SimParams(TorusGrid(4), 8, ReactionSpec(RateFunction.zero(), RateFunction.linear(1.0)))
    c0 = np.full(4, 8, dtype=np.int64)
    tot = np.array([simulate(params, c0, 0.5, seed=1, replica=r).final_counts.sum() for r in range(1000)])
    p = math.exp(-0.5)
    assert abs(tot.mean() - 32 * p) <= 4 * math.sqrt(32 * p * (1 - p) / 1000)


def test_constant_birth_is_poisson():
    params = SimParams(TorusGrid(4), 8, ReactionSpec(RateFunction.constant(0.75), RateFunction.zero()))
    c0 = np.zeros(4, dtype=np.int64)
    tot = np.array([simulate(params, c0, 0.5, seed=2, replica=r).final_counts.sum() for r in range(1000)])
    lam = 8 * 0.75 * 4 * 0.5
    assert abs(tot.mean() - lam) <= 4 * math.sqrt(lam / 1000)
    assert tot.var(ddof=1) == pytest.approx(lam, rel=0.2)


@settings(max_examples=15, deadline=None)
@given(n=st.integers(2, 8), ell=st.integers(1, 20), seed=st.integers(0, 2**32))
def test_mass_is_conserved_without_reaction(n, ell, seed):
    params = SimParams(TorusGrid(n), ell, ZERO, Perturbation.sine_mode(0.3, 1))
    c0 = InitialProfile.smooth(1.0, 0.5).counts(params.grid, ell)
    res = simulate(params, c0, 0.02, seed=seed)
    assert res.final_counts.sum() == c0.sum()
    assert np.all(res.path.counts >= 0)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32), amp=st.floats(-0.5, 0.5))
def test_counts_stay_nonnegative(seed, amp):
    reaction = ReactionSpec(RateFunction.logistic(1.0, 3.0), RateFunction.linear(2.0))
    params = SimParams(TorusGrid(4), 4, reaction, Perturbation.sine_mode(amp, 1))
    res = simulate(params, np.array([1, 0, 2, 0]), 0.1, seed=seed)
    assert np.all(res.path.counts >= 0)
    assert res.n_events == len(res.events)


def test_same_seed_same_path_different_replica_differs(reaction, tilt, initial):
    params = SimParams(TorusGrid(8), 16, reaction, tilt)
    c0 = initial.counts(params.grid, 16)
    a = simulate(params, c0, 0.05, seed=9, replica=2)
    b = simulate(params, c0, 0.05, seed=9, replica=2)
    c = simulate(params, c0, 0.05, seed=9, replica=3)
    assert np.array_equal(a.events.times, b.events.times)
    assert a.weights.log_weight == b.weights.log_weight
    assert not np.array_equal(a.final_counts, c.final_counts) or len(a.events) != len(c.events)


def test_build_rates_sum(reaction, tilt):
    params = SimParams(TorusGrid(6), 10, reaction, tilt)
    eta = np.array([3, 0, 12, 7, 1, 30])
    st_ = build_rates(eta, tilt, 0.0, params)
    assert st_.rate_table.shape == (6, 4)
    assert st_.total_rate == pytest.approx(st_.rate_table.sum())
    # left/right jump rates of the untilted chain are N^2 eta
    flat = build_rates(eta, Perturbation.zero(), 0.0, params)
    assert np.allclose(flat.rate_table[:, 0], 36 * eta)


def test_online_sup_error_matches_path(reaction, tilt, initial):
    params = SimParams(TorusGrid(8), 16, reaction, tilt)
    c0 = initial.counts(params.grid, 16)
    t = 0.05
    ref = np.vstack([np.full(8, 1.0), np.full(8, 1.6)])  # linear in time
    res = simulate(params, c0, t, seed=4, reference=(ref, t))
    assert res.path.exact
    profile = lambda s: ref[0] + (ref[1] - ref[0]) * s / t
    assert res.sup_error == pytest.approx(res.path.sup_distance(profile), abs=1e-12)


@pytest.mark.parametrize("h", [Perturbation.sine_mode(0.3, 1), Perturbation.sine_mode(0.3, 1, "linear", 2.0)])
def test_weight_routes_agree(reaction, initial, h):
    params = SimParams(TorusGrid(6), 8, reaction, h)
    res = simulate(params, initial.counts(params.grid, 8), 0.1, seed=1, record=True)
    alt = log_rn_weight_from_events(res)
    assert alt.log_weight == pytest.approx(res.weights.log_weight, rel=1e-10, abs=1e-10)
    # the expansion is close but not exact
    assert abs(log_rn_weight_taylor(res) - res.weights.log_weight) < 0.1 * abs(res.weights.log_weight) + 0.1


def test_zero_tilt_weight_is_exactly_one(reaction, initial):
    params = SimParams(TorusGrid(6), 8, reaction)
    res = simulate(params, initial.counts(params.grid, 8), 0.1, seed=1, record=True)
    assert res.weights.log_weight == 0.0
    assert log_rn_weight_taylor(res) == 0.0


def test_budget_exceeded(reaction, initial):
    params = SimParams(TorusGrid(8), 64, reaction)
    c0 = initial.counts(params.grid, 64)
    with pytest.raises(EventBudgetExceeded) as info:
        simulate(params, c0, 1.0, budget=100)
    assert info.value.result.n_events == 100
    part = simulate(params, c0, 1.0, budget=100, allow_partial=True)
    assert not part.complete and part.t_end < 1.0


def test_input_validation(reaction):
    params = SimParams(TorusGrid(4), 4, reaction)
    with pytest.raises(ValidationError):
        simulate(params, np.array([1, 2, 3]), 0.1)
    with pytest.raises(ValidationError):
        simulate(params, np.array([1, -2, 3, 0]), 0.1)
    with pytest.raises(ValidationError):
        simulate(params, np.array([1, 2, 3, 0]), 0.0)
    with pytest.raises(ValidationError):
        simulate(params, np.array([1, 2, 3, 0]), 0.1, reference=(np.zeros((2, 4)), 0.01))


def test_event_log_round_trip(tmp_path, reaction, tilt, initial):
    params = SimParams(TorusGrid(5), 8, reaction, tilt)
    res = simulate(params, initial.counts(params.grid, 8), 0.05, seed=2, record=True)
    path = tmp_path / "ev.bin"
    write_event_log(path, res.events)
    assert path.stat().st_size == 16 + 13 * len(res.events)
    back = read_event_log(path)
    assert back.n_sites == 5
    assert np.array_equal(back.times, res.events.times)
    assert np.array_equal(back.increments(), res.events.increments())
    path.write_bytes(b"NOTMAGIC" + bytes(8))
    with pytest.raises(ValidationError):
        read_event_log(path)


def test_dynkin_untilted_has_no_truncation(reaction, initial):
    params = SimParams(TorusGrid(6), 8, reaction)
    res = simulate(params, initial.counts(params.grid, 8), 0.05, seed=3, record=True)
    dyn = extract_dynkin_martingale(res)
    assert np.allclose(dyn.expanded.values, dyn.exact.values, atol=1e-12)
    assert np.allclose(dyn.omitted, 0.0, atol=1e-12)
    assert np.all(dyn.exact.values[0] == 0.0)


def test_quadratic_martingales_need_three_sites(reaction):
    params = SimParams(TorusGrid(2), 4, reaction)
    res = simulate(params, np.array([4, 4]), 0.02, record=True)
    with pytest.raises(ValueError):
        extract_quadratic_martingales(res)
