import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hdldev.errors import OverflowRisk, ValidationError
from hdldev.lattice import (DensityPath, InitialProfile, Perturbation, RateFunction, ReactionSpec,
                            ScalingLaw, TorusGrid, discrete_gradients, discrete_laplacian, inner,
                            l1_norm, laplacian_matrix, resolve_scaling, sup_norm,
                            validate_perturbation_strength)

grid_fns = st.integers(2, 40).flatmap(
    lambda n: st.lists(st.floats(-5, 5), min_size=n, max_size=n).map(np.array))


def test_grid_points_and_wrap():
    g = TorusGrid(5)
    assert np.allclose(g.points(), np.arange(5) / 5)
    assert g.wrap(-1) == 4 and g.wrap(5) == 0
    assert g.mesh == pytest.approx(0.2)
    with pytest.raises(ValidationError):
        TorusGrid(1)


def test_norms_and_inner():
    f = np.array([1.0, -3.0, 2.0, 0.0])
    assert sup_norm(f) == 3.0
    assert l1_norm(f) == pytest.approx(1.5)
    assert inner(f, np.ones(4)) == pytest.approx(0.0)


def test_laplacian_of_constant_is_zero():
    assert np.all(discrete_laplacian(np.full(7, 2.5)) == 0.0)


def test_laplacian_matches_dense_matrix(rng):
    f = rng.normal(size=12)
    assert np.allclose(discrete_laplacian(f), laplacian_matrix(12) @ f)


def test_laplacian_eigenvalues_are_closed_form():
    n = 10
    ev = np.sort(np.linalg.eigvalsh(laplacian_matrix(n)))
    m = np.arange(n)
    expected = np.sort(-2 * n * n * (1 - np.cos(2 * np.pi * m / n)))
    assert np.allclose(ev, expected)


def test_laplacian_is_second_order_on_smooth_functions():
    errs = []
    for n in (32, 64):
        x = np.arange(n) / n
        errs.append(np.max(np.abs(discrete_laplacian(np.sin(2 * np.pi * x))
                                  + 4 * np.pi**2 * np.sin(2 * np.pi * x))))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.02)


def test_gradient_conventions():
    n = 8
    f = np.arange(n, dtype=float)
    c, fwd, bwd = discrete_gradients(f)
    assert fwd[0] == pytest.approx(n)
    assert bwd[1] == pytest.approx(-n)
    assert c[3] == pytest.approx(n)
    # forward + backward = Laplacian / N
    assert np.allclose(fwd + bwd, discrete_laplacian(f) / n)


@given(grid_fns)
def test_laplacian_sums_to_zero(f):
    assert abs(discrete_laplacian(f).sum()) <= 1e-8 * (1 + len(f) ** 2 * np.abs(f).sum())


@given(grid_fns)
def test_laplacian_is_negative_semidefinite(f):
    assert inner(f, discrete_laplacian(f)) <= 1e-9 * len(f) ** 2 * (1 + np.sum(f * f))


def test_scaling_round_half_up():
    assert resolve_scaling(ScalingLaw.power(1.5), TorusGrid(2)) == 3  # 2.83
    assert ScalingLaw.power(0.5).resolve(9) == 3
    assert ScalingLaw.explicit(17).resolve(4) == 17
    assert ScalingLaw.exponential(0.5).resolve(4) == round(math.exp(2.0))
    assert ScalingLaw.power(2.0).alpha == 2.0


def test_scaling_overflow_guard():
    with pytest.raises(OverflowRisk):
        ScalingLaw.exponential(1.0).resolve(800)
    with pytest.raises(OverflowRisk):
        ScalingLaw.power(12.0).resolve(64)


@pytest.mark.parametrize("rf", [RateFunction.constant(0.7), RateFunction.linear(0.5),
                                RateFunction.affine(0.2, 0.3), RateFunction.logistic(1.0, 3.0)])
def test_rate_derivative_matches_finite_difference(rf):
    u = np.linspace(0.113, 4.97, 50)  # avoids the logistic kink at K
    h = 1e-6
    fd = (rf(u + h) - rf(u - h)) / (2 * h)
    assert np.allclose(rf.derivative(u), fd, atol=1e-6)
    assert rf.verify_lipschitz(5.0) <= rf.lipschitz + 1e-9


def test_reaction_requires_zero_death_at_zero():
    with pytest.raises(ValidationError):
        ReactionSpec(RateFunction.zero(), RateFunction.constant(1.0))


def test_reaction_net_and_lipschitz(reaction):
    u = np.linspace(0, 3, 7)
    assert np.allclose(reaction.net(u), u * (1 - u / 3) - 0.5 * u)
    assert reaction.lip_d == 0.5


def _fd_check(h, t, x):
    e = 1e-6
    assert np.allclose(h.dt(t, x), (h.H(t + e, x) - h.H(t - e, x)) / (2 * e), atol=1e-6)
    assert np.allclose(h.dx(t, x), (h.H(t, x + e) - h.H(t, x - e)) / (2 * e), atol=1e-5)
    assert np.allclose(h.dxx(t, x), (h.dx(t, x + e) - h.dx(t, x - e)) / (2 * e), atol=1e-3)


@pytest.mark.parametrize("h", [Perturbation.sine_mode(0.3, 1), Perturbation.sine_mode(0.2, 2, "linear", 1.5),
                               Perturbation.sine_mode(0.4, 1, "cosine", 3.0, shape="cos")])
def test_perturbation_derivatives(h):
    _fd_check(h, 0.37, np.linspace(0, 1, 13, endpoint=False))


def test_perturbation_sups():
    h = Perturbation.sine_mode(0.3, 2, "linear", 1.0)
    assert h.sup_H(1.0) == pytest.approx(0.6)
    assert h.sup_dx(1.0) == pytest.approx(0.6 * 4 * math.pi)
    assert Perturbation.zero().is_zero and not Perturbation.zero().time_dependent


def test_strength_validator_bounds():
    law = ScalingLaw.power(2.0)
    bound = math.pi * math.sqrt(2.0)
    amp = bound / (2 * math.pi)
    rep = validate_perturbation_strength(Perturbation.sine_mode(amp, 1), law)
    assert rep.passes and rep.near_bound
    assert rep.conservative_bound == pytest.approx(bound / 2)
    assert not rep.conservative_passes
    assert not validate_perturbation_strength(Perturbation.sine_mode(1.1 * amp, 1), law).passes
    assert validate_perturbation_strength(Perturbation.sine_mode(5.0, 3), ScalingLaw.exponential(1.0)).passes


def test_initial_counts_floor():
    prof = InitialProfile.constant(1.25)
    assert np.all(prof.counts(TorusGrid(4), 8) == 10)
    smooth = InitialProfile.smooth(1.0, 0.5)
    c = smooth.counts(TorusGrid(8), 16)
    assert c.dtype == np.int64
    assert np.all(c == np.floor(16 * (1 + 0.5 * np.sin(2 * np.pi * np.arange(8) / 8) ** 2) + 1e-9))
    with pytest.raises(ValidationError):
        InitialProfile(-1.0)


def test_density_path_queries():
    path = DensityPath(4, [0.0, 0.5], np.array([[4, 8], [0, 12]]), 1.0)
    assert np.allclose(path.at(0.2), [1.0, 2.0])
    assert np.allclose(path.at(0.5), [0.0, 3.0])
    assert path.sup_norm_window(0.0, 0.4) == 2.0
    assert path.interpolate(0.1, 0.25) == pytest.approx(1.5)
    assert path.sup_distance(lambda t: np.array([1.0, 2.0])) == pytest.approx(1.0)
    with pytest.raises(ValidationError):
        DensityPath(4, [0.0, 0.5], np.zeros((3, 2)), 1.0)
