import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hdldev.errors import IncompletePath, NegativeTime, QuadratureBudget, TooLarge
from hdldev.lattice import discrete_laplacian, laplacian_matrix
from hdldev.spectral import (SpectralBasis, duhamel_deterministic, duhamel_stochastic_convolution,
                             semigroup_apply, semigroup_matrix_oracle, stochastic_convolution_path)


@pytest.mark.parametrize("n", range(2, 10))
def test_basis_is_orthonormal(n):
    b = SpectralBasis(n)
    assert len(b) == n
    assert np.allclose(b.vectors @ b.vectors.T / n, np.eye(n), atol=1e-12)


@pytest.mark.parametrize("n", [3, 6, 9])
def test_basis_diagonalises_laplacian(n):
    b = SpectralBasis(n)
    for row, beta in zip(b.vectors, b.eigenvalues):
        assert np.allclose(discrete_laplacian(row), -beta * row, atol=1e-9 * n * n)


@pytest.mark.parametrize("n", range(3, 9))
@pytest.mark.parametrize("t", [0.0, 0.01, 0.1, 1.0])
def test_semigroup_matches_expm(n, t):
    b = SpectralBasis(n)
    assert np.max(np.abs(semigroup_apply(b, t, np.eye(n)).T - semigroup_matrix_oracle(n, t))) <= 1e-10


vectors = st.integers(2, 64).flatmap(
    lambda n: st.lists(st.floats(-10, 10), min_size=n, max_size=n).map(np.array))
times = st.floats(0, 2)


@settings(max_examples=50, deadline=None)
@given(vectors, times)
def test_contraction(g, t):
    out = semigroup_apply(SpectralBasis(len(g)), t, g)
    assert np.max(np.abs(out)) <= np.max(np.abs(g)) + 1e-9


@settings(max_examples=50, deadline=None)
@given(vectors, times, times)
def test_semigroup_law(g, s, t):
    b = SpectralBasis(len(g))
    lhs = semigroup_apply(b, s, semigroup_apply(b, t, g))
    assert np.allclose(lhs, semigroup_apply(b, s + t, g), atol=1e-9)


@settings(max_examples=50, deadline=None)
@given(vectors, times)
def test_commutes_with_laplacian(g, t):
    n = len(g)
    b = SpectralBasis(n)
    a = laplacian_matrix(n)
    assert np.allclose(a @ semigroup_apply(b, t, g), semigroup_apply(b, t, a @ g), atol=1e-8 * n * n)


@settings(max_examples=30, deadline=None)
@given(vectors, times)
def test_mass_and_positivity(g, t):
    b = SpectralBasis(len(g))
    out = semigroup_apply(b, t, np.abs(g))
    assert out.sum() == pytest.approx(np.abs(g).sum(), abs=1e-8)
    assert np.all(out >= -1e-9)


def test_errors():
    b = SpectralBasis(4)
    with pytest.raises(NegativeTime):
        semigroup_apply(b, -0.1, np.ones(4))
    with pytest.raises(TooLarge):
        semigroup_matrix_oracle(9, 0.1)
    with pytest.raises(QuadratureBudget):
        duhamel_deterministic(b, np.ones(4), lambda s: np.ones(4), 0.1, panels=10**6, nodes=4)
    with pytest.raises(IncompletePath):
        duhamel_stochastic_convolution(b, [0.1, 0.2], np.ones((2, 4)), 0.3)


def test_duhamel_constant_forcing_closed_form(rng):
    n, t = 6, 0.05
    b = SpectralBasis(n)
    x0 = rng.normal(size=n)
    f = rng.normal(size=n)
    a = laplacian_matrix(n)
    # x' = A x + f  =>  x(t) = e^{tA} x0 + A^+ (e^{tA} - I) f  on mean-zero part, plus t mean(f)
    fm = f - f.mean()
    ea = semigroup_matrix_oracle(n, t)
    expected = ea @ x0 + np.linalg.pinv(a) @ (ea - np.eye(n)) @ fm + t * f.mean()
    got = duhamel_deterministic(b, x0, lambda s: f, t)
    assert np.allclose(got, expected, atol=1e-12)


def test_duhamel_time_dependent_forcing_converges(rng):
    n, t = 5, 0.2
    b = SpectralBasis(n)
    f = rng.normal(size=n)
    forcing = lambda s: np.cos(7 * s) * f
    coarse = duhamel_deterministic(b, np.zeros(n), forcing, t, panels=64)
    fine = duhamel_deterministic(b, np.zeros(n), forcing, t, panels=512)
    assert np.allclose(coarse, fine, atol=1e-10)


def _random_path(rng, n, m, t):
    times = np.concatenate([[0.0], np.sort(rng.uniform(0, t, m))])
    jumps = np.vstack([np.zeros(n), rng.normal(size=(m, n)) * 0.1])
    drifts = rng.normal(size=(m + 1, n))
    return times, jumps, drifts


def test_convolution_routes_agree(rng):
    n, t = 6, 0.1
    b = SpectralBasis(n)
    times, jumps, drifts = _random_path(rng, n, 40, t)
    before, after, end = stochastic_convolution_path(b, times, jumps, drifts, t)
    # route 2: integration by parts on the piecewise-linear Z
    z = np.zeros(n)
    values = []
    for i in range(len(times)):
        if i > 0:
            z = z + drifts[i - 1] * (times[i] - times[i - 1])
        z = z + jumps[i]
        values.append(z.copy())
    values = np.array(values)
    direct = duhamel_stochastic_convolution(b, times, values, t, slopes=drifts)
    assert np.allclose(direct, end, atol=1e-12)
    mid = times[20]
    direct_mid = duhamel_stochastic_convolution(b, times[:21], values[:21], mid, slopes=drifts[:21])
    assert np.allclose(direct_mid, after[20], atol=1e-12)


def test_pure_jump_convolution_is_semigroup_sum(rng):
    n, t = 4, 0.3
    b = SpectralBasis(n)
    times = np.array([0.0, 0.1, 0.25])
    jumps = np.vstack([np.zeros(n), rng.normal(size=(2, n))])
    values = np.cumsum(jumps, axis=0)
    got = duhamel_stochastic_convolution(b, times, values, t)
    expected = sum(semigroup_apply(b, t - s, j) for s, j in zip(times[1:], jumps[1:]))
    assert np.allclose(got, expected, atol=1e-12)
