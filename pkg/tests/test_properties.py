import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from fracburgers.degiorgi import truncate
from fracburgers.fields import fft, inner, make_grid, norms, sample_band_limited
from fracburgers.fracops import frac_laplacian, poisson_semigroup

seeds = st.integers(0, 2**32 - 1)
alphas = st.floats(0.05, 1.0)


def field(seed, dim=1, n=32, kmax=10):
    g = make_grid(dim, n, 2 * np.pi * (1 + seed % 3))
    return sample_band_limited(g, np.random.Generator(np.random.Philox(seed)), kmax=kmax)


@settings(max_examples=40, deadline=None)
@given(seeds, st.sampled_from([1, 2]))
def test_parseval(seed, dim):
    f = field(seed, dim, 16, 5)
    c = fft(f.values)
    assert np.isclose(norms(f).l2 ** 2, f.grid.volume * np.sum(np.abs(c) ** 2), rtol=1e-12)


@settings(max_examples=40, deadline=None)
@given(seeds, seeds, alphas)
def test_frac_laplacian_self_adjoint(s1, s2, alpha):
    f = field(s1)
    g = sample_band_limited(f.grid, np.random.Generator(np.random.Philox(s2)), kmax=10)
    lhs = inner(frac_laplacian(f, alpha), g)
    rhs = inner(f, frac_laplacian(g, alpha))
    assert np.isclose(lhs, rhs, rtol=1e-10, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(seeds, alphas)
def test_frac_laplacian_nonnegative(seed, alpha):
    f = field(seed)
    assert inner(f, frac_laplacian(f, alpha)) >= -1e-12


@settings(max_examples=40, deadline=None)
@given(seeds, st.floats(0, 3), st.floats(0, 3))
def test_poisson_semigroup(seed, a, b):
    f = field(seed)
    lhs = poisson_semigroup(poisson_semigroup(f, a), b).values
    assert np.allclose(lhs, poisson_semigroup(f, a + b).values, atol=1e-12)
    assert np.max(lhs) <= np.max(f.values) + 1e-12


@settings(max_examples=60, deadline=None)
@given(seeds, st.floats(-2, 2), st.floats(0, 2))
def test_truncate_monotone_in_level(seed, level, gap):
    f = field(seed)
    lo, hi = truncate(f, level).values, truncate(f, level + gap).values
    assert np.all(hi <= lo) and np.all(hi >= 0)
