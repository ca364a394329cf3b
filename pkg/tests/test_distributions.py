import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from scipy import stats

from lifecat.distributions import (
    BetaParams,
    DiscreteDist,
    DomainError,
    GevParams,
    GpdParams,
    NegBinParams,
    PoissonDist,
    ShiftedGpd,
    Truncated,
    gev_cdf,
    gpd_cdf,
    gpd_quantile,
    truncated_cdf,
    truncated_quantile,
)

shapes = st.floats(-0.8, 2.0).filter(lambda x: abs(x) > 1e-6)
scales = st.floats(0.1, 50.0)
probs = st.floats(1e-6, 1 - 1e-6)


@given(shapes, scales, probs)
def test_gpd_quantile_inverts_cdf(xi, beta, p):
    g = GpdParams(xi, beta)
    assert gpd_cdf(gpd_quantile(p, g), g) == pytest.approx(p, abs=1e-9)


@given(shapes, scales, st.floats(0, 1))
def test_gpd_cdf_matches_scipy(xi, beta, frac):
    g = GpdParams(xi, beta)
    x = frac * (g.upper_endpoint if xi < 0 else 500.0)
    ref = stats.genpareto.cdf(x, xi, scale=beta)
    assert gpd_cdf(x, GpdParams(xi, beta)) == pytest.approx(ref, abs=1e-10)


def test_gpd_exponential_limit():
    g0 = GpdParams(0.0, 3.0)
    g_small = GpdParams(1e-10, 3.0)
    x = np.array([0.5, 2.0, 10.0])
    np.testing.assert_allclose(gpd_cdf(x, g0), 1 - np.exp(-x / 3.0), rtol=1e-12)
    np.testing.assert_allclose(gpd_cdf(x, g_small), gpd_cdf(x, g0), rtol=1e-9)


def test_gpd_short_tail_endpoint():
    g = GpdParams(-0.5, 2.0)
    assert g.upper_endpoint == pytest.approx(4.0)
    assert gpd_cdf(4.0, g) == pytest.approx(1.0)
    assert gpd_cdf(0.0, g) == 0.0
    for outside in (-1.0, 10.0):
        with pytest.raises(DomainError):
            gpd_cdf(outside, g)


def test_gpd_rejects_bad_scale():
    with pytest.raises(DomainError):
        GpdParams(0.5, 0.0)
    with pytest.raises(DomainError):
        gpd_quantile(1.5, GpdParams(0.5, 1.0))


@given(st.floats(-0.8, 0.8), st.floats(-5, 5), st.floats(0.1, 5), st.floats(-20, 40))
def test_gev_cdf_matches_scipy(xi, mu, sigma, x):
    assume(1 + xi * (x - mu) / sigma > 1e-9)
    # scipy's genextreme uses the opposite sign convention for the shape
    ref = stats.genextreme.cdf(x, -xi, loc=mu, scale=sigma)
    assert gev_cdf(x, GevParams(xi, mu, sigma)) == pytest.approx(ref, abs=1e-9)


def test_gev_gumbel_branch():
    x = 1.3
    assert gev_cdf(x, GevParams(0.0, 0.0, 1.0)) == pytest.approx(math.exp(-math.exp(-x)))


def test_negbin_mean_uses_failure_count_convention():
    nb = NegBinParams(1.15, 0.182)
    assert nb.mean == pytest.approx(1.15 * 0.818 / 0.182)
    assert nb.cdf(5) == pytest.approx(stats.nbinom.cdf(5, 1.15, 0.182))


def test_truncated_negbin_support_and_mass():
    t = Truncated(NegBinParams(1.15, 0.182), 3, 20)
    k = np.arange(4, 21)
    pmf = stats.nbinom.pmf(k, 1.15, 0.182)
    ref = np.cumsum(pmf) / pmf.sum()
    np.testing.assert_allclose(truncated_cdf(k, t), ref, atol=1e-12)
    assert truncated_cdf(3, t) == 0.0
    assert truncated_cdf(20, t) == pytest.approx(1.0)
    assert truncated_quantile(1e-12, t) == 4
    assert truncated_quantile(1.0, t) == 20


@given(st.floats(0, 1))
def test_truncated_quantile_in_range(p):
    t = Truncated(NegBinParams(1.15, 0.182), 3, 20)
    q = truncated_quantile(p, t)
    assert 3 <= q <= 20
    if p > 0:
        assert q >= 4
        assert truncated_cdf(q, t) >= p - 1e-12


def test_truncated_continuous_base():
    t = Truncated(GpdParams(0.5, 2.0), 1.0, 5.0)
    g = GpdParams(0.5, 2.0)
    x = 3.0
    ref = (g.cdf(x) - g.cdf(1.0)) / (g.cdf(5.0) - g.cdf(1.0))
    assert t.cdf(x) == pytest.approx(ref)
    assert t.ppf(t.cdf(x)) == pytest.approx(x)


def test_truncation_validates():
    with pytest.raises(DomainError):
        Truncated(NegBinParams(1, 0.5), 5, 5)
    with pytest.raises(DomainError):
        truncated_quantile(-0.1, Truncated(NegBinParams(1, 0.5), 0, 5))


def test_discrete_dist():
    d = DiscreteDist((1.0, 2.0, 3.0), (0.43, 0.32, 0.25))
    assert d.cdf(0.5) == 0.0
    assert d.cdf(1) == pytest.approx(0.43)
    assert d.cdf(2.5) == pytest.approx(0.75)
    assert d.ppf(0.43) == 1.0
    assert d.ppf(0.4300001) == 2.0
    with pytest.raises(DomainError):
        DiscreteDist((1.0, 2.0), (0.5, 0.6))


def test_discrete_sampling_frequencies(rng):
    d = DiscreteDist((1.0, 2.0, 3.0), (0.43, 0.32, 0.25))
    x = d.sample(rng, 200_000)
    freq = np.array([(x == v).mean() for v in (1, 2, 3)])
    np.testing.assert_allclose(freq, [0.43, 0.32, 0.25], atol=0.005)


def test_shifted_gpd_draws_exceed_threshold(rng):
    s = ShiftedGpd(20, GpdParams(0.938, 12.9))
    x = s.sample(rng, 10_000)
    assert x.min() >= 21
    assert np.all(x == np.floor(x))


def test_beta_from_mean():
    b = BetaParams.from_mean(0.3, 5.0)
    assert b.mean == pytest.approx(0.3)
    assert b.alpha + b.beta == pytest.approx(5.0)


def test_poisson():
    p = PoissonDist(2.28)
    assert p.cdf(0) == pytest.approx(math.exp(-2.28))


@given(shapes, scales)
def test_gpd_cdf_monotone_and_bounded_on_grid(xi, beta):
    g = GpdParams(xi, beta)
    top = g.upper_endpoint if xi < 0 else g.ppf(0.999)
    c = gpd_cdf(np.linspace(0, top, 1000), g)
    assert np.all(np.diff(c) >= 0)
    assert c.min() >= 0 and c.max() <= 1


def test_truncated_count_cdf_monotone_on_grid():
    t = Truncated(NegBinParams(1.15, 0.182), 3, 20)
    c = truncated_cdf(np.linspace(0, 25, 1000), t)
    assert np.all(np.diff(c) >= 0)
    assert c[0] == 0 and c[-1] == pytest.approx(1.0)


def test_gev_outside_support_raises():
    with pytest.raises(DomainError):
        gev_cdf(-10.0, GevParams(0.5, 0.0, 1.0))
