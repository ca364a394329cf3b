import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from lifecat.distributions import DomainError, GpdParams
from lifecat.fitting import ExcessSample, fit_gpd
from lifecat.riskmeasures import (
    TailModel,
    es,
    return_level,
    return_level_ci,
    return_level_table,
    return_period,
    round_sig,
    var,
)

REFERENCE = TailModel(20.0, GpdParams(0.938, 12.9), 0.15)


# frozen from an independent closed-form evaluation (mpmath, 30 digits)
@pytest.mark.parametrize(
    "alpha,v,e",
    [
        (0.90, 25.014112, 308.937286),
        (0.99, 168.948136, 2630.453810),
        (0.995, 317.960990, 5033.886939),
        (0.999, 1416.801255, 22757.117014),
    ],
)
def test_var_es_frozen(alpha, v, e):
    assert var(alpha, REFERENCE) == pytest.approx(v, rel=1e-7)
    assert es(alpha, REFERENCE) == pytest.approx(e, rel=1e-7)


@pytest.mark.parametrize("t,printed", [(10, 25), (100, 170), (200, 320), (1000, 1400)])
def test_return_levels_round_to_reference(t, printed):
    assert round_sig(return_level(t, REFERENCE)) == printed


@pytest.mark.parametrize("alpha,printed", [(0.9, 310), (0.99, 2600), (0.995, 5000), (0.999, 23000)])
def test_es_rounds_to_reference(alpha, printed):
    assert round_sig(es(alpha, REFERENCE)) == printed


def test_threshold_quantile():
    pbar = 1 - math.exp(-0.15)
    assert var(1 - pbar, REFERENCE) == pytest.approx(20.0)
    assert return_level(1 / pbar, REFERENCE) == pytest.approx(20.0)
    assert return_period(20.0, REFERENCE) == pytest.approx(1 / pbar)
    assert return_period(20.0, REFERENCE) == pytest.approx(7.18, abs=0.01)


def test_domain_errors():
    with pytest.raises(DomainError):
        var(0.5, REFERENCE)
    with pytest.raises(DomainError, match="threshold"):
        return_level(2.0, REFERENCE)
    with pytest.raises(DomainError):
        return_period(10.0, REFERENCE)
    with pytest.raises(DomainError, match="does not exist"):
        es(0.99, TailModel(20.0, GpdParams(1.0, 12.9), 0.15))
    with pytest.raises(DomainError):
        TailModel(20.0, GpdParams(0.5, 1.0), 0.0)


def test_es_diverges_toward_unit_shape():
    vals = [es(0.99, TailModel(20.0, GpdParams(xi, 12.9), 0.15)) for xi in (0.9, 0.99, 0.999)]
    assert vals[0] < vals[1] < vals[2]
    assert vals[2] > 1e5


def test_return_period_inverts_level():
    assert return_period(170.0, REFERENCE) == pytest.approx(100.0, rel=0.02)
    for t in (10, 100, 1000):
        assert return_period(return_level(t, REFERENCE), REFERENCE) == pytest.approx(t, rel=1e-8)


@given(st.floats(-0.4, 0.95), st.floats(0.5, 30), st.floats(0.01, 2.0), st.floats(0, 1))
def test_var_monotone_and_es_above(xi, beta, lam, s):
    m = TailModel(5.0, GpdParams(xi, beta), lam)
    lo = 1 - m.p_exceed
    a1 = lo + (1 - lo) * (0.01 + 0.5 * s)
    a2 = a1 + (1 - a1) * 0.5
    assert var(a2, m) > var(a1, m)
    assert es(a1, m) > var(a1, m)


@given(st.floats(8, 1e5))
def test_level_period_round_trip_grid(t):
    assert return_period(return_level(t, REFERENCE), REFERENCE) == pytest.approx(t, rel=1e-8)


def test_shape_continuity_at_zero():
    a = var(0.999, TailModel(20.0, GpdParams(1e-8, 12.9), 0.15))
    b = var(0.999, TailModel(20.0, GpdParams(0.0, 12.9), 0.15))
    assert a == pytest.approx(b, rel=1e-5)


def annual_max_level(t, lam, xi, beta, u):
    # exact annual-maximum quantile: 1 - exp(-lam * Gbar(x - u)) = 1/t
    gbar = -math.log1p(-1 / t) / lam
    return u + beta / xi * (gbar**-xi - 1)


def test_return_level_against_simulated_annual_maxima():
    rng = np.random.default_rng(2024)
    years = 10_000_000
    k = rng.poisson(0.15, years)
    yr = np.repeat(np.arange(years), k)
    sizes = 20.0 + stats.genpareto.rvs(0.938, scale=12.9, size=yr.size, random_state=rng)
    annual_max = np.zeros(years)
    np.maximum.at(annual_max, yr, sizes)
    for t in (10, 100):
        emp = np.quantile(annual_max, 1 - 1 / t)
        assert emp == pytest.approx(annual_max_level(t, 0.15, 0.938, 12.9, 20.0), rel=0.02)
    # the closed form uses pbar = 1 - exp(-lam) as the annual exceedance
    # probability, which is close to the annual-maximum law only while
    # 1/t is not small next to pbar
    assert np.quantile(annual_max, 0.9) == pytest.approx(return_level(10, REFERENCE), rel=0.03)
    gap = np.quantile(annual_max, 0.99) / return_level(100, REFERENCE)
    assert gap == pytest.approx(annual_max_level(100, 0.15, 0.938, 12.9, 20.0) / return_level(100, REFERENCE), rel=0.02)


def analytic_gradient(t, lam, xi, beta):
    pbar = 1 - math.exp(-lam)
    r = (1 / t) / pbar
    d_beta = (r**-xi - 1) / xi
    d_xi = -beta / xi**2 * (r**-xi - 1) - beta / xi * math.log(r) * r**-xi
    dr_dlam = -(1 / t) * math.exp(-lam) / pbar**2
    d_lam = -beta * r ** (-xi - 1) * dr_dlam
    return np.array([d_lam, d_xi, d_beta])


def test_delta_interval_matches_analytic_gradient():
    cov = np.array([[0.0015, 0, 0], [0, 0.15, -0.8], [0, -0.8, 25.0]])
    m = TailModel(20.0, GpdParams(0.938, 12.9), 0.15, cov)
    for t in (10, 100, 1000):
        g = analytic_gradient(t, 0.15, 0.938, 12.9)
        se = math.sqrt(g @ cov @ g)
        ci = return_level_ci(t, m, 0.95, "delta")
        z = stats.norm.ppf(0.975)
        assert ci.upper - ci.estimate == pytest.approx(z * se, rel=1e-5)


def test_delta_interval_can_go_negative():
    # marginal standard errors of the size of the reference fit
    sx, sb = 0.383, 5.03
    m = TailModel(20.0, GpdParams(0.938, 12.9), 0.15, np.diag([0.0015, sx**2, sb**2]))
    assert return_level_ci(100, m, 0.95, "delta").lower < 0


def test_profile_interval_for_return_level():
    rng = np.random.default_rng(5)
    y = stats.genpareto.rvs(0.6, scale=10, size=60, random_state=rng)
    s = ExcessSample(20.0, y, 100.0)
    fit = fit_gpd(s)
    m = TailModel(20.0, GpdParams(fit["xi"], fit["beta"]), 0.6)
    ci = return_level_ci(100, m, 0.95, "profile", s)
    assert 20.0 < ci.lower < ci.estimate < ci.upper
    assert ci.method == "profile"


def test_return_level_table_rows():
    rows = return_level_table([10, 100], REFERENCE)
    assert [r["method"] for r in rows] == ["point", "point"]
    m = TailModel(20.0, GpdParams(0.938, 12.9), 0.15, np.eye(3) * 0.01)
    rows = return_level_table([10, 100], m)
    assert [r["method"] for r in rows] == ["point", "delta", "point", "delta"]


def test_round_sig():
    assert round_sig(1416.8) == 1400
    assert round_sig(22756.7) == 23000
    assert round_sig(0.0) == 0.0
    assert round_sig(-168.9) == -170
