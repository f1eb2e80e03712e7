import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import optimize
from scipy.integrate import quad

from cauchy_em.datasets import load_fixture
from cauchy_em.errors import InsufficientDataError
from cauchy_em.init_gof import ad_stat, gof_report, ks_stat, quantile_init
from cauchy_em.stable_core import S0, S1, UserParams, cdf_eval, convert_form, sample_cauchy

STD = UserParams(0.0, 1.0, 0.0)


def _quantile(p, params):
    return optimize.brentq(lambda y: cdf_eval(y, params) - p, -1e4, 1e4, xtol=1e-13)


# --- quantile initialisation ---------------------------------------------


def test_quantile_init_on_exact_symmetric_quantiles():
    y = np.tan(np.pi * (np.arange(1, 2000) / 2000 - 0.5))
    p = quantile_init(y)
    assert p.form == S1
    assert abs(p.beta) < 1e-12 and abs(p.mu) < 1e-12
    assert p.sigma == pytest.approx(1.0, abs=2e-3)


def test_quantile_init_recovers_skewed_quantile_grid():
    truth = UserParams(0.5, 2.0, 1.0, S0)
    y = [_quantile(p, truth) for p in np.linspace(0.005, 0.995, 199)]
    est = convert_form(quantile_init(y), S0)
    assert est.beta == pytest.approx(0.5, abs=0.02)
    assert est.sigma == pytest.approx(2.0, rel=0.02)
    assert est.mu == pytest.approx(1.0, abs=0.05)


def test_quantile_init_shift_equivariance():
    y = sample_cauchy(UserParams(0.6, 1.5, 0.0), 1, 500)
    a, b = quantile_init(y), quantile_init(y + 7.0)
    assert b.beta == a.beta and b.sigma == pytest.approx(a.sigma, rel=1e-12)
    assert b.mu == pytest.approx(a.mu + 7.0, abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.1, 20.0), st.sampled_from([1.0, -1.0]), st.floats(-100, 100))
def test_quantile_init_affine_equivariance_in_s0(scale, sign, shift):
    y = sample_cauchy(UserParams(0.4, 1.0, 0.0), 2, 300)
    a = convert_form(quantile_init(y), S0)
    b = convert_form(quantile_init(sign * scale * y + shift), S0)
    assert b.beta == pytest.approx(sign * a.beta, abs=1e-12)
    assert b.sigma == pytest.approx(scale * a.sigma, rel=1e-9)
    assert b.mu == pytest.approx(sign * scale * a.mu + shift, abs=1e-8 * (1 + scale * abs(a.mu) + abs(shift)))


@pytest.mark.slow
def test_quantile_init_lands_in_basin():
    hits = 0
    for seed in range(100):
        p = quantile_init(sample_cauchy(UserParams(0.75, 2.0, 0.0), seed, 10_000))
        hits += p.beta > 0 and 1 < p.sigma < 4
    assert hits >= 95


def test_quantile_init_clamps_beta_and_rejects_few_values():
    # lognormal data are more skewed than any alpha = 1 law
    y = np.exp(2 * np.random.default_rng(3).standard_normal(2000))
    assert quantile_init(y).beta == 0.9
    assert quantile_init(-y).beta == -0.9
    with pytest.raises(InsufficientDataError):
        quantile_init([1, 1, 2, 2, 3, 3, 4, 4])


# --- goodness of fit -----------------------------------------------------


def test_ks_examples():
    assert ks_stat([0.0], STD) == 0.5
    n = 40
    y = np.tan(np.pi * ((np.arange(1, n + 1) - 0.5) / n - 0.5))
    assert ks_stat(y, STD) <= 1 / n + 1e-12


def test_ks_location_scale_invariance():
    y = sample_cauchy(UserParams(0.0, 1.3, 0.2), 5, 200)
    a = ks_stat(y, UserParams(0.0, 1.0, 0.0))
    b = ks_stat(3.0 * y - 4.0, UserParams(0.0, 3.0, -4.0))
    assert b == pytest.approx(a, abs=1e-12)


def test_ad_hand_values(monkeypatch):
    import cauchy_em.init_gof as gof

    # u = i / (n + 1), n = 5; the value below was checked against the integral
    # definition n * int (F_n - u)^2 / (u (1 - u)) du by adaptive quadrature
    monkeypatch.setattr(gof, "model_cdf", lambda y, params: np.asarray(y, dtype=float))
    assert ad_stat(np.arange(1, 6) / 6, None) == pytest.approx(0.21299280237394, abs=1e-12)
    u = np.sort(np.random.default_rng(0).uniform(size=7))
    Fn = lambda t: np.searchsorted(u, t, side="right") / 7
    pts = [0.0, *u, 1.0]
    integral = 7 * sum(quad(lambda t: (Fn(t) - t) ** 2 / (t * (1 - t)), a, b, limit=200)[0] for a, b in zip(pts[:-1], pts[1:]))
    assert ad_stat(u, None) == pytest.approx(integral, rel=1e-8)


def test_ad_single_point_at_median():
    assert ad_stat([0.0], STD) == pytest.approx(-1 - 2 * math.log(0.5), abs=1e-12)
    assert ad_stat([0.0], STD) == pytest.approx(0.386, abs=1e-3)


def test_ad_clamp_flag():
    far = UserParams(1.0, 1.0, 0.0)
    rep = gof_report([-50.0, 0.0, 3.0], far)
    assert rep.ad_clamped and math.isfinite(rep.ad)
    assert rep.ad >= -rep.n
    assert not gof_report([0.0, 3.0], far).ad_clamped


def test_reference_earthquake_gof_values():
    # reference estimates for the earthquake data reproduce their K-S and A-D values when read in S0
    y = load_fixture("earthquake")
    p = UserParams(0.9167, 11.5981, 16.9498, S0)
    rep = gof_report(y, p)
    assert rep.n == 182
    assert rep.ks == pytest.approx(0.0397, abs=2e-4)
    assert rep.ad == pytest.approx(0.6980, abs=2e-3)
    assert 0 <= rep.ks <= 1
