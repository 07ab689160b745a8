import math

import numpy as np
import pytest
from scipy import stats

from pretest_liu import chi2_kernels as k2
from pretest_liu.errors import DomainError

from oracles import cdf_quad, moment_quad


def test_cdf_trivial():
    assert k2.ncx2_cdf(2, 0.0, 2 * math.log(2)) == pytest.approx(0.5, abs=1e-15)
    for v in (1, 4, 9):
        assert k2.ncx2_cdf(v, 3.0, 0.0) == 0.0
    assert k2.ncx2_cdf(3, 4.0, 1e4) == pytest.approx(1.0, abs=1e-14)


def test_cdf_quadrature_point():
    assert k2.NoncentralChi2(3, 4.0).cdf(5.0) == pytest.approx(cdf_quad(3, 4.0, 5.0), abs=1e-10)


@pytest.mark.parametrize("v", range(1, 10))
@pytest.mark.parametrize("nc", [0.0, 1.0, 4.0, 16.0])
def test_cdf_quadrature_grid(v, nc):
    xs = [0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 30.0]
    got = k2.ncx2_cdf(v, nc, xs)
    want = [cdf_quad(v, nc, x) for x in xs]
    np.testing.assert_allclose(got, want, atol=1e-9, rtol=0)


def test_cdf_monotone():
    xs = np.linspace(0, 40, 81)
    c = k2.ncx2_cdf(5, 3.0, xs)
    assert np.all(np.diff(c) >= 0)
    assert all(k2.ncx2_cdf(5, a, 6.0) >= k2.ncx2_cdf(5, b, 6.0) for a, b in [(0, 1), (1, 4), (4, 16)])


def test_poisson_weights_sum_and_cap():
    for nc in (0.0, 1.0, 50.0):
        assert k2.poisson_weights(nc).sum() == pytest.approx(1.0, abs=1e-13)
    # at large rates the k log(lam) term costs ~1e-12 relative accuracy per weight
    w = k2.poisson_weights(2000.0)
    assert w.sum() == pytest.approx(1.0, abs=1e-11)
    assert w.size > 1000
    with pytest.warns(RuntimeWarning):
        k2.poisson_weights(40_000.0)


def test_quantile_examples():
    assert k2.quantile(1, 0.5) == pytest.approx(stats.norm.ppf(0.75) ** 2, rel=1e-10)
    assert k2.quantile(1, 0.5) == pytest.approx(0.4549, abs=1e-4)
    assert k2.quantile(2, math.exp(-1)) == pytest.approx(2.0, abs=1e-12)
    assert k2.quantile(3, 0.05) == pytest.approx(7.8147, abs=1e-4)
    for q in (1, 3, 7):
        for a in (0.01, 0.25):
            x = k2.quantile(q, a)
            assert 1 - k2.central_cdf(q, x) == pytest.approx(a, abs=1e-10)
    with pytest.raises(DomainError):
        k2.quantile(3, 0.0)


def test_quantile_monte_carlo():
    draws = np.random.default_rng(3).chisquare(3, 1_000_000)
    assert np.quantile(draws, 0.95) == pytest.approx(k2.quantile(3, 0.05), abs=0.03)


@pytest.mark.parametrize("v", range(3, 10))
def test_central_closed_forms(v):
    assert k2.inv_moment(1, v, 0.0) == pytest.approx(1 / (v - 2), abs=1e-12)
    if v > 4:
        assert k2.inv_moment(2, v, 0.0) == pytest.approx(1 / ((v - 2) * (v - 4)), abs=1e-12)


def test_moment_examples():
    assert k2.inv_moment(1, 5, 0.0) == pytest.approx(1 / 3, abs=1e-15)
    assert k2.inv_moment(2, 7, 0.0) == pytest.approx(1 / 15, abs=1e-15)
    with pytest.raises(DomainError):
        k2.inv_moment(2, 4, 1.0)
    with pytest.raises(DomainError):
        k2.inv_moment(3, 9, 1.0)


@pytest.mark.parametrize("v", [5, 6, 7, 9])
@pytest.mark.parametrize("nc", [0.0, 1.0, 4.0, 16.0])
def test_moments_vs_quadrature(v, nc):
    assert k2.inv_moment(1, v, nc) == pytest.approx(moment_quad(v, nc, 1), abs=1e-10)
    assert k2.inv_moment(2, v, nc) == pytest.approx(moment_quad(v, nc, 2), abs=1e-10)
    for cut in (1.0, 3.0, 8.0):
        assert k2.inv_moment_truncated(1, v, nc, cut) == pytest.approx(moment_quad(v, nc, 1, cut), abs=1e-10)
        assert k2.inv_moment_truncated(2, v, nc, cut) == pytest.approx(moment_quad(v, nc, 2, cut), abs=1e-10)


def test_truncated_limits():
    assert k2.inv_moment_truncated(1, 5, 1.0, 0.0) == 0.0
    assert k2.inv_moment_truncated(1, 5, 1.0, 1e9) == pytest.approx(k2.inv_moment(1, 5, 1.0), abs=1e-12)
    full = k2.inv_moment(2, 7, 3.0)
    lo = k2.inv_moment_truncated(2, 7, 3.0, 4.0)
    tail = moment_quad(7, 3.0, 2) - moment_quad(7, 3.0, 2, 4.0)
    assert lo + tail == pytest.approx(full, abs=1e-12)
    assert lo <= full


def test_moment_strictly_decreasing():
    vals = [[k2.inv_moment(1, v, nc) for nc in (0, 1, 4, 16)] for v in (3, 5, 7, 9)]
    vals = np.array(vals)
    assert np.all(np.diff(vals, axis=0) < 0) and np.all(np.diff(vals, axis=1) < 0)


def test_indicator_shrink():
    assert k2.expect_indicator_shrink(5, 2.0, 0.0) == 0.0
    want = k2.ncx2_cdf(5, 0.0, 3.0) - 3 * moment_quad(5, 0.0, 1, 3.0)
    assert k2.expect_indicator_shrink(5, 0.0, 3.0) == pytest.approx(want, abs=1e-10)


def _mc_check(stat_fn, expected, draws):
    vals = stat_fn(draws)
    se = vals.std(ddof=1) / math.sqrt(vals.size)
    assert abs(vals.mean() - expected) < 3 * se, (vals.mean(), expected, se)


def test_moments_monte_carlo():
    rng = np.random.default_rng(2024)
    x = rng.noncentral_chisquare(5, 2.0, 10_000_000)
    _mc_check(lambda t: 1 / t, k2.inv_moment(1, 5, 2.0), x)
    x = rng.noncentral_chisquare(5, 1.0, 2_000_000)
    _mc_check(lambda t: np.where(t < 3, 1 / t, 0.0), k2.inv_moment_truncated(1, 5, 1.0, 3.0), x)
    x = rng.noncentral_chisquare(5, 1.0, 2_000_000)
    c = 12.0
    e = k2.expect_indicator_shrink(5, 1.0, c)
    assert e < 0
    _mc_check(lambda t: (1 - c / t) * (t < c), e, x)


@pytest.mark.parametrize("mean", [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, 0.5, 0.0, 0.0]])
@pytest.mark.parametrize("phi", k2.PHI_FUNCTIONS)
def test_lemma_validator(mean, phi):
    rep = k2.lemma_a1_check(mean, phi=phi, reps=200_000, seed=7)
    assert rep.max_abs_z < 4.5
    if not any(mean):
        np.testing.assert_array_equal(rep.expected_first, 0.0)


def test_lemma_validator_rejects_bad_input():
    with pytest.raises(DomainError):
        k2.lemma_a1_check([1.0, 0.0], covariance=[[2, 0], [0, 1]])
    with pytest.raises(DomainError):
        k2.lemma_a1_check([1.0, 0.0], reps=1000)
    with pytest.raises(DomainError):
        k2.lemma_a1_check([1.0, 0.0], phi="square", reps=100_000)
