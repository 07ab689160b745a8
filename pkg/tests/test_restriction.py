import numpy as np
import pytest
from scipy import stats

from pretest_liu.errors import DomainError, ShapeError, SingularityError
from pretest_liu.glm_core import fit_mle
from pretest_liu.restriction import (
    LinearRestriction,
    fit_rmle,
    quadratic_form,
    restricted_estimate,
    test as wald_test,
    wald_statistic,
)

from conftest import logistic_data


@pytest.fixture(scope="module")
def model5():
    return fit_mle(logistic_data(150, 4, seed=5))


def restriction_q2(m=4, seed=5):
    rng = np.random.default_rng(seed)
    return LinearRestriction(rng.standard_normal((2, m)), rng.standard_normal(2) * 0.1)


def kkt_oracle(b, C, H, h):
    # minimize (x-b)'C(x-b) s.t. Hx = h via the full KKT system
    m, q = C.shape[0], H.shape[0]
    K = np.block([[2 * C, H.T], [H, np.zeros((q, q))]])
    rhs = np.concatenate([2 * C @ b, h])
    return np.linalg.solve(K, rhs)[:m]


def test_rmle_matches_kkt(model5):
    r = restriction_q2()
    got = fit_rmle(model5, r)
    want = kkt_oracle(model5.beta_mle, model5.info_matrix, r.H, r.h)
    np.testing.assert_allclose(got, want, atol=1e-8)
    np.testing.assert_allclose(r.H @ got, r.h, atol=1e-8)


def test_full_restriction_collapses(model5):
    r = LinearRestriction(np.eye(4), np.zeros(4))
    np.testing.assert_allclose(fit_rmle(model5, r), 0.0, atol=1e-12)


def test_satisfied_restriction_is_identity(model5):
    H = restriction_q2().H
    r = LinearRestriction(H, H @ model5.beta_mle)
    np.testing.assert_allclose(fit_rmle(model5, r), model5.beta_mle, atol=1e-12)
    assert wald_statistic(model5, r) == pytest.approx(0.0, abs=1e-18)
    assert not wald_test(model5, r).reject


def test_projection_idempotent(model5):
    r = restriction_q2()
    once = fit_rmle(model5, r)
    twice = restricted_estimate(once, model5.info_inverse, r)
    np.testing.assert_allclose(twice, once, atol=1e-12)


def test_wald_forms_agree(model5):
    r = restriction_q2()
    resid = r.H @ model5.beta_mle - r.h
    direct = resid @ np.linalg.inv(r.H @ np.linalg.inv(model5.info_matrix) @ r.H.T) @ resid
    assert wald_statistic(model5, r) == pytest.approx(direct, rel=1e-10)
    assert wald_statistic(model5, r, n=17) == pytest.approx(direct, rel=1e-10)
    assert float(quadratic_form(model5.beta_mle, model5.info_inverse, r)) == pytest.approx(direct, rel=1e-10)


def test_scalar_wald(model5):
    r = LinearRestriction.zero_coefficients(4, [1])
    want = model5.beta_mle[1] ** 2 / model5.info_inverse[1, 1]
    assert wald_statistic(model5, r) == pytest.approx(want, rel=1e-12)


def test_row_scaling_invariance(model5):
    r = restriction_q2()
    s = np.array([3.0, -0.5])
    r2 = LinearRestriction(r.H * s[:, None], r.h * s)
    np.testing.assert_allclose(fit_rmle(model5, r2), fit_rmle(model5, r), atol=1e-10)
    assert wald_statistic(model5, r2) == pytest.approx(wald_statistic(model5, r), rel=1e-10)


def test_critical_values(model5):
    r = LinearRestriction.zero_coefficients(4, [2, 3])
    assert wald_test(model5, r, 0.05).critical_value == pytest.approx(5.9915, abs=1e-4)
    r1 = LinearRestriction.zero_coefficients(4, [2])
    assert wald_test(model5, r1, 0.3173).critical_value == pytest.approx(stats.norm.ppf(1 - 0.3173 / 2) ** 2, rel=1e-10)
    assert wald_test(model5, r1, 0.3173).critical_value == pytest.approx(1.0, abs=1e-4)


def test_reject_consistent(model5):
    r = LinearRestriction.zero_coefficients(4, [1, 2])
    for a in (0.01, 0.05, 0.25, 0.9):
        res = wald_test(model5, r, a)
        assert res.reject == (res.statistic >= res.critical_value)
        assert res.dof == 2


def test_errors(model5):
    with pytest.raises(SingularityError):
        LinearRestriction([[1, 0, 0, 0], [2, 0, 0, 0]], [0, 0])
    with pytest.raises(ShapeError):
        LinearRestriction([[1, 0, 0, 0]], [0, 0])
    with pytest.raises(ShapeError):
        fit_rmle(model5, LinearRestriction.zero_coefficients(3, [0]))
    with pytest.raises(DomainError):
        wald_test(model5, LinearRestriction.zero_coefficients(4, [0]), alpha=1.0)
