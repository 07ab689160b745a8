"""Noncentral chi-square CDF, central quantiles and inverse-moment kernels.

All noncentral quantities are Poisson mixtures over central chi-square laws:
a chi-square with ``dof`` degrees of freedom and noncentrality ``nc`` is a
central chi-square with ``dof + 2R`` degrees of freedom, R ~ Poisson(nc / 2).
The series is summed until the remaining Poisson mass is below 1e-14 and the
index has passed the Poisson mean.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

from .errors import DomainError

TAIL_TOL = 1e-14
MAX_TERMS = 10_000


@dataclass(frozen=True)
class NoncentralChi2:
    dof: int
    noncentrality: float = 0.0

    def __post_init__(self):
        if self.dof < 1:
            raise DomainError(f"dof must be >= 1, got {self.dof}")
        if not self.noncentrality >= 0:
            raise DomainError(f"noncentrality must be >= 0, got {self.noncentrality}")

    def cdf(self, x):
        return cdf(self, x)


def central_cdf(dof, x):
    """P(chi2_dof <= x) via the regularized lower incomplete gamma function."""
    x = np.asarray(x, dtype=float)
    return special.gammainc(np.asarray(dof, dtype=float) / 2.0, np.maximum(x, 0.0) / 2.0)


def central_sf(dof, x):
    x = np.asarray(x, dtype=float)
    return special.gammaincc(np.asarray(dof, dtype=float) / 2.0, np.maximum(x, 0.0) / 2.0)


def poisson_weights(noncentrality: float) -> np.ndarray:
    """Mixing weights P(R = r), r = 0..R*, with R ~ Poisson(noncentrality / 2)."""
    lam = 0.5 * float(noncentrality)
    if lam < 0 or not np.isfinite(lam):
        raise DomainError(f"noncentrality must be finite and >= 0, got {noncentrality}")
    if lam == 0.0:
        return np.ones(1)
    # P(R > r) = P(r + 1, lam), the regularized lower incomplete gamma
    r = min(int(np.ceil(lam + 10.0 * np.sqrt(lam) + 20.0)), MAX_TERMS)
    while special.gammainc(r + 1, lam) >= TAIL_TOL and r < MAX_TERMS:
        r = min(2 * r, MAX_TERMS)
    if r >= MAX_TERMS and special.gammainc(r + 1, lam) >= TAIL_TOL:
        warnings.warn(
            f"Poisson series truncated at {MAX_TERMS} terms; accuracy may be reduced",
            RuntimeWarning,
            stacklevel=3,
        )
    k = np.arange(r + 1)
    return np.exp(-lam + k * np.log(lam) - special.gammaln(k + 1.0))


def cdf(dist: NoncentralChi2, x):
    """CDF of the noncentral chi-square, vectorised over ``x``."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("x must be >= 0")
    w = poisson_weights(dist.noncentrality)
    dofs = dist.dof + 2.0 * np.arange(w.size)
    vals = central_cdf(dofs, x[..., None]) @ w
    return np.clip(vals, 0.0, 1.0)


def ncx2_cdf(dof: int, noncentrality: float, x):
    return cdf(NoncentralChi2(dof, noncentrality), x)


def quantile(dof: int, alpha: float) -> float:
    """Upper-alpha point of the central chi-square: P(chi2_dof > x) = alpha."""
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    if dof < 1:
        raise DomainError(f"dof must be >= 1, got {dof}")

    def f(x):
        return float(central_sf(dof, x)) - alpha

    hi = max(2.0 * dof, 1.0)
    while f(hi) > 0:
        hi *= 2.0
    lo = 0.0
    return optimize.brentq(f, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)


def _check_moment_args(order: int, dof: int):
    if order not in (1, 2):
        raise DomainError(f"order must be 1 or 2, got {order}")
    if not dof > 2 * order:
        raise DomainError(f"E[chi^-{2 * order}] needs dof > {2 * order}, got dof={dof}")


def _moment_denominators(order, dof, nterms):
    v = dof + 2.0 * np.arange(nterms)
    if order == 1:
        return v - 2.0
    return (v - 2.0) * (v - 4.0)


def inv_moment(order: int, dof: int, noncentrality: float) -> float:
    """E[(chi2_dof(nc))^-order] for order 1 or 2.

    Central case: 1/(dof - 2) and 1/((dof - 2)(dof - 4)).
    """
    _check_moment_args(order, dof)
    w = poisson_weights(noncentrality)
    return float(np.sum(w / _moment_denominators(order, dof, w.size)))


def inv_moment_truncated(order: int, dof: int, noncentrality: float, cut: float) -> float:
    """E[(chi2_dof(nc))^-order * I(chi2_dof(nc) < cut)].

    Each mixture term uses the density identity x^-k f_v(x) = f_{v-2k}(x) / prod,
    so the truncation becomes a central CDF with ``2 * order`` fewer dof.
    """
    _check_moment_args(order, dof)
    if not cut >= 0:
        raise DomainError(f"cut must be >= 0, got {cut}")
    if cut == 0:
        return 0.0
    w = poisson_weights(noncentrality)
    v = dof + 2.0 * np.arange(w.size)
    trunc = central_cdf(v - 2.0 * order, cut)
    return float(np.sum(w * trunc / _moment_denominators(order, dof, w.size)))


def expect_indicator_shrink(dof: int, noncentrality: float, c: float) -> float:
    """E[(1 - c / chi2) I(chi2 < c)] for chi2 ~ chi2_dof(nc)."""
    if c <= 0:
        return 0.0
    h = float(ncx2_cdf(dof, noncentrality, c))
    return h - c * inv_moment_truncated(1, dof, noncentrality, c)


# ---------------------------------------------------------------------------
# Monte Carlo validator for the normal-vector moment identities
# ---------------------------------------------------------------------------

PHI_FUNCTIONS = ("reciprocal", "truncated_reciprocal", "indicator")


def _phi(name, t, cut):
    if name == "reciprocal":
        return 1.0 / t
    if name == "truncated_reciprocal":
        return np.where(t < cut, 1.0 / t, 0.0)
    if name == "indicator":
        return (t < cut).astype(float)
    raise DomainError(f"unknown phi {name!r}; choose from {PHI_FUNCTIONS}")


def expected_phi(name: str, dof: int, noncentrality: float, cut: float = np.inf) -> float:
    """E[phi(chi2_dof(nc))] for the supported test functions."""
    if name == "reciprocal":
        return inv_moment(1, dof, noncentrality)
    if name == "truncated_reciprocal":
        return inv_moment_truncated(1, dof, noncentrality, cut)
    if name == "indicator":
        return float(ncx2_cdf(dof, noncentrality, cut))
    raise DomainError(f"unknown phi {name!r}; choose from {PHI_FUNCTIONS}")


@dataclass
class LemmaReport:
    z_first: np.ndarray
    z_second: np.ndarray
    expected_first: np.ndarray
    expected_second: np.ndarray
    empirical_first: np.ndarray
    empirical_second: np.ndarray
    reps: int

    @property
    def max_abs_z(self) -> float:
        return float(max(np.max(np.abs(self.z_first)), np.max(np.abs(self.z_second))))

    @property
    def passed(self) -> bool:
        return self.max_abs_z < 4.0


def _zscore(mean, sd, reps, expected):
    se = sd / np.sqrt(reps)
    diff = mean - expected
    return np.where(se > 0, diff / np.where(se > 0, se, 1.0), np.where(np.abs(diff) < 1e-12, 0.0, np.inf))


def lemma_a1_check(mean, covariance=None, phi: str = "reciprocal", reps: int = 1_000_000,
                   seed: int = 0, cut: float = 5.0, chunk: int = 200_000) -> LemmaReport:
    """Monte Carlo check of E[X phi(X'X)] and E[XX' phi(X'X)] for X ~ N(mean, I).

    Closed forms: mean * E[phi(chi2_{q+2}(nc))] and
    I * E[phi(chi2_{q+2}(nc))] + mean mean' * E[phi(chi2_{q+4}(nc))],
    with nc = mean'mean. Only the identity covariance is supported.
    """
    mu = np.asarray(mean, dtype=float).ravel()
    q = mu.size
    if covariance is not None and not np.allclose(covariance, np.eye(q)):
        raise DomainError("lemma_a1_check supports only the identity covariance")
    if reps < 100_000:
        raise DomainError("reps must be at least 1e5")
    nc = float(mu @ mu)
    e2 = expected_phi(phi, q + 2, nc, cut)
    e4 = expected_phi(phi, q + 4, nc, cut)
    exp_first = mu * e2
    exp_second = np.eye(q) * e2 + np.outer(mu, mu) * e4

    iu = np.triu_indices(q)
    s1 = np.zeros(q)
    ss1 = np.zeros(q)
    s2 = np.zeros(iu[0].size)
    ss2 = np.zeros(iu[0].size)
    done = 0
    shard = 0
    while done < reps:
        k = min(chunk, reps - done)
        rng = np.random.default_rng([seed, shard])
        X = mu + rng.standard_normal((k, q))
        f = _phi(phi, np.einsum("ij,ij->i", X, X), cut)
        a = X * f[:, None]
        b = X[:, iu[0]] * X[:, iu[1]] * f[:, None]
        s1 += a.sum(0)
        ss1 += (a * a).sum(0)
        s2 += b.sum(0)
        ss2 += (b * b).sum(0)
        done += k
        shard += 1
    m1 = s1 / reps
    m2 = s2 / reps
    sd1 = np.sqrt(np.maximum(ss1 / reps - m1 ** 2, 0.0))
    sd2 = np.sqrt(np.maximum(ss2 / reps - m2 ** 2, 0.0))
    emp_second = np.zeros((q, q))
    emp_second[iu] = m2
    emp_second = emp_second + np.triu(emp_second, 1).T
    return LemmaReport(
        z_first=_zscore(m1, sd1, reps, exp_first),
        z_second=_zscore(m2, sd2, reps, exp_second[iu]),
        expected_first=exp_first,
        expected_second=exp_second,
        empirical_first=m1,
        empirical_second=emp_second,
        reps=reps,
    )
