"""Linear restrictions H beta = h: restricted MLE and the Wald statistic."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from . import chi2_kernels
from .errors import DomainError, ShapeError, SingularityError
from .glm_core import FittedModel


@dataclass(frozen=True)
class LinearRestriction:
    H: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        H = np.atleast_2d(np.asarray(self.H, dtype=float))
        h = np.asarray(self.h, dtype=float).ravel()
        q, m = H.shape
        if h.shape[0] != q:
            raise ShapeError(f"h has length {h.shape[0]}, H has {q} rows")
        if not 1 <= q <= m:
            raise ShapeError(f"need 1 <= q <= m, got q={q}, m={m}")
        if np.linalg.matrix_rank(H) < q:
            raise SingularityError("H must have full row rank")
        H.setflags(write=False)
        h.setflags(write=False)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "h", h)

    @property
    def q(self) -> int:
        return self.H.shape[0]

    @property
    def m(self) -> int:
        return self.H.shape[1]

    @classmethod
    def zero_coefficients(cls, m: int, indices) -> "LinearRestriction":
        """Restriction setting the coefficients at ``indices`` to zero."""
        indices = list(indices)
        H = np.zeros((len(indices), m))
        H[np.arange(len(indices)), indices] = 1.0
        return cls(H, np.zeros(len(indices)))


@dataclass(frozen=True)
class TestResult:
    statistic: float
    dof: int
    critical_value: float
    alpha: float
    reject: bool

    __test__ = False  # not a pytest class


def _check(model: FittedModel, restriction: LinearRestriction):
    if restriction.m != model.m:
        raise ShapeError(f"restriction has {restriction.m} columns, model has {model.m} coefficients")


def _inner_factor(H, C_inv):
    M = H @ C_inv @ H.T
    M = 0.5 * (M + M.T)
    try:
        return linalg.cho_factor(M)
    except linalg.LinAlgError as exc:
        raise SingularityError("H C^-1 H' is singular (redundant restrictions?)") from exc


def restricted_estimate(beta, C_inv, restriction: LinearRestriction):
    """beta - C^-1 H' (H C^-1 H')^-1 (H beta - h).

    ``beta`` may be a single vector or an (r, m) stack of vectors.
    """
    H, h = restriction.H, restriction.h
    fac = _inner_factor(H, C_inv)
    beta = np.asarray(beta, dtype=float)
    resid = beta @ H.T - h
    corr = linalg.cho_solve(fac, resid.T).T @ (H @ C_inv)
    return beta - corr


def quadratic_form(beta, C_inv, restriction: LinearRestriction):
    """(H beta - h)' (H C^-1 H')^-1 (H beta - h); vectorised over rows of ``beta``."""
    H, h = restriction.H, restriction.h
    fac = _inner_factor(H, C_inv)
    resid = np.asarray(beta, dtype=float) @ H.T - h
    sol = linalg.cho_solve(fac, resid.T).T
    return np.maximum(np.sum(resid * sol, axis=-1), 0.0)


def fit_rmle(model: FittedModel, restriction: LinearRestriction) -> np.ndarray:
    """Restricted MLE, projecting the MLE onto H beta = h in the C metric.

    C is the information matrix at the unrestricted MLE; W is not re-evaluated.
    """
    _check(model, restriction)
    return restricted_estimate(model.beta_mle, model.info_inverse, restriction)


def wald_statistic(model: FittedModel, restriction: LinearRestriction, n: int | None = None) -> float:
    """L_n = n (H b - h)' [H (C/n)^-1 H']^-1 (H b - h)."""
    _check(model, restriction)
    n = model.n if n is None else n
    H, h = restriction.H, restriction.h
    resid = H @ model.beta_mle - h
    inner = H @ (n * model.info_inverse) @ H.T
    try:
        sol = linalg.cho_solve(linalg.cho_factor(0.5 * (inner + inner.T)), resid)
    except linalg.LinAlgError as exc:
        raise SingularityError("H C^-1 H' is singular (redundant restrictions?)") from exc
    return max(float(n * resid @ sol), 0.0)


def test(model: FittedModel, restriction: LinearRestriction, alpha: float = 0.05) -> TestResult:
    """Wald test of H beta = h at level ``alpha``.

    Acceptance is ``statistic < critical_value``; a tie rejects.
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    stat = wald_statistic(model, restriction)
    crit = chi2_kernels.quantile(restriction.q, alpha)
    return TestResult(stat, restriction.q, crit, alpha, reject=not stat < crit)


test.__test__ = False
