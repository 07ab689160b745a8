"""Almost unbiased Liu operator and the restricted / pretest / Stein estimators.

Every estimator in the family sits on the line through the restricted (RE)
and unrestricted (UR) Liu estimates:

    estimate = RE + t(L_n) * (UR - RE)

with t = 1 for UR, 0 for RE, I(L_n >= crit) for PT, 1 - c/L_n for S and
(1 - c/L_n) I(L_n > c) for PS, where c = q - 2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import chi2_kernels
from .errors import DomainError
from .glm_core import FittedModel
from .restriction import LinearRestriction, fit_rmle, wald_statistic

KINDS = ("MLE", "RMLE", "PTMLE", "UR", "RE", "PT", "S", "PS")
SHRINKAGE_KINDS = ("UR", "RE", "PT", "S", "PS")


@dataclass(frozen=True)
class LiuOperator:
    d: float
    matrix: np.ndarray
    eigenvalues: np.ndarray  # of the base matrix

    def apply(self, beta):
        """L_d beta for a vector or an (r, m) stack (L_d is symmetric)."""
        return np.asarray(beta, dtype=float) @ self.matrix


@dataclass(frozen=True)
class EstimatorResult:
    kind: str
    coefficients: np.ndarray
    d: float | None = None
    alpha: float | None = None
    statistic: float | None = None
    c: float | None = None


def _check_d(d):
    if not 0.0 <= d <= 1.0:
        raise DomainError(f"biasing parameter d must lie in [0, 1], got {d}")


def build_liu_operator(base_matrix, d: float) -> LiuOperator:
    """L_d = I - (1 - d)^2 (B + I)^-2 via the symmetric eigendecomposition of B."""
    _check_d(d)
    B = np.asarray(base_matrix, dtype=float)
    if B.ndim != 2 or B.shape[0] != B.shape[1]:
        raise DomainError("base matrix must be square")
    scale = max(np.max(np.abs(B)), 1.0)
    if np.max(np.abs(B - B.T)) > 1e-10 * scale:
        raise DomainError("base matrix must be symmetric")
    lam, Q = np.linalg.eigh(0.5 * (B + B.T))
    if lam[0] <= 0:
        raise DomainError("base matrix must be positive definite")
    if d == 1.0:
        L = np.eye(B.shape[0])
    else:
        ell = 1.0 - (1.0 - d) ** 2 / (lam + 1.0) ** 2
        L = (Q * ell) @ Q.T
        L = 0.5 * (L + L.T)
    L.setflags(write=False)
    return LiuOperator(float(d), L, lam)


def liu_eigenvalues(lam, d):
    """Eigenvalues of L_d: (lam + 2 - d)(lam + d) / (lam + 1)^2."""
    lam = np.asarray(lam, dtype=float)
    return (lam + 2.0 - d) * (lam + d) / (lam + 1.0) ** 2


def shrink_weight(kind: str, statistic, q: int, critical_value: float | None = None):
    """Weight t on (UR - RE); vectorised over ``statistic``."""
    L = np.asarray(statistic, dtype=float)
    c = q - 2.0
    if kind == "UR":
        return np.ones_like(L)
    if kind == "RE":
        return np.zeros_like(L)
    if kind == "PT":
        if critical_value is None:
            raise DomainError("PT needs a critical value")
        return np.where(L < critical_value, 0.0, 1.0)
    if kind in ("S", "PS"):
        if q < 3:
            raise DomainError("Stein shrinkage requires q >= 3")
        if kind == "S":
            if np.any(L <= 0):
                raise DomainError("Stein shrinkage undefined for a zero test statistic")
            return 1.0 - c / L
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(L > c, 1.0 - c / np.where(L > 0, L, 1.0), 0.0)
    raise DomainError(f"unknown estimator kind {kind!r}")


def combine(kind: str, ur, re, statistic, q: int, critical_value: float | None = None):
    """RE + t (UR - RE); works row-wise on stacked estimates."""
    ur = np.asarray(ur, dtype=float)
    re = np.asarray(re, dtype=float)
    t = shrink_weight(kind, statistic, q, critical_value)
    return re + np.asarray(t)[..., None] * (ur - re) if ur.ndim > 1 else re + float(t) * (ur - re)


def positive_part_second_form(ur, re, statistic, q):
    """PS written as S minus the truncation term; agrees with ``combine('PS', ...)``."""
    c = q - 2.0
    s = combine("S", ur, re, statistic, q)
    return s - (np.asarray(ur) - np.asarray(re)) * (1.0 - c / statistic) * float(statistic < c)


# ---------------------------------------------------------------------------
# Finite-sample estimators from a fitted model
# ---------------------------------------------------------------------------

def estimate_ur(model: FittedModel, d: float, operator: LiuOperator | None = None) -> EstimatorResult:
    L = operator or build_liu_operator(model.info_matrix, d)
    return EstimatorResult("UR", L.apply(model.beta_mle), d=d)


def estimate_re(model: FittedModel, restriction: LinearRestriction, d: float,
                operator: LiuOperator | None = None) -> EstimatorResult:
    L = operator or build_liu_operator(model.info_matrix, d)
    return EstimatorResult("RE", L.apply(fit_rmle(model, restriction)), d=d)


def estimate_ptmle(model: FittedModel, restriction: LinearRestriction, alpha: float) -> EstimatorResult:
    stat = wald_statistic(model, restriction)
    crit = chi2_kernels.quantile(restriction.q, alpha)
    coef = fit_rmle(model, restriction) if stat < crit else model.beta_mle.copy()
    return EstimatorResult("PTMLE", coef, alpha=alpha, statistic=stat)


def estimate_pt(model: FittedModel, restriction: LinearRestriction, d: float, alpha: float,
                operator: LiuOperator | None = None) -> EstimatorResult:
    L = operator or build_liu_operator(model.info_matrix, d)
    stat = wald_statistic(model, restriction)
    crit = chi2_kernels.quantile(restriction.q, alpha)
    ur = L.apply(model.beta_mle)
    re = L.apply(fit_rmle(model, restriction))
    return EstimatorResult("PT", combine("PT", ur, re, stat, restriction.q, crit),
                           d=d, alpha=alpha, statistic=stat)


def estimate_s(model: FittedModel, restriction: LinearRestriction, d: float,
               operator: LiuOperator | None = None) -> EstimatorResult:
    q = restriction.q
    if q < 3:
        raise DomainError("Stein shrinkage requires q >= 3")
    L = operator or build_liu_operator(model.info_matrix, d)
    stat = wald_statistic(model, restriction)
    ur = L.apply(model.beta_mle)
    re = L.apply(fit_rmle(model, restriction))
    return EstimatorResult("S", combine("S", ur, re, stat, q), d=d, statistic=stat, c=q - 2.0)


def estimate_ps(model: FittedModel, restriction: LinearRestriction, d: float,
                operator: LiuOperator | None = None) -> EstimatorResult:
    q = restriction.q
    if q < 3:
        raise DomainError("Stein shrinkage requires q >= 3")
    L = operator or build_liu_operator(model.info_matrix, d)
    stat = wald_statistic(model, restriction)
    ur = L.apply(model.beta_mle)
    re = L.apply(fit_rmle(model, restriction))
    return EstimatorResult("PS", combine("PS", ur, re, stat, q), d=d, statistic=stat, c=q - 2.0)


def estimate_all(model: FittedModel, restriction: LinearRestriction, d: float,
                 alpha: float = 0.05, kinds=KINDS) -> dict[str, EstimatorResult]:
    """All requested estimators, sharing one Liu operator, RMLE and Wald statistic."""
    q = restriction.q
    kinds = tuple(kinds)
    if q < 3 and ("S" in kinds or "PS" in kinds):
        raise DomainError("Stein shrinkage requires q >= 3")
    L = build_liu_operator(model.info_matrix, d)
    stat = wald_statistic(model, restriction)
    crit = chi2_kernels.quantile(q, alpha)
    mle = model.beta_mle
    rmle = fit_rmle(model, restriction)
    ur, re = L.apply(mle), L.apply(rmle)
    out = {}
    for kind in kinds:
        if kind == "MLE":
            out[kind] = EstimatorResult(kind, mle.copy())
        elif kind == "RMLE":
            out[kind] = EstimatorResult(kind, rmle)
        elif kind == "PTMLE":
            coef = combine("PT", mle, rmle, stat, q, crit)
            out[kind] = EstimatorResult(kind, coef, alpha=alpha, statistic=stat)
        elif kind == "UR":
            out[kind] = EstimatorResult(kind, ur, d=d)
        elif kind == "RE":
            out[kind] = EstimatorResult(kind, re, d=d)
        elif kind == "PT":
            out[kind] = EstimatorResult(kind, combine("PT", ur, re, stat, q, crit),
                                        d=d, alpha=alpha, statistic=stat)
        elif kind in ("S", "PS"):
            out[kind] = EstimatorResult(kind, combine(kind, ur, re, stat, q),
                                        d=d, statistic=stat, c=q - 2.0)
        else:
            raise DomainError(f"unknown estimator kind {kind!r}")
    return out


def d_optimum_raw(eigenvalues, theta) -> float:
    """Unclamped 1 - sqrt(sum 1/(l(l+1)) / sum (1 + l theta^2)/(l(l+1)^4))."""
    lam = np.asarray(eigenvalues, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if np.any(lam <= 0):
        raise DomainError("eigenvalues must be positive")
    num = np.sum(1.0 / (lam * (lam + 1.0)))
    den = np.sum((1.0 + lam * theta ** 2) / (lam * (lam + 1.0) ** 4))
    val = 1.0 - np.sqrt(num / den)
    if not np.isfinite(val):
        raise DomainError("d_optimum is not finite")
    return float(val)


def d_optimum(model: FittedModel, clamp: bool = True) -> float:
    """Plug-in biasing parameter from the eigen-decomposition of C, clamped to [0, 1]."""
    lam, Q = np.linalg.eigh(model.info_matrix)
    raw = d_optimum_raw(lam, Q.T @ model.beta_mle)
    return float(np.clip(raw, 0.0, 1.0)) if clamp else raw
