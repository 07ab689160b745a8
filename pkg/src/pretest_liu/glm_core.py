"""Binary logistic regression: data container and IRLS maximum likelihood."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, optimize

from .errors import (
    NonConvergenceError,
    SeparationError,
    ShapeError,
    SingularityError,
    InputError,
)

ETA_CLAMP = 30.0
WEIGHT_FLOOR = 1e-10


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """Design matrix (n x m) and binary response.

    When an intercept is wanted, the column of ones must already be the first
    column of ``design``.
    """

    design: np.ndarray
    response: np.ndarray
    column_names: tuple = ()

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.design, dtype=float))
        y = np.asarray(self.response, dtype=float).ravel()
        n, m = X.shape
        if y.shape[0] != n:
            raise ShapeError(f"response has length {y.shape[0]}, design has {n} rows")
        if not n >= m >= 1:
            raise ShapeError(f"need n >= m >= 1, got n={n}, m={m}")
        if not np.all(np.isfinite(X)):
            raise InputError("design contains non-finite values")
        if not np.all((y == 0) | (y == 1)):
            raise InputError("response entries must be exactly 0 or 1")
        names = tuple(self.column_names) or tuple(f"x{j}" for j in range(m))
        if len(names) != m:
            raise ShapeError(f"{len(names)} column names for {m} columns")
        object.__setattr__(self, "design", _frozen(X))
        object.__setattr__(self, "response", _frozen(y))
        object.__setattr__(self, "column_names", names)

    @property
    def n(self) -> int:
        return self.design.shape[0]

    @property
    def m(self) -> int:
        return self.design.shape[1]

    def subset(self, rows) -> "Dataset":
        return Dataset(self.design[rows], self.response[rows], self.column_names)


@dataclass(frozen=True)
class FittedModel:
    beta_mle: np.ndarray
    weights: np.ndarray
    info_matrix: np.ndarray
    iterations: int
    converged: bool
    max_abs_step: float
    log_likelihood: float
    n: int
    info_inverse: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        for name in ("beta_mle", "weights", "info_matrix", "info_inverse"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, _frozen(value))

    @property
    def m(self) -> int:
        return self.beta_mle.shape[0]


def _linear_predictor(beta, design):
    beta = np.asarray(beta, dtype=float).ravel()
    design = np.atleast_2d(np.asarray(design, dtype=float))
    if design.shape[1] != beta.shape[0]:
        raise ShapeError(
            f"coefficient length {beta.shape[0]} != design columns {design.shape[1]}"
        )
    return design @ beta


def predict_probabilities(beta, design) -> np.ndarray:
    """Logistic mean exp(x'b) / (1 + exp(x'b)) for every row of ``design``."""
    eta = np.clip(_linear_predictor(beta, design), -ETA_CLAMP, ETA_CLAMP)
    return 1.0 / (1.0 + np.exp(-eta))


def _loglik_from_eta(eta, y):
    eta = np.clip(eta, -ETA_CLAMP, ETA_CLAMP)
    # log(pi) = -log(1 + e^-eta), log(1 - pi) = -log(1 + e^eta)
    return float(-np.sum(y * np.logaddexp(0.0, -eta) + (1.0 - y) * np.logaddexp(0.0, eta)))


def log_likelihood(beta, data: Dataset) -> float:
    return _loglik_from_eta(_linear_predictor(beta, data.design), data.response)


def information_matrix(design, weights) -> np.ndarray:
    """X' W X for diagonal W given as a vector."""
    C = design.T @ (weights[:, None] * design)
    return 0.5 * (C + C.T)


def is_separated(design, response) -> bool:
    """True when some b != 0 has (2y_i - 1) x_i'b >= 0 for every row.

    That is complete or quasi-complete separation, under which the MLE does
    not exist. Solved as a linear programme maximising the summed margins
    over the box |b_j| <= 1.
    """
    X = np.asarray(design, dtype=float)
    s = 2.0 * np.asarray(response, dtype=float) - 1.0
    A = s[:, None] * X
    res = optimize.linprog(-A.sum(0), A_ub=-A, b_ub=np.zeros(X.shape[0]),
                           bounds=[(-1.0, 1.0)] * X.shape[1], method="highs")
    if res.status != 0:
        return False
    return -res.fun > 1e-7 * max(1.0, float(np.abs(A).sum(0).max()))


def fit_mle(data: Dataset, tolerance: float = 1e-8, max_iter: int = 100,
            loglik_rtol: float = 1e-10, max_halvings: int = 20) -> FittedModel:
    """Maximum likelihood fit by iteratively re-weighted least squares.

    Starts at beta = 0. Each Newton/IRLS step solves C step = X'(y - pi) with a
    Cholesky factorisation of C = X'WX; a step that lowers the log-likelihood
    is halved (up to ``max_halvings`` times). Convergence requires the step's
    infinity norm <= ``tolerance``, a relative log-likelihood change
    <= ``loglik_rtol`` and a gradient below ``tolerance * max(1, |X'y|_inf)``.

    Raises
    ------
    SingularityError
        Rank-deficient design (C not positive definite).
    SeparationError
        Linear predictor beyond +/-30 while the likelihood is still climbing,
        confirmed by ``is_separated``.
    NonConvergenceError
        ``max_iter`` reached; ``last_iterate`` holds the final coefficients.
    """
    if tolerance <= 0:
        raise InputError("tolerance must be positive")
    if max_iter < 1:
        raise InputError("max_iter must be at least 1")
    X, y = data.design, data.response
    n, m = X.shape
    if np.linalg.matrix_rank(X) < m:
        raise SingularityError("design matrix is rank deficient")

    grad_scale = tolerance * max(1.0, float(np.max(np.abs(X.T @ y))))
    beta = np.zeros(m)
    eta = X @ beta
    ll = _loglik_from_eta(eta, y)
    step_norm = np.inf
    converged = False
    sep_checked = False
    it = 0
    for it in range(1, max_iter + 1):
        pi = 1.0 / (1.0 + np.exp(-np.clip(eta, -ETA_CLAMP, ETA_CLAMP)))
        w = np.maximum(pi * (1.0 - pi), WEIGHT_FLOOR)
        C = information_matrix(X, w)
        grad = X.T @ (y - pi)
        try:
            step = linalg.cho_solve(linalg.cho_factor(C), grad)
        except linalg.LinAlgError as exc:
            raise SingularityError("information matrix is not positive definite") from exc

        ll_new = -np.inf
        for _ in range(max_halvings + 1):
            eta_new = X @ (beta + step)
            ll_new = _loglik_from_eta(eta_new, y)
            if ll_new >= ll - 1e-12 * abs(ll):
                break
            step = 0.5 * step
        beta = beta + step
        eta = eta_new
        step_norm = float(np.max(np.abs(step)))
        rel_change = abs(ll_new - ll) / max(abs(ll_new), 1e-300)
        ll = ll_new

        if np.max(np.abs(eta)) > ETA_CLAMP and rel_change > loglik_rtol and not sep_checked:
            # large predictors also occur in well-posed fits; confirm before giving up
            if is_separated(X, y):
                raise SeparationError(
                    f"linear predictor reached {np.max(np.abs(eta)):.1f} at iteration {it} "
                    "with the likelihood still increasing (quasi-complete separation)"
                )
            sep_checked = True
        if step_norm <= tolerance and rel_change <= loglik_rtol:
            pi = predict_probabilities(beta, X)
            if np.max(np.abs(X.T @ (y - pi))) <= grad_scale:
                converged = True
                break

    if not converged:
        if np.max(np.abs(eta)) > ETA_CLAMP and is_separated(X, y):
            raise SeparationError("likelihood has no finite maximiser (quasi-complete separation)")
        raise NonConvergenceError(
            f"IRLS did not converge in {max_iter} iterations (last step {step_norm:.3g})",
            last_iterate=beta.copy(),
        )

    pi = predict_probabilities(beta, X)
    w = np.maximum(pi * (1.0 - pi), WEIGHT_FLOOR)
    C = information_matrix(X, w)
    try:
        C_inv = linalg.cho_solve(linalg.cho_factor(C), np.eye(m))
    except linalg.LinAlgError as exc:
        raise SingularityError("information matrix is not positive definite") from exc
    C_inv = 0.5 * (C_inv + C_inv.T)
    return FittedModel(
        beta_mle=beta,
        weights=w,
        info_matrix=C,
        iterations=it,
        converged=True,
        max_abs_step=step_norm,
        log_likelihood=ll,
        n=n,
        info_inverse=C_inv,
    )


def irls_update(beta, data: Dataset) -> np.ndarray:
    """One undamped IRLS step from ``beta``; a fixed point at the MLE."""
    X, y = data.design, data.response
    pi = predict_probabilities(beta, X)
    w = np.maximum(pi * (1.0 - pi), WEIGHT_FLOOR)
    C = information_matrix(X, w)
    return np.asarray(beta, dtype=float) + linalg.cho_solve(linalg.cho_factor(C), X.T @ (y - pi))
