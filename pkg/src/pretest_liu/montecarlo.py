"""Finite-sample simulation of the estimator family (simulated MSE and RMSE).

Design rows are N(0, S) with S_jk = rho^|j-k|; the truth is
beta = (1.5, 2.5, s, ..., s) with q trailing coordinates whose squared norm is
Delta*; the tested restriction is beta_2 = 0. Every replication draws its own
random stream keyed by (seed, replication), so results do not depend on the
number of worker threads.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import chi2_kernels
from .errors import ConfigurationError, DomainError, NumericalError
from .estimators import d_optimum_raw, liu_eigenvalues
from .glm_core import Dataset, fit_mle
from .restriction import LinearRestriction, quadratic_form, restricted_estimate

BETA1 = (1.5, 2.5)
DEFAULT_D = (0.1, 0.5, 0.7, 0.9, 0.99)
DEFAULT_ALPHA = (0.01, 0.05, 0.10, 0.25)
DEFAULT_GRID = (0.0, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 10.0, 12.0, 15.0, 20.0)
OPT = "opt"


@dataclass
class SimConfig:
    n: int = 250
    q: int = 3
    d_values: tuple = DEFAULT_D
    include_d_optimum: bool = True
    alpha_values: tuple = DEFAULT_ALPHA
    delta_star_grid: tuple = DEFAULT_GRID
    reps: int = 2000
    correlation_base: float = 0.5
    seed: int = 0
    allocation: str = "equal"  # or "single"
    max_failure_rate: float = 0.10

    def __post_init__(self):
        if self.reps < 1:
            raise ConfigurationError("reps must be >= 1")
        if self.n < 2 + self.q:
            raise ConfigurationError("n must exceed the number of coefficients")
        if self.q < 1:
            raise ConfigurationError("q must be >= 1")
        if any(not 0.0 <= d <= 1.0 for d in self.d_values):
            raise ConfigurationError("all d must lie in [0, 1]")
        if any(not 0.0 < a < 1.0 for a in self.alpha_values):
            raise ConfigurationError("all alpha must lie in (0, 1)")
        if any(g < 0 for g in self.delta_star_grid):
            raise ConfigurationError("Delta* grid values must be >= 0")
        if not abs(self.correlation_base) < 1:
            raise ConfigurationError("correlation_base must lie in (-1, 1)")
        if self.allocation not in ("equal", "single"):
            raise ConfigurationError("allocation must be 'equal' or 'single'")
        self.d_values = tuple(float(d) for d in self.d_values)
        self.alpha_values = tuple(float(a) for a in self.alpha_values)
        self.delta_star_grid = tuple(float(g) for g in self.delta_star_grid)

    @property
    def d_labels(self) -> tuple:
        return self.d_values + ((OPT,) if self.include_d_optimum else ())


def correlation_matrix(p: int, base: float) -> np.ndarray:
    idx = np.arange(p)
    return base ** np.abs(idx[:, None] - idx[None, :])


def generate_design(n: int, p_total: int, correlation_base: float = 0.5, seed=None) -> np.ndarray:
    """n x p_total Gaussian design with corr(x_j, x_k) = base^|j-k|.

    ``seed`` may be an int, a sequence of ints or a ``numpy.random.Generator``.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    S = correlation_matrix(p_total, correlation_base)
    try:
        chol = np.linalg.cholesky(S)
    except np.linalg.LinAlgError as exc:
        raise DomainError("correlation matrix is not positive definite") from exc
    return rng.standard_normal((n, p_total)) @ chol.T


def make_truth(delta_star: float, q: int, allocation: str = "equal") -> np.ndarray:
    """(1.5, 2.5, beta_2) with ||beta_2||^2 = delta_star."""
    if delta_star < 0:
        raise DomainError("delta_star must be >= 0")
    beta2 = np.zeros(q)
    if allocation == "equal":
        beta2[:] = np.sqrt(delta_star / q)
    elif allocation == "single":
        beta2[0] = np.sqrt(delta_star)
    else:
        raise DomainError(f"unknown allocation {allocation!r}")
    return np.concatenate([BETA1, beta2])


def null_restriction(q: int) -> LinearRestriction:
    """H = [0_{q x 2} | I_q], h = 0."""
    return LinearRestriction.zero_coefficients(2 + q, range(2, 2 + q))


def cell_keys(config: SimConfig) -> list:
    """(kind, d, alpha) triples, in output order."""
    keys = [("MLE", None, None), ("RMLE", None, None)]
    keys += [("PTMLE", None, a) for a in config.alpha_values]
    for d in config.d_labels:
        keys += [("UR", d, None), ("RE", d, None)]
        keys += [("PT", d, a) for a in config.alpha_values]
        if config.q >= 3:
            keys += [("S", d, None), ("PS", d, None)]
    return keys


def _rep_stream(seed: int, rep: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, rep])))


def _losses_one_fit(config, crits, mle, C, C_inv, restr, beta):
    """Squared-error loss of every cell for a single fitted sample."""
    q = config.q
    stat = float(quadratic_form(mle, C_inv, restr))
    rmle = restricted_estimate(mle, C_inv, restr)
    accept = np.array([stat < k for k in crits])

    lam, Q = np.linalg.eigh(C)
    d_list = list(config.d_values)
    if config.include_d_optimum:
        d_list.append(float(np.clip(d_optimum_raw(lam, Q.T @ mle), 0.0, 1.0)))
    d_arr = np.array(d_list)
    ell = liu_eigenvalues(lam[None, :], d_arr[:, None])          # (nd, m)
    ur = (ell * (Q.T @ mle)[None, :]) @ Q.T                       # (nd, m)
    re = (ell * (Q.T @ rmle)[None, :]) @ Q.T
    e_ur = ur - beta
    e_re = re - beta

    def sq(e):
        return np.einsum("...j,...j->...", e, e)

    out = [sq(mle - beta), sq(rmle - beta)]
    out += [sq(rmle - beta) if acc else sq(mle - beta) for acc in accept]
    l_ur, l_re = sq(e_ur), sq(e_re)
    if q >= 3:
        c = q - 2.0
        t_s = 1.0 - c / stat if stat > 0 else -np.inf
        t_ps = max(t_s, 0.0) if stat > c else 0.0
        l_s = sq(e_re + t_s * (e_ur - e_re)) if np.isfinite(t_s) else np.full(d_arr.size, np.inf)
        l_ps = sq(e_re + t_ps * (e_ur - e_re))
    for i in range(d_arr.size):
        out += [l_ur[i], l_re[i]]
        out += [l_re[i] if acc else l_ur[i] for acc in accept]
        if q >= 3:
            out += [l_s[i], l_ps[i]]
    return np.array(out, dtype=float), stat, d_list[-1] if config.include_d_optimum else np.nan


def _one_replication(config: SimConfig, crits, restr, truths, rep: int):
    rng = _rep_stream(config.seed, rep)
    X = generate_design(config.n, 2 + config.q, config.correlation_base, rng)
    u = rng.random(config.n)
    ncell = len(cell_keys(config))
    G = len(truths)
    losses = np.full((G, ncell), np.nan)
    stats = np.full(G, np.nan)
    dopt = np.full(G, np.nan)
    implied = np.full(G, np.nan)
    for g, beta in enumerate(truths):
        eta = np.clip(X @ beta, -30, 30)
        y = (u < 1.0 / (1.0 + np.exp(-eta))).astype(float)
        try:
            model = fit_mle(Dataset(X, y))
        except (NumericalError, ValueError):
            continue
        losses[g], stats[g], dopt[g] = _losses_one_fit(
            config, crits, model.beta_mle, model.info_matrix, model.info_inverse, restr, beta)
        implied[g] = float(quadratic_form(beta, model.info_inverse, restr))
    return losses, stats, dopt, implied


@dataclass
class SimResult:
    config: SimConfig
    keys: list
    losses: np.ndarray = field(repr=False)      # (reps, grid, cells), NaN for failures
    statistics: np.ndarray = field(repr=False)  # (reps, grid) Wald statistics
    d_opt: np.ndarray = field(repr=False)       # (reps, grid)
    implied_delta2: np.ndarray = field(repr=False)

    def _index(self, kind, d=None, alpha=None):
        for i, key in enumerate(self.keys):
            if key == (kind, d, alpha):
                return i
        raise KeyError((kind, d, alpha))

    def _grid_index(self, delta_star):
        return self.config.delta_star_grid.index(float(delta_star))

    def failures(self, delta_star) -> int:
        g = self._grid_index(delta_star)
        return int(np.sum(np.isnan(self.statistics[:, g])))

    def cell_losses(self, kind, d=None, alpha=None, delta_star=0.0) -> np.ndarray:
        g = self._grid_index(delta_star)
        col = self.losses[:, g, self._index(kind, d, alpha)]
        return col[~np.isnan(col)]

    def mse(self, kind, d=None, alpha=None, delta_star=0.0) -> float:
        return float(np.mean(self.cell_losses(kind, d, alpha, delta_star)))

    def mse_se(self, kind, d=None, alpha=None, delta_star=0.0) -> float:
        x = self.cell_losses(kind, d, alpha, delta_star)
        return float(np.std(x, ddof=1) / np.sqrt(x.size)) if x.size > 1 else float("nan")

    def rmse(self, kind, d=None, alpha=None, delta_star=0.0) -> float:
        """MSE(UR) / MSE(kind) at the same d (the MLE at d = None)."""
        base = self.mse("UR", d, None, delta_star) if d is not None else self.mse("MLE", None, None, delta_star)
        return base / self.mse(kind, d, alpha, delta_star)

    def rejection_rate(self, alpha, delta_star=0.0) -> float:
        g = self._grid_index(delta_star)
        s = self.statistics[:, g]
        s = s[~np.isnan(s)]
        return float(np.mean(s >= chi2_kernels.quantile(self.config.q, alpha)))

    def rows(self) -> list:
        out = []
        for g, ds in enumerate(self.config.delta_star_grid):
            fails = self.failures(ds)
            implied = float(np.nanmean(self.implied_delta2[:, g])) if fails < self.config.reps else float("nan")
            for kind, d, a in self.keys:
                out.append({
                    "q": self.config.q,
                    "delta_star": ds,
                    "implied_delta2": implied,
                    "estimator": kind,
                    "d": d,
                    "alpha": a,
                    "mse": self.mse(kind, d, a, ds),
                    "mse_se": self.mse_se(kind, d, a, ds),
                    "rmse": self.rmse(kind, d, a, ds),
                    "reps_used": self.config.reps - fails,
                    "failures": fails,
                })
        return out


def run_simulation(config: SimConfig, threads: int = 1) -> SimResult:
    """Run all replications; output is identical for any ``threads``."""
    restr = null_restriction(config.q)
    crits = [chi2_kernels.quantile(config.q, a) for a in config.alpha_values]
    truths = [make_truth(ds, config.q, config.allocation) for ds in config.delta_star_grid]

    def work(rep):
        return _one_replication(config, crits, restr, truths, rep)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(work, range(config.reps)))
    else:
        parts = [work(r) for r in range(config.reps)]

    losses = np.stack([p[0] for p in parts])
    stats = np.stack([p[1] for p in parts])
    result = SimResult(config, cell_keys(config), losses, stats,
                       np.stack([p[2] for p in parts]), np.stack([p[3] for p in parts]))
    for ds in config.delta_star_grid:
        if result.failures(ds) > config.max_failure_rate * config.reps:
            raise NumericalError(
                f"{result.failures(ds)} of {config.reps} replications failed at Delta*={ds}")
    return result
