"""Asymptotic bias, quadratic bias, MSE matrix and risk under local alternatives.

Under H beta = h + gamma / sqrt(n), write each estimator as

    sqrt(n)(estimate - beta) = v1 - v3 * phi(L_n)

with v1 = sqrt(n)(UR - beta) ~ N(zeta, L D^-1 L), v3 = sqrt(n)(UR - RE)
~ N(L delta, L A L) and L_n -> chi2_q(Delta^2). The normal-vector moment
identities turn the expectations into four scalars per estimator,

    a_v = E[phi(chi2_v(Delta^2))],  b_v = E[phi(chi2_v(Delta^2))^2],  v = q+2, q+4,

and

    bias  = zeta - a_{q+2} L delta
    Gamma = L D^-1 L + zeta zeta' - (2 a_{q+2} - b_{q+2}) L A L
            - a_{q+2} (L delta zeta' + zeta delta' L)
            + (2 a_{q+2} - 2 a_{q+4} + b_{q+4}) L delta delta' L.

Gamma is the second-moment (MSE) matrix E[n (est - beta)(est - beta)']; the
risk is its trace.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import chi2_kernels as k2
from .errors import DomainError, ShapeError
from .estimators import SHRINKAGE_KINDS, build_liu_operator, combine, liu_eigenvalues
from .restriction import LinearRestriction, quadratic_form, restricted_estimate


@dataclass(frozen=True)
class AsymptoticScenario:
    D: np.ndarray
    beta: np.ndarray
    restriction: LinearRestriction
    gamma: np.ndarray
    d: float
    alpha: float = 0.05
    # derived
    D_inv: np.ndarray = field(init=False, repr=False)
    A: np.ndarray = field(init=False, repr=False)
    delta: np.ndarray = field(init=False, repr=False)
    zeta: np.ndarray = field(init=False, repr=False)
    Ld: np.ndarray = field(init=False, repr=False)
    Delta2: float = field(init=False)

    def __post_init__(self):
        D = np.asarray(self.D, dtype=float)
        beta = np.asarray(self.beta, dtype=float).ravel()
        gamma = np.asarray(self.gamma, dtype=float).ravel()
        m = beta.size
        if D.shape != (m, m):
            raise ShapeError(f"D must be {m}x{m}")
        if self.restriction.m != m:
            raise ShapeError("restriction width does not match beta")
        if gamma.size != self.restriction.q:
            raise ShapeError("gamma must have length q")
        if not 0.0 < self.alpha < 1.0:
            raise DomainError("alpha must lie in (0, 1)")
        op = build_liu_operator(D, self.d)
        D_inv = np.linalg.inv(D)
        D_inv = 0.5 * (D_inv + D_inv.T)
        H = self.restriction.H
        M = H @ D_inv @ H.T
        B = D_inv @ H.T @ np.linalg.inv(M)
        A = B @ H @ D_inv
        lam, Q = np.linalg.eigh(D)
        zeta = -(1.0 - self.d) ** 2 * (Q @ ((Q.T @ beta) / (lam + 1.0) ** 2))
        for name, val in (("D", D), ("beta", beta), ("gamma", gamma), ("D_inv", D_inv),
                          ("A", 0.5 * (A + A.T)), ("delta", B @ gamma), ("zeta", zeta),
                          ("Ld", op.matrix)):
            object.__setattr__(self, name, val)
        object.__setattr__(self, "Delta2", float(max(gamma @ np.linalg.solve(M, gamma), 0.0)))

    @property
    def q(self) -> int:
        return self.restriction.q

    @property
    def m(self) -> int:
        return self.beta.size

    @property
    def critical_value(self) -> float:
        return k2.quantile(self.q, self.alpha)

    def with_delta2(self, delta2: float) -> "AsymptoticScenario":
        """Same scenario with gamma rescaled along its direction to hit ``delta2``."""
        if delta2 < 0:
            raise DomainError("Delta^2 must be >= 0")
        if delta2 == 0:
            return replace(self, gamma=np.zeros(self.q))
        if self.Delta2 == 0:
            raise DomainError("gamma direction is zero; cannot rescale to positive Delta^2")
        return replace(self, gamma=self.gamma * np.sqrt(delta2 / self.Delta2))


def kernel_scalars(kind: str, scenario: AsymptoticScenario) -> tuple[float, float, float, float]:
    """(a_{q+2}, a_{q+4}, b_{q+2}, b_{q+4}) for the estimator's shrink function."""
    q, nc = scenario.q, scenario.Delta2
    c = q - 2.0
    if kind == "UR":
        return 0.0, 0.0, 0.0, 0.0
    if kind == "RE":
        return 1.0, 1.0, 1.0, 1.0
    if kind == "PT":
        k = scenario.critical_value
        h2 = float(k2.ncx2_cdf(q + 2, nc, k))
        h4 = float(k2.ncx2_cdf(q + 4, nc, k))
        return h2, h4, h2, h4
    if kind not in ("S", "PS"):
        raise DomainError(f"unknown estimator kind {kind!r}")
    if q < 3:
        raise DomainError("Stein shrinkage requires q >= 3")
    a2 = c * k2.inv_moment(1, q + 2, nc)
    a4 = c * k2.inv_moment(1, q + 4, nc)
    b2 = c * c * k2.inv_moment(2, q + 2, nc)
    b4 = c * c * k2.inv_moment(2, q + 4, nc)
    if kind == "S":
        return a2, a4, b2, b4
    # phi = 1 on chi2 <= c, c/chi2 above
    a2 += k2.expect_indicator_shrink(q + 2, nc, c)
    a4 += k2.expect_indicator_shrink(q + 4, nc, c)
    b2 += float(k2.ncx2_cdf(q + 2, nc, c)) - c * c * k2.inv_moment_truncated(2, q + 2, nc, c)
    b4 += float(k2.ncx2_cdf(q + 4, nc, c)) - c * c * k2.inv_moment_truncated(2, q + 4, nc, c)
    return a2, a4, b2, b4


def asymptotic_bias(kind: str, scenario: AsymptoticScenario) -> np.ndarray:
    a2 = kernel_scalars(kind, scenario)[0]
    return scenario.zeta - a2 * (scenario.Ld @ scenario.delta)


def asymptotic_quadratic_bias(kind: str, scenario: AsymptoticScenario) -> float:
    b = asymptotic_bias(kind, scenario)
    return float(b @ b)


def asymptotic_covariance(kind: str, scenario: AsymptoticScenario) -> np.ndarray:
    """Asymptotic MSE matrix Gamma of sqrt(n)(estimate - beta)."""
    a2, a4, b2, b4 = kernel_scalars(kind, scenario)
    L, zeta = scenario.Ld, scenario.zeta
    Ldelta = L @ scenario.delta
    LAL = L @ scenario.A @ L
    cross = np.outer(Ldelta, zeta)
    G = (L @ scenario.D_inv @ L + np.outer(zeta, zeta)
         - (2.0 * a2 - b2) * LAL
         - a2 * (cross + cross.T)
         + (2.0 * a2 - 2.0 * a4 + b4) * np.outer(Ldelta, Ldelta))
    return 0.5 * (G + G.T)


def asymptotic_risk(kind: str, scenario: AsymptoticScenario) -> float:
    return float(np.trace(asymptotic_covariance(kind, scenario)))


def risk_ur_eigen(scenario: AsymptoticScenario) -> float:
    """UR risk as the eigenvalue sum of (l+2-d)^2 (l+d)^2 / (l (l+1)^4) + (1-d)^4 theta^2/(l+1)^4."""
    lam, Q = np.linalg.eigh(scenario.D)
    theta = Q.T @ scenario.beta
    d = scenario.d
    ell = liu_eigenvalues(lam, d)
    return float(np.sum(ell ** 2 / lam + (1.0 - d) ** 4 * theta ** 2 / (lam + 1.0) ** 4))


@dataclass
class RiskReport:
    grid: list
    rows: list  # dicts: kind, delta2, bias, quadratic_bias, covariance, risk, relative_risk

    def table(self, kind: str) -> list:
        return [r for r in self.rows if r["kind"] == kind]


def risk_curve(kinds, scenario_base: AsymptoticScenario, delta2_grid) -> RiskReport:
    """Evaluate every kind on a grid of Delta^2 along the fixed gamma direction.

    ``relative_risk`` is risk(UR) / risk(kind), so UR is identically 1.
    """
    grid = [float(g) for g in delta2_grid]
    if any(g < 0 for g in grid):
        raise DomainError("grid values must be >= 0")
    rows = []
    for g in grid:
        sc = scenario_base.with_delta2(g)
        risk_ur = asymptotic_risk("UR", sc)
        for kind in kinds:
            cov = asymptotic_covariance(kind, sc)
            bias = asymptotic_bias(kind, sc)
            risk = float(np.trace(cov))
            rows.append({
                "kind": kind,
                "delta2": g,
                "bias": bias,
                "quadratic_bias": float(bias @ bias),
                "covariance": cov,
                "risk": risk,
                "relative_risk": risk_ur / risk,
            })
    return RiskReport(grid, rows)


# ---------------------------------------------------------------------------
# Gaussian oracle: simulate the limit law and apply the estimator formulas
# ---------------------------------------------------------------------------

@dataclass
class OracleReport:
    kind: str
    reps: int
    bias_expected: np.ndarray
    bias_empirical: np.ndarray
    bias_z: np.ndarray
    cov_expected: np.ndarray
    cov_empirical: np.ndarray
    cov_z: np.ndarray  # upper triangle, row-major
    risk_expected: float
    risk_empirical: float
    risk_z: float

    @property
    def max_abs_z(self) -> float:
        return float(max(np.max(np.abs(self.bias_z)), np.max(np.abs(self.cov_z)), abs(self.risk_z)))

    @property
    def passed(self) -> bool:
        return self.max_abs_z < 4.0


def _z(mean, sd, reps, expected):
    se = np.asarray(sd) / np.sqrt(reps)
    diff = np.asarray(mean) - np.asarray(expected)
    safe = np.where(se > 0, se, 1.0)
    return np.where(se > 0, diff / safe, np.where(np.abs(diff) < 1e-12, 0.0, np.inf))


def oracle_errors(kinds, scenario: AsymptoticScenario, Z) -> dict:
    """Errors (estimate - beta) of each kind for limit-law draws ``Z`` (rows)."""
    H = scenario.restriction.H
    restr = LinearRestriction(H, H @ scenario.beta - scenario.gamma)
    beta_hat = scenario.beta + Z
    rmle = restricted_estimate(beta_hat, scenario.D_inv, restr)
    stat = quadratic_form(beta_hat, scenario.D_inv, restr)
    ur = beta_hat @ scenario.Ld
    re = rmle @ scenario.Ld
    crit = scenario.critical_value
    return {k: combine(k, ur, re, stat, scenario.q, crit) - scenario.beta for k in kinds}


def _oracle_shard(kinds, scenario, chol, seed, shard, size, iu):
    rng = np.random.default_rng([seed, shard])
    Z = rng.standard_normal((size, scenario.m)) @ chol.T
    out = {}
    for kind, e in oracle_errors(kinds, scenario, Z).items():
        p = e[:, iu[0]] * e[:, iu[1]]
        r = np.einsum("ij,ij->i", e, e)
        out[kind] = (e.sum(0), (e * e).sum(0), p.sum(0), (p * p).sum(0), r.sum(), (r * r).sum())
    return out


def validate_against_oracle(kind, scenario: AsymptoticScenario, reps: int = 1_000_000,
                            seed: int = 0, chunk: int = 100_000, threads: int = 1):
    """Compare closed forms with a Monte Carlo of the Gaussian limit experiment.

    Draws sqrt(n)(MLE - beta) ~ N(0, D^-1), sets h so that H beta - h = gamma,
    applies the estimator formulas with C replaced by D and reports z-scores of
    the empirical bias, MSE-matrix entries and risk. ``kind`` may be a single
    kind or a sequence; a sequence returns a dict of reports. Results do not
    depend on ``threads``.
    """
    if reps < 100_000:
        raise DomainError("reps must be at least 1e5")
    single = isinstance(kind, str)
    kinds = (kind,) if single else tuple(kind)
    m = scenario.m
    iu = np.triu_indices(m)
    chol = np.linalg.cholesky(scenario.D_inv)
    sizes = [min(chunk, reps - s) for s in range(0, reps, chunk)]
    jobs = [(kinds, scenario, chol, seed, i, sz, iu) for i, sz in enumerate(sizes)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(lambda a: _oracle_shard(*a), jobs))
    else:
        parts = [_oracle_shard(*a) for a in jobs]

    reports = {}
    for kd in kinds:
        acc = [sum(p[kd][i] for p in parts) for i in range(6)]
        mb = acc[0] / reps
        sdb = np.sqrt(np.maximum(acc[1] / reps - mb ** 2, 0.0))
        mc = acc[2] / reps
        sdc = np.sqrt(np.maximum(acc[3] / reps - mc ** 2, 0.0))
        mr = acc[4] / reps
        sdr = np.sqrt(max(acc[5] / reps - mr ** 2, 0.0))
        bias_exp = asymptotic_bias(kd, scenario)
        cov_exp = asymptotic_covariance(kd, scenario)
        risk_exp = float(np.trace(cov_exp))
        cov_emp = np.zeros((m, m))
        cov_emp[iu] = mc
        cov_emp = cov_emp + np.triu(cov_emp, 1).T
        reports[kd] = OracleReport(
            kind=kd, reps=reps,
            bias_expected=bias_exp, bias_empirical=mb, bias_z=_z(mb, sdb, reps, bias_exp),
            cov_expected=cov_exp, cov_empirical=cov_emp, cov_z=_z(mc, sdc, reps, cov_exp[iu]),
            risk_expected=risk_exp, risk_empirical=float(mr),
            risk_z=float(_z(mr, sdr, reps, risk_exp)),
        )
    return reports[kinds[0]] if single else reports


def random_scenario(m: int, q: int, d: float, delta2: float, seed: int, alpha: float = 0.05,
                    eig_range=(0.2, 3.0)) -> AsymptoticScenario:
    """Scenario with a random SPD D (eigenvalues in ``eig_range``), random beta,
    H selecting the last q coordinates and a random gamma direction."""
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((m, m)))
    lam = rng.uniform(*eig_range, size=m)
    D = (Q * lam) @ Q.T
    D = 0.5 * (D + D.T)
    beta = rng.normal(0.0, 1.5, size=m)
    restr = LinearRestriction.zero_coefficients(m, range(m - q, m))
    direction = rng.standard_normal(q)
    sc = AsymptoticScenario(D, beta, restr, direction, d, alpha)
    return sc.with_delta2(delta2)


__all__ = [
    "AsymptoticScenario", "RiskReport", "OracleReport", "SHRINKAGE_KINDS",
    "kernel_scalars", "asymptotic_bias", "asymptotic_quadratic_bias",
    "asymptotic_covariance", "asymptotic_risk", "risk_ur_eigen", "risk_curve",
    "oracle_errors", "validate_against_oracle", "random_scenario",
]
