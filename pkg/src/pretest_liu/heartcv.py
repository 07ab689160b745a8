"""Heart-disease application: CSV ingestion and repeated k-fold CV of the estimators.

The loss of one CV pass is the held-out squared error summed over every row
of the data (all folds); the reported cell is its mean over repeats.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import chi2_kernels
from .errors import ConfigurationError, IngestionError, NumericalError
from .estimators import d_optimum_raw, liu_eigenvalues
from .glm_core import Dataset, fit_mle
from .restriction import LinearRestriction, quadratic_form, restricted_estimate

COLUMNS = ("sbp", "tobacco", "ldl", "adiposity", "famhist", "typea", "obesity", "alcohol", "age", "chd")
PREDICTORS = COLUMNS[:-1]
RESTRICTED = ("sbp", "adiposity", "obesity", "alcohol")
FAMHIST = {"present": 1.0, "absent": 0.0}
ROW_LABELS = ("UR", "RE", "PTE1", "PTE2", "PTE3", "PTE4", "S", "PS")
LOSSES = ("probability", "linear")
OPT = "opt"


@dataclass(frozen=True)
class HeartRecord:
    sbp: float
    tobacco: float
    ldl: float
    adiposity: float
    famhist: str
    typea: float
    obesity: float
    alcohol: float
    age: float
    chd: int


def _parse_cell(name, raw, row):
    text = (raw or "").strip()
    if text == "":
        raise IngestionError(f"row {row}, column {name}: empty")
    if name == "famhist":
        key = text.strip('"').lower()
        if key not in FAMHIST:
            raise IngestionError(f"row {row}, column famhist: unknown level {text!r}")
        return FAMHIST[key]
    try:
        val = float(text)
    except ValueError:
        raise IngestionError(f"row {row}, column {name}: cannot parse {text!r}") from None
    if not np.isfinite(val):
        raise IngestionError(f"row {row}, column {name}: non-finite value")
    if name == "chd" and val not in (0.0, 1.0):
        raise IngestionError(f"row {row}, column chd: must be 0 or 1, got {text!r}")
    return val


def load_records(path) -> list[HeartRecord]:
    data = load_dataset(path)
    out = []
    for x, y in zip(data.design, data.response):
        vals = dict(zip(PREDICTORS, x[1:]))
        vals["famhist"] = "Present" if vals["famhist"] == 1.0 else "Absent"
        out.append(HeartRecord(**vals, chd=int(y)))
    return out


def load_dataset(path) -> Dataset:
    """Read the heart CSV into an intercept + 9 predictor design.

    Rows are numbered from 1 after the header. Extra columns (such as a row
    name column) are ignored.
    """
    path = Path(path)
    try:
        fh = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise IngestionError(f"cannot read {path}: {exc.strerror}") from exc
    with fh:
        reader = csv.DictReader(fh)
        header = [h.strip().strip('"').lower() for h in (reader.fieldnames or [])]
        missing = [c for c in COLUMNS if c not in header]
        if missing:
            raise IngestionError(f"missing column(s): {', '.join(missing)}")
        reader.fieldnames = header
        X, y = [], []
        for i, rec in enumerate(reader, start=1):
            vals = [_parse_cell(c, rec.get(c), i) for c in COLUMNS]
            X.append([1.0] + vals[:-1])
            y.append(vals[-1])
    if not y:
        raise IngestionError(f"{path}: no data rows")
    return Dataset(np.array(X), np.array(y), ("intercept",) + PREDICTORS)


def build_restriction(column_names=("intercept",) + PREDICTORS, names=RESTRICTED) -> LinearRestriction:
    """H selects the named coefficients; h = 0."""
    cols = list(column_names)
    absent = [n for n in names if n not in cols]
    if absent:
        raise ConfigurationError(f"restricted column(s) not in design: {', '.join(absent)}")
    return LinearRestriction.zero_coefficients(len(cols), [cols.index(n) for n in names])


def standardize(data: Dataset) -> Dataset:
    """Centre and scale every non-intercept column to unit sample variance."""
    X = np.array(data.design, dtype=float)
    X[:, 1:] = (X[:, 1:] - X[:, 1:].mean(0)) / X[:, 1:].std(0, ddof=1)
    return Dataset(X, data.response, data.column_names)


@dataclass
class CvConfig:
    folds: int = 10
    repeats: int = 500
    d_values: tuple = (0.1, 0.5, 0.7, 0.9, 0.99)
    include_d_optimum: bool = True
    alpha_values: tuple = (0.01, 0.05, 0.10, 0.25)
    seed: int = 0
    loss: str = "probability"
    standardize: bool = False

    def __post_init__(self):
        if self.folds < 2:
            raise ConfigurationError("folds must be >= 2")
        if self.repeats < 1:
            raise ConfigurationError("repeats must be >= 1")
        if any(not 0.0 <= d <= 1.0 for d in self.d_values):
            raise ConfigurationError("all d must lie in [0, 1]")
        if len(self.alpha_values) != 4 or any(not 0.0 < a < 1.0 for a in self.alpha_values):
            raise ConfigurationError("need four alpha values in (0, 1) for PTE1..PTE4")
        if self.loss not in LOSSES:
            raise ConfigurationError(f"loss must be one of {LOSSES}")
        self.d_values = tuple(float(d) for d in self.d_values)
        self.alpha_values = tuple(sorted(float(a) for a in self.alpha_values))

    @property
    def d_labels(self) -> tuple:
        return self.d_values + ((OPT,) if self.include_d_optimum else ())


@dataclass
class CvResult:
    config: CvConfig
    totals: np.ndarray = field(repr=False)   # (repeats, 8, n_d) summed held-out loss
    rejections: np.ndarray = field(repr=False)  # (4,) rejection counts per alpha
    fits: int = 0
    failures: int = 0
    d_opt: np.ndarray = field(default=None, repr=False)  # per successful fold

    @property
    def table(self) -> np.ndarray:
        return self.totals.mean(axis=0)

    def cell(self, row: str, d) -> float:
        j = self.config.d_labels.index(d if d == OPT else float(d))
        return float(self.table[ROW_LABELS.index(row), j])

    def rows(self) -> list[dict]:
        out = []
        for i, label in enumerate(ROW_LABELS):
            row = {"estimator": label}
            for j, d in enumerate(self.config.d_labels):
                row["d_optimum" if d == OPT else f"d={d:g}"] = float(self.table[i, j])
            out.append(row)
        return out


def fold_indices(n: int, folds: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Contiguous blocks of a random permutation; sizes differ by at most 1."""
    return np.array_split(rng.permutation(n), folds)


def _fold_losses(config, crits, restr, Xtr, ytr, Xte, yte):
    model = fit_mle(Dataset(Xtr, ytr))
    mle, C, C_inv = model.beta_mle, model.info_matrix, model.info_inverse
    stat = float(quadratic_form(mle, C_inv, restr))
    rmle = restricted_estimate(mle, C_inv, restr)
    lam, Q = np.linalg.eigh(C)
    d_list = list(config.d_values)
    dopt = float(np.clip(d_optimum_raw(lam, Q.T @ mle), 0.0, 1.0))
    if config.include_d_optimum:
        d_list.append(dopt)
    ell = liu_eigenvalues(lam[None, :], np.array(d_list)[:, None])
    ur = (ell * (Q.T @ mle)[None, :]) @ Q.T
    re = (ell * (Q.T @ rmle)[None, :]) @ Q.T
    q = restr.q
    ts = [1.0, 0.0] + [0.0 if stat < k else 1.0 for k in crits]
    if q >= 3:
        c = q - 2.0
        ts += [1.0 - c / stat if stat > 0 else np.nan, 1.0 - c / stat if stat > c else 0.0]
    else:
        ts += [np.nan, np.nan]
    t = np.array(ts)[:, None, None]
    coefs = re[None] + t * (ur - re)[None]        # (8, n_d, m)
    eta = coefs @ Xte.T                           # (8, n_d, n_test)
    if config.loss == "probability":
        pred = 1.0 / (1.0 + np.exp(-np.clip(eta, -30, 30)))
    else:
        pred = eta
    loss = np.sum((yte - pred) ** 2, axis=-1)
    rejected = np.array([not stat < k for k in crits])
    return loss, rejected, dopt


def _one_repeat(config, data, crits, restr, r):
    n = data.n
    X, y = data.design, data.response
    nd = len(config.d_labels)
    total = np.zeros((len(ROW_LABELS), nd))
    rejections = np.zeros(len(crits), dtype=int)
    dopts = []
    fits = failures = 0
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([config.seed, r])))
    folds = fold_indices(n, config.folds, rng)
    if any(np.unique(np.delete(y, f)).size < 2 for f in folds):
        folds = fold_indices(n, config.folds, rng)  # one resample
    for f in folds:
        train = np.setdiff1d(np.arange(n), f)
        if np.unique(y[train]).size < 2:
            failures += 1
            continue
        try:
            loss, rej, dopt = _fold_losses(config, crits, restr, X[train], y[train], X[f], y[f])
        except (NumericalError, ValueError):
            failures += 1
            continue
        total += loss
        rejections += rej
        dopts.append(dopt)
        fits += 1
    return total, rejections, fits, failures, dopts


def run_cv(data: Dataset, config: CvConfig | None = None, restriction: LinearRestriction | None = None,
           threads: int = 1) -> CvResult:
    """Repeated k-fold CV table; identical output for any ``threads``."""
    config = config or CvConfig()
    if config.standardize:
        data = standardize(data)
    restr = restriction or build_restriction(data.column_names)
    if restr.m != data.m:
        raise ConfigurationError("restriction does not match the design width")
    if restr.q < 3:
        raise ConfigurationError("S and PS rows need q >= 3")
    crits = [chi2_kernels.quantile(restr.q, a) for a in config.alpha_values]

    def work(r):
        return _one_repeat(config, data, crits, restr, r)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(work, range(config.repeats)))
    else:
        parts = [work(r) for r in range(config.repeats)]
    fits = sum(p[2] for p in parts)
    failures = sum(p[3] for p in parts)
    if fits == 0:
        raise NumericalError("every cross-validation fold failed")
    return CvResult(
        config=config,
        totals=np.stack([p[0] for p in parts]),
        rejections=np.sum([p[1] for p in parts], axis=0),
        fits=fits,
        failures=failures,
        d_opt=np.array([d for p in parts for d in p[4]]),
    )
