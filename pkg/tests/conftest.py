import csv

import numpy as np
import pytest

from pretest_liu.glm_core import Dataset
from pretest_liu.heartcv import COLUMNS


def logistic_data(n, m, seed, intercept=True, scale=0.7):
    """Well-conditioned synthetic logistic data."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, m))
    if intercept:
        X[:, 0] = 1.0
    beta = rng.normal(0, scale, m)
    y = (rng.random(n) < 1 / (1 + np.exp(-X @ beta))).astype(float)
    return Dataset(X, y)


def write_heart_like(path, n=462, seed=0):
    """Synthetic file with the heart schema (not the real data)."""
    rng = np.random.default_rng(seed)
    cols = {
        "sbp": rng.normal(138, 20, n).round(0),
        "tobacco": rng.gamma(1.0, 3.6, n).round(2),
        "ldl": rng.normal(4.7, 2.0, n).round(2),
        "adiposity": rng.normal(25, 7.8, n).round(2),
        "famhist": rng.choice(["Present", "Absent"], n),
        "typea": rng.normal(53, 10, n).round(0),
        "obesity": rng.normal(26, 4, n).round(2),
        "alcohol": rng.gamma(0.7, 24, n).round(2),
        "age": rng.integers(15, 65, n),
    }
    eta = (-6 + 0.08 * cols["tobacco"] + 0.18 * cols["ldl"] + 0.9 * (cols["famhist"] == "Present")
           + 0.04 * cols["typea"] + 0.045 * cols["age"])
    cols["chd"] = (rng.random(n) < 1 / (1 + np.exp(-eta))).astype(int)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for i in range(n):
            w.writerow([cols[c][i] for c in COLUMNS])
    return path


@pytest.fixture
def heart_like(tmp_path):
    return write_heart_like(tmp_path / "heart_like.csv")


# criterion id -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if passed else 'FAIL'}  {detail}")
