"""Command-line interface: ``pretest-liu {fit,simulate,risk,cv}``.

Exit codes: 0 success, 2 input error, 3 numerical error, 4 internal error.
Numbers are written with 17 significant digits so every file round-trips.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, heartcv, montecarlo
from .asymptotics import AsymptoticScenario, risk_curve
from .errors import ConfigurationError, DomainError, IngestionError, InputError, NumericalError
from .estimators import KINDS, SHRINKAGE_KINDS, d_optimum, estimate_all
from .glm_core import Dataset, fit_mle
from .restriction import LinearRestriction, test as wald_test

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_INTERNAL = 0, 2, 3, 4

RANGE_HELP = "comma list and/or inclusive ranges start:stop:step"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"pretest-liu: error[input]: {message}", file=sys.stderr)
        raise SystemExit(EXIT_INPUT)


# ---------------------------------------------------------------------------
# Parsing helpers
# ---------------------------------------------------------------------------

def parse_range(text: str) -> list[float]:
    """'0:20:0.5' -> 0, 0.5, ..., 20 (endpoint included within 1e-12); commas join pieces."""
    out = []
    for piece in str(text).split(","):
        piece = piece.strip()
        if not piece:
            continue
        parts = piece.split(":")
        try:
            nums = [float(p) for p in parts]
        except ValueError:
            raise ConfigurationError(f"bad number in range {piece!r}") from None
        if len(nums) == 1:
            out.append(nums[0])
        elif len(nums) == 3:
            start, stop, step = nums
            if step <= 0 or stop < start:
                raise ConfigurationError(f"range {piece!r} needs step > 0 and stop >= start")
            count = int(math.floor((stop - start) / step + 1e-12)) + 1
            vals = [start + i * step for i in range(count)]
            if abs(vals[-1] - stop) <= 1e-12 * max(1.0, abs(stop)):
                vals[-1] = stop
            out.extend(vals)
        else:
            raise ConfigurationError(f"range {piece!r} must be a number or start:stop:step")
    if not out:
        raise ConfigurationError("empty list")
    return out


def parse_ints(text: str) -> list[int]:
    vals = parse_range(text)
    if any(v != int(v) for v in vals):
        raise ConfigurationError(f"expected integers, got {text!r}")
    return [int(v) for v in vals]


def parse_threads(text) -> int:
    if text in (None, "auto"):
        return os.cpu_count() or 1
    try:
        n = int(text)
    except ValueError:
        raise ConfigurationError(f"--threads must be a count or 'auto', got {text!r}") from None
    if n < 1:
        raise ConfigurationError("--threads must be >= 1")
    return n


def parse_d_list(text: str):
    """Numeric d values, optionally with the word 'opt' for the plug-in optimum."""
    pieces = [p.strip() for p in text.split(",") if p.strip()]
    include_opt = any(p.lower() in ("opt", "optimum", "d_optimum") for p in pieces)
    nums = [p for p in pieces if p.lower() not in ("opt", "optimum", "d_optimum")]
    return (tuple(parse_range(",".join(nums))) if nums else ()), include_opt


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    return v


def render(rows: list[dict], metadata: dict, fmt: str) -> str:
    """CSV with '# key: value' metadata lines, or JSON {metadata, rows}."""
    if fmt == "json":
        return json.dumps({"metadata": _jsonable(metadata), "rows": _jsonable(rows)}, indent=1) + "\n"
    buf = io.StringIO()
    for k, v in metadata.items():
        buf.write(f"# {k}: {json.dumps(_jsonable(v), sort_keys=True)}\n")
    if rows:
        fields = list(rows[0])
        for r in rows[1:]:
            fields += [k for k in r if k not in fields]
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(fields)
        for r in rows:
            w.writerow([_fmt(r.get(k)) for k in fields])
    return buf.getvalue()


def read_output(text: str, fmt: str = "csv"):
    """Parse a file written by ``render`` back into (metadata, rows)."""
    if fmt == "json":
        obj = json.loads(text)
        return obj["metadata"], obj["rows"]
    meta, body = {}, []
    for line in text.splitlines():
        if line.startswith("# "):
            key, _, val = line[2:].partition(": ")
            meta[key] = json.loads(val)
        else:
            body.append(line)
    rows = []
    for r in csv.DictReader(body):
        parsed = {}
        for k, v in r.items():
            try:
                parsed[k] = float(v) if v != "" else None
            except ValueError:
                parsed[k] = v
        rows.append(parsed)
    return meta, rows


def _emit(args, rows, metadata, started):
    meta = {"command": args.command, "version": __version__, "seed": args.seed}
    meta.update(metadata)
    # every run-dependent value lives in this single field
    meta["timestamp"] = {
        "utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "wall_time_s": round(time.perf_counter() - started, 3),
    }
    text = render(rows, meta, args.format)
    if args.output in (None, "-"):
        sys.stdout.write(text)
    else:
        try:
            Path(args.output).write_text(text, encoding="utf-8", newline="\n")
        except OSError as exc:
            raise InputError(f"cannot write {args.output}: {exc.strerror}") from exc


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def load_generic(path, response: str | None, intercept: bool = True) -> Dataset:
    """Numeric CSV; ``response`` defaults to the last column."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IngestionError(f"cannot read {path}: {exc.strerror}") from exc
    reader = csv.reader(io.StringIO(text))
    header = [h.strip() for h in next(reader, [])]
    if not header:
        raise IngestionError(f"{path}: empty file")
    response = response or header[-1]
    if response not in header:
        raise IngestionError(f"missing column(s): {response}")
    yi = header.index(response)
    X, y = [], []
    for i, rec in enumerate(reader, start=1):
        if not rec:
            continue
        vals = []
        for name, cell in zip(header, rec):
            if cell.strip() == "":
                raise IngestionError(f"row {i}, column {name}: empty")
            try:
                vals.append(float(cell))
            except ValueError:
                raise IngestionError(f"row {i}, column {name}: cannot parse {cell!r}") from None
        if len(vals) != len(header):
            raise IngestionError(f"row {i}: expected {len(header)} cells, got {len(vals)}")
        y.append(vals[yi])
        X.append(([1.0] if intercept else []) + vals[:yi] + vals[yi + 1:])
    names = (["intercept"] if intercept else []) + [h for h in header if h != response]
    return Dataset(np.array(X), np.array(y), tuple(names))


def _load_fit_data(args) -> Dataset:
    try:
        with open(args.dataset, encoding="utf-8") as fh:
            first = fh.readline().lower()
    except OSError as exc:
        raise IngestionError(f"cannot read {args.dataset}: {exc.strerror}") from exc
    if all(c in first for c in heartcv.COLUMNS) and args.response in (None, "chd"):
        return heartcv.load_dataset(args.dataset)
    return load_generic(args.dataset, args.response, not args.no_intercept)


def cmd_fit(args) -> tuple[list, dict]:
    data = _load_fit_data(args)
    if args.restrict:
        names = [s.strip() for s in args.restrict.split(",") if s.strip()]
        restr = heartcv.build_restriction(data.column_names, names)
    else:
        restr = heartcv.build_restriction(data.column_names)
    kinds = tuple(k.strip().upper() for k in args.estimators.split(",")) if args.estimators else KINDS
    unknown = [k for k in kinds if k not in KINDS]
    if unknown:
        raise ConfigurationError(f"unknown estimator(s): {', '.join(unknown)}")
    if restr.q < 3 and ("S" in kinds or "PS" in kinds):
        raise DomainError(f"q ≥ 3 required for S and PS (q = {restr.q})")
    model = fit_mle(data)
    dopt = d_optimum(model)
    dopt_raw = d_optimum(model, clamp=False)
    d = dopt if args.d in ("opt", "optimum") else float(args.d)
    if not 0.0 <= d <= 1.0:
        raise ConfigurationError("d must lie in [0, 1]")
    result = wald_test(model, restr, args.alpha)
    est = estimate_all(model, restr, d, args.alpha, kinds)
    rows = []
    for kind in kinds:
        row = {"estimator": kind}
        row.update({name: float(v) for name, v in zip(data.column_names, est[kind].coefficients)})
        rows.append(row)
    meta = {
        "dataset": str(args.dataset), "n": data.n, "m": data.m, "q": restr.q,
        "restricted": [data.column_names[int(np.argmax(r))] for r in restr.H],
        "d": d, "d_optimum": dopt, "d_optimum_raw": dopt_raw,
        "d_optimum_clamped": dopt_raw != dopt, "alpha": args.alpha,
        "statistic": result.statistic, "critical_value": result.critical_value,
        "reject": result.reject, "converged": model.converged, "iterations": model.iterations,
        "log_likelihood": model.log_likelihood,
    }
    return rows, meta


def _sim_config_kwargs(args) -> dict:
    base = {}
    if args.config:
        try:
            base = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(base, dict):
            raise ConfigurationError("config file must hold a JSON object")
    flags = {
        "n": args.n, "reps": args.reps, "correlation_base": args.correlation_base,
        "allocation": args.allocation,
        "alpha_values": tuple(parse_range(args.alpha)) if args.alpha else None,
        "delta_star_grid": tuple(parse_range(args.grid)) if args.grid else None,
    }
    if args.d:
        flags["d_values"], flags["include_d_optimum"] = parse_d_list(args.d)
    base.update({k: v for k, v in flags.items() if v is not None})
    if args.q:
        base["q"] = parse_ints(args.q)
    base.setdefault("q", [3, 5])
    base["q"] = [base["q"]] if isinstance(base["q"], int) else list(base["q"])
    base["seed"] = args.seed
    return base


def cmd_simulate(args) -> tuple[list, dict]:
    kw = _sim_config_kwargs(args)
    qs = kw.pop("q")
    known = set(montecarlo.SimConfig.__dataclass_fields__)
    extra = set(kw) - known
    if extra:
        raise ConfigurationError(f"unknown config key(s): {', '.join(sorted(extra))}")
    rows, configs = [], []
    threads = parse_threads(args.threads)
    for q in qs:
        cfg = montecarlo.SimConfig(q=q, **kw)
        res = montecarlo.run_simulation(cfg, threads=threads)
        for r in res.rows():
            r["d"] = "opt" if r["d"] == montecarlo.OPT else r["d"]
            rows.append(r)
        configs.append({k: getattr(cfg, k) for k in cfg.__dataclass_fields__})
    return rows, {"config": configs}


def _load_matrix(path) -> np.ndarray:
    try:
        M = np.loadtxt(path, delimiter="," if str(path).endswith(".csv") else None, ndmin=2)
    except (OSError, ValueError) as exc:
        raise IngestionError(f"cannot read matrix {path}: {exc}") from exc
    return M


def build_scenario(args) -> AsymptoticScenario:
    if args.D:
        D = _load_matrix(args.D)
    else:
        lam = parse_range(args.eigenvalues)
        if any(v <= 0 for v in lam):
            raise ConfigurationError("eigenvalues must be positive")
        D = np.diag(lam)
    m = D.shape[0]
    if D.shape != (m, m):
        raise ConfigurationError("D must be square")
    beta = np.array(parse_range(args.beta)) if args.beta else np.concatenate([[1.5, 2.5], np.zeros(max(m - 2, 0))])[:m]
    if beta.size != m:
        raise ConfigurationError(f"beta has {beta.size} entries, D is {m}x{m}")
    if args.H:
        H = _load_matrix(args.H)
        h = np.array(parse_range(args.h)) if args.h else np.zeros(H.shape[0])
        restr = LinearRestriction(H, h)
    else:
        idx = parse_ints(args.restrict) if args.restrict else list(range(min(2, m - 1), m))
        if any(not 0 <= i < m for i in idx):
            raise ConfigurationError("restricted indices out of range")
        restr = LinearRestriction.zero_coefficients(m, idx)
    gamma = np.array(parse_range(args.gamma)) if args.gamma else np.ones(restr.q)
    if gamma.size != restr.q:
        raise ConfigurationError(f"gamma must have {restr.q} entries")
    if not 0.0 <= args.d <= 1.0:
        raise ConfigurationError("d must lie in [0, 1]")
    return AsymptoticScenario(D, beta, restr, gamma, args.d, args.alpha)


def cmd_risk(args) -> tuple[list, dict]:
    sc = build_scenario(args)
    kinds = tuple(k.strip().upper() for k in args.kinds.split(",")) if args.kinds else SHRINKAGE_KINDS
    bad = [k for k in kinds if k not in SHRINKAGE_KINDS]
    if bad:
        raise ConfigurationError(f"unknown kind(s): {', '.join(bad)}")
    if sc.q < 3 and ("S" in kinds or "PS" in kinds):
        raise DomainError(f"q ≥ 3 required for S and PS (q = {sc.q})")
    grid = parse_range(args.grid)
    if any(g > 0 for g in grid) and not np.any(sc.gamma):
        raise ConfigurationError("gamma direction must be nonzero for positive grid values")
    report = risk_curve(kinds, sc, grid)
    rows = []
    for r in report.rows:
        row = {"kind": r["kind"], "delta2": r["delta2"], "risk": r["risk"],
               "relative_risk": r["relative_risk"], "quadratic_bias": r["quadratic_bias"]}
        row.update({f"bias_{j}": float(b) for j, b in enumerate(r["bias"])})
        rows.append(row)
    meta = {"m": sc.m, "q": sc.q, "d": sc.d, "alpha": sc.alpha,
            "eigenvalues_D": np.linalg.eigvalsh(sc.D), "beta": sc.beta,
            "H": sc.restriction.H, "gamma_direction": sc.gamma}
    return rows, meta


def cmd_cv(args) -> tuple[list, dict]:
    data = heartcv.load_dataset(args.dataset)
    kw = {"folds": args.folds, "repeats": args.repeats, "seed": args.seed,
          "loss": args.loss, "standardize": args.standardize}
    if args.d:
        kw["d_values"], kw["include_d_optimum"] = parse_d_list(args.d)
    if args.alpha:
        kw["alpha_values"] = tuple(parse_range(args.alpha))
    cfg = heartcv.CvConfig(**kw)
    res = heartcv.run_cv(data, cfg, threads=parse_threads(args.threads))
    meta = {
        "dataset": str(args.dataset), "n": data.n, "folds": cfg.folds, "repeats": cfg.repeats,
        "loss": cfg.loss, "standardize": cfg.standardize, "alpha_values": cfg.alpha_values,
        "rejections": dict(zip([f"PTE{i + 1}" for i in range(4)], res.rejections.tolist())),
        "fits": res.fits, "failures": res.failures,
        "d_optimum_mean": float(np.mean(res.d_opt)) if res.d_opt.size else None,
    }
    return res.rows(), meta


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master RNG seed (default 0)")
    common.add_argument("--threads", default="1", help="worker threads: a count or 'auto'")
    common.add_argument("--output", "-o", default=None, help="output path (default stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")

    p = _Parser(prog="pretest-liu", description="Pretest and Stein-type almost unbiased Liu estimators for logistic regression.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    f = sub.add_parser("fit", parents=[common], help="fit all estimators to a CSV dataset")
    f.add_argument("dataset")
    f.add_argument("--restrict", help="comma list of columns restricted to zero (default: heart restriction)")
    f.add_argument("--d", default="opt", help="biasing parameter in [0,1] or 'opt'")
    f.add_argument("--alpha", type=float, default=0.05)
    f.add_argument("--estimators", help="comma list from " + ",".join(KINDS))
    f.add_argument("--response", help="response column for generic CSVs (default: last column)")
    f.add_argument("--no-intercept", action="store_true")

    s = sub.add_parser("simulate", parents=[common], help="Monte Carlo MSE / RMSE study")
    s.add_argument("--config", help="JSON file of SimConfig fields; flags override it")
    s.add_argument("--q", help="restriction sizes (default 3,5)")
    s.add_argument("--n", type=int)
    s.add_argument("--reps", type=int)
    s.add_argument("--d", help="d values, add 'opt' for the plug-in optimum; " + RANGE_HELP + ", e.g. 0.1:0.9:0.2,opt")
    s.add_argument("--alpha", help="alpha values; " + RANGE_HELP + ", e.g. 0.01,0.05")
    s.add_argument("--grid", help="Delta* values; " + RANGE_HELP + ", e.g. 0:20:0.5")
    s.add_argument("--correlation-base", type=float)
    s.add_argument("--allocation", choices=("equal", "single"))

    r = sub.add_parser("risk", parents=[common], help="asymptotic risk curves")
    g = r.add_mutually_exclusive_group()
    g.add_argument("--eigenvalues", default="0.3,0.6,1,1.5,2.5", help="diagonal D (default 0.3,0.6,1,1.5,2.5)")
    g.add_argument("--D", help="file holding the full D matrix")
    r.add_argument("--beta", help="true coefficients (default 1.5,2.5,0,...)")
    r.add_argument("--restrict", help="0-based indices restricted to zero (default 2..m-1)")
    r.add_argument("--H", help="file holding H (overrides --restrict)")
    r.add_argument("--h", help="right-hand side for --H (default 0)")
    r.add_argument("--gamma", help="direction of the local alternative (default ones)")
    r.add_argument("--d", type=float, default=0.5)
    r.add_argument("--alpha", type=float, default=0.05)
    r.add_argument("--grid", default="0:20:1", help="Delta^2 values; " + RANGE_HELP + ", e.g. 0:20:0.5")
    r.add_argument("--kinds", help="comma list from " + ",".join(SHRINKAGE_KINDS))

    c = sub.add_parser("cv", parents=[common], help="repeated k-fold CV table on the heart data")
    c.add_argument("dataset")
    c.add_argument("--folds", type=int, default=10)
    c.add_argument("--repeats", type=int, default=500)
    c.add_argument("--d", help="d values, add 'opt' for the plug-in optimum (default 0.1,0.5,0.7,0.9,0.99,opt)")
    c.add_argument("--alpha", help="four alpha values for PTE1..PTE4")
    c.add_argument("--loss", choices=heartcv.LOSSES, default="probability")
    c.add_argument("--standardize", action="store_true")
    return p


COMMANDS = {"fit": cmd_fit, "simulate": cmd_simulate, "risk": cmd_risk, "cv": cmd_cv}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    started = time.perf_counter()
    try:
        rows, meta = COMMANDS[args.command](args)
        _emit(args, rows, meta, started)
    except InputError as exc:
        print(f"pretest-liu: error[input]: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"pretest-liu: error[numeric]: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except Exception as exc:  # noqa: BLE001
        print(f"pretest-liu: error[internal]: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
