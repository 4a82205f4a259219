"""Command-line front end.

Subcommands: generate, interval, gridsearch, evaluate, featsel, conformal,
forecast. Every command prints its resolved configuration, writes its
outputs atomically, and removes whatever it already wrote if a later step
fails. Reports are ``<out>.report.txt`` plus a CSV twin ``<out>.report.csv``.

Randomness comes from one ``--seed``, split into named child streams with
``numpy.random.SeedSequence.spawn``; the derived seeds are listed in each
report. Wall-clock timings vary between runs, so reports contain them only
with ``--timings``.

Options may also come from a ``--config`` file of ``key = value`` lines
whose keys are the long flag names (dashes or underscores). Precedence:
command-line flag > config file > built-in default.
"""
from __future__ import annotations

import argparse
import math
import os
import re
import sys
import time

import numpy as np

from . import __version__
from .conformal import conformalize, split_train_calibrate
from .data import (
    AD_IDS, Dataset, generate_ad, generate_sparse_linear, holdout_split, read_csv, write_csv,
    write_dataset,
)
from .featsel import refit_on_selection, select_features
from .forecast import ForecastConfig, chrono_split, forecast_pi, read_series
from .interval import (
    DEFAULT_QBAR_GRID, METHODS, PredictionInterval, build_interval, check_levels, grid_search,
    tune_qbar,
)
from .kernels import KernelSpec
from .metrics import ExperimentReport, crossing_fraction, evaluate_interval, stable_std
from .report import Report, format_value
from .solvers import SolverError

EXIT_OK, EXIT_FAILURE, EXIT_INPUT = 0, 1, 2

RESULT_FIELDS = ("picp", "mpiw", "pice", "cp_lower", "cp_upper", "sparsity_lower_pct",
                 "sparsity_upper_pct", "rmse_lower", "rmse_upper", "crossing_fraction",
                 "train_seconds")


class InputError(ValueError):
    """Bad user input: unreadable data, unknown column, invalid parameter."""


# --- argument types -----------------------------------------------------------

def parse_grid(text) -> tuple:
    """``"0.5,1,2"``, ``"0.5 1 2"`` or ``"pow2:-8:8"`` (powers of two, inclusive)."""
    if isinstance(text, (list, tuple)):
        return tuple(float(v) for v in text)
    text = str(text).strip()
    if text.startswith("pow2:"):
        try:
            lo, hi = (int(v) for v in text[5:].split(":"))
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad power grid {text!r}; use pow2:LO:HI") from None
        if lo > hi:
            raise argparse.ArgumentTypeError(f"empty power grid {text!r}")
        return tuple(2.0 ** k for k in range(lo, hi + 1))
    try:
        vals = tuple(float(v) for v in re.split(r"[,\s]+", text) if v)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty grid")
    return vals


def parse_int_list(text) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(int(v) for v in text)
    try:
        return tuple(int(v) for v in re.split(r"[,\s]+", str(text)) if v)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from None


def parse_qbar(text):
    if str(text).strip().lower() == "tune":
        return "tune"
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"q-bar must be a number or 'tune', got {text!r}") from None


def parse_bool(text) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise InputError(f"not a boolean: {text!r}")


# --- seeds --------------------------------------------------------------------

def derive_seeds(seed: int, names) -> dict:
    """One independent child seed per name, from a single root seed."""
    children = np.random.SeedSequence(int(seed)).spawn(len(names))
    return {n: int(c.generate_state(1, np.uint64)[0] >> np.uint64(1)) for n, c in zip(names, children)}


# --- parser -------------------------------------------------------------------

def _common(p: argparse.ArgumentParser, out_required: bool = True):
    p.add_argument("--config", help="key = value file; flags override it")
    p.add_argument("--seed", type=int, default=0, help="root seed for every random choice")
    p.add_argument("--out", required=out_required, help="output prefix (file path for generate)")
    p.add_argument("--timings", action=argparse.BooleanOptionalAction, default=False,
                   help="include wall-clock timings in reports (makes them run-dependent)")


def _data_args(p: argparse.ArgumentParser, required: bool = True):
    p.add_argument("--data", required=required, help="input CSV (features..., target)")
    p.add_argument("--header", action=argparse.BooleanOptionalAction, default=True,
                   help="first CSV row holds column names")
    p.add_argument("--target", help="target column name or index (default: last)")
    p.add_argument("--columns", help="comma-separated feature names or indices to use")


def _model_args(p: argparse.ArgumentParser, methods=METHODS, default="ssvqr"):
    p.add_argument("--method", choices=methods, default=default)
    p.add_argument("--coverage", type=float, default=0.95, help="target coverage 1 - alpha")
    p.add_argument("--kernel", choices=("rbf", "linear"), default="rbf")
    p.add_argument("--tube-r", type=float, default=0.5)
    p.add_argument("--tube-delta", type=float, default=0.0)
    p.add_argument("--tube-epochs", type=int, default=500)
    p.add_argument("--tol", type=float, help="solver tolerance override")


def _split_args(p: argparse.ArgumentParser):
    p.add_argument("--train-frac", type=float, default=0.7,
                   help="leading fraction of rows used for training when --test is absent")
    p.add_argument("--n-train", type=int, help="leading row count for training (overrides --train-frac)")
    p.add_argument("--test", help="separate test CSV; then all of --data trains")
    p.add_argument("--val", help="separate validation CSV for tuning")
    p.add_argument("--val-frac", type=float, default=0.1,
                   help="random share of training rows held out for tuning when --val is absent")


def _grid_args(p: argparse.ArgumentParser):
    p.add_argument("--c-grid", type=parse_grid, default="pow2:-8:8")
    p.add_argument("--width-grid", type=parse_grid, default="pow2:-8:8")
    p.add_argument("--n-jobs", type=int, default=1)


def build_parser():
    parser = argparse.ArgumentParser(prog="svmpi", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"svmpi {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    p = sub.add_parser("generate", help="write an artificial dataset to CSV")
    _common(p)
    p.add_argument("--ad", required=True, help=f"one of {', '.join(AD_IDS)} or 'sparse'")
    p.add_argument("--m", type=int, required=True, help="number of rows")
    p.add_argument("--noise-variance", action=argparse.BooleanOptionalAction, default=False,
                   help="read N(0, s) as variance s instead of standard deviation")
    p.add_argument("--features", type=int, default=100, help="feature count for 'sparse'")
    p.add_argument("--relevant", type=int, default=5, help="relevant features for 'sparse'")
    subs["generate"] = p

    p = sub.add_parser("interval", help="tune, fit and evaluate a prediction interval")
    _common(p)
    _data_args(p)
    _model_args(p)
    _split_args(p)
    _grid_args(p)
    p.add_argument("--q-bar", type=parse_qbar, default=0.025, help="lower quantile level or 'tune'")
    p.add_argument("--q-bar-grid", type=parse_grid, default=",".join(map(str, DEFAULT_QBAR_GRID)))
    p.add_argument("--save-model", action=argparse.BooleanOptionalAction, default=False)
    subs["interval"] = p

    p = sub.add_parser("gridsearch", help="report the validation grid for (C, width)")
    _common(p)
    _data_args(p)
    _model_args(p)
    _split_args(p)
    _grid_args(p)
    p.add_argument("--q-bar", type=float, default=0.025)
    subs["gridsearch"] = p

    p = sub.add_parser("evaluate", help="score a saved interval model or a bounds CSV")
    _common(p)
    _data_args(p, required=False)
    p.add_argument("--model", help="stem of a saved interval (from interval --save-model)")
    p.add_argument("--bounds", help="bounds CSV with columns index,y,lower,upper")
    p.add_argument("--coverage", type=float, help="target coverage (default: the model's)")
    subs["evaluate"] = p

    p = sub.add_parser("featsel", help="linear sparse-SVQR feature selection")
    _common(p)
    _data_args(p)
    p.add_argument("--coverage", type=float, default=0.95)
    p.add_argument("--q-bar", type=float, default=0.025)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--eps", type=float, help="absolute weight threshold")
    p.add_argument("--eps-rel", type=float, default=1e-4,
                   help="threshold relative to the largest weight when --eps is absent")
    p.add_argument("--train-frac", type=float, default=0.7)
    p.add_argument("--test", help="separate test CSV; then all of --data trains")
    subs["featsel"] = p

    p = sub.add_parser("conformal", help="split conformal calibration, optionally repeated")
    _common(p)
    _data_args(p, required=False)
    p.add_argument("--ad", help="draw data from a generator instead of --data")
    p.add_argument("--m", type=int, default=200, help="rows per draw in generator mode")
    p.add_argument("--m-test", type=int, default=500, help="test rows per draw in generator mode")
    p.add_argument("--method", choices=("svqr", "ssvqr"), default="svqr")
    p.add_argument("--alpha", type=float, default=0.1, help="miscoverage level")
    p.add_argument("--q-bar", type=float, help="lower quantile level (default alpha / 2)")
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--width", type=float, default=1.0)
    p.add_argument("--kernel", choices=("rbf", "linear"), default="rbf")
    p.add_argument("--calib-frac", type=float, default=0.5)
    p.add_argument("--train-frac", type=float, default=0.7)
    p.add_argument("--test", help="separate test CSV; then all of --data is split")
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--resample", action=argparse.BooleanOptionalAction, default=False,
                   help="new split (and new draw in generator mode) per trial")
    subs["conformal"] = p

    p = sub.add_parser("forecast", help="one-step-ahead interval forecasts of a series")
    _common(p)
    p.add_argument("--data", required=True, help="series CSV")
    p.add_argument("--header", action=argparse.BooleanOptionalAction, default=False)
    p.add_argument("--column", help="value column name or index (default: last)")
    p.add_argument("--time-column", help="optional timestamp column name or index")
    _model_args(p)
    _grid_args(p)
    p.add_argument("--lags", type=parse_int_list, default="2,4,8,12")
    p.add_argument("--q-bar", type=float, help="lower quantile level (default centred)")
    p.add_argument("--train-frac", type=float, default=0.7)
    p.add_argument("--val-frac", type=float, default=0.1)
    subs["forecast"] = p
    return parser, subs


def read_config(path) -> dict:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise InputError(f"{path}:{n}: expected 'key = value'")
            k, v = line.split("=", 1)
            out[k.strip().replace("-", "_")] = v.strip()
    return out


def _apply_config(sub: argparse.ArgumentParser, values: dict, command: str) -> None:
    """Install config-file values as subcommand defaults.

    Accepts exactly what a report's config section prints, so a report can be
    fed back as a config file: ``command`` must name the running subcommand
    and ``NA`` stands for an unset option.
    """
    actions = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, raw in values.items():
        if key == "command":
            if raw != command:
                raise InputError(f"config is for command {raw!r}, not {command!r}")
            continue
        if key in ("config", "help") or key not in actions:
            raise InputError(f"unknown config key {key!r}")
        act = actions[key]
        if raw == "NA":
            if act.required:
                raise InputError(f"config key {key!r} cannot be NA")
            defaults[key] = None
            continue
        if isinstance(act, argparse.BooleanOptionalAction):
            val = parse_bool(raw)
        elif act.type is not None:
            try:
                val = act.type(raw)
            except (argparse.ArgumentTypeError, ValueError) as exc:
                raise InputError(f"config key {key!r}: {exc}") from None
        else:
            val = raw
        if act.choices is not None and val not in act.choices:
            raise InputError(f"config key {key!r}: {val!r} not in {list(act.choices)}")
        defaults[key] = val
        act.required = False
    sub.set_defaults(**defaults)


def parse_args(argv=None):
    parser, subs = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    # required flags may come from the config file, so read it before the full parse
    command = next((a for a in argv if not a.startswith("-")), None)
    if command in subs:
        pre = argparse.ArgumentParser(add_help=False)
        pre.add_argument("--config")
        known, _ = pre.parse_known_args(argv[argv.index(command) + 1:])
        if known.config:
            _apply_config(subs[command], read_config(known.config), command)
    return parser.parse_args(argv)


def resolved_config(args) -> list:
    skip = {"config"}
    return [(k, v) for k, v in sorted(vars(args).items()) if k not in skip]


# --- helpers ------------------------------------------------------------------

class Outputs:
    """Tracks written files so a failed run can remove them."""

    def __init__(self):
        self.paths: list[str] = []

    def add(self, *paths):
        self.paths.extend(os.fspath(p) for p in paths)

    def remove_all(self):
        for p in self.paths:
            try:
                os.unlink(p)
            except FileNotFoundError:
                pass


def _check_out_dir(prefix):
    d = os.path.dirname(os.path.abspath(prefix))
    if not os.path.isdir(d):
        raise InputError(f"output directory {d} does not exist")


def load_data(args, path=None) -> Dataset:
    path = path or args.data
    if not os.path.exists(path):
        raise InputError(f"{path}: no such file")
    try:
        data = read_csv(path, header=args.header, target=args.target)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    if getattr(args, "columns", None):
        data = data.select_features(_column_selection(data, args.columns))
    return data


def _column_selection(data: Dataset, spec: str) -> list:
    names = data.names()
    cols = []
    for tok in (t.strip() for t in spec.split(",") if t.strip()):
        if tok in names:
            cols.append(names.index(tok))
        elif tok.lstrip("-").isdigit() and -len(names) <= int(tok) < len(names):
            cols.append(int(tok) % len(names))
        else:
            raise InputError(f"unknown column selector {tok!r}; columns are {names}")
    if not cols:
        raise InputError("empty column selection")
    return cols


def _check_range(name, value, lo, hi, lo_open=True, hi_open=True):
    ok_lo = value > lo if lo_open else value >= lo
    ok_hi = value < hi if hi_open else value <= hi
    if not (ok_lo and ok_hi and math.isfinite(value)):
        raise InputError(f"{name} = {value} out of range")


def _positive_grid(name, grid):
    if any(not (v > 0 and math.isfinite(v)) for v in grid):
        raise InputError(f"{name} values must be positive and finite")


def _train_test(args, data: Dataset):
    if getattr(args, "test", None):
        return data, load_data(args, args.test)
    n_train = args.n_train if getattr(args, "n_train", None) is not None else int(
        math.floor(args.train_frac * len(data)))
    if not 2 <= n_train <= len(data) - 1:
        raise InputError(f"training part of {n_train} rows leaves no test rows (m = {len(data)})")
    idx = np.arange(len(data))
    return data.subset(idx[:n_train]), data.subset(idx[n_train:])


def _fit_options(args, seeds) -> dict:
    kw = {}
    if args.method == "tube":
        kw = {"r": args.tube_r, "delta": args.tube_delta, "max_epochs": args.tube_epochs,
              "seed": seeds["tube_init"]}
    elif args.tol is not None and args.method in ("svqr", "ssvqr"):
        kw = {"tol": args.tol}
    return kw


def _results(sec, rep: ExperimentReport, timings: bool):
    d = rep.as_dict()
    for k in RESULT_FIELDS:
        sec.add(k, d[k] if (k != "train_seconds" or timings) else "omitted")


def _write_bounds(path, y, lower, upper, outputs, first="y"):
    rows = ((i, float(a), float(b), float(c)) for i, (a, b, c) in enumerate(zip(y, lower, upper)))
    write_csv(path, ["index", first, "lower", "upper"], rows)
    outputs.add(path)


def _new_report(args, command, seeds) -> Report:
    rep = Report(command)
    rep.section("config", resolved_config(args))
    rep.section("seeds", [("root", args.seed)] + list(seeds.items()))
    return rep


# --- commands -----------------------------------------------------------------

def cmd_generate(args, outputs: Outputs) -> int:
    _check_out_dir(args.out)
    if args.m < 1:
        raise InputError("--m must be positive")
    seeds = derive_seeds(args.seed, ["data"])
    if args.ad.lower() == "sparse":
        if args.features < 1 or not 0 <= args.relevant <= args.features:
            raise InputError("need --features >= 1 and 0 <= --relevant <= --features")
        data = generate_sparse_linear(args.m, args.features, args.relevant, seed=seeds["data"])
    else:
        if args.ad.upper() not in AD_IDS:
            raise InputError(f"unknown dataset {args.ad!r}; expected one of {', '.join(AD_IDS)} or sparse")
        data = generate_ad(args.ad, args.m, seed=seeds["data"], variance=args.noise_variance)
    write_dataset(args.out, data)
    outputs.add(args.out)
    return EXIT_OK


def _validate_interval_args(args):
    _check_range("--coverage", args.coverage, 0.0, 1.0)
    _check_range("--val-frac", args.val_frac, 0.0, 1.0)
    _check_range("--train-frac", args.train_frac, 0.0, 1.0, hi_open=False)
    _positive_grid("--c-grid", args.c_grid)
    _positive_grid("--width-grid", args.width_grid)
    if args.n_jobs == 0:
        raise InputError("--n-jobs must be nonzero")
    q = getattr(args, "q_bar", None)
    if isinstance(q, float) and args.method in ("svqr", "ssvqr"):
        try:
            check_levels(args.coverage, q)
        except ValueError as exc:
            raise InputError(str(exc)) from None
    if args.method == "tube" and (args.tube_epochs < 1 or not 0 <= args.tube_r <= 1 or args.tube_delta < 0):
        raise InputError("tube needs --tube-epochs >= 1, --tube-r in [0, 1], --tube-delta >= 0")


def _tuning_parts(args, train: Dataset, seeds):
    if args.val:
        return train, load_data(args, args.val)
    if len(train) < 3:
        raise InputError("too few training rows to hold out a validation part")
    return holdout_split(train, args.val_frac, seed=seeds["holdout"])


def _centred(coverage):
    return (1.0 - coverage) / 2.0


def _select(args, train, seeds):
    """Tune on (fit, val); returns (c, width, q_bar, grid result, q table, n_fit, n_val)."""
    fit, val = _tuning_parts(args, train, seeds)
    kw = _fit_options(args, seeds)
    q_req = args.q_bar
    q0 = _centred(args.coverage) if (q_req == "tune" or args.method in ("lssvr", "tube")) else q_req
    gs = grid_search(fit, val, args.coverage, q0, args.method, args.c_grid, args.width_grid,
                     args.kernel, n_jobs=args.n_jobs, **kw)
    q_final, q_table = q0, None
    if q_req == "tune":
        if args.method not in ("svqr", "ssvqr"):
            raise InputError("--q-bar tune applies to svqr and ssvqr only")
        q_final, _, q_table = tune_qbar(fit, val, args.coverage, args.q_bar_grid, args.method,
                                        gs.c, KernelSpec(args.kernel, gs.width), **kw)
    return gs, q_final, q_table, len(fit), len(val)


def cmd_interval(args, outputs: Outputs) -> int:
    _validate_interval_args(args)
    _check_out_dir(args.out)
    seeds = derive_seeds(args.seed, ["holdout", "tube_init"])
    data = load_data(args)
    train, test = _train_test(args, data)
    gs, q_bar, q_table, n_fit, n_val = _select(args, train, seeds)
    kernel = KernelSpec(args.kernel, gs.width)
    t0 = time.perf_counter()
    pi = build_interval(args.method, train, args.coverage, q_bar, gs.c, kernel,
                        **_fit_options(args, seeds))
    elapsed = time.perf_counter() - t0
    rep_metrics = pi.evaluate(test)
    rep_metrics.train_seconds = elapsed

    rep = _new_report(args, "interval", seeds)
    rep.section("data", [("n_train", len(train)), ("n_fit", n_fit), ("n_val", n_val),
                         ("n_test", len(test)), ("n_features", train.n_features)])
    rep.section("selection", [("c", gs.c), ("width", gs.width), ("q_bar", q_bar),
                              ("levels", list(pi.levels) if args.method in ("svqr", "ssvqr") else "NA"),
                              ("grid_points", len(gs.table)), ("grid_failures", len(gs.failures))])
    if q_table:
        rep.section("q_bar_tuning", columns=["q_bar", "val_picp", "val_mpiw"], rows=q_table)
    _results(rep.section("results"), rep_metrics, args.timings)

    lo, hi = pi.bounds(test.inputs)
    _write_bounds(f"{args.out}.bounds.csv", test.targets, lo, hi, outputs)
    if args.save_model:
        outputs.add(*pi.save(f"{args.out}.model"))
    outputs.add(*rep.write(args.out))
    return EXIT_OK


def cmd_gridsearch(args, outputs: Outputs) -> int:
    _validate_interval_args(args)
    _check_out_dir(args.out)
    seeds = derive_seeds(args.seed, ["holdout", "tube_init"])
    data = load_data(args)
    if args.test or args.n_train is not None or args.train_frac < 1:
        train, _ = _train_test(args, data)
    else:
        train = data
    gs, q_bar, _, n_fit, n_val = _select(args, train, seeds)
    rep = _new_report(args, "gridsearch", seeds)
    rep.section("data", [("n_fit", n_fit), ("n_val", n_val)])
    rep.section("selection", [("c", gs.c), ("width", gs.width), ("q_bar", q_bar),
                              ("grid_points", len(gs.table)), ("grid_failures", len(gs.failures))])
    rows = sorted(gs.table, key=lambda r: (r[1], r[0]))
    rep.section("grid", columns=["c", "width", "val_pice", "val_mpiw", "val_picp"], rows=rows)
    if gs.failures:
        rep.section("failures", columns=["c", "width", "message"], rows=gs.failures)
    path = f"{args.out}.grid.csv"
    write_csv(path, ["c", "width", "val_pice", "val_mpiw", "val_picp"], rows)
    outputs.add(path)
    outputs.add(*rep.write(args.out))
    return EXIT_OK


def cmd_evaluate(args, outputs: Outputs) -> int:
    _check_out_dir(args.out)
    if bool(args.model) == bool(args.bounds):
        raise InputError("give exactly one of --model (with --data) or --bounds")
    rep = _new_report(args, "evaluate", {})
    if args.model:
        if not args.data:
            raise InputError("--model needs --data")
        if not os.path.exists(f"{args.model}.json"):
            raise InputError(f"{args.model}.json: no such file")
        pi = PredictionInterval.load(args.model)
        data = load_data(args)
        if args.coverage is not None:
            _check_range("--coverage", args.coverage, 0.0, 1.0)
            pi.coverage_target = args.coverage
        lo, hi = pi.bounds(data.inputs)
        res = evaluate_interval(lo, hi, data.targets, pi.coverage_target)
        res.crossing_fraction = crossing_fraction(*pi.raw_bounds(data.inputs))
        _write_bounds(f"{args.out}.bounds.csv", data.targets, lo, hi, outputs)
        rep.section("model", [("method", pi.method), ("q_bar", pi.q_bar),
                              ("conformal_offset", pi.conformal_offset)])
    else:
        if args.coverage is None:
            raise InputError("--bounds needs --coverage")
        _check_range("--coverage", args.coverage, 0.0, 1.0)
        if not os.path.exists(args.bounds):
            raise InputError(f"{args.bounds}: no such file")
        table = read_csv(args.bounds, header=True)
        names = table.names() + [table.target_name]
        cols = {n: j for j, n in enumerate(names)}
        full = np.column_stack([table.inputs, table.targets])
        need = [n for n in ("lower", "upper") if n not in cols]
        ycol = "y" if "y" in cols else ("y_true" if "y_true" in cols else None)
        if need or ycol is None:
            raise InputError(f"{args.bounds}: needs columns y (or y_true), lower, upper")
        res = evaluate_interval(full[:, cols["lower"]], full[:, cols["upper"]], full[:, cols[ycol]],
                                args.coverage)
    _results(rep.section("results"), res, False)
    outputs.add(*rep.write(args.out))
    return EXIT_OK


def cmd_featsel(args, outputs: Outputs) -> int:
    _check_range("--coverage", args.coverage, 0.0, 1.0)
    try:
        check_levels(args.coverage, args.q_bar)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    if not args.c > 0:
        raise InputError("--c must be positive")
    if args.eps is not None and args.eps < 0:
        raise InputError("--eps must be nonnegative")
    if args.eps_rel < 0:
        raise InputError("--eps-rel must be nonnegative")
    _check_out_dir(args.out)
    data = load_data(args)
    if args.test:
        train, test = _train_test(args, data)
    else:
        _check_range("--train-frac", args.train_frac, 0.0, 1.0)
        train, test = _train_test(args, data)
    t0 = time.perf_counter()
    sel = select_features(train, args.coverage, args.q_bar, eps=args.eps, c=args.c,
                          eps_rel=args.eps_rel)
    t_select = time.perf_counter() - t0
    rep = _new_report(args, "featsel", {})
    rep.section("data", [("n_train", len(train)), ("n_test", len(test)),
                         ("n_features", train.n_features)])
    names = sel.names
    rep.section("selection", [("eps", sel.eps), ("n_kept", len(sel.kept)),
                              ("n_dropped", len(sel.dropped)),
                              ("% Reduced Features", sel.reduced_pct),
                              ("kept", [names[j] for j in sel.kept]),
                              ("dropped", [names[j] for j in sel.dropped]),
                              ("selection_seconds", t_select if args.timings else "omitted")])
    rep.section("weights", columns=["feature", "name", "w_lower", "w_upper", "kept"],
                rows=[(j, names[j], float(sel.w_lower_raw[j]), float(sel.w_upper_raw[j]),
                       j in set(sel.kept)) for j in range(len(names))])
    if sel.kept:
        cmp = refit_on_selection(train, sel, args.coverage, args.q_bar, args.c, test=test)
        cols = ["fit", "picp", "mpiw", "pice", "n_features", "% Reduced Features"] + (
            ["train_seconds"] if args.timings else [])
        rows = []
        for label, r, nf in (("before", cmp.before, train.n_features),
                             ("after", cmp.after, len(sel.kept))):
            row = [label, r.picp, r.mpiw, r.pice, nf, 0.0 if label == "before" else sel.reduced_pct]
            if args.timings:
                row.append(r.train_seconds)
            rows.append(row)
        rep.section("comparison", columns=cols, rows=rows)
    else:
        print("warning: the selection keeps no features; skipping the refit comparison",
              file=sys.stderr)
    path = f"{args.out}.weights.csv"
    write_csv(path, ["feature", "name", "w_lower", "w_upper", "kept"],
              [(j, names[j], float(sel.w_lower_raw[j]), float(sel.w_upper_raw[j]),
                int(j in set(sel.kept))) for j in range(len(names))])
    outputs.add(path)
    outputs.add(*rep.write(args.out))
    return EXIT_OK


def cmd_conformal(args, outputs: Outputs) -> int:
    _check_range("--alpha", args.alpha, 0.0, 1.0)
    _check_range("--calib-frac", args.calib_frac, 0.0, 1.0)
    if args.trials < 1:
        raise InputError("--trials must be at least 1")
    if not (args.c > 0 and args.width > 0):
        raise InputError("--c and --width must be positive")
    coverage = 1.0 - args.alpha
    q_bar = args.alpha / 2.0 if args.q_bar is None else args.q_bar
    try:
        check_levels(coverage, q_bar)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    if bool(args.ad) == bool(args.data):
        raise InputError("give exactly one of --data or --ad")
    if args.ad and args.ad.upper() not in AD_IDS:
        raise InputError(f"unknown dataset {args.ad!r}")
    _check_out_dir(args.out)
    kernel = KernelSpec(args.kernel, args.width)
    trial_names = [f"trial{t}" for t in range(args.trials)]
    root = derive_seeds(args.seed, ["split", "data", "test_data"])
    trial_seeds = derive_seeds(root["split"], trial_names)
    data_seeds = derive_seeds(root["data"], trial_names)
    test_seeds = derive_seeds(root["test_data"], trial_names)

    fixed = None
    if args.data:
        data = load_data(args)
        if not args.test:
            _check_range("--train-frac", args.train_frac, 0.0, 1.0)
        fixed = _train_test(args, data)

    rows = []
    degenerate_any = False
    for t, name in enumerate(trial_names):
        key = name if args.resample else trial_names[0]
        if fixed is not None:
            pool, test = fixed
        else:
            pool = generate_ad(args.ad, args.m, seed=data_seeds[key])
            test = generate_ad(args.ad, args.m_test, seed=test_seeds[key])
        fit, calib = split_train_calibrate(pool, args.calib_frac, seed=trial_seeds[key])
        pi = build_interval(args.method, fit, coverage, q_bar, args.c, kernel)
        pi_cal, res = conformalize(pi, calib, args.alpha)
        r = pi_cal.evaluate(test)
        degenerate_any |= res.degenerate
        rows.append([t, r.picp, r.mpiw, res.offset, res.level_index, len(calib), res.degenerate])
    if degenerate_any:
        print(f"warning: the calibration set is too small for alpha = {args.alpha}; "
              "the conformal offset is infinite (degenerate)", file=sys.stderr)

    picps = np.array([r[1] for r in rows])
    mpiws = np.array([r[2] for r in rows])
    finite = np.isfinite(mpiws)
    rep = _new_report(args, "conformal", {"split": root["split"], "data": root["data"],
                                          "test_data": root["test_data"]})
    rep.section("summary", [
        ("trials", args.trials), ("coverage_target", coverage), ("q_bar", q_bar),
        ("picp_mean", float(picps.mean())), ("picp_std", stable_std(picps)),
        ("mpiw_mean", float(mpiws.mean()) if finite.all() else math.inf),
        ("mpiw_std", stable_std(mpiws) if finite.all() else math.nan),
        ("degenerate", bool(degenerate_any)),
    ])
    cols = ["trial", "picp", "mpiw", "offset", "level_index", "n_calib", "degenerate"]
    rep.section("trials", columns=cols, rows=rows)
    path = f"{args.out}.trials.csv"
    write_csv(path, cols, [[r[0], r[1], r[2], r[3], r[4], r[5], int(r[6])] for r in rows])
    outputs.add(path)
    outputs.add(*rep.write(args.out))
    return EXIT_OK


def cmd_forecast(args, outputs: Outputs) -> int:
    _check_range("--coverage", args.coverage, 0.0, 1.0)
    _check_range("--train-frac", args.train_frac, 0.0, 1.0)
    _check_range("--val-frac", args.val_frac, 0.0, 1.0)
    _positive_grid("--c-grid", args.c_grid)
    _positive_grid("--width-grid", args.width_grid)
    if not args.lags or any(p < 1 for p in args.lags):
        raise InputError("--lags must be positive integers")
    if args.q_bar is not None and args.method in ("svqr", "ssvqr"):
        try:
            check_levels(args.coverage, args.q_bar)
        except ValueError as exc:
            raise InputError(str(exc)) from None
    _check_out_dir(args.out)
    if not os.path.exists(args.data):
        raise InputError(f"{args.data}: no such file")
    try:
        series = read_series(args.data, header=args.header, column=args.column,
                             time_column=args.time_column)
        split = chrono_split(series, args.train_frac, args.val_frac)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    seeds = derive_seeds(args.seed, ["tube_init"])
    cfg = ForecastConfig(lags=tuple(args.lags), c_grid=args.c_grid, width_grid=args.width_grid,
                         family=args.kernel, q_bar=args.q_bar, train_frac=args.train_frac,
                         val_frac=args.val_frac, n_jobs=args.n_jobs,
                         fit_options=_fit_options(args, seeds))
    res = forecast_pi(series, args.coverage, args.method, cfg)
    rep = _new_report(args, "forecast", seeds)
    rep.section("data", [("n_series", len(series)), ("n_train", split.n_train),
                         ("n_val", split.n_val), ("n_test", split.n_test),
                         ("split_hash", res.split_hash)])
    rep.section("selection", [("lag", res.lag), ("c", res.c), ("width", res.width)])
    _results(rep.section("results"), res.report, args.timings)
    path = f"{args.out}.forecast.csv"
    write_csv(path, ["index", "y_true", "lower", "upper"], res.rows())
    outputs.add(path)
    outputs.add(*rep.write(args.out))
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate, "interval": cmd_interval, "gridsearch": cmd_gridsearch,
    "evaluate": cmd_evaluate, "featsel": cmd_featsel, "conformal": cmd_conformal,
    "forecast": cmd_forecast,
}


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SystemExit as exc:  # argparse usage errors and --help
        return int(exc.code or 0)

    print("[config]")
    for k, v in resolved_config(args):
        print(f"{k} = {format_value(v)}")
    sys.stdout.flush()

    outputs = Outputs()
    try:
        return COMMANDS[args.command](args, outputs)
    except InputError as exc:
        outputs.remove_all()
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SolverError, RuntimeError, ValueError, np.linalg.LinAlgError, OSError) as exc:
        outputs.remove_all()
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except BaseException:
        outputs.remove_all()
        raise


if __name__ == "__main__":
    sys.exit(main())
