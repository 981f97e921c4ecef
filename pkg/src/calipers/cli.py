"""Experiment runner: configuration, CSV ingestion, splits, reports.

Two subcommands drive everything: ``simulate`` runs the replicated
benchmark on a synthetic model, ``eval-csv`` evaluates a single seeded
train/test split of a delimited dataset (UCI wine-quality format by
default).  Both write one delimited report row per (method, grid-count)
plus a manifest of the fully resolved configuration, and render summary
figures next to the report.

Configuration is flat ``key = value`` text; command-line flags override
file keys, which override profile defaults.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
import tempfile
import time
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .calibrate import KERNEL_METHODS, NETWORK_METHODS
from .core import Dataset, build_grid
from .kernel import BandwidthStrategy, fit_kernel
from .neuralnet import MlpConfig
from .pipeline import build_point_intervals, method_needs, validate_methods
from .simbench import (
    MODEL_IDS,
    REPORT_COLUMNS,
    EvalConfig,
    EvalReport,
    SimModelSpec,
    evaluate_methods,
    report_row,
)

__all__ = [
    "ExperimentConfig",
    "ConfigError",
    "PROFILES",
    "parse_config",
    "serialize_config",
    "load_csv",
    "split",
    "empirical_eval",
    "run",
    "main",
]

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Invalid experiment configuration; message lists every failure."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved settings of one run; see README for key meanings."""

    mode: str = "simulate"
    model: int = 1
    n: int = 2000
    input: str = ""
    target: str = "quality"
    delimiter: str = ";"
    train_size: int = 199
    test_size: int = 1120
    estimator: str = "network"
    widths: tuple[int, ...] = (10, 10)
    grid: tuple[int, ...] = (200,)
    methods: tuple[str, ...] = ("aa",)
    alpha: float = 0.05
    s: int = 20
    t: int = 200
    v: int = 1000
    seed: int = 0
    lr: float = 1e-3
    batch_size: int = 200
    epochs: int = 2000
    clip: float = 20.0
    optimizer: str = "adam"
    bandwidth: str = "mlcv"
    h: float = 0.0
    h0: float = 0.0
    cv_budget: int = 150
    out: str = "results"
    figures: bool = True
    threads: int = 0

    def mlp_config(self) -> MlpConfig:
        return MlpConfig(
            layer_widths=self.widths,
            lr=self.lr,
            batch_size=self.batch_size,
            epochs=self.epochs,
            clip=self.clip,
            optimizer=self.optimizer,
            seed=self.seed,
        )

    def kernel_strategy(self) -> BandwidthStrategy:
        if self.bandwidth == "fixed":
            return BandwidthStrategy("fixed", h=self.h, h0=self.h0)
        return BandwidthStrategy(self.bandwidth, budget=self.cv_budget)


# Profile bundles applied underneath file keys and flags.
PROFILES = {
    "smoke": {"s": 2, "t": 20, "v": 200, "grid": (50,), "epochs": 300},
    "desk": {"s": 20, "t": 200, "v": 1000},
    "paper": {"s": 500, "t": 2000, "v": 5000},
}


def _parse_int_tuple(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _parse_str_tuple(text: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in text.split(",") if v.strip())


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


_FIELD_PARSERS = {
    "mode": str, "model": int, "n": int, "input": str, "target": str,
    "delimiter": str, "train_size": int, "test_size": int, "estimator": str,
    "widths": _parse_int_tuple, "grid": _parse_int_tuple,
    "methods": _parse_str_tuple, "alpha": float, "s": int, "t": int, "v": int,
    "seed": int, "lr": float, "batch_size": int, "epochs": int, "clip": float,
    "optimizer": str, "bandwidth": str, "h": float, "h0": float,
    "cv_budget": int, "out": str, "figures": _parse_bool, "threads": int,
}


def _format_value(value) -> str:
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` lines into a typed override dict."""
    overrides = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key = key.strip()
        if key not in _FIELD_PARSERS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            overrides[key] = _FIELD_PARSERS[key](value.strip())
        except ValueError as err:
            raise ConfigError(f"line {lineno}: bad value for {key}: {err}") from err
    return overrides


def parse_config(text: str) -> ExperimentConfig:
    """Full configuration from defaults plus the file's keys."""
    return ExperimentConfig(**parse_config_text(text))


def serialize_config(config: ExperimentConfig) -> str:
    """Canonical text form; parse_config(serialize_config(c)) == c."""
    lines = [
        f"{f.name} = {_format_value(getattr(config, f.name))}"
        for f in fields(config)
    ]
    return "\n".join(lines) + "\n"


def validate_config(config: ExperimentConfig) -> None:
    """Collect every validation failure before any compute starts."""
    errors = []
    if config.mode not in ("simulate", "csv"):
        errors.append(f"mode must be simulate or csv, got {config.mode!r}")
    if config.mode == "simulate" and config.model not in MODEL_IDS:
        errors.append(f"model must be in {MODEL_IDS}")
    if config.mode == "csv":
        if not config.input:
            errors.append("csv mode needs an input path")
        elif not Path(config.input).is_file():
            errors.append(f"input file not found: {config.input}")
        if config.train_size < 1 or config.test_size < 1:
            errors.append("train_size and test_size must be >= 1")
    if config.estimator not in ("network", "kernel"):
        errors.append(f"estimator must be network or kernel, got {config.estimator!r}")
    if not config.methods:
        errors.append("methods list is empty")
    else:
        allowed = NETWORK_METHODS if config.estimator == "network" else KERNEL_METHODS
        for m in config.methods:
            if m not in allowed:
                errors.append(
                    f"method {m!r} not available with the {config.estimator} estimator"
                )
    if not config.grid or any(g < 2 for g in config.grid):
        errors.append("grid counts must all be >= 2")
    if not 0.0 < config.alpha < 1.0:
        errors.append("alpha must be in (0, 1)")
    if config.bandwidth not in ("mlcv", "lscv", "fixed"):
        errors.append("bandwidth must be mlcv, lscv or fixed")
    if config.bandwidth == "fixed" and (config.h <= 0 or config.h0 <= 0):
        errors.append("fixed bandwidth needs positive h and h0")
    if errors:
        raise ConfigError("; ".join(errors))


def load_csv(path, delimiter: str = ";", target_column: str = "quality") -> Dataset:
    """Numeric delimited file with a header row into a Dataset.

    The target column becomes the response; the remaining columns form
    the predictors in header order.  Non-numeric cells are reported with
    their 1-based file row and column name.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path} is empty") from None
        header = [name.strip() for name in header]
        if target_column not in header:
            raise ValueError(f"target column {target_column!r} not in header {header}")
        t_idx = header.index(target_column)
        xs, ys = [], []
        for row_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ValueError(
                    f"row {row_no} has {len(row)} cells, expected {len(header)}"
                )
            values = []
            for col_idx, cell in enumerate(row):
                try:
                    values.append(float(cell))
                except ValueError:
                    raise ValueError(
                        f"non-numeric value {cell!r} at row {row_no}, "
                        f"column {header[col_idx]}"
                    ) from None
            ys.append(values.pop(t_idx))
            xs.append(values)
    return Dataset(np.asarray(xs), np.asarray(ys))


def split(data: Dataset, train_size: int, test_size: int, seed: int):
    """Seeded permutation split: first train_size rows, then test_size rows.

    Returns (train, test); a zero-sized side comes back as None since
    datasets hold at least one row.
    """
    if train_size < 0 or test_size < 0:
        raise ValueError("split sizes must be nonnegative")
    if train_size + test_size > data.n:
        raise ValueError(
            f"split sizes {train_size}+{test_size} exceed {data.n} rows"
        )
    perm = np.random.default_rng(seed).permutation(data.n)
    tr = perm[:train_size]
    te = perm[train_size:train_size + test_size]
    train = Dataset(data.x[tr], data.y[tr]) if train_size else None
    test = Dataset(data.x[te], data.y[te]) if test_size else None
    return train, test


def empirical_eval(
    methods, train: Dataset, test: Dataset, config: ExperimentConfig
) -> list[tuple[int, EvalReport]]:
    """Single-split coverage rate and mean length per (method, grid count).

    The kernel fit does not depend on the grid, so its bandwidth search
    runs once and is reused across the sweep.
    """
    methods = validate_methods(methods)
    needs = method_needs(methods)
    mlp = config.mlp_config()
    kernel_prefit = (
        fit_kernel(train, config.kernel_strategy(), standardize=True)
        if needs.kernel
        else None
    )
    out = []
    for g in config.grid:
        grid = build_grid(train.y, g)
        intervals, valid = build_point_intervals(
            methods, train, grid, test.x, config.alpha, mlp,
            standardize=True, kernel_fit=kernel_prefit,
        )
        used = int(valid.sum())
        for method in methods:
            hits = [
                pi.contains(test.y[i])
                for i, pi in enumerate(intervals[method])
                if valid[i]
            ]
            lens = [pi.length for i, pi in enumerate(intervals[method]) if valid[i]]
            out.append((
                g,
                EvalReport(
                    method=method,
                    cr=float(np.mean(hits)),
                    al=float(np.mean(lens)),
                    replications=1,
                    test_points_used=float(used),
                    skipped_benchmark_points=test.n - used,
                ),
            ))
    return out


def _write_report(path: Path, rows: list[list[str]]) -> None:
    """Atomic write: the report exists complete or not at all."""
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(REPORT_COLUMNS)
            writer.writerows(rows)
        os.chmod(tmp_name, 0o644)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def run(config: ExperimentConfig) -> int:
    """Validate, compute, and write report + manifest (+ figures).

    Nothing is written until all results exist, so a failed run leaves
    no report behind.
    """
    validate_config(config)
    if config.threads > 0:
        import numba

        numba.set_num_threads(config.threads)
    rows = []
    t_run = time.perf_counter()
    if config.mode == "simulate":
        spec = SimModelSpec(config.model, config.n, config.seed)
        model_tag = f"model-{config.model}"
        n_train = config.n
        for g in config.grid:
            cfg = EvalConfig(
                s=config.s, t=config.t, v=config.v, alpha=config.alpha,
                grid_points=g, mlp=config.mlp_config(),
                kernel_strategy=config.kernel_strategy(),
            )
            t0 = time.perf_counter()
            reports = evaluate_methods(spec, list(config.methods), cfg)
            wall = time.perf_counter() - t0
            log.info("simulate g=%d finished in %.1fs", g, wall)
            rows += [
                report_row(r, model_tag, config.estimator,
                           "x".join(map(str, config.widths)), n_train, g, wall)
                for r in reports
            ]
    else:
        t0 = time.perf_counter()
        data = load_csv(config.input, config.delimiter, config.target)
        log.info("loaded %s: n=%d d=%d (%.1fs)", config.input, data.n, data.d,
                 time.perf_counter() - t0)
        train, test = split(data, config.train_size, config.test_size, config.seed)
        if train is None or test is None:
            raise ConfigError("csv mode needs nonempty train and test splits")
        model_tag = Path(config.input).stem
        t0 = time.perf_counter()
        evals = empirical_eval(list(config.methods), train, test, config)
        wall = time.perf_counter() - t0
        log.info("empirical eval finished in %.1fs", wall)
        rows += [
            report_row(r, model_tag, config.estimator,
                       "x".join(map(str, config.widths)), train.n, g, wall)
            for g, r in evals
        ]
    out_dir = Path(config.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if config.figures:
        from .figures import render_report_figures

        row_dicts = [dict(zip(REPORT_COLUMNS, r)) for r in rows]
        for fig_path in render_report_figures(row_dicts, out_dir, config.alpha):
            log.info("wrote %s", fig_path)
    (out_dir / "manifest.txt").write_text(serialize_config(config))
    _write_report(out_dir / "report.csv", rows)
    log.info("wrote %s in %.1fs total", out_dir / "report.csv",
             time.perf_counter() - t_run)
    return 0


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--profile", choices=sorted(PROFILES),
                   help="scale preset applied under file keys and flags")
    p.add_argument("--methods", help="comma-separated method tags")
    p.add_argument("--estimator", choices=["network", "kernel"])
    p.add_argument("--widths", help="hidden layer widths, e.g. 10,10")
    p.add_argument("--grid", help="comma-separated grid counts, e.g. 200,100")
    p.add_argument("--alpha", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--clip", type=float)
    p.add_argument("--optimizer", choices=["sgd", "adam", "rmsprop"])
    p.add_argument("--bandwidth", choices=["mlcv", "lscv", "fixed"])
    p.add_argument("--h", type=float)
    p.add_argument("--h0", type=float)
    p.add_argument("--cv-budget", dest="cv_budget", type=int)
    p.add_argument("--out")
    p.add_argument("--threads", type=int)
    p.add_argument("--no-figures", dest="figures", action="store_false",
                   default=None)
    p.add_argument("-v", "--verbose", action="store_true")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="calipers",
        description="Calibrated prediction-interval experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sim = sub.add_parser("simulate", help="replicated synthetic benchmark")
    sim.add_argument("--model", type=int, choices=MODEL_IDS)
    sim.add_argument("--n", type=int, help="training sample size")
    sim.add_argument("--s", type=int, help="replications")
    sim.add_argument("--t", type=int, help="test points")
    sim.add_argument("--v", dest="v", type=int, help="MC draws per test point")
    _add_common_flags(sim)
    ev = sub.add_parser("eval-csv", help="single-split evaluation of a CSV dataset")
    ev.add_argument("--input", help="semicolon-delimited CSV with header")
    ev.add_argument("--target", help="response column name")
    ev.add_argument("--delimiter")
    ev.add_argument("--train-size", dest="train_size", type=int)
    ev.add_argument("--test-size", dest="test_size", type=int)
    _add_common_flags(ev)
    return parser


def _resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    overrides: dict = {"mode": "simulate" if args.command == "simulate" else "csv"}
    if args.profile:
        overrides.update(PROFILES[args.profile])
    if args.config:
        text = Path(args.config).read_text()
        overrides.update(parse_config_text(text))
        overrides["mode"] = "simulate" if args.command == "simulate" else "csv"
    for key, parser_fn in _FIELD_PARSERS.items():
        if not hasattr(args, key):
            continue
        value = getattr(args, key)
        if value is None:
            continue
        overrides[key] = parser_fn(value) if isinstance(value, str) else value
    return ExperimentConfig(**overrides)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return run(_resolve_config(args))
    except (ConfigError, FileNotFoundError, ValueError) as err:
        log.error("%s", err)
        return 2
    except Exception:
        log.exception("run failed")
        return 1


if __name__ == "__main__":
    sys.exit(main())
