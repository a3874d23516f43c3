"""Command-line interface.

Commands: ``fit``, ``predict``, ``evaluate``, ``experiment``, ``tune`` and
``simulate``. Configuration files are JSON. Exit codes: 0 success, 1
runtime or file errors (e.g. a missing model file), 2 invalid
configuration, 3 data/model schema mismatch.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .boost import ConfigError, FPBoostConfig, ModelFormatError, fit, load_model
from .data import (
    CsvSchema,
    DataValidationError,
    SchemaError,
    SurvivalDataset,
    derive_seed,
    load_csv,
    simulate_weibull_mixture,
    stratified_split,
    write_csv,
)
from .metrics import EvaluationReport
from .tune import SearchSpace, random_search

logger = logging.getLogger("fpboost")

EXIT_ERROR, EXIT_CONFIG, EXIT_SCHEMA = 1, 2, 3
VALID_FRAC = 0.2
Z95 = 1.96
METRIC_KEYS = [key for _, key in EvaluationReport.METRICS]


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _read_json(path, what="config"):
    try:
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(what, f"{path} is not valid JSON ({exc})") from None
    if not isinstance(d, dict):
        raise ConfigError(what, f"{path} must hold a JSON object")
    return d


def _dump_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _categorical(values) -> list[str]:
    out = []
    for v in values or []:
        out.extend(c.strip() for c in v.split(",") if c.strip())
    return out


def _schema(args) -> CsvSchema:
    return CsvSchema(args.time_col, args.event_col, categorical=_categorical(args.categorical))


def _model_schema(model, time_col=None, event_col=None) -> CsvSchema:
    """Read exactly the columns the model was trained on."""
    return CsvSchema(
        time_col,
        event_col,
        categorical=list(model.meta.levels),
        numeric=list(model.meta.numeric_names),
    )


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _model_config(d: dict, seed=None) -> FPBoostConfig:
    d = dict(d)
    if seed is not None:
        d["seed"] = seed
    try:
        return FPBoostConfig.from_dict(d)
    except TypeError as exc:
        raise ConfigError("config", str(exc)) from None


# ---------------------------------------------------------------------------
# experiment protocol
# ---------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    """Repeated fit/evaluate runs against one fixed test split.

    The outer test split depends only on ``seed``; each of the ``n_seeds``
    runs re-splits the remaining data into train and validation (20%) and
    trains with its own initialization seed. Either ``model`` (a model
    configuration) or ``tune`` (``{"space": {...}, "n_trials": int,
    "repeats": int}``) must be given.
    """

    path: str
    time_col: str
    event_col: str
    categorical: list = field(default_factory=list)
    test_frac: float = 0.2
    n_seeds: int = 30
    seed: int = 0
    model: dict | None = None
    tune: dict | None = None

    def __post_init__(self):
        if not 0 < self.test_frac < 1:
            raise ConfigError("test_frac", f"must lie in (0, 1), got {self.test_frac}")
        if isinstance(self.n_seeds, bool) or not isinstance(self.n_seeds, int) or self.n_seeds < 1:
            raise ConfigError("n_seeds", f"must be a positive integer, got {self.n_seeds!r}")
        if (self.model is None) == (self.tune is None):
            raise ConfigError("model", "give exactly one of 'model' and 'tune'")
        if self.model is not None:
            _model_config(self.model)
        else:
            unknown = set(self.tune) - {"space", "n_trials", "repeats"}
            if unknown:
                raise ConfigError(f"tune.{sorted(unknown)[0]}", "unknown field")
            SearchSpace.from_dict(self.tune.get("space", {}))

    @classmethod
    def from_dict(cls, d: dict, base_dir=None) -> "ExperimentConfig":
        d = dict(d)
        data = d.pop("data", None)
        if not isinstance(data, dict):
            raise ConfigError("data", "missing 'data' section")
        unknown = set(data) - {"path", "time_col", "event_col", "categorical"}
        if unknown:
            raise ConfigError(f"data.{sorted(unknown)[0]}", "unknown field")
        for key in ("path", "time_col", "event_col"):
            if key not in data:
                raise ConfigError(f"data.{key}", "required field is missing")
        unknown = set(d) - {"test_frac", "n_seeds", "seed", "model", "tune"}
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown field")
        path = Path(data["path"])
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        return cls(
            path=str(path),
            time_col=data["time_col"],
            event_col=data["event_col"],
            categorical=list(data.get("categorical", [])),
            **d,
        )


def _run_seed(exp: ExperimentConfig, pool: SurvivalDataset, test: SurvivalDataset, s: int):
    train, valid = stratified_split(pool, VALID_FRAC, derive_seed(exp.seed, "split", s))
    init_seed = derive_seed(exp.seed, "init", s)
    if exp.model is not None:
        config = _model_config(exp.model, seed=init_seed)
    else:
        best, _ = random_search(
            SearchSpace.from_dict(exp.tune.get("space", {})),
            pool,
            n_trials=int(exp.tune.get("n_trials", 16)),
            seed=derive_seed(exp.seed, "tune", s),
            repeats=int(exp.tune.get("repeats", 1)),
        )
        config = _model_config(best.config, seed=init_seed)
    model, _ = fit(config, train, valid)
    report = model.evaluate(test)
    return s, {key: getattr(report, key) for key in METRIC_KEYS}


def run_experiment(exp: ExperimentConfig, n_jobs: int = 1) -> dict:
    """Mean and 95% normal-approximation interval of every test metric."""
    data = load_csv(exp.path, CsvSchema(exp.time_col, exp.event_col, categorical=exp.categorical))
    pool, test = stratified_split(data, exp.test_frac, derive_seed(exp.seed, "outer"))
    if n_jobs == 1:
        runs = [_run_seed(exp, pool, test, s) for s in range(exp.n_seeds)]
    else:
        with ProcessPoolExecutor(max_workers=n_jobs) as ex:
            futures = [ex.submit(_run_seed, exp, pool, test, s) for s in range(exp.n_seeds)]
            runs = []
            for s, fut in enumerate(futures):
                try:
                    runs.append(fut.result())
                except Exception as exc:
                    raise RuntimeError(f"seed {s} failed: {exc}") from exc
    runs.sort(key=lambda r: r[0])

    metrics = {}
    for key in METRIC_KEYS:
        values = np.array([r[1][key] for r in runs])
        n = len(values)
        mean = math.fsum(values) / n
        if n > 1:
            sd = math.sqrt(math.fsum((values - mean) ** 2) / (n - 1))
            half = Z95 * sd / math.sqrt(n)
        else:
            half = None
        metrics[key] = {
            "mean": mean,
            "ci": half,
            "ci_low": None if half is None else mean - half,
            "ci_high": None if half is None else mean + half,
            "values": values.tolist(),
        }
    return {
        "master_seed": exp.seed,
        "n_seeds": exp.n_seeds,
        "test_frac": exp.test_frac,
        "n_pool": len(pool),
        "n_test": len(test),
        "model": exp.model,
        "tune": exp.tune,
        "metrics": metrics,
    }


def summary_table(summary: dict) -> str:
    """Metrics scaled by 100 as ``mean +/- half-width``."""
    lines = [f"{'metric':<8} {'mean':>7} {'95% CI':>8}"]
    for label, key in EvaluationReport.METRICS:
        m = summary["metrics"][key]
        ci = "" if m["ci"] is None else f"{100 * m['ci']:.1f}"
        lines.append(f"{label:<8} {100 * m['mean']:>7.1f} {ci:>8}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_fit(args) -> int:
    config = _model_config(_read_json(args.config) if args.config else {}, seed=args.seed)
    data = load_csv(args.data, _schema(args))
    valid = None
    if config.patience is not None:
        data, valid = stratified_split(data, args.valid_frac, derive_seed(config.seed, "valid"))
    model, trace = fit(config, data, valid)
    out = _out_dir(args.out)
    model.save(out / "model.json")
    trace.to_csv(out / "trace.csv")
    print(f"trained {model.n_iterations} iterations; wrote {out / 'model.json'}")
    return 0


def _time_grid(args, model) -> np.ndarray:
    if args.times:
        grid = np.array([float(v) for v in args.times.split(",")])
    else:
        grid = np.linspace(0.0, model.time_scale, args.n_times)
    if np.any(grid < 0):
        raise DataValidationError("prediction times must be nonnegative")
    return grid


def cmd_predict(args) -> int:
    model = load_model(args.model)
    data = load_csv(args.data, _model_schema(model))
    grid = _time_grid(args, model)
    S = model.predict_survival(data, grid)
    if args.id_col:
        with open(args.data, newline="", encoding="utf-8") as fh:
            ids = [row[args.id_col] for row in csv.DictReader(fh) if any(row.values())]
    else:
        ids = list(range(len(data)))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "t", "S"])
        for i, sid in enumerate(ids):
            for t, s in zip(grid, S[i]):
                w.writerow([sid, repr(float(t)), repr(float(s))])
    return 0


def cmd_evaluate(args) -> int:
    model = load_model(args.model)
    data = load_csv(args.data, _model_schema(model, args.time_col, args.event_col))
    report = model.evaluate(data)
    table = report.to_table()
    print(table, end="")
    if args.out:
        out = _out_dir(args.out)
        (out / "report.json").write_text(report.to_json() + "\n", encoding="utf-8")
        (out / "report.txt").write_text(table, encoding="utf-8")
        with open(out / "brier_curve.csv", "w", encoding="utf-8") as fh:
            fh.write("t,brier\n")
            for t, b in zip(report.brier_times, report.brier_values):
                fh.write(f"{t!r},{b!r}\n")
    return 0


def cmd_experiment(args) -> int:
    d = _read_json(args.config)
    exp = ExperimentConfig.from_dict(d, base_dir=Path(args.config).parent)
    if args.data:
        exp.path = args.data
    if args.time_col:
        exp.time_col = args.time_col
    if args.event_col:
        exp.event_col = args.event_col
    if args.categorical:
        exp.categorical = _categorical(args.categorical)
    if args.seed is not None:
        exp.seed = args.seed
    if args.n_seeds is not None:
        exp.n_seeds = args.n_seeds
        exp.__post_init__()
    summary = run_experiment(exp, n_jobs=args.n_jobs)
    out = _out_dir(args.out)
    _dump_json(summary, out / "summary.json")
    table = summary_table(summary)
    (out / "summary.txt").write_text(table, encoding="utf-8")
    print(table, end="")
    return 0


def cmd_tune(args) -> int:
    space = SearchSpace.from_dict(_read_json(args.space, "space")) if args.space else SearchSpace()
    data = load_csv(args.data, _schema(args))
    out = _out_dir(args.out)
    best, results = random_search(
        space, data, args.n_trials, seed=args.seed, repeats=args.repeats,
        n_jobs=args.n_jobs, log_path=out / "trials.jsonl",
    )
    _dump_json(best.config, out / "best_config.json")
    n_ok = sum(r.status == "ok" for r in results)
    print(f"best trial {best.trial_index}: C-index {best.c_index:.4f} ({n_ok}/{len(results)} ok)")
    return 0


DEFAULT_SIM_SPEC = [[[1.0, 1.0, 1.0]], [[2.0, 1.5, 1.0]], [[4.0, 0.8, 1.0]]]


def cmd_simulate(args) -> int:
    spec = json.loads(args.heads) if args.heads else DEFAULT_SIM_SPEC
    ds = simulate_weibull_mixture(
        args.n, spec, censor_rate=args.censor_rate, seed=args.seed, n_noise=args.noise
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(ds, out, time_col="time", event_col="event")
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fpboost", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def data_flags(sp, required=True, outcome_defaults=True):
        sp.add_argument("--data", required=required, help="input CSV with a header row")
        sp.add_argument("--time-col", default="time" if outcome_defaults else None)
        sp.add_argument("--event-col", default="event" if outcome_defaults else None)
        sp.add_argument("--categorical", action="append",
                        help="comma-separated categorical columns (repeatable)")

    sp = sub.add_parser("fit", help="train one model")
    data_flags(sp)
    sp.add_argument("--config", help="JSON model configuration")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--valid-frac", type=float, default=VALID_FRAC,
                    help="validation fraction used with early stopping")
    sp.add_argument("--out", required=True, help="output directory")
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("predict", help="survival curves per subject")
    sp.add_argument("--model", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--times", help="comma-separated times (raw units)")
    sp.add_argument("--n-times", type=int, default=100,
                    help="grid size on [0, training max time] when --times is absent")
    sp.add_argument("--id-col", help="column used as subject id (default: row index)")
    sp.add_argument("--out", required=True, help="output CSV")
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("evaluate", help="test metrics of a saved model")
    sp.add_argument("--model", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--time-col", default="time")
    sp.add_argument("--event-col", default="event")
    sp.add_argument("--out", help="output directory for report.json, report.txt, brier_curve.csv")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("experiment", help="repeated-seed protocol on a fixed test split")
    sp.add_argument("--config", required=True, help="JSON experiment configuration")
    data_flags(sp, required=False, outcome_defaults=False)
    sp.add_argument("--seed", type=int, help="master seed (overrides the config)")
    sp.add_argument("--n-seeds", type=int)
    sp.add_argument("--n-jobs", type=int, default=1)
    sp.add_argument("--out", required=True, help="output directory")
    sp.set_defaults(func=cmd_experiment)

    sp = sub.add_parser("tune", help="random hyperparameter search")
    data_flags(sp)
    sp.add_argument("--space", help="JSON search space (defaults to the full space)")
    sp.add_argument("--n-trials", type=int, default=16)
    sp.add_argument("--repeats", type=int, default=1)
    sp.add_argument("--n-jobs", type=int, default=1)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True, help="output directory")
    sp.set_defaults(func=cmd_tune)

    sp = sub.add_parser("simulate", help="write synthetic Weibull-mixture data")
    sp.add_argument("--n", type=int, default=1000)
    sp.add_argument("--heads", help="JSON list of mixtures, each a list of [eta, k, w]")
    sp.add_argument("--censor-rate", type=float, default=0.3)
    sp.add_argument("--noise", type=int, default=0, help="number of pure-noise features")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True, help="output CSV")
    sp.set_defaults(func=cmd_simulate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: invalid configuration field {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SchemaError as exc:
        print(f"error: schema mismatch: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (FileNotFoundError, ModelFormatError, DataValidationError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
