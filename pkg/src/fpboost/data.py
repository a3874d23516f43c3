"""Survival datasets: CSV ingestion, preprocessing, splitting and Kaplan-Meier.

A :class:`SurvivalDataset` keeps numeric features as a float matrix and
categorical features as raw strings, so that one-hot encoding can always be
re-done with the levels seen at training time.
"""
from __future__ import annotations

import csv
import hashlib
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import integrate, optimize

logger = logging.getLogger(__name__)

_TRUE = {"1", "true", "1.0"}
_FALSE = {"0", "false", "0.0"}


class SchemaError(ValueError):
    """Raised when a file or dataset does not match the expected columns."""


class DataValidationError(ValueError):
    """Raised for invalid values (unparseable cells, negative times, ...)."""


@dataclass(frozen=True)
class CsvSchema:
    """Column roles of a survival CSV.

    ``numeric=None`` means every column that is not the time, the event, a
    categorical or an ignored column is numeric. ``time_col=None`` and
    ``event_col=None`` read a feature-only file (times 0, all censored).
    """

    time_col: str | None
    event_col: str | None
    categorical: Sequence[str] = ()
    numeric: Sequence[str] | None = None
    ignore: Sequence[str] = ()


@dataclass(frozen=True)
class SurvivalDataset:
    """Right-censored single-event data.

    Parameters
    ----------
    numeric : ndarray, shape (n_samples, n_numeric)
    time : ndarray, shape (n_samples,)
        Observed times (event or censoring), nonnegative.
    event : ndarray of bool, shape (n_samples,)
        True where the event was observed.
    numeric_names : tuple of str
    categorical : mapping of column name to ndarray of str
        Raw categorical values, one-hot encoded on demand.
    time_scale : float
        Factor dividing the raw times; 1.0 for unprocessed data.
    """

    numeric: np.ndarray
    time: np.ndarray
    event: np.ndarray
    numeric_names: tuple[str, ...] = ()
    categorical: Mapping[str, np.ndarray] = field(default_factory=dict)
    time_scale: float = 1.0

    def __post_init__(self):
        numeric = np.asarray(self.numeric, dtype=float)
        if numeric.ndim == 1:
            numeric = numeric[:, None]
        time = np.asarray(self.time, dtype=float).ravel()
        event = np.asarray(self.event).astype(bool).ravel()
        n = len(time)
        if numeric.shape[0] != n or len(event) != n:
            raise SchemaError("numeric, time and event must have the same number of rows")
        names = tuple(self.numeric_names) or tuple(f"x{i}" for i in range(numeric.shape[1]))
        if len(names) != numeric.shape[1]:
            raise SchemaError("numeric_names length does not match the numeric columns")
        cats = {}
        for key, values in self.categorical.items():
            values = np.asarray(values, dtype=str)
            if len(values) != n:
                raise SchemaError(f"categorical column {key!r} has the wrong length")
            cats[key] = values
        if np.any(time < 0):
            raise DataValidationError("times must be nonnegative")
        if np.any(np.isnan(numeric)):
            raise DataValidationError("numeric features contain NaN")
        object.__setattr__(self, "numeric", numeric)
        object.__setattr__(self, "time", time)
        object.__setattr__(self, "event", event)
        object.__setattr__(self, "numeric_names", names)
        object.__setattr__(self, "categorical", cats)

    def __len__(self):
        return len(self.time)

    @property
    def levels(self) -> dict[str, list[str]]:
        return {key: sorted(set(values.tolist())) for key, values in self.categorical.items()}

    @property
    def feature_names(self) -> list[str]:
        return _encoded_names(self.numeric_names, self.levels)

    @property
    def X(self) -> np.ndarray:
        """Encoded feature matrix, one-hot using this dataset's own levels."""
        return _encode(self, self.levels, warn=False)

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def subset(self, idx) -> "SurvivalDataset":
        idx = np.asarray(idx)
        return SurvivalDataset(
            numeric=self.numeric[idx],
            time=self.time[idx],
            event=self.event[idx],
            numeric_names=self.numeric_names,
            categorical={k: v[idx] for k, v in self.categorical.items()},
            time_scale=self.time_scale,
        )


def _encoded_names(numeric_names, levels):
    names = list(numeric_names)
    for key, lv in levels.items():
        names.extend(f"{key}={level}" for level in lv)
    return names


def _encode(ds: SurvivalDataset, levels: Mapping[str, Sequence[str]], warn=True) -> np.ndarray:
    blocks = [ds.numeric]
    for key, lv in levels.items():
        values = ds.categorical[key]
        block = (values[:, None] == np.asarray(lv, dtype=str)[None, :]).astype(float)
        unseen = ~block.any(axis=1)
        if warn and unseen.any():
            bad = sorted(set(values[unseen].tolist()))
            warnings.warn(
                f"column {key!r}: unseen levels {bad} encoded as all-zero", stacklevel=3
            )
        blocks.append(block)
    return np.hstack(blocks) if len(blocks) > 1 else ds.numeric.copy()


def _parse_event(cell: str, row: int, col: str) -> bool:
    value = cell.strip().lower()
    if value in _TRUE:
        return True
    if value in _FALSE:
        return False
    raise DataValidationError(f"row {row}: cannot parse event value {cell!r} in column {col!r}")


def _parse_float(cell: str, row: int, col: str) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise DataValidationError(
            f"row {row}: cannot parse {cell!r} in column {col!r} as a number"
        ) from None
    if math.isnan(value):
        raise DataValidationError(f"row {row}: missing value in column {col!r}")
    return value


def load_csv(path, schema: CsvSchema) -> SurvivalDataset:
    """Read a comma-separated survival table with a header row.

    Rows are numbered from 1 (the first line after the header) in error
    messages.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        rows = [r for r in reader if any(c.strip() for c in r)]

    categorical = list(schema.categorical)
    outcome = [c for c in (schema.time_col, schema.event_col) if c is not None]
    if len(outcome) == 1:
        raise SchemaError("time_col and event_col must both be given or both be None")
    reserved = {*outcome, *categorical, *schema.ignore}
    if schema.numeric is None:
        numeric = [h for h in header if h not in reserved]
    else:
        numeric = list(schema.numeric)
    for col in [*outcome, *categorical, *numeric]:
        if col not in header:
            raise SchemaError(f"{path}: missing column {col!r}")
    pos = {h: i for i, h in enumerate(header)}

    n = len(rows)
    times = np.zeros(n)
    events = np.zeros(n, dtype=bool)
    num = np.empty((n, len(numeric)))
    cats = {c: [] for c in categorical}
    for r, cells in enumerate(rows, start=1):
        if len(cells) != len(header):
            raise DataValidationError(
                f"row {r}: expected {len(header)} fields, found {len(cells)}"
            )
        if outcome:
            times[r - 1] = _parse_float(cells[pos[schema.time_col]], r, schema.time_col)
            if times[r - 1] < 0:
                raise DataValidationError(f"row {r}: negative time {times[r - 1]}")
            events[r - 1] = _parse_event(cells[pos[schema.event_col]], r, schema.event_col)
        for j, col in enumerate(numeric):
            cell = cells[pos[col]].strip()
            if cell == "":
                raise DataValidationError(f"row {r}: missing value in column {col!r}")
            num[r - 1, j] = _parse_float(cell, r, col)
        for col in categorical:
            cats[col].append(cells[pos[col]].strip())

    return SurvivalDataset(
        numeric=num,
        time=times,
        event=events,
        numeric_names=tuple(numeric),
        categorical={c: np.asarray(v, dtype=str) for c, v in cats.items()},
    )


def write_csv(ds: SurvivalDataset, path, time_col="time", event_col="event") -> None:
    """Write a dataset in the layout understood by :func:`load_csv`."""
    cols = list(ds.numeric_names) + list(ds.categorical) + [time_col, event_col]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(cols)
        for i in range(len(ds)):
            row = [repr(float(v)) for v in ds.numeric[i]]
            row += [ds.categorical[c][i] for c in ds.categorical]
            row += [repr(float(ds.time[i])), int(ds.event[i])]
            writer.writerow(row)


# ---------------------------------------------------------------------------
# preprocessing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PreprocessMeta:
    """Training-set statistics reused on every later dataset."""

    numeric_names: tuple[str, ...]
    means: tuple[float, ...]
    stds: tuple[float, ...]
    levels: Mapping[str, tuple[str, ...]]
    time_scale: float

    @property
    def feature_names(self) -> list[str]:
        return _encoded_names(self.numeric_names, self.levels)

    @property
    def n_features(self) -> int:
        return len(self.numeric_names) + sum(len(v) for v in self.levels.values())

    def encode(self, ds: SurvivalDataset) -> np.ndarray:
        """One-hot encode ``ds`` with the training levels (no standardization)."""
        if tuple(ds.numeric_names) != tuple(self.numeric_names):
            raise SchemaError(
                f"numeric columns {list(ds.numeric_names)} do not match "
                f"training columns {list(self.numeric_names)}"
            )
        if set(ds.categorical) != set(self.levels):
            raise SchemaError(
                f"categorical columns {sorted(ds.categorical)} do not match "
                f"training columns {sorted(self.levels)}"
            )
        return _encode(ds, self.levels)

    def standardize(self, X: np.ndarray) -> np.ndarray:
        """Standardize the numeric block of an encoded matrix."""
        X = np.array(X, dtype=float, ndmin=2)
        if X.shape[1] != self.n_features:
            raise SchemaError(f"expected {self.n_features} features, got {X.shape[1]}")
        p = len(self.numeric_names)
        means = np.asarray(self.means)
        stds = np.asarray(self.stds)
        safe = np.where(stds > 0, stds, 1.0)
        X[:, :p] = np.where(stds > 0, (X[:, :p] - means) / safe, 0.0)
        return X

    def to_dict(self) -> dict:
        return {
            "numeric_names": list(self.numeric_names),
            "means": list(self.means),
            "stds": list(self.stds),
            "levels": {k: list(v) for k, v in self.levels.items()},
            "time_scale": self.time_scale,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PreprocessMeta":
        return cls(
            numeric_names=tuple(d["numeric_names"]),
            means=tuple(float(v) for v in d["means"]),
            stds=tuple(float(v) for v in d["stds"]),
            levels={k: tuple(v) for k, v in d["levels"].items()},
            time_scale=float(d["time_scale"]),
        )


def preprocess_fit_transform(train: SurvivalDataset) -> tuple[SurvivalDataset, PreprocessMeta]:
    """Learn standardization, one-hot levels and the time scale from ``train``.

    Numeric columns are standardized with the population std; zero-variance
    columns become zeros. Times are divided by the largest training time.
    """
    if len(train) == 0:
        raise DataValidationError("cannot preprocess an empty dataset")
    means = train.numeric.mean(axis=0)
    stds = train.numeric.std(axis=0)
    time_scale = float(train.time.max())
    if time_scale <= 0:
        raise DataValidationError("all training times are zero")
    meta = PreprocessMeta(
        numeric_names=tuple(train.numeric_names),
        means=tuple(means.tolist()),
        stds=tuple(stds.tolist()),
        levels={k: tuple(v) for k, v in train.levels.items()},
        time_scale=time_scale,
    )
    return preprocess_apply(meta, train), meta


def preprocess_apply(meta: PreprocessMeta, ds: SurvivalDataset) -> SurvivalDataset:
    """Apply training statistics to ``ds``; times above the scale are kept as is."""
    X = meta.standardize(meta.encode(ds))
    return SurvivalDataset(
        numeric=X,
        time=ds.time / meta.time_scale,
        event=ds.event,
        numeric_names=tuple(meta.feature_names),
        time_scale=meta.time_scale,
    )


def derive_seed(master: int, *names) -> int:
    """Seed of the named sub-stream of ``master`` (stable across runs and platforms)."""
    key = ":".join([str(int(master)), *map(str, names)]).encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:4], "little")


def stratified_split_indices(event, test_frac: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    if not 0 < test_frac < 1:
        raise ValueError("test_frac must lie in (0, 1)")
    event = np.asarray(event, dtype=bool)
    rng = np.random.default_rng(seed)
    train, test = [], []
    for stratum in (False, True):
        idx = np.flatnonzero(event == stratum)
        if len(idx) == 0:
            raise DataValidationError(
                f"stratum event={int(stratum)} is empty; cannot stratify"
            )
        perm = rng.permutation(idx)
        n_test = int(round(test_frac * len(idx)))
        test.append(perm[:n_test])
        train.append(perm[n_test:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def stratified_split(ds: SurvivalDataset, test_frac: float, seed: int):
    """Split ``ds`` into (train, test), stratified on the event indicator."""
    tr, te = stratified_split_indices(ds.event, test_frac, seed)
    return ds.subset(tr), ds.subset(te)


# ---------------------------------------------------------------------------
# Kaplan-Meier
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StepFunction:
    """Right-continuous piecewise-constant function.

    ``values[i]`` holds on ``[knots[i], knots[i+1])``; ``initial`` holds
    before the first knot.
    """

    knots: np.ndarray
    values: np.ndarray
    initial: float = 1.0

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float).ravel()
        values = np.asarray(self.values, dtype=float).ravel()
        if len(knots) != len(values):
            raise ValueError("knots and values must have equal length")
        if np.any(np.diff(knots) <= 0):
            raise ValueError("knots must be strictly increasing")
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "values", values)

    def __call__(self, t):
        idx = np.searchsorted(self.knots, t, side="right")
        return np.concatenate([[self.initial], self.values])[idx]

    def left(self, t):
        """Left limit ``f(t-)``."""
        idx = np.searchsorted(self.knots, t, side="left")
        return np.concatenate([[self.initial], self.values])[idx]

    def to_dict(self) -> dict:
        return {"knots": self.knots.tolist(), "values": self.values.tolist(), "initial": self.initial}

    @classmethod
    def from_dict(cls, d: dict) -> "StepFunction":
        return cls(np.asarray(d["knots"], float), np.asarray(d["values"], float), float(d["initial"]))


def _product_limit(times, hits, removed_first):
    """Product-limit estimate where ``hits`` are the jumps and
    ``removed_first`` leave the risk set before the jumps at tied times."""
    times = np.asarray(times, dtype=float)
    if times.size == 0:
        raise ValueError("Kaplan-Meier needs at least one observation")
    uniq, inv = np.unique(times, return_inverse=True)
    d = np.bincount(inv, weights=hits, minlength=len(uniq))
    pre = np.bincount(inv, weights=removed_first, minlength=len(uniq))
    total = np.bincount(inv, minlength=len(uniq))
    at_risk = len(times) - np.concatenate([[0], np.cumsum(total)[:-1]])

    # Consecutive factors (n - d) / n telescope while nobody leaves the risk
    # set without a jump; multiplying whole segments keeps uncensored data
    # exactly equal to (n - k) / n.
    knots, values = [], []
    acc = 1.0
    seg_start = cur = 0
    for u, n_u, d_u, p_u in zip(uniq, at_risk, d.astype(int), pre.astype(int)):
        n_eff = int(n_u) - p_u
        if n_eff != cur:
            if seg_start > 0:
                acc *= cur / seg_start
            seg_start = cur = n_eff
        if d_u and n_eff > 0:
            cur = n_eff - d_u
            knots.append(u)
            values.append(acc * cur / seg_start)
    return StepFunction(np.asarray(knots), np.asarray(values), 1.0)


def kaplan_meier(times, events) -> StepFunction:
    """Kaplan-Meier estimate of the survival function.

    At tied times, events are processed before censorings.
    """
    times = np.asarray(times, dtype=float)
    events = np.asarray(events, dtype=bool)
    if times.shape != events.shape:
        raise ValueError("times and events must have equal length")
    if np.any(times < 0):
        raise ValueError("times must be nonnegative")
    return _product_limit(times, events.astype(float), np.zeros(len(times)))


def censoring_km(times, events) -> StepFunction:
    """Kaplan-Meier estimate of the censoring survival ``G(t)``.

    Censorings are the jumps. Subjects with an event at a tied time leave
    the risk set first.
    """
    times = np.asarray(times, dtype=float)
    events = np.asarray(events, dtype=bool)
    if times.shape != events.shape:
        raise ValueError("times and events must have equal length")
    if np.any(times < 0):
        raise ValueError("times must be nonnegative")
    return _product_limit(times, (~events).astype(float), events.astype(float))


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------


def _mixture_cumhazard(spec, t):
    t = np.asarray(t, dtype=float)
    return sum(w * eta * t**k for eta, k, w in spec)


def _as_groups(spec):
    spec = list(spec)
    if spec and np.ndim(spec[0][0]) == 0:
        return [[tuple(h) for h in spec]]
    return [[tuple(h) for h in g] for g in spec]


def simulate_weibull_mixture(
    n: int,
    spec,
    censor_rate: float = 0.0,
    seed: int = 0,
    n_noise: int = 0,
) -> SurvivalDataset:
    """Draw right-censored data from weighted Weibull hazard mixtures.

    Parameters
    ----------
    n : int
        Number of subjects.
    spec : sequence of (eta, k, w), or sequence of such sequences
        Head parameters of the cumulative hazard
        ``H(t) = sum_j w_j * eta_j * t**k_j``. With several mixtures each
        subject is assigned uniformly to one of them and the ``group``
        feature holds its index.
    censor_rate : float
        Target expected fraction of censored subjects. Censoring times are
        uniform on ``[0, c]`` with ``c`` solved for this fraction.
    seed : int
    n_noise : int
        Extra standard-normal features without signal.
    """
    groups = _as_groups(spec)
    for g in groups:
        if not g:
            raise ValueError("empty mixture specification")
        for eta, k, w in g:
            if eta <= 0 or k <= 0 or w <= 0:
                raise ValueError("eta, k and w must all be positive")
    if n < 1:
        raise ValueError("n must be positive")
    if not 0 <= censor_rate < 1:
        raise ValueError("censor_rate must lie in [0, 1)")

    rng = np.random.default_rng(seed)
    label = rng.integers(len(groups), size=n)
    target = -np.log(rng.uniform(size=n))

    # bisection on H(t) = -log U
    lo = np.zeros(n)
    hi = np.ones(n)
    H = lambda t: np.choose(label, [_mixture_cumhazard(g, t) for g in groups])  # noqa: E731
    while np.any(H(hi) < target):
        hi = np.where(H(hi) < target, hi * 2, hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        below = H(mid) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(hi - lo <= 1e-14 * np.maximum(hi, 1.0)):
            break
    event_time = 0.5 * (lo + hi)

    if censor_rate > 0:
        def surv(t):
            with np.errstate(over="ignore"):  # infinite hazard is S = 0
                return np.mean([np.exp(-_mixture_cumhazard(g, t)) for g in groups])

        def censored_fraction(log_c):
            c = math.exp(log_c)
            return integrate.quad(surv, 0, c, limit=200)[0] / c - censor_rate

        c = math.exp(optimize.brentq(censored_fraction, -30, 30, xtol=1e-12))
        censor_time = rng.uniform(0, c, size=n)
        event = event_time <= censor_time
        time = np.minimum(event_time, censor_time)
    else:
        event = np.ones(n, dtype=bool)
        time = event_time

    numeric = [label.astype(float)]
    names = ["group"]
    for i in range(n_noise):
        numeric.append(rng.standard_normal(n))
        names.append(f"noise{i}")
    return SurvivalDataset(
        numeric=np.column_stack(numeric),
        time=time,
        event=event,
        numeric_names=tuple(names),
    )
