"""Random hyperparameter search.

Every trial draws its configuration from its own generator seeded by
``(seed, trial_index)``, so a trial's configuration does not depend on how
many trials run or in which order.
"""
from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .boost import ConfigError, FPBoostConfig, Init, fit
from .data import SurvivalDataset, derive_seed, stratified_split
from .heads import Activation
from .metrics import c_index

logger = logging.getLogger(__name__)

VALID_FRAC = 0.2


@dataclass(frozen=True)
class SearchSpace:
    """Ranges sampled by :func:`sample_config`.

    Head counts are drawn uniformly from ``0..max_heads`` per family
    (redrawn when both are zero), estimators uniformly from the closed
    integer range, and the learning rate, ``alpha`` and ``gamma`` uniformly
    from their intervals.
    """

    max_heads: int = 32
    n_estimators: tuple[int, int] = (1, 512)
    max_depth: tuple[int, ...] = (1, 3, 6)
    weight_activation: tuple[str, ...] = tuple(a.value for a in Activation)
    learning_rate: tuple[float, float] = (0.01, 1.0)
    alpha: tuple[float, float] = (0.0, 1.0)
    gamma: tuple[float, float] = (0.0, 1.0)
    init: tuple[str, ...] = tuple(i.value for i in Init)
    patience: int | None = None

    def __post_init__(self):
        for name in ("n_estimators", "max_depth", "weight_activation", "learning_rate",
                     "alpha", "gamma", "init"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.max_heads < 1:
            raise ConfigError("max_heads", "must be at least 1")
        lo, hi = self.n_estimators
        if not 1 <= lo <= hi:
            raise ConfigError("n_estimators", f"invalid range {self.n_estimators}")
        lo, hi = self.learning_rate
        if not 0 < lo <= hi <= 1:
            raise ConfigError("learning_rate", f"invalid range {self.learning_rate}")
        for name in ("alpha", "gamma"):
            lo, hi = getattr(self, name)
            if not 0 <= lo <= hi or (name == "gamma" and hi > 1):
                raise ConfigError(name, f"invalid range {(lo, hi)}")
        for name in ("max_depth", "weight_activation", "init"):
            if not getattr(self, name):
                raise ConfigError(name, "needs at least one choice")
        for a in self.weight_activation:
            if a not in {e.value for e in Activation}:
                raise ConfigError("weight_activation", f"unknown activation {a!r}")
        for i in self.init:
            if i not in {e.value for e in Init}:
                raise ConfigError("init", f"unknown initialization {i!r}")
        if self.patience is not None and self.patience < 1:
            raise ConfigError("patience", "must be at least 1")

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d: dict) -> "SearchSpace":
        known = set(cls.__dataclass_fields__)
        for key in d:
            if key not in known:
                raise ConfigError(key, "unknown search-space field")
        try:
            return cls(**d)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError("search_space", str(exc)) from None


def sample_config(space: SearchSpace, seed: int, trial_index: int) -> FPBoostConfig:
    rng = np.random.default_rng([seed, trial_index])
    while True:
        n_w, n_ll = (int(v) for v in rng.integers(0, space.max_heads + 1, size=2))
        if n_w + n_ll > 0:
            break
    return FPBoostConfig(
        n_weibull=n_w,
        n_loglogistic=n_ll,
        n_estimators=int(rng.integers(space.n_estimators[0], space.n_estimators[1] + 1)),
        max_depth=int(rng.choice(space.max_depth)),
        learning_rate=float(rng.uniform(*space.learning_rate)),
        alpha=float(rng.uniform(*space.alpha)),
        gamma=float(rng.uniform(*space.gamma)),
        weight_activation=str(rng.choice(space.weight_activation)),
        init=str(rng.choice(space.init)),
        patience=space.patience,
        seed=int(rng.integers(2**31)),
    )


@dataclass
class TrialResult:
    trial_index: int
    config: dict
    c_index: float | None
    status: str = "ok"
    error: str | None = None
    scores: list = field(default_factory=list)
    n_iterations: list = field(default_factory=list)
    final_loss: list = field(default_factory=list)
    seconds: float = 0.0

    def to_json(self) -> str:
        """One log line; wall time is left out so logs are reproducible."""
        d = asdict(self)
        del d["seconds"]
        return json.dumps(d, sort_keys=True)


class SearchError(RuntimeError):
    """Every trial failed."""

    def __init__(self, results):
        reasons = "; ".join(f"trial {r.trial_index}: {r.error}" for r in results)
        super().__init__(f"all {len(results)} trials failed ({reasons})")
        self.results = results


def _run_trial(space, splits, seed, trial_index) -> TrialResult:
    start = time.perf_counter()
    config = None
    try:
        config = sample_config(space, seed, trial_index)
        scores, iters, losses = [], [], []
        for train, valid in splits:
            model, trace = fit(config, train, valid)
            scores.append(c_index(model.risk_score(valid), valid.time, valid.event))
            iters.append(model.n_iterations)
            losses.append(float(trace.total_loss[-1]))
        logger.info("trial %d: %.4f (%.1fs)", trial_index, np.mean(scores),
                    time.perf_counter() - start)
        return TrialResult(
            trial_index=trial_index,
            config=config.to_dict(),
            c_index=float(np.mean(scores)),
            scores=scores,
            n_iterations=iters,
            final_loss=losses,
            seconds=time.perf_counter() - start,
        )
    except Exception as exc:  # a failing trial must not end the search
        logger.warning("trial %d failed: %s", trial_index, exc)
        return TrialResult(
            trial_index=trial_index,
            config={} if config is None else config.to_dict(),
            c_index=None,
            status="failed",
            error=f"{type(exc).__name__}: {exc}",
            seconds=time.perf_counter() - start,
        )


def random_search(
    space: SearchSpace,
    train: SurvivalDataset,
    n_trials: int,
    seed: int = 0,
    repeats: int = 1,
    n_jobs: int = 1,
    log_path=None,
):
    """Evaluate ``n_trials`` random configurations on inner validation splits.

    ``train`` is split ``repeats`` times into inner train and validation
    sets (20%, stratified on the event indicator); a trial's score is its
    mean validation C-index over those splits.

    Returns
    -------
    best : TrialResult
        Highest score; ties go to the lower trial index.
    results : list of TrialResult
        All trials ordered by ``trial_index``.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be at least 1")
    if repeats < 1:
        raise ValueError("repeats must be at least 1")
    splits = [
        stratified_split(train, VALID_FRAC, derive_seed(seed, "tune-split", r))
        for r in range(repeats)
    ]
    if n_jobs == 1:
        results = [_run_trial(space, splits, seed, i) for i in range(n_trials)]
    else:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            futures = [pool.submit(_run_trial, space, splits, seed, i) for i in range(n_trials)]
            results = [f.result() for f in futures]
    results.sort(key=lambda r: r.trial_index)

    if log_path is not None:
        with open(log_path, "w", encoding="utf-8") as fh:
            for r in results:
                fh.write(r.to_json() + "\n")

    ok = [r for r in results if r.status == "ok"]
    if not ok:
        raise SearchError(results)
    best = max(ok, key=lambda r: (r.c_index, -r.trial_index))
    return best, results
