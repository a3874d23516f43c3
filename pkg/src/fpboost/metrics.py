"""Censoring-aware evaluation metrics.

Every IPCW quantity takes the censoring survival ``G`` as a
:class:`~fpboost.data.StepFunction`, usually ``censoring_km`` of the
training data. Denominators use the left limit ``G(t_i-)``; a zero
denominator gives the sample weight 0.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from .data import StepFunction

logger = logging.getLogger(__name__)

_CHUNK = 512


def _check(times, events, *arrays):
    times = np.asarray(times, dtype=float).ravel()
    events = np.asarray(events, dtype=bool).ravel()
    out = [np.asarray(a, dtype=float) for a in arrays]
    for a in out:
        if a.shape[0] != len(times):
            raise ValueError("inputs must have the same number of samples")
    if len(events) != len(times):
        raise ValueError("times and events must have equal length")
    return (times, events, *out)


def _inverse(values):
    """1 / values with zeros mapped to weight 0; also returns the zero count."""
    values = np.asarray(values, dtype=float)
    zero = values <= 0
    inv = np.zeros_like(values)
    np.divide(1.0, values, out=inv, where=~zero)
    n_zero = int(zero.sum())
    if n_zero:
        logger.debug("%d samples with zero censoring survival get weight 0", n_zero)
    return inv, n_zero


def _pair_counts(risks, times, events):
    """For each event i: #comparable j (t_j > t_i), #concordant, #tied risks."""
    ev = np.flatnonzero(events)
    comp = np.empty(len(ev), dtype=np.int64)
    conc = np.empty(len(ev), dtype=np.int64)
    tie = np.empty(len(ev), dtype=np.int64)
    for s in range(0, len(ev), _CHUNK):
        i = ev[s:s + _CHUNK]
        later = times[None, :] > times[i, None]
        comp[s:s + _CHUNK] = later.sum(axis=1)
        conc[s:s + _CHUNK] = (later & (risks[None, :] < risks[i, None])).sum(axis=1)
        tie[s:s + _CHUNK] = (later & (risks[None, :] == risks[i, None])).sum(axis=1)
    return ev, comp, conc, tie


def c_index(risks, times, events) -> float:
    """Harrell's concordance index.

    A pair is comparable when ``t_i < t_j`` and subject ``i`` had the event;
    it is concordant when ``risk_i > risk_j``. Tied risks count one half.
    """
    times, events, risks = _check(times, events, risks)
    _, comp, conc, tie = _pair_counts(risks, times, events)
    n_comp = int(comp.sum())
    if n_comp == 0:
        raise ValueError("no comparable pairs")
    return (2 * int(conc.sum()) + int(tie.sum())) / (2 * n_comp)


def ipcw_weights(times, events, censor_G: StepFunction, t: float) -> np.ndarray:
    """IPCW weights at time ``t``.

    ``w_i = d_i 1(t_i <= t) / G(t_i-) + 1(t_i > t) / G(t)``.
    """
    times, events = _check(times, events)
    inv_i, _ = _inverse(censor_G.left(times))
    inv_t, _ = _inverse(censor_G(np.asarray([t], dtype=float)))
    return np.where(times <= t, events * inv_i, inv_t[0])


def brier_score(S_pred, times, events, censor_G: StepFunction, t: float) -> float:
    """IPCW Brier score at a single time."""
    times, events, S_pred = _check(times, events, S_pred)
    w = ipcw_weights(times, events, censor_G, t)
    alive = (times > t).astype(float)
    return math.fsum(w * (alive - S_pred) ** 2) / len(times)


def default_grid(times, n: int = 100) -> np.ndarray:
    """``n`` equispaced times between the 1st and 99th percentile."""
    lo, hi = np.percentile(np.asarray(times, dtype=float), [1, 99])
    if not hi > lo:
        raise ValueError("observed times do not span an interval")
    return np.linspace(lo, hi, n)


def brier_curve(S_grid, times, events, censor_G, grid) -> np.ndarray:
    """Brier score at every grid time; ``S_grid`` has shape (n, len(grid))."""
    S_grid = np.asarray(S_grid, dtype=float)
    return np.array(
        [brier_score(S_grid[:, m], times, events, censor_G, t) for m, t in enumerate(grid)]
    )


def ibs(S_grid, times, events, censor_G, grid=None) -> float:
    """Integrated Brier score, normalized by the grid span.

    ``S_grid[i, m]`` is the predicted survival of sample ``i`` at ``grid[m]``.
    """
    grid = default_grid(times) if grid is None else np.asarray(grid, dtype=float)
    if len(grid) < 2:
        raise ValueError("the grid needs at least two points")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("the grid must be strictly increasing")
    bs = brier_curve(S_grid, times, events, censor_G, grid)
    return float(trapezoid(bs, grid) / (grid[-1] - grid[0]))


def c_td(risks, times, events, censor_G: StepFunction) -> float:
    """Concordance with each comparable pair weighted by ``G(t_i-)^-2``."""
    times, events, risks = _check(times, events, risks)
    ev, comp, conc, tie = _pair_counts(risks, times, events)
    inv, _ = _inverse(censor_G.left(times[ev]))
    g = inv * inv
    den = math.fsum(g * comp)
    if den == 0:
        raise ValueError("no comparable pairs with positive weight")
    return math.fsum(g * (conc + 0.5 * tie)) / den


def auc_at(risks, times, events, censor_G, t) -> float | None:
    """Time-dependent AUC; None when cases or controls are missing."""
    times, events, risks = _check(times, events, risks)
    inv, _ = _inverse(censor_G.left(times))
    w = np.where((times <= t) & events, inv, 0.0)
    controls = np.sort(risks[times > t])
    den_w = math.fsum(w)
    if len(controls) == 0 or den_w == 0:
        return None
    below = np.searchsorted(controls, risks, side="right")
    return math.fsum(w * below) / (len(controls) * den_w)


def cumulative_auc(risks, times, events, censor_G: StepFunction, grid=None) -> float:
    """AUC(t) over ``grid``, integrated by the trapezoid rule and divided by
    the span of the grid points where it is defined."""
    grid = default_grid(times) if grid is None else np.asarray(grid, dtype=float)
    kept_t, kept_v = [], []
    for t in grid:
        v = auc_at(risks, times, events, censor_G, t)
        if v is not None:
            kept_t.append(t)
            kept_v.append(v)
    if not kept_t:
        raise ValueError("AUC undefined at every grid point")
    if len(kept_t) == 1:
        return kept_v[0]
    return float(trapezoid(kept_v, kept_t) / (kept_t[-1] - kept_t[0]))


@dataclass
class EvaluationReport:
    c_index: float
    ibs: float
    c_td: float
    auc: float
    brier_times: list = field(default_factory=list)
    brier_values: list = field(default_factory=list)
    n_comparable_pairs: int = 0
    n_zero_weight: int = 0

    METRICS = (("C-Index", "c_index"), ("IBS", "ibs"), ("C-TD", "c_td"), ("AUC", "auc"))

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def to_table(self) -> str:
        """Plain-text table with metrics scaled by 100."""
        lines = [f"{'metric':<8} {'value':>7}"]
        for label, key in self.METRICS:
            lines.append(f"{label:<8} {100 * getattr(self, key):>7.1f}")
        return "\n".join(lines) + "\n"


def parse_table(text: str) -> dict[str, float]:
    """Inverse of :meth:`EvaluationReport.to_table` (values back on the 0-1 scale)."""
    keys = dict(EvaluationReport.METRICS)
    out = {}
    for line in text.strip().splitlines()[1:]:
        label, value = line.split()
        out[keys[label]] = float(value) / 100
    return out


def evaluation_report(risks, S_grid, grid, times, events, censor_G) -> EvaluationReport:
    """All metrics for one set of predictions."""
    times, events, risks = _check(times, events, risks)
    grid = np.asarray(grid, dtype=float)
    bs = brier_curve(S_grid, times, events, censor_G, grid)
    _, comp, _, _ = _pair_counts(risks, times, events)
    _, n_zero = _inverse(censor_G.left(times))
    return EvaluationReport(
        c_index=c_index(risks, times, events),
        ibs=float(trapezoid(bs, grid) / (grid[-1] - grid[0])),
        c_td=c_td(risks, times, events, censor_G),
        auc=cumulative_auc(risks, times, events, censor_G, grid),
        brier_times=grid.tolist(),
        brier_values=bs.tolist(),
        n_comparable_pairs=int(comp.sum()),
        n_zero_weight=n_zero,
    )
