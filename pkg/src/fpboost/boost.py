"""Gradient boosting of parametric hazard mixtures.

Each of the ``3J`` head parameters (scale ``eta_j``, shape ``k_j`` and
weight ``w_j``) is an additive model ``F = offset + lr * sum(trees)``.
Raw scores are laid out as columns ``[eta_1..eta_J, k_1..k_J, w_1..w_J]``.
Scales and shapes pass through ReLU, weights through the configured
activation, and the trees are fitted to the negative gradient of the
exact censored negative log-likelihood plus an ElasticNet penalty.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from scipy import optimize
from scipy.integrate import trapezoid

from . import heads
from .data import (
    PreprocessMeta,
    StepFunction,
    SurvivalDataset,
    censoring_km,
    kaplan_meier,
    preprocess_fit_transform,
)
from .heads import Activation, Family, HeadParams
from .metrics import EvaluationReport, c_index, default_grid, evaluation_report
from .trees import RegressionTree, fit_tree

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
H_FLOOR = 1e-12
N_RISK_POINTS = 256


class Init(str, Enum):
    RANDOM = "random"
    KM = "km"


class ConfigError(ValueError):
    """Invalid model configuration; ``field`` names the offending entry."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class ModelFormatError(ValueError):
    """A model file could not be read."""


@dataclass(frozen=True)
class FPBoostConfig:
    n_weibull: int = 1
    n_loglogistic: int = 0
    n_estimators: int = 100
    max_depth: int = 1
    learning_rate: float = 0.1
    alpha: float = 0.0
    gamma: float = 0.0
    weight_activation: Activation = Activation.RELU
    init: Init = Init.RANDOM
    patience: int | None = None
    seed: int = 0
    min_leaf: int = 1

    def __post_init__(self):
        for name, enum in (("weight_activation", Activation), ("init", Init)):
            value = getattr(self, name)
            if isinstance(value, enum):
                continue
            try:
                object.__setattr__(self, name, enum(str(value).lower()))
            except ValueError:
                choices = ", ".join(e.value for e in enum)
                raise ConfigError(name, f"{value!r} is not one of {choices}") from None
        self.validate()

    @property
    def n_heads(self) -> int:
        return self.n_weibull + self.n_loglogistic

    @property
    def families(self) -> list[Family]:
        return [Family.WEIBULL] * self.n_weibull + [Family.LOGLOGISTIC] * self.n_loglogistic

    def validate(self) -> None:
        def integer(name, low):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise ConfigError(name, f"expected an integer, got {value!r}")
            if value < low:
                raise ConfigError(name, f"must be at least {low}, got {value}")

        def real(name, low, high, low_open=False):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float, np.floating)):
                raise ConfigError(name, f"expected a number, got {value!r}")
            if not (low < value if low_open else low <= value) or value > high:
                bracket = "(" if low_open else "["
                raise ConfigError(name, f"must lie in {bracket}{low}, {high}], got {value}")

        integer("n_weibull", 0)
        integer("n_loglogistic", 0)
        if self.n_heads < 1:
            raise ConfigError("n_weibull", "at least one head is required")
        integer("n_estimators", 1)
        integer("max_depth", 1)
        integer("min_leaf", 1)
        integer("seed", 0)
        real("learning_rate", 0.0, 1.0, low_open=True)
        real("alpha", 0.0, np.inf)
        real("gamma", 0.0, 1.0)
        if self.patience is not None:
            integer("patience", 1)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["weight_activation"] = self.weight_activation.value
        d["init"] = self.init.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "FPBoostConfig":
        known = set(cls.__dataclass_fields__)
        for key in d:
            if key not in known:
                raise ConfigError(key, "unknown configuration field")
        return cls(**d)


@dataclass
class TrainTrace:
    """Per-iteration training losses (after each update) and validation C-index."""

    initial_loss_lik: float = float("nan")
    initial_loss_reg: float = float("nan")
    loss_lik: list = field(default_factory=list)
    loss_reg: list = field(default_factory=list)
    valid_c_index: list = field(default_factory=list)
    best_iteration: int | None = None

    def __len__(self):
        return len(self.loss_lik)

    @property
    def total_loss(self) -> np.ndarray:
        return np.asarray(self.loss_lik) + np.asarray(self.loss_reg)

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("iteration,loss_lik,loss_reg,loss,valid_c_index\n")
            fh.write(f"0,{self.initial_loss_lik!r},{self.initial_loss_reg!r},"
                     f"{self.initial_loss_lik + self.initial_loss_reg!r},\n")
            for m in range(len(self)):
                cidx = repr(self.valid_c_index[m]) if self.valid_c_index else ""
                total = self.loss_lik[m] + self.loss_reg[m]
                fh.write(f"{m + 1},{self.loss_lik[m]!r},{self.loss_reg[m]!r},{total!r},{cidx}\n")


# ---------------------------------------------------------------------------
# loss and gradients
# ---------------------------------------------------------------------------


def params_from_scores(F, n_heads: int, activation) -> HeadParams:
    F = np.asarray(F, dtype=float)
    J = n_heads
    return HeadParams(
        eta=np.maximum(F[..., :J], 0.0),
        k=np.maximum(F[..., J:2 * J], 0.0),
        w=heads.activate(activation, F[..., 2 * J:3 * J]),
    )


def _penalty(params: HeadParams, alpha, gamma):
    theta = np.concatenate(params, axis=-1)
    return alpha * (gamma * np.abs(theta).sum(axis=-1) + (1 - gamma) * (theta * theta).sum(axis=-1))


def loss(families, params: HeadParams, times, events, alpha=0.0, gamma=0.0):
    """Return ``(L_lik, L_reg)`` averaged over samples.

    ``L_lik = -mean(d_i log max(h(t_i), 1e-12) - H(t_i))`` and ``L_reg`` is
    the ElasticNet penalty of the activated per-sample parameters.
    """
    times = np.asarray(times, dtype=float)
    events = np.asarray(events, dtype=float)
    h = heads.mixture_hazard(families, params, times)
    H = heads.mixture_cumhazard(families, params, times)
    lik = -np.mean(events * np.log(np.maximum(h, H_FLOOR)) - H)
    reg = float(np.mean(_penalty(params, alpha, gamma))) if alpha else 0.0
    return float(lik), reg


def loss_from_scores(families, F, times, events, activation, alpha=0.0, gamma=0.0) -> float:
    """Total loss as a function of the raw scores (used for gradient checks)."""
    params = params_from_scores(F, len(families), activation)
    lik, reg = loss(families, params, times, events, alpha, gamma)
    return lik + reg


def pseudo_residuals(families, F, times, events, activation, alpha=0.0, gamma=0.0) -> np.ndarray:
    """Negative gradient of each sample's loss w.r.t. its raw scores.

    Returns shape ``(N, 3J)``; the gradient of the averaged total loss is
    this array divided by ``-N``.
    """
    is_ll = heads.loglogistic_mask(families)
    J = len(is_ll)
    F = np.asarray(F, dtype=float)
    t = np.asarray(times, dtype=float)
    d = np.asarray(events, dtype=float)
    Fe, Fk, Fw = F[:, :J], F[:, J:2 * J], F[:, 2 * J:]
    eta, k, w = params_from_scores(F, J, activation)

    hj, Hj = heads._hazards(is_ll, eta, k, t[:, None])
    dh_de, dh_dk, dH_de, dH_dk = heads._partials(is_ll, eta, k, t[:, None])
    h = np.sum(w * hj, axis=1)
    # the floor inside the log is flat, so clipped or tiny hazards give no gradient
    coef = np.where(h > H_FLOOR, -d / np.where(h > H_FLOOR, h, 1.0), 0.0)[:, None]

    gH_e, gH_k, gH_w = w * dH_de, w * dH_dk, Hj
    neg = np.any(w < 0, axis=1)
    if neg.any():
        _, ge, gk, gw = heads._numeric_cumhazard(
            is_ll, eta[neg], k[neg], w[neg], t[neg], grad=True
        )
        gH_e[neg], gH_k[neg], gH_w[neg] = ge, gk, gw

    g_e = coef * w * dh_de + gH_e
    g_k = coef * w * dh_dk + gH_k
    g_w = coef * hj + gH_w
    if alpha:
        def dpen(theta):
            return alpha * (gamma * np.sign(theta) + 2 * (1 - gamma) * theta)

        g_e = g_e + dpen(eta)
        g_k = g_k + dpen(k)
        g_w = g_w + dpen(w)

    r = np.empty_like(F)
    r[:, :J] = -np.where(Fe > 0, g_e, 0.0)
    r[:, J:2 * J] = -np.where(Fk > 0, g_k, 0.0)
    r[:, 2 * J:] = -heads.activation_vjp(activation, Fw, w, g_w)
    return r


# ---------------------------------------------------------------------------
# initialization
# ---------------------------------------------------------------------------


def init_random(seed: int, n_heads: int) -> np.ndarray:
    """Offsets drawn as eta ~ N(0.5, 1), k ~ N(0, 2), w ~ N(0, 1) (std)."""
    rng = np.random.default_rng(seed)
    eta = rng.normal(0.5, 1.0, n_heads)
    k = rng.normal(0.0, 2.0, n_heads)
    w = rng.normal(0.0, 1.0, n_heads)
    return np.concatenate([eta, k, w])


def fit_km_parametric(times, events):
    """Least-squares Weibull and LogLogistic fits to the KM cumulative hazard.

    Returns ``{"weibull": (eta, k), "loglogistic": (eta, k)}``.
    """
    km = kaplan_meier(times, events)
    S = km.values
    keep = (S > 0) & (S < 1) & (km.knots > 0)
    if keep.sum() < 2:
        raise ValueError("Kaplan-Meier curve is degenerate: need at least two event times")
    t = km.knots[keep]
    H = -np.log(S[keep])
    logt = np.log(t)

    k_w, log_eta_w = np.polyfit(logt, np.log(H), 1)

    # log(exp(H) - 1) is linear in log t for LogLogistic; refine on H itself
    k0, log_eta0 = np.polyfit(logt, np.log(np.expm1(H)), 1)

    def sse(p):
        return np.sum((np.log1p(np.exp(p[0]) * t ** np.exp(p[1])) - H) ** 2)

    res = optimize.minimize(
        sse, [log_eta0, np.log(max(k0, 1e-3))], method="Nelder-Mead",
        options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 4000},
    )
    fits = {
        Family.WEIBULL: (float(np.exp(log_eta_w)), float(k_w)),
        Family.LOGLOGISTIC: (float(np.exp(res.x[0])), float(np.exp(res.x[1]))),
    }
    for fam, (e, kk) in fits.items():
        if not (e > 0 and kk > 0):
            raise ValueError(f"{fam.value} fit to the Kaplan-Meier curve is not positive")
    return fits


def init_km(train: SurvivalDataset, families, seed: int, activation=Activation.RELU) -> np.ndarray:
    """Offsets around parametric fits of the training KM curve.

    Each head draws ``eta ~ N(eta_bar, eta_bar / 10)`` and
    ``k ~ N(k_bar, k_bar / 10)`` from its family's fit; weights start
    uniform at ``1 / J`` after activation (raw 0 if not invertible).
    """
    fits = fit_km_parametric(train.time, train.event)
    rng = np.random.default_rng(seed)
    J = len(families)
    eta = np.empty(J)
    k = np.empty(J)
    for j, fam in enumerate(families):
        e_bar, k_bar = fits[Family(fam)]
        eta[j] = rng.normal(e_bar, e_bar / 10)
        k[j] = rng.normal(k_bar, k_bar / 10)
    raw_w = heads.inverse_activation(activation, 1.0 / J)
    w = np.full(J, 0.0 if raw_w is None else raw_w)
    return np.concatenate([eta, k, w])


# ---------------------------------------------------------------------------
# model
# ---------------------------------------------------------------------------


@dataclass
class FPBoostModel:
    """A trained model.

    Features passed to the prediction methods are either a raw
    :class:`SurvivalDataset` or an encoded matrix in the training column
    layout (``meta.feature_names``), before standardization. Times are in
    the original units.
    """

    config: FPBoostConfig
    offsets: np.ndarray
    trees: list
    meta: PreprocessMeta
    censoring: StepFunction | None = None

    @property
    def families(self) -> list[Family]:
        return self.config.families

    @property
    def time_scale(self) -> float:
        return self.meta.time_scale

    @property
    def n_iterations(self) -> int:
        return len(self.trees[0])

    def _design(self, X) -> np.ndarray:
        if isinstance(X, SurvivalDataset):
            X = self.meta.encode(X)
        return self.meta.standardize(X)

    def _scores(self, Z, n_trees=None) -> np.ndarray:
        F = np.tile(self.offsets, (len(Z), 1))
        lr = self.config.learning_rate
        for c, column in enumerate(self.trees):
            for tree in column[:n_trees]:
                F[:, c] += lr * tree.predict(Z)
        return F

    def raw_scores(self, X) -> np.ndarray:
        return self._scores(self._design(X))

    def predict_params(self, X) -> HeadParams:
        return params_from_scores(self.raw_scores(X), self.config.n_heads, self.config.weight_activation)

    def predict_survival(self, X, times) -> np.ndarray:
        """Survival probabilities, shape (n_samples, len(times))."""
        times = np.asarray(times, dtype=float).ravel()
        if np.any(times < 0):
            raise ValueError("times must be nonnegative")
        params = self.predict_params(X)
        return heads.survival_grid(self.families, params, times / self.time_scale)

    def risk_score(self, X) -> np.ndarray:
        """Negated restricted mean survival time over the training time range."""
        return _risk_from_params(self.families, self.predict_params(X))

    def evaluate(self, ds: SurvivalDataset, grid=None) -> EvaluationReport:
        """C-index, IBS, C-TD and cumulative AUC on ``ds``.

        IPCW weights come from the training censoring distribution.
        """
        if self.censoring is None:
            raise ValueError("model has no training censoring distribution")
        grid = default_grid(ds.time) if grid is None else np.asarray(grid, dtype=float)
        params = self.predict_params(ds)
        S = heads.survival_grid(self.families, params, grid / self.time_scale)
        risks = _risk_from_params(self.families, params)
        return evaluation_report(risks, S, grid, ds.time, ds.event, self.censoring)

    # serialization --------------------------------------------------------

    def to_dict(self) -> dict:
        J = self.config.n_heads
        names = [f"{p}_{j}" for p in ("eta", "k", "w") for j in range(J)]
        return {
            "format_version": FORMAT_VERSION,
            "config": self.config.to_dict(),
            "families": [f.value for f in self.families],
            "parameter_models": [
                {"name": name, "offset": float(off), "trees": [t.to_dict() for t in column]}
                for name, off, column in zip(names, self.offsets, self.trees)
            ],
            "time_scale": self.time_scale,
            "preprocess_meta": self.meta.to_dict(),
            "censoring_km": None if self.censoring is None else self.censoring.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def from_dict(cls, d: dict) -> "FPBoostModel":
        try:
            version = d["format_version"]
        except (KeyError, TypeError):
            raise ModelFormatError("missing format_version") from None
        if version != FORMAT_VERSION:
            raise ModelFormatError(f"unsupported format_version {version!r} (expected {FORMAT_VERSION})")
        try:
            config = FPBoostConfig.from_dict(d["config"])
            meta = PreprocessMeta.from_dict(d["preprocess_meta"])
            if [f.value for f in config.families] != list(d["families"]):
                raise ModelFormatError("head families do not match the configuration")
            models = d["parameter_models"]
            if len(models) != 3 * config.n_heads:
                raise ModelFormatError("wrong number of parameter models")
            offsets = np.array([float(m["offset"]) for m in models])
            trees = [
                [RegressionTree.from_dict(t, meta.n_features) for t in m["trees"]] for m in models
            ]
            if len({len(col) for col in trees}) != 1:
                raise ModelFormatError("parameter models have different tree counts")
            if float(d["time_scale"]) != meta.time_scale:
                raise ModelFormatError("time_scale does not match preprocessing metadata")
            cens = d.get("censoring_km")
            censoring = None if cens is None else StepFunction.from_dict(cens)
        except ModelFormatError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelFormatError(f"malformed model file: {exc}") from exc
        return cls(config=config, offsets=offsets, trees=trees, meta=meta, censoring=censoring)

    @classmethod
    def load(cls, path) -> "FPBoostModel":
        try:
            d = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"{path}: not a valid model file ({exc})") from exc
        return cls.from_dict(d)


def save_model(model: FPBoostModel, path) -> None:
    model.save(path)


def load_model(path) -> FPBoostModel:
    return FPBoostModel.load(path)


def _risk_from_params(families, params: HeadParams) -> np.ndarray:
    grid = np.linspace(heads.T_FLOOR, 1.0, N_RISK_POINTS)
    S = heads.survival_grid(families, params, grid)
    return -trapezoid(S, grid, axis=1)


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


def fit(config: FPBoostConfig, train: SurvivalDataset, valid: SurvivalDataset | None = None):
    """Train a model on raw (unprocessed) data.

    Preprocessing statistics are learned from ``train``. With
    ``config.patience`` set, training stops once the validation C-index has
    not improved for that many iterations and the best iteration is kept.

    Returns
    -------
    model : FPBoostModel
    trace : TrainTrace
    """
    config.validate()
    if len(train) == 0:
        raise ValueError("empty training set")
    if config.patience is not None and valid is None:
        raise ValueError("patience requires a validation set")

    proc, meta = preprocess_fit_transform(train)
    X, t, e = proc.numeric, proc.time, proc.event
    fam = config.families
    J = config.n_heads
    act = config.weight_activation
    lr = config.learning_rate

    if config.init is Init.KM:
        offsets = init_km(proc, fam, config.seed, act)
    else:
        offsets = init_random(config.seed, J)

    start = params_from_scores(offsets[None, :], J, act)
    if not np.any((start.eta > 0) & (start.k > 0) & (start.w != 0)):
        # ReLU has zero gradient below 0, so such a model can never train
        logger.warning("every head is inactive at initialization (seed %d)", config.seed)

    F = np.tile(offsets, (len(X), 1))
    trees = [[] for _ in range(3 * J)]
    trace = TrainTrace()
    trace.initial_loss_lik, trace.initial_loss_reg = loss(
        fam, params_from_scores(F, J, act), t, e, config.alpha, config.gamma
    )

    if valid is not None:
        Xv = meta.standardize(meta.encode(valid))
        Fv = np.tile(offsets, (len(Xv), 1))
    best, best_m, stale = -np.inf, 0, 0

    for m in range(config.n_estimators):
        r = pseudo_residuals(fam, F, t, e, act, config.alpha, config.gamma)
        for c in range(3 * J):
            tree = fit_tree(X, r[:, c], config.max_depth, config.min_leaf)
            trees[c].append(tree)
            F[:, c] += lr * tree.predict(X)
            if valid is not None:
                Fv[:, c] += lr * tree.predict(Xv)
        lik, reg = loss(fam, params_from_scores(F, J, act), t, e, config.alpha, config.gamma)
        trace.loss_lik.append(lik)
        trace.loss_reg.append(reg)

        if valid is not None:
            risks = _risk_from_params(fam, params_from_scores(Fv, J, act))
            try:
                score = c_index(risks, valid.time, valid.event)
            except ValueError:
                score = float("nan")
            trace.valid_c_index.append(score)
            if score > best:
                best, best_m, stale = score, m + 1, 0
            else:
                stale += 1
            if config.patience is not None and stale >= config.patience:
                logger.info("early stop at iteration %d (best %d)", m + 1, best_m)
                break

    if config.patience is not None and best_m > 0:
        trees = [column[:best_m] for column in trees]
        trace.best_iteration = best_m

    model = FPBoostModel(
        config=config,
        offsets=offsets,
        trees=trees,
        meta=meta,
        censoring=censoring_km(train.time, train.event),
    )
    return model, trace
