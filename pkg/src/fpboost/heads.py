"""Parametric hazard heads and their weighted mixture.

Weibull:      h = eta k t^(k-1)              H = eta t^k
LogLogistic:  h = eta k t^(k-1) / (1 + u)    H = log(1 + u),   u = eta t^k

All functions broadcast; head arrays carry the head index on the last axis.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import expit

T_FLOOR = 1e-8
H_CAP = 700.0
# Fixed quadrature nodes for mixtures with negative weights: 256 points on
# the normalized time range [0, 1], continued past 1 with the same step.
N_NODES = 256
_STEP = 1.0 / (N_NODES - 1)


class Family(str, Enum):
    WEIBULL = "weibull"
    LOGLOGISTIC = "loglogistic"


class Activation(str, Enum):
    RELU = "relu"
    SIGMOID = "sigmoid"
    SOFTMAX = "softmax"
    TANH = "tanh"
    IDENTITY = "identity"


class HeadParams(NamedTuple):
    """Post-activation head parameters, each of shape ``(..., J)``."""

    eta: np.ndarray
    k: np.ndarray
    w: np.ndarray


def loglogistic_mask(families: Sequence[Family] | Family) -> np.ndarray:
    """Boolean array, True for LogLogistic heads."""
    if isinstance(families, (str, Family)):
        families = [families]
    return np.array([Family(f) is Family.LOGLOGISTIC for f in families], dtype=bool)


def _pow_km1(t, k):
    # t^(k-1); the floor only matters where k < 1 makes the power singular at 0
    t_safe = np.where(k < 1, np.maximum(t, T_FLOOR), t)
    return np.power(t_safe, k - 1)


def _hazards(is_ll, eta, k, t):
    """Per-head hazard and cumulative hazard."""
    t = np.maximum(t, 0.0)
    tk = np.power(t, k)
    base = eta * k * _pow_km1(t, k)
    u = eta * tk
    h = np.where(is_ll, base / (1 + u), base)
    H = np.where(is_ll, np.log1p(u), u)
    H = np.where(t > 0, H, 0.0)
    return h, H


def _partials(is_ll, eta, k, t):
    t = np.maximum(t, T_FLOOR)
    tk = np.power(t, k)
    tkm1 = np.power(t, k - 1)
    logt = np.log(t)
    u = eta * tk
    # Weibull closed forms
    dh_deta = k * tkm1
    dh_dk = eta * tkm1 * (1 + k * logt)
    dH_deta = tk
    dH_dk = u * logt
    # LogLogistic: divide through by powers of (1 + u)
    q = 1.0 / (1.0 + u)
    dh_deta = np.where(is_ll, dh_deta * q * q, dh_deta)
    dh_dk = np.where(is_ll, eta * tkm1 * (1 + u + k * logt) * q * q, dh_dk)
    dH_deta = np.where(is_ll, tk * q, dH_deta)
    dH_dk = np.where(is_ll, u * logt * q, dH_dk)
    return dh_deta, dh_dk, dH_deta, dH_dk


def head_hazard(family, eta, k, t):
    """Hazard of a single head."""
    return _hazards(loglogistic_mask(family)[0], eta, k, t)[0]


def head_cumhazard(family, eta, k, t):
    """Cumulative hazard of a single head; zero at ``t = 0``."""
    return _hazards(loglogistic_mask(family)[0], eta, k, t)[1]


def head_partials(family, eta, k, t):
    """Return ``(dh/deta, dh/dk, dH/deta, dH/dk)`` for a single head.

    Times below ``T_FLOOR`` are clamped to it.
    """
    return _partials(loglogistic_mask(family)[0], eta, k, t)


def mixture_hazard(families, params: HeadParams, t, clip=True):
    """``max(0, sum_j w_j h_j(t))``; ``t`` broadcasts against ``params[..., 0]``."""
    is_ll = loglogistic_mask(families)
    t = np.asarray(t, dtype=float)[..., None]
    h, _ = _hazards(is_ll, params.eta, params.k, t)
    total = np.sum(params.w * h, axis=-1)
    return np.maximum(total, 0.0) if clip else total


def _numeric_cumhazard(is_ll, eta, k, w, t, grad=False, chunk=256):
    """Cumulative hazard for mixtures that may have negative weights.

    The clipped hazard is integrated on fixed nodes ``l / 255``: each cell
    contributes ``max(0, sum_j w_j (H_j(u_{l+1}) - H_j(u_l)))`` and ``H(t)`` is
    linearly interpolated between the cumulative node values. The result is
    nondecreasing in ``t`` and exact whenever the mixture keeps its sign on
    a cell.

    Arrays are 2-D: ``eta, k, w`` of shape (n, J), ``t`` of shape (n,) or
    (n, m). Returns H with t's shape and, if ``grad``, the gradients of H
    with respect to eta, k and w, shape (n, J) (only for 1-D ``t``).
    """
    t = np.maximum(np.asarray(t, dtype=float), 0.0)
    squeeze = t.ndim == 1
    t2 = t[:, None] if squeeze else t
    n, J = eta.shape
    H = np.empty_like(t2)
    if grad:
        if not squeeze:
            raise ValueError("gradients need one time per sample")
        g_eta, g_k, g_w = (np.zeros((n, J)) for _ in range(3))
    pos = t2 / _STEP
    cell = np.floor(pos).astype(int)
    frac = pos - cell
    n_cells = int(cell.max()) + 1 if n else 1
    nodes = np.arange(n_cells + 1) * _STEP
    for s in range(0, n, chunk):
        sl = slice(s, s + chunk)
        e, kk, ww = eta[sl, None, :], k[sl, None, :], w[sl, None, :]
        _, Hj = _hazards(is_ll, e, kk, nodes[None, :, None])  # (c, L+1, J)
        dHj = np.diff(Hj, axis=1)  # (c, L, J)
        inc = np.sum(ww * dHj, axis=-1)
        alive = inc > 0
        inc = np.where(alive, inc, 0.0)
        cum = np.concatenate([np.zeros((inc.shape[0], 1)), np.cumsum(inc, axis=1)], axis=1)
        c_idx = cell[sl]
        rows = np.arange(inc.shape[0])[:, None]
        H[sl] = cum[rows, c_idx] + frac[sl] * inc[rows, c_idx]
        if grad:
            ci = c_idx[:, 0]
            # coefficient of each cell increment in H(t)
            coef = (np.arange(inc.shape[1])[None, :] < ci[:, None]).astype(float)
            coef[np.arange(len(ci)), ci] = frac[sl, 0]
            coef *= alive
            _, _, dHe, dHk = _partials(is_ll, e, kk, nodes[None, :, None])
            dHe = np.where(nodes[None, :, None] > 0, dHe, 0.0)
            dHk = np.where(nodes[None, :, None] > 0, dHk, 0.0)
            g_w[sl] = np.einsum("cl,clj->cj", coef, dHj)
            g_eta[sl] = ww[:, 0, :] * np.einsum("cl,clj->cj", coef, np.diff(dHe, axis=1))
            g_k[sl] = ww[:, 0, :] * np.einsum("cl,clj->cj", coef, np.diff(dHk, axis=1))
    H = H[:, 0] if squeeze else H
    if grad:
        return H, g_eta, g_k, g_w
    return H


def mixture_cumhazard(families, params: HeadParams, t):
    """Cumulative hazard of the clipped mixture.

    Closed form when every weight is nonnegative; otherwise the clipped
    hazard is integrated numerically on a fixed 256-node grid.
    """
    is_ll = loglogistic_mask(families)
    eta = np.asarray(params.eta, dtype=float)
    k = np.asarray(params.k, dtype=float)
    w = np.asarray(params.w, dtype=float)
    t = np.asarray(t, dtype=float)
    shape = np.broadcast_shapes(eta.shape[:-1], t.shape)
    eta2 = np.broadcast_to(eta, shape + eta.shape[-1:]).reshape(-1, len(is_ll))
    k2 = np.broadcast_to(k, shape + k.shape[-1:]).reshape(-1, len(is_ll))
    w2 = np.broadcast_to(w, shape + w.shape[-1:]).reshape(-1, len(is_ll))
    t2 = np.broadcast_to(t, shape).reshape(-1)
    _, Hj = _hazards(is_ll, eta2, k2, t2[:, None])
    H = np.sum(w2 * Hj, axis=-1)
    neg = np.any(w2 < 0, axis=-1)
    if neg.any():
        H[neg] = _numeric_cumhazard(is_ll, eta2[neg], k2[neg], w2[neg], t2[neg])
    return H.reshape(shape)


def survival(families, params: HeadParams, t):
    """``exp(-H(t))`` with ``H`` capped at ``H_CAP``."""
    return np.exp(-np.minimum(mixture_cumhazard(families, params, t), H_CAP))


def cumhazard_grid(families, params: HeadParams, times) -> np.ndarray:
    """Cumulative hazard of ``n`` samples (params of shape (n, J)) on a
    shared time grid of shape (m,); returns shape (n, m)."""
    is_ll = loglogistic_mask(families)
    eta, k, w = (np.atleast_2d(np.asarray(a, dtype=float)) for a in params)
    times = np.asarray(times, dtype=float).ravel()
    _, Hj = _hazards(is_ll, eta[:, None, :], k[:, None, :], times[None, :, None])
    H = np.sum(w[:, None, :] * Hj, axis=-1)
    neg = np.any(w < 0, axis=-1)
    if neg.any():
        tt = np.broadcast_to(times, (int(neg.sum()), len(times)))
        H[neg] = _numeric_cumhazard(is_ll, eta[neg], k[neg], w[neg], tt)
    return H


def survival_grid(families, params: HeadParams, times) -> np.ndarray:
    return np.exp(-np.minimum(cumhazard_grid(families, params, times), H_CAP))


# ---------------------------------------------------------------------------
# weight activations
# ---------------------------------------------------------------------------


def _softmax(raw):
    z = raw - np.max(raw, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


def activate(kind, raw) -> np.ndarray:
    raw = np.asarray(raw, dtype=float)
    kind = Activation(kind)
    if kind is Activation.RELU:
        return np.maximum(raw, 0.0)
    if kind is Activation.SIGMOID:
        return expit(raw)
    if kind is Activation.SOFTMAX:
        return _softmax(raw)
    if kind is Activation.TANH:
        return np.tanh(raw)
    return raw.copy()


def activation_vjp(kind, raw, w, grad_w) -> np.ndarray:
    """Chain ``grad_w`` (gradient w.r.t. the activated weights) back to ``raw``."""
    kind = Activation(kind)
    if kind is Activation.RELU:
        return np.where(raw > 0, grad_w, 0.0)
    if kind is Activation.SIGMOID:
        return grad_w * w * (1 - w)
    if kind is Activation.SOFTMAX:
        return w * (grad_w - np.sum(w * grad_w, axis=-1, keepdims=True))
    if kind is Activation.TANH:
        return grad_w * (1 - w * w)
    return np.array(grad_w, dtype=float)


def apply_weight_activation(kind, raw):
    """Return activated weights and the Jacobian ``d w_i / d raw_j``.

    ReLU has derivative 0 at exactly 0.
    """
    raw = np.asarray(raw, dtype=float)
    w = activate(kind, raw)
    J = raw.shape[-1]
    eye = np.eye(J)
    if Activation(kind) is Activation.SOFTMAX:
        jac = w[..., :, None] * (eye - w[..., None, :])
    else:
        diag = activation_vjp(kind, raw, w, np.ones_like(raw))
        jac = diag[..., :, None] * eye
    return w, jac


def inverse_activation(kind, value: float) -> float | None:
    """Raw score mapping to ``value`` for every head, or None if none exists."""
    kind = Activation(kind)
    if kind in (Activation.RELU, Activation.IDENTITY):
        return value
    if kind is Activation.SOFTMAX:
        return 0.0
    if kind is Activation.SIGMOID and 0 < value < 1:
        return float(np.log(value / (1 - value)))
    if kind is Activation.TANH and -1 < value < 1:
        return float(np.arctanh(value))
    return None


@dataclass(frozen=True)
class PolynomialHeads:
    """Weibull heads whose weighted hazard sum equals a polynomial."""

    eta: np.ndarray
    k: np.ndarray
    w: np.ndarray

    @property
    def families(self):
        return [Family.WEIBULL] * len(self.k)


def weibull_heads_for_polynomial(coeffs, eta: float = 1.0) -> PolynomialHeads:
    """Heads reproducing ``sum_n coeffs[n] t^n`` exactly.

    Head ``n`` has shape ``k = n + 1`` so that its hazard is ``b t^n`` with
    ``b = eta (n + 1)``; the weight ``coeffs[n] / b`` matches the coefficient.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    degree = np.arange(len(coeffs))
    k = degree + 1.0
    b = eta * k
    return PolynomialHeads(eta=np.full(len(coeffs), float(eta)), k=k, w=coeffs / b)
