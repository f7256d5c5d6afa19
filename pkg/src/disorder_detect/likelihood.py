"""Likelihood products, joint density S, predictive kernel G and the detection statistic.

For a window ``w = (x_k, ..., x_n)`` with ``l = n - k`` transitions, ``L_m(w)`` is the
probability of those transitions when exactly the last ``m`` of them follow the
post-change kernel.  All products are accumulated as sums of logs.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import ContractError, ImpossiblePathError
from .model import DisorderModel

NEG_INF = -math.inf


def _as_window(model: DisorderModel, w) -> np.ndarray:
    w = np.asarray(w, dtype=np.int64)
    if w.ndim != 1 or w.size < 1:
        raise ContractError("a window needs at least one observation")
    if w.min() < 0 or w.max() >= model.n_states:
        raise ContractError(f"window entries must be state indices in [0, {model.n_states})")
    return w


def log_L_all(model: DisorderModel, w: Sequence[int]) -> np.ndarray:
    """``[log L_0(w), ..., log L_l(w)]`` for a window with l transitions."""
    w = _as_window(model, w)
    a = model.logP0[w[:-1], w[1:]]
    b = model.logP1[w[:-1], w[1:]]
    return _log_L_rows(a[None, :], b[None, :])[0]


def _log_L_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise log L_m for pre/post log transition terms of shape (K, l)."""
    K, l = a.shape
    pre = np.zeros((K, l + 1))
    pre[:, 1:] = np.cumsum(a, axis=1)  # pre[:, j] = sum of first j pre-change terms
    post = np.zeros((K, l + 1))
    post[:, 1:] = np.cumsum(b[:, ::-1], axis=1)  # post[:, m] = sum of last m post-change terms
    return pre[:, ::-1] + post


def log_L_table(model: DisorderModel, windows: np.ndarray) -> np.ndarray:
    """log L_m for many windows at once: (K, l+1) indices -> (K, l+1) log-likelihoods."""
    windows = np.asarray(windows, dtype=np.int64)
    a = model.logP0[windows[:, :-1], windows[:, 1:]]
    b = model.logP1[windows[:, :-1], windows[:, 1:]]
    return _log_L_rows(a, b)


def log_L(model: DisorderModel, w: Sequence[int], m: int) -> float:
    """log L_m(w); ``m`` counts the trailing post-change transitions."""
    w = _as_window(model, w)
    if not 0 <= m <= w.size - 1:
        raise ContractError(f"m={m} outside 0..{w.size - 1} for a window of length {w.size}")
    return float(log_L_all(model, w)[m])


def _log_weights_S(model: DisorderModel, n: int) -> np.ndarray:
    """Prior weights of L_0..L_n inside S_n, indexed by m."""
    p, q, pi = model.p, model.q, model.pi
    wts = np.zeros(n + 1)
    wts[0] = (1 - pi) * p**n
    for i in range(1, n + 1):
        wts[n - i + 1] += (1 - pi) * p ** (i - 1) * q
    wts[n] += pi
    return wts


def log_joint_density_S(model: DisorderModel, w: Sequence[int]) -> float:
    w = _as_window(model, w)
    if w[0] != model.x0_index:
        raise ContractError("S is defined for windows starting at time 0 with x0")
    logL = log_L_all(model, w)
    wts = _log_weights_S(model, w.size - 1)
    with np.errstate(divide="ignore"):
        return float(logsumexp(logL, b=wts)) if np.any(wts > 0) else NEG_INF


def joint_density_S(model: DisorderModel, w: Sequence[int]) -> float:
    """Probability of observing the window x_0..x_n from x0 (all change times mixed)."""
    return math.exp(log_joint_density_S(model, w))


def _log_weights_G(model: DisorderModel, l: int, alpha: float) -> np.ndarray:
    """Weights of L_0..L_{l+1} inside G_{l+1}(w, alpha)."""
    p, q = model.p, model.q
    wts = np.zeros(l + 2)
    wts[l + 1] = alpha
    for i in range(l + 1):
        wts[i + 1] += (1 - alpha) * p ** (l - i) * q
    wts[0] = (1 - alpha) * p ** (l + 1)
    return wts


def log_g_kernel(model: DisorderModel, w: Sequence[int], alpha: float) -> float:
    w = _as_window(model, w)
    if w.size < 2:
        raise ContractError("G needs a window with at least one transition")
    if not 0.0 <= alpha <= 1.0:
        raise ContractError("alpha must lie in [0, 1]")
    logL = log_L_all(model, w)
    wts = _log_weights_G(model, w.size - 2, alpha)
    keep = wts > 0
    if not np.any(keep):
        return NEG_INF
    return float(logsumexp(logL[keep], b=wts[keep]))


def g_kernel(model: DisorderModel, w: Sequence[int], alpha: float) -> float:
    """G_{l+1}(w, alpha): predictive density of the last l+1 transitions given Pi = alpha at the start."""
    return math.exp(log_g_kernel(model, w, alpha))


def statistic_from_logL(logL: np.ndarray, p: float, d2: int) -> np.ndarray:
    """Detection statistic for rows of log L_0..L_{d1+1}; +inf where L_0 = 0.

    Rows whose likelihoods are all zero get NaN (impossible window).
    """
    logL = np.atleast_2d(logL)
    q = 1.0 - p
    m = np.arange(1, logL.shape[1])
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        ratios = np.exp(logL[:, 1:] - logL[:, :1] - m * math.log(p))
        total = np.zeros(logL.shape[0])
        for j in range(ratios.shape[1]):  # fixed summation order
            total = total + ratios[:, j]
        g = (1.0 - p**d2) + q * total
    dead = np.isneginf(logL[:, 0])
    anything = np.any(~np.isneginf(logL[:, 1:]), axis=1)
    g = np.where(dead & anything, math.inf, g)
    g = np.where(dead & ~anything, np.nan, g)
    return g


def log_weighted_statistic(logL: np.ndarray, p: float, d2: int) -> np.ndarray:
    """log of L_0 * g = L_0 (1 - p^d2) + q sum_m L_m / p^m, finite even where L_0 = 0."""
    logL = np.atleast_2d(logL)
    q = 1.0 - p
    m = np.arange(logL.shape[1])
    coef = np.empty(logL.shape[1])
    coef[0] = 1.0 - p**d2
    coef[1:] = q / p ** m[1:]
    with np.errstate(divide="ignore"):
        terms = logL + np.log(coef)
    return logsumexp(terms, axis=1)


def detection_statistic_g(model: DisorderModel, w: Sequence[int]) -> float:
    """1 - p^d2 + q * sum_{m=1}^{d1+1} L_m(w) / (p^m L_0(w)) on a window of length d1 + 2.

    Returns ``math.inf`` when the window is impossible before the change but
    possible after it (certain change: stop now).
    """
    w = _as_window(model, w)
    if w.size != model.d1 + 2:
        raise ContractError(f"the statistic needs a window of length d1+2={model.d1 + 2}, got {w.size}")
    g = statistic_from_logL(log_L_all(model, w), model.p, model.d2)[0]
    if math.isnan(g):
        raise ImpossiblePathError(f"window {tuple(int(x) for x in w)} has zero probability")
    return float(g)
