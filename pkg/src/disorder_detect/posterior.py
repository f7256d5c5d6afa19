"""Posterior probability that the change has already happened, and its identities.

``PosteriorState(pi_n, n)`` stores Pi_n = P(theta <= n | X_0..X_n).  Windows handed
to the multi-step functions start at time ``state.n``; pass ``start=`` to have
that alignment checked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ContractError, ImpossiblePathError
from .likelihood import (
    _as_window,
    detection_statistic_g,
    log_g_kernel,
    log_joint_density_S,
    log_L_all,
)
from .model import DisorderModel


@dataclass(frozen=True)
class PosteriorState:
    pi_n: float
    n: int
    drift: int = 0  # how many updates had to be clamped back into [0, 1]

    def __post_init__(self):
        if not 0.0 <= self.pi_n <= 1.0:
            raise ContractError(f"posterior {self.pi_n!r} outside [0, 1]")


def initial_state(model: DisorderModel) -> PosteriorState:
    return PosteriorState(model.pi, 0)


def _clamped(value: float, n: int, drift: int) -> PosteriorState:
    if value > 1.0 or value < 0.0:
        return PosteriorState(min(1.0, max(0.0, value)), n, drift + 1)
    return PosteriorState(value, n, drift)


def posterior_exact(model: DisorderModel, w: Sequence[int]) -> PosteriorState:
    """Pi_n from the whole prefix x_0..x_n: 1 - (1 - pi) p^n L_0 / S."""
    w = _as_window(model, w)
    n = w.size - 1
    log_S = log_joint_density_S(model, w)
    if log_S == -math.inf:
        raise ImpossiblePathError("prefix has zero probability")
    if model.pi >= 1.0:
        return PosteriorState(1.0, n)
    log_L0 = log_L_all(model, w)[0]
    tail = math.exp(math.log1p(-model.pi) + n * math.log(model.p) + log_L0 - log_S)
    return _clamped(1.0 - tail, n, 0)


def posterior_step(model: DisorderModel, state: PosteriorState, x_n: int, x_next: int) -> PosteriorState:
    """One-step update Pi_{n+1} = f1 (q + p Pi_n) / G."""
    p, q, a = model.p, model.q, state.pi_n
    f0 = model.P0[x_n, x_next]
    f1 = model.P1[x_n, x_next]
    post = f1 * (q + p * a)
    G = p * (1.0 - a) * f0 + post
    if G <= 0.0:
        raise ImpossiblePathError(f"transition {x_n}->{x_next} impossible at Pi={a}")
    return _clamped(post / G, state.n + 1, state.drift)


def _check_start(state: PosteriorState, start):
    if start is not None and start != state.n:
        raise ContractError(f"window starts at {start} but the posterior is at time {state.n}")


def _multistep_parts(model: DisorderModel, state: PosteriorState, w: np.ndarray):
    if w.size < 2:
        raise ContractError("multi-step identities need a window with at least one transition")
    l = w.size - 2
    p, q, a = model.p, model.q, state.pi_n
    logL = log_L_all(model, w)
    log_G = log_g_kernel(model, w, a)
    if log_G == -math.inf:
        raise ImpossiblePathError("window has zero predictive density")
    L = np.exp(logL - log_G)  # L_m / G
    before = a * L[l + 1]
    after_in = 0.0
    for k in range(l + 1):
        after_in += p ** (l - k) * L[k + 1]
    after_in *= (1.0 - a) * q
    return before, after_in


def posterior_multistep(
    model: DisorderModel, state: PosteriorState, w: Sequence[int], start: int | None = None
) -> PosteriorState:
    """Pi_n from Pi_{n-l-1} and the window x_{n-l-1}..x_n in one shot."""
    _check_start(state, start)
    w = _as_window(model, w)
    before, after_in = _multistep_parts(model, state, w)
    return _clamped(before + after_in, state.n + w.size - 1, state.drift)


def prob_change_within(model: DisorderModel, state: PosteriorState, k: int) -> float:
    """P(theta <= n + k | F_n)."""
    if k < 0:
        raise ContractError("k must be nonnegative")
    return 1.0 - model.p**k * (1.0 - state.pi_n)


def prob_change_before_window(
    model: DisorderModel, state: PosteriorState, w: Sequence[int], start: int | None = None
) -> float:
    """P(theta <= n - l - 1 | F_n) from Pi_{n-l-1} and the window x_{n-l-1}..x_n."""
    _check_start(state, start)
    w = _as_window(model, w)
    before, _ = _multistep_parts(model, state, w)
    return min(1.0, max(0.0, before))


def window_payoff_h(model: DisorderModel, w: Sequence[int], alpha: float) -> float:
    """g(w) (1 - alpha) clamped to [0, 1]; w = x_{n-d1-1}..x_n and alpha = Pi_n.

    This is P(n - d1 <= theta <= n + d2 | F_n).  At alpha = 1 with a finite
    statistic the change is known to precede the window, so the value is 0.
    A window that is impossible before the change (infinite statistic) with
    alpha = 1 leaves the product form undefined and raises ContractError.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ContractError("alpha must lie in [0, 1]")
    g = detection_statistic_g(model, w)
    if alpha == 1.0:
        if math.isinf(g):
            raise ContractError("payoff undefined: window impossible before the change and posterior 1")
        return 0.0
    return min(1.0, max(0.0, g * (1.0 - alpha)))
