"""Brute-force ground truth by exhaustive enumeration of (theta, path) pairs.

Nothing here uses the likelihood or posterior formulas: path probabilities are
products of kernel entries chosen by the switching rule, conditionals are ratios
of table sums, and optimal values come from backward induction on the full
prefix tree.  Desk scale only (s <= 3, N <= 8).

Change times are tabulated individually for theta = 0..N+1; the cell N+2
aggregates theta > N+1, whose path law is the pure pre-change chain.  Any
interval predicate on theta is split over that tail exactly, using the
geometric law of theta given theta > N+1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .errors import BudgetExceededError, ImpossiblePathError
from .model import DisorderModel
from .solver import budget_mb

Rule = Callable[[tuple], bool]


@dataclass
class JointTable:
    model: DisorderModel
    horizon: int
    mass: np.ndarray = field(repr=False)  # (N + 3, s^(N+1)) joint probabilities

    @property
    def n_states(self) -> int:
        return self.model.n_states

    @property
    def n_cells(self) -> int:
        return self.horizon + 3

    def total_mass(self) -> float:
        return math.fsum(self.mass.ravel())

    @cached_property
    def _prefix_mass(self) -> dict[int, np.ndarray]:
        return {}

    def prefix_mass(self, n: int) -> np.ndarray:
        """Joint mass of (theta cell, prefix x_0..x_n), shape (cells, s^(n+1))."""
        if not 0 <= n <= self.horizon:
            raise ValueError(f"prefix time {n} outside 0..{self.horizon}")
        cache = self._prefix_mass
        if n not in cache:
            s = self.n_states
            cache[n] = self.mass.reshape(self.n_cells, s ** (n + 1), s ** (self.horizon - n)).sum(axis=2)
        return cache[n]

    def interval_weights(self, lo, hi) -> np.ndarray:
        """Per cell, the probability that lo <= theta <= hi given theta falls in that cell."""
        N, p, q = self.horizon, self.model.p, self.model.q
        w = np.array([1.0 if lo <= j <= hi else 0.0 for j in range(N + 2)] + [0.0])
        a = max(lo, N + 2)
        if a <= hi:
            # sum_{j=a}^{hi} p^(j-N-2) q
            w[-1] = p ** (a - N - 2) - (0.0 if math.isinf(hi) else p ** (hi - N - 1))
        return w


def enumerate_joint(model: DisorderModel, horizon: int) -> JointTable:
    """Exact P(theta cell, x_0..x_N) for every path of length N + 1."""
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    s, N = model.n_states, horizon
    required = (N + 3) * s ** (N + 1) * 8 * 3 / 2**20
    if required > budget_mb():
        raise BudgetExceededError(required, budget_mb(), what=f"joint table with {s}^{N + 1} paths")
    pi, p, q = model.pi, model.p, model.q
    prior = [pi] + [(1 - pi) * p ** (j - 1) * q for j in range(1, N + 2)] + [(1 - pi) * p ** (N + 1)]
    P0, P1 = np.asarray(model.P0), np.asarray(model.P1)

    mass = np.empty((N + 3, s ** (N + 1)))
    for cell in range(N + 3):
        switch = max(cell, 1) if cell <= N + 1 else N + 2
        probs = np.zeros(s)
        probs[model.x0_index] = 1.0
        for r in range(1, N + 1):
            kernel = P1 if r >= switch else P0
            last = np.arange(probs.size) % s
            probs = (probs[:, None] * kernel[last]).reshape(-1)
        mass[cell] = prior[cell] * probs
    return JointTable(model, N, mass)


def _code(prefix: Sequence[int], s: int) -> int:
    c = 0
    for x in prefix:
        c = c * s + int(x)
    return c


def prefix_tuples(s: int, n: int) -> list[tuple]:
    """All tuples of length n + 1 in code order."""
    idx = np.indices((s,) * (n + 1)).reshape(n + 1, -1).T
    return [tuple(int(v) for v in row) for row in idx]


def conditional_all(joint: JointTable, n: int, lo, hi) -> np.ndarray:
    """P(lo <= theta <= hi | x_0..x_n) for every prefix code; NaN where the prefix has zero mass."""
    M = joint.prefix_mass(n)
    w = joint.interval_weights(lo, hi)
    num = w @ M
    den = M.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(den > 0, num / den, np.nan)


def oracle_conditional(joint: JointTable, prefix: Sequence[int], lo=-math.inf, hi=math.inf) -> float:
    """P(lo <= theta <= hi | X_0..X_n = prefix) by table lookup."""
    n = len(prefix) - 1
    M = joint.prefix_mass(n)[:, _code(prefix, joint.n_states)]
    den = math.fsum(M)
    if den <= 0:
        raise ImpossiblePathError(f"prefix {tuple(prefix)} has zero probability")
    w = joint.interval_weights(lo, hi)
    return math.fsum(w * M) / den


def _window(n: int, d1: int, d2: int) -> tuple[int, int]:
    return n - d1, n + d2


def oracle_rule_value(joint: JointTable, rule: Rule) -> float:
    """Exact P(-d1 <= theta - tau <= d2) for a prefix-measurable rule; no stop by N counts as failure.

    The rule is only consulted on prefixes of positive probability.
    """
    s, N = joint.n_states, joint.horizon
    d1, d2 = joint.model.d1, joint.model.d2
    x0 = joint.model.x0_index
    live = [(x0,)]
    total = []
    for n in range(N + 1):
        M = joint.prefix_mass(n)
        w = joint.interval_weights(*_window(n, d1, d2))
        next_live = []
        for prefix in live:
            col = M[:, _code(prefix, s)]
            if not np.any(col > 0):
                continue  # unreachable prefix: the rule need not be defined there
            if rule(prefix):
                total.append(math.fsum(w * col))
            elif n < N:
                next_live.extend(prefix + (y,) for y in range(s))
        live = next_live
    return math.fsum(total)


@dataclass(frozen=True)
class TruncatedValue:
    horizon: int
    value_lower: float
    value_upper: float


@dataclass
class TruncatedRule:
    """Optimal rule of the horizon-N problem: stop flags per prefix code at each time."""

    n_states: int
    stop: list[np.ndarray]

    def __call__(self, prefix: tuple) -> bool:
        return bool(self.stop[len(prefix) - 1][_code(prefix, self.n_states)])


def oracle_optimal_value(model: DisorderModel, horizon: int, earliest: int = 0,
                         joint: JointTable | None = None) -> tuple[TruncatedValue, TruncatedRule]:
    """Backward induction over the prefix tree with a forced stop at ``horizon``.

    ``earliest`` forbids stopping before that time (earliest = d1 + 1 gives the
    clamped class the optimal rule lives in).  The upper bound adds the prior
    mass P(theta > N - d1): a rule stopping after N can only succeed when theta
    is at least N + 1 - d1.
    """
    joint = joint or enumerate_joint(model, horizon)
    s, N, d1, d2 = model.n_states, horizon, model.d1, model.d2
    if earliest > N:
        raise ValueError("earliest stop time is beyond the horizon")
    stop_flags: list[np.ndarray] = [None] * (N + 1)
    V = None
    for n in range(N, -1, -1):
        M = joint.prefix_mass(n)
        stop_pay = joint.interval_weights(*_window(n, d1, d2)) @ M
        if n == N:
            V = stop_pay
            stop_flags[n] = np.ones_like(V, dtype=bool)
            continue
        cont = V.reshape(-1, s).sum(axis=1)
        if n < earliest:
            stop_flags[n] = np.zeros_like(cont, dtype=bool)
            V = cont
        else:
            stop_flags[n] = stop_pay >= cont
            V = np.maximum(stop_pay, cont)
    lower = float(V[model.x0_index])
    k = N - d1
    residual = 1.0 if k < 0 else (1.0 - model.pi) * model.p**k
    upper = min(1.0, lower + residual)
    return TruncatedValue(N, lower, upper), TruncatedRule(s, stop_flags)


def fixed_time_rule(t: int) -> Rule:
    return lambda prefix: len(prefix) - 1 >= t
