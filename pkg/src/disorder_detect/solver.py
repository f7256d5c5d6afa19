"""Threshold function r* by value iteration, and the optimal success probability.

Tables are dense arrays over all state tuples of length d1 + 1, addressed by a
mixed-radix code with the oldest state as the most significant digit.

Zero-probability transitions are handled in "weighted" form: the solver never
forms f0 * g or L_0 * g as a product (g is infinite when L_0 = 0) but evaluates
L_0 g = L_0 (1 - p^d2) + q sum_m L_m / p^m directly.  Tuples u with L_0(u) = 0
cannot be reached before the change; their entries hold +inf.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path as FilePath

import numpy as np

from .errors import BudgetExceededError, ConfigurationError, ModelError
from .likelihood import log_L_table, log_weighted_statistic, statistic_from_logL
from .model import DisorderModel, model_hash

DEFAULT_TOLERANCE = 1e-10
DEFAULT_MAX_ITERATIONS = 100_000
DEFAULT_BUDGET_MB = 1024.0


def budget_mb() -> float:
    raw = os.environ.get("DISORDER_DETECT_BUDGET_MB")
    return float(raw) if raw else DEFAULT_BUDGET_MB


def all_tuples(n_states: int, length: int) -> np.ndarray:
    """Every state tuple of ``length``, row i being the tuple with code i."""
    if length == 0:
        return np.zeros((1, 0), dtype=np.int64)
    grid = np.indices((n_states,) * length).reshape(length, -1).T
    return np.ascontiguousarray(grid, dtype=np.int64)


def encode(tup, n_states: int) -> int:
    code = 0
    for x in tup:
        code = code * n_states + int(x)
    return code


@dataclass
class ThresholdTable:
    d1: int
    d2: int
    n_states: int
    values: np.ndarray = field(repr=False)
    iteration: int
    converged: bool
    sup_delta: float
    model_hash: str
    tolerance: float | None = None

    def code(self, tup) -> int:
        if len(tup) != self.d1 + 1:
            raise ValueError(f"threshold tuples have length d1+1={self.d1 + 1}")
        return encode(tup, self.n_states)

    def __getitem__(self, tup) -> float:
        return float(self.values[self.code(tup)])

    def tuples(self) -> np.ndarray:
        return all_tuples(self.n_states, self.d1 + 1)


@dataclass
class SolveDiagnostics:
    iterations: int
    sup_delta_history: list[float]
    converged: bool
    tolerance: float
    max_decrease: float = 0.0  # largest pointwise drop r_{k-1} - r_k seen; 0 when monotone


class SolverTables:
    """Everything the iteration needs, precomputed once per model."""

    def __init__(self, model: DisorderModel):
        self.model = model
        s, d1 = model.n_states, model.d1
        self.s = s
        self.K = s ** (d1 + 1)
        required = self.K * s * (d1 + 8) * 8 / 2**20
        if required > budget_mb():
            raise BudgetExceededError(required, budget_mb(), what=f"threshold table over {s}^{d1 + 2} windows")
        self.u = all_tuples(s, d1 + 1)
        self.log_L_u = log_L_table(model, self.u)
        self.live = ~np.isneginf(self.log_L_u[:, 0])
        self.w = all_tuples(s, d1 + 2)
        self.log_L_w = log_L_table(model, self.w)
        # f0(u_last, y) for every (u, y)
        self.f0 = model.P0[self.u[:, -1]]
        self.successor = (np.arange(self.K * s).reshape(self.K, s)) % self.K

    @cached_property
    def statistic(self) -> np.ndarray:
        """Detection statistic g on every (d1+2)-window; inf for certain change, NaN if impossible."""
        return statistic_from_logL(self.log_L_w, self.model.p, self.model.d2)

    @cached_property
    def log_weighted(self) -> np.ndarray:
        """log(L_0 g) on every (d1+2)-window."""
        return log_weighted_statistic(self.log_L_w, self.model.p, self.model.d2)

    @cached_property
    def stop_term(self) -> np.ndarray:
        """f0(u_last, y) g(u, y) for live u, shape (K, s); zero rows for dead u."""
        lw = self.log_weighted.reshape(self.K, self.s)
        out = np.zeros((self.K, self.s))
        live = self.live
        with np.errstate(over="ignore"):
            out[live] = np.exp(lw[live] - self.log_L_u[live, :1])
        return out

    def r0_closed_form(self) -> np.ndarray:
        p, q, d2 = self.model.p, self.model.q, self.model.d2
        total = np.zeros(self.K)
        with np.errstate(invalid="ignore", over="ignore"):
            for m in range(1, self.model.d1 + 2):
                total = total + np.exp(self.log_L_u[:, m - 1] - self.log_L_u[:, 0]) / p**m
        r0 = p * ((1.0 - p**d2) + q * total)
        return np.where(self.live, r0, math.inf)

    def sweep(self, r_prev: np.ndarray, threads: int = 1) -> np.ndarray:
        out = np.empty(self.K)
        if threads <= 1 or self.K < 2 * threads:
            self._sweep_rows(r_prev, out, 0, self.K)
            return out
        bounds = np.linspace(0, self.K, threads + 1).astype(int)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            jobs = [pool.submit(self._sweep_rows, r_prev, out, a, b) for a, b in zip(bounds[:-1], bounds[1:])]
            for j in jobs:
                j.result()
        return out

    def _sweep_rows(self, r_prev, out, a, b):
        # r_k(u) = p * sum_y max(f0 g(u, y), f0 r_{k-1}(u')) with u' = drop_first(u + y)
        f0 = self.f0[a:b]
        cont = np.where(f0 > 0.0, f0 * np.where(f0 > 0.0, r_prev[self.successor[a:b]], 0.0), 0.0)
        terms = np.maximum(self.stop_term[a:b], cont)
        acc = terms[:, 0].copy()
        for y in range(1, self.s):  # fixed order keeps results independent of chunking
            acc = acc + terms[:, y]
        out[a:b] = np.where(self.live[a:b], self.model.p * acc, math.inf)


def _table(model, tables: SolverTables, values, iteration, converged, sup_delta, tolerance=None):
    return ThresholdTable(
        d1=model.d1,
        d2=model.d2,
        n_states=model.n_states,
        values=values,
        iteration=iteration,
        converged=converged,
        sup_delta=sup_delta,
        model_hash=model_hash(model),
        tolerance=tolerance,
    )


def r0_table(model: DisorderModel) -> ThresholdTable:
    """r_0(u) = p [1 - p^d2 + q sum_{m=1}^{d1+1} L_{m-1}(u) / (p^m L_0(u))]."""
    t = SolverTables(model)
    return _table(model, t, t.r0_closed_form(), 0, False, math.inf)


def expected_stop_payoff(model: DisorderModel, tables: SolverTables | None = None) -> np.ndarray:
    """T h divided by (1 - alpha), by explicit summation over the next observation.

    Independent route to r_0: p * sum_y f0(u_last, y) g(u, y).
    """
    t = tables or SolverTables(model)
    acc = t.stop_term[:, 0].copy()
    for y in range(1, t.s):
        acc = acc + t.stop_term[:, y]
    return np.where(t.live, model.p * acc, math.inf)


def iterate_threshold(model: DisorderModel, r_prev: ThresholdTable, threads: int = 1,
                      tables: SolverTables | None = None) -> ThresholdTable:
    """One application of the max(stop, continue) recursion."""
    _check_table(model, r_prev)
    t = tables or SolverTables(model)
    new = t.sweep(r_prev.values, threads)
    delta = _sup_delta(new, r_prev.values, t.live)
    return _table(model, t, new, r_prev.iteration + 1, False, delta)


def _sup_delta(a, b, live) -> float:
    if not np.any(live):
        return 0.0
    return float(np.max(np.abs(a[live] - b[live])))


def _check_table(model: DisorderModel, table: ThresholdTable):
    if table.model_hash != model_hash(model):
        raise ConfigurationError("threshold table was built for a different model")


def threshold_iterates(model: DisorderModel, threads: int = 1, tables: SolverTables | None = None):
    """Yield r_0, r_1, r_2, ... as arrays (endless; the caller decides when to stop).

    r_0 is taken in operator form, summed exactly like a sweep, so that
    floating-point rounding preserves the monotonicity r_k <= r_{k+1} that
    holds in exact arithmetic.  It agrees with the closed form to ~1e-16.
    """
    t = tables or SolverTables(model)
    r = expected_stop_payoff(model, t)
    while True:
        yield r
        r = t.sweep(r, threads)


def solve_threshold(
    model: DisorderModel,
    tolerance: float = DEFAULT_TOLERANCE,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    threads: int = 1,
) -> tuple[ThresholdTable, SolveDiagnostics]:
    """Iterate from r_0 until the sup-norm change drops below ``tolerance``."""
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    t = SolverTables(model)
    iterates = threshold_iterates(model, threads, t)
    r = next(iterates)
    history: list[float] = []
    max_decrease = 0.0
    converged = False
    k = 0
    while k < max_iterations:
        new = next(iterates)
        k += 1
        if np.any(t.live):
            drop = float(np.max(r[t.live] - new[t.live]))
            max_decrease = max(max_decrease, drop)
            if drop > 0.0:
                raise AssertionError(f"value iteration decreased by {drop:g} at sweep {k}")
        delta = _sup_delta(new, r, t.live)
        history.append(delta)
        r = new
        if delta < tolerance:
            converged = True
            break
    sup = history[-1] if history else math.inf
    table = _table(model, t, r, k, converged, sup, tolerance)
    return table, SolveDiagnostics(k, history, converged, tolerance, max_decrease)


def fixed_point_residual(model: DisorderModel, table: ThresholdTable) -> float:
    t = SolverTables(model)
    return _sup_delta(t.sweep(table.values), table.values, t.live)


def problem_value(model: DisorderModel, r_star: ThresholdTable) -> float:
    """Success probability of the optimal rule among stopping times >= d1 + 1.

    (1 - pi) p^{d1+1} * sum_u max{L_0 g(x0, u), L_0(x0, u) r*(u)}.
    """
    _check_table(model, r_star)
    t = SolverTables(model)
    rows = slice(model.x0_index * t.K, (model.x0_index + 1) * t.K)
    weighted = np.exp(t.log_weighted[rows])
    L0 = np.exp(t.log_L_w[rows, 0])
    cont = np.where(L0 > 0.0, L0 * np.where(L0 > 0.0, r_star.values, 0.0), 0.0)
    terms = np.maximum(weighted, cont)
    total = math.fsum(terms)
    return (1.0 - model.pi) * model.p ** (model.d1 + 1) * total


# ---------------------------------------------------------------- file format


def _num(v: float):
    return "inf" if math.isinf(v) else float(v)


def save_table(table: ThresholdTable, model: DisorderModel, path) -> None:
    doc = {
        "model_hash": table.model_hash,
        "d1": table.d1,
        "d2": table.d2,
        "states": list(model.states),
        "tolerance": table.tolerance,
        "iterations": table.iteration,
        "converged": table.converged,
        "sup_delta": _num(table.sup_delta),
        "records": [
            {"tuple": [model.states[i] for i in tup], "r_star": _num(v)}
            for tup, v in zip(table.tuples(), table.values)
        ],
    }
    FilePath(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_table(path, model: DisorderModel | None = None) -> ThresholdTable:
    try:
        doc = json.loads(FilePath(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelError(f"cannot read threshold table {path}: {exc}") from exc
    try:
        states = list(doc["states"])
        index = {label: i for i, label in enumerate(states)}
        s, d1 = len(states), int(doc["d1"])
        values = np.full(s ** (d1 + 1), np.nan)
        for rec in doc["records"]:
            code = encode([index[x] for x in rec["tuple"]], s)
            values[code] = math.inf if rec["r_star"] == "inf" else float(rec["r_star"])
        sup = doc["sup_delta"]
        table = ThresholdTable(
            d1=d1,
            d2=int(doc["d2"]),
            n_states=s,
            values=values,
            iteration=int(doc["iterations"]),
            converged=bool(doc["converged"]),
            sup_delta=math.inf if sup == "inf" else float(sup),
            model_hash=doc["model_hash"],
            tolerance=doc.get("tolerance"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelError(f"malformed threshold table {path}: {exc}") from exc
    if np.any(np.isnan(values)):
        raise ModelError(f"threshold table {path} does not cover every tuple")
    if model is not None:
        _check_table(model, table)
    return table
