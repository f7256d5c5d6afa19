"""Monte Carlo estimate of the detector's success probability.

Random streams: replications are grouped in fixed blocks of ``block_size``;
block ``b`` draws from ``Generator(PCG64(SeedSequence(seed, spawn_key=(b,))))``,
first the change times of the block, then a (block, horizon) matrix of uniforms
that drives the inverse-CDF path sampler.  A replication's outcome therefore
depends only on (seed, block_size, its index), never on thread count.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .detector import DetectionReport, run_to_decision
from .errors import ConfigurationError
from .model import DisorderModel, auto_horizon, paths_from_uniforms, sample_theta
from .solver import SolverTables, ThresholdTable, problem_value

UNDECIDED = -1


def block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(block,))))


@dataclass
class ExperimentConfig:
    model: DisorderModel
    replications: int
    seed: int = 0
    horizon: int | None = None
    record_traces: int = 0
    block_size: int = 1000
    threads: int = 1

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be positive")
        if self.horizon is None:
            self.horizon = auto_horizon(self.model)
        if self.horizon < 1:
            raise ValueError("horizon must be positive")


# ---------------------------------------------------------------- rules


class OptimalRule:
    """tau*: first n >= d1+1 with g(x_{n-d1-1..n}) >= r*(x_{n-d1..n}), via a lookup table."""

    name = "tau_star"

    def __init__(self, model: DisorderModel, table: ThresholdTable):
        t = SolverTables(model)
        g = t.statistic
        r = table.values[np.arange(g.size) % t.K]
        with np.errstate(invalid="ignore"):
            self.stop = np.where(np.isnan(g), False, g >= r)
        self.model = model

    def stopping_times(self, paths: np.ndarray) -> np.ndarray:
        m = self.model
        s, width = m.n_states, m.d1 + 2
        mod = s**width
        reps, T = paths.shape
        tau = np.full(reps, UNDECIDED, dtype=np.int64)
        code = np.zeros(reps, dtype=np.int64)
        for n in range(T):
            code = (code * s + paths[:, n]) % mod
            if n >= m.d1 + 1:
                hit = (tau == UNDECIDED) & self.stop[code]
                tau[hit] = n
        return tau


class FixedTimeRule:
    def __init__(self, t: int):
        self.t = t
        self.name = f"fixed_{t}"

    def stopping_times(self, paths: np.ndarray) -> np.ndarray:
        reps, T = paths.shape
        return np.full(reps, self.t if self.t < T else UNDECIDED, dtype=np.int64)


class PosteriorThresholdRule:
    """Stop at the first n >= earliest with Pi_n >= level."""

    def __init__(self, model: DisorderModel, level: float, earliest: int = 0):
        self.model, self.level, self.earliest = model, level, earliest
        self.name = f"posterior_{level:g}"

    def stopping_times(self, paths: np.ndarray) -> np.ndarray:
        m = self.model
        reps, T = paths.shape
        tau = np.full(reps, UNDECIDED, dtype=np.int64)
        pi = np.full(reps, m.pi)
        for n in range(T):
            if n > 0:
                x, y = paths[:, n - 1], paths[:, n]
                f0, f1 = m.P0[x, y], m.P1[x, y]
                post = f1 * (m.q + m.p * pi)
                pi = np.clip(post / (m.p * (1 - pi) * f0 + post), 0.0, 1.0)
            if n >= self.earliest:
                hit = (tau == UNDECIDED) & (pi >= self.level)
                tau[hit] = n
        return tau


# ---------------------------------------------------------------- experiments


@dataclass
class ExperimentResult:
    success_rate: float
    standard_error: float | None
    undecided_count: int
    theoretical_value: float
    z_score: float | None
    replications: int
    horizon: int
    seed: int
    records: dict = field(repr=False, default_factory=dict)
    traces: list[DetectionReport] = field(repr=False, default_factory=list)

    def summary(self) -> dict:
        return {
            "success_rate": self.success_rate,
            "standard_error": self.standard_error,
            "undecided_count": self.undecided_count,
            "theoretical_value": self.theoretical_value,
            "z_score": self.z_score,
            "replications": self.replications,
            "horizon": self.horizon,
            "seed": self.seed,
        }

    def write_csv(self, path) -> None:
        r = self.records
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["rep", "theta", "tau", "success", "undecided"])
            for row in zip(r["rep"], r["theta"], r["tau"], r["success"], r["undecided"]):
                rep, theta, tau, ok, und = (int(v) for v in row)
                out.writerow([rep, theta, "" if und else tau, ok, und])


def _simulate_block(config: ExperimentConfig, block: int):
    start = block * config.block_size
    size = min(config.block_size, config.replications - start)
    rng = block_rng(config.seed, block)
    theta = sample_theta(config.model.prior, rng, size)
    u = rng.random((size, config.horizon))
    return theta, paths_from_uniforms(config.model, theta, u)


def _blocks(config: ExperimentConfig):
    n_blocks = -(-config.replications // config.block_size)
    if config.threads <= 1:
        for b in range(n_blocks):
            yield _simulate_block(config, b)
        return
    with ThreadPoolExecutor(max_workers=config.threads) as pool:
        yield from pool.map(lambda b: _simulate_block(config, b), range(n_blocks))


def _success(theta, tau, d1, d2):
    return (tau != UNDECIDED) & (theta - tau >= -d1) & (theta - tau <= d2)


def _rate_and_se(success: np.ndarray):
    R = success.size
    rate = float(success.mean())
    se = math.sqrt(rate * (1 - rate) / R) if R > 1 else None
    return rate, se


def estimate_success(config: ExperimentConfig, r_star: ThresholdTable) -> ExperimentResult:
    """Success frequency of tau* over simulated disordered paths, against the theoretical value."""
    if not r_star.converged:
        raise ConfigurationError("threshold table has not converged")
    model = config.model
    rule = OptimalRule(model, r_star)
    thetas, taus = [], []
    first_paths = []
    for theta, paths in _blocks(config):
        thetas.append(theta)
        taus.append(rule.stopping_times(paths))
        if sum(len(p) for p in first_paths) < config.record_traces:
            first_paths.append(paths)
    theta = np.concatenate(thetas)
    tau = np.concatenate(taus)
    success = _success(theta, tau, model.d1, model.d2)
    rate, se = _rate_and_se(success)
    theo = problem_value(model, r_star)
    z = (rate - theo) / se if se else None

    traces = []
    if config.record_traces:
        paths = np.concatenate(first_paths)[: config.record_traces]
        for i, path in enumerate(paths):
            traces.append(run_to_decision(model, r_star, path.tolist(), theta=int(theta[i]), as_indices=True))

    records = {
        "rep": np.arange(theta.size),
        "theta": theta,
        "tau": tau,
        "success": success.astype(int),
        "undecided": (tau == UNDECIDED).astype(int),
    }
    return ExperimentResult(
        success_rate=rate,
        standard_error=se,
        undecided_count=int((tau == UNDECIDED).sum()),
        theoretical_value=theo,
        z_score=z,
        replications=config.replications,
        horizon=config.horizon,
        seed=config.seed,
        records=records,
        traces=traces,
    )


@dataclass
class RuleComparison:
    name: str
    success_rate: float
    standard_error: float | None
    diff_vs_optimal: float  # rate(tau*) - rate(rule), paired over the same paths
    paired_se: float | None


def compare_rules(config: ExperimentConfig, r_star: ThresholdTable, rules=()) -> list[RuleComparison]:
    """Evaluate tau* and baseline rules on identical simulated paths."""
    if not r_star.converged:
        raise ConfigurationError("threshold table has not converged")
    model = config.model
    all_rules = [OptimalRule(model, r_star)] + list(rules)
    theta_parts = []
    tau_parts = [[] for _ in all_rules]
    for theta, paths in _blocks(config):
        theta_parts.append(theta)
        for k, rule in enumerate(all_rules):
            tau_parts[k].append(rule.stopping_times(paths))
    theta = np.concatenate(theta_parts)
    wins = [_success(theta, np.concatenate(t), model.d1, model.d2).astype(float) for t in tau_parts]
    R = theta.size
    rows = []
    for rule, w in zip(all_rules, wins):
        rate, se = _rate_and_se(w)
        d = wins[0] - w
        paired = float(np.std(d, ddof=1) / math.sqrt(R)) if R > 1 else None
        rows.append(RuleComparison(rule.name, rate, se, float(d.mean()), paired))
    return rows
