"""Formula-vs-oracle gates behind ``disorder-detect oracle-check``.

Each gate compares a closed-form quantity with its brute-force counterpart on
every positive-mass prefix up to the horizon and records the largest absolute
error.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .likelihood import g_kernel, joint_density_S, log_L_all
from .model import DisorderModel, model_hash, prior_pmf
from .oracle import (
    JointTable,
    conditional_all,
    enumerate_joint,
    fixed_time_rule,
    oracle_optimal_value,
    oracle_rule_value,
    prefix_tuples,
)
from .posterior import (
    initial_state,
    posterior_exact,
    posterior_multistep,
    posterior_step,
    prob_change_before_window,
    prob_change_within,
    window_payoff_h,
)
from .solver import problem_value, solve_threshold

TOL = 1e-10
WITHIN_K = (0, 1, 2, 3)


def _variant_sum(logL: np.ndarray, p: float, d1: int, variant: str) -> float:
    """The three printed index conventions for the sum inside the window payoff."""
    r = np.exp(logL - logL[0])
    if variant == "theorem":  # sum_{m=1}^{d1+1} L_m / (p^m L_0)
        return sum(r[m] / p**m for m in range(1, d1 + 2))
    if variant == "eq8":  # sum_{m=0}^{d1} L_{m+1} / (p^m L_0)
        return sum(r[m + 1] / p**m for m in range(0, d1 + 1))
    if variant == "lemma3_proof":  # sum_{m=0}^{d1} L_m / (p^m L_0)
        return sum(r[m] / p**m for m in range(0, d1 + 1))
    raise ValueError(f"unknown payoff variant {variant!r}")


PAYOFF_VARIANTS = ("theorem", "eq8", "lemma3_proof")


def payoff_variant(model: DisorderModel, window, alpha: float, variant: str) -> float:
    logL = log_L_all(model, window)
    g = 1.0 - model.p**model.d2 + model.q * _variant_sum(logL, model.p, model.d1, variant)
    return g * (1.0 - alpha)


@dataclass
class GateResult:
    name: str
    max_abs_error: float
    tolerance: float
    checked: int
    passed: bool
    note: str = ""


class _Acc:
    def __init__(self):
        self.err = 0.0
        self.count = 0

    def add(self, a, b):
        self.err = max(self.err, abs(float(a) - float(b)))
        self.count += 1

    def result(self, name, tol=TOL, note=""):
        return GateResult(name, self.err, tol, self.count, self.err < tol, note)


def posterior_gates(model: DisorderModel, joint: JointTable, payoff: str = "theorem") -> tuple[list[GateResult], dict]:
    """All posterior, density and payoff identities against the oracle."""
    s, N, d1, d2 = model.n_states, joint.horizon, model.d1, model.d2
    acc = {k: _Acc() for k in (
        "joint_density", "posterior_exact", "posterior_step", "prob_change_within",
        "posterior_multistep", "prob_change_before_window", "factorization", "h_gate",
    )}
    variant_err = {v: 0.0 for v in PAYOFF_VARIANTS}
    degenerate = 0

    exact_states: list[dict] = []
    step_states: list[dict] = []
    for n in range(N + 1):
        M = joint.prefix_mass(n)
        mass = M.sum(axis=0)
        oracle_pi = conditional_all(joint, n, -math.inf, n)
        within = {k: conditional_all(joint, n, -math.inf, n + k) for k in WITHIN_K}
        before = {l: conditional_all(joint, n, -math.inf, n - l - 1) for l in range(n)}
        window_truth = conditional_all(joint, n, n - d1, n + d2) if n >= d1 + 1 else None
        ex_level, st_level = {}, {}
        for code, prefix in enumerate(prefix_tuples(s, n)):
            if mass[code] <= 0:
                continue
            acc["joint_density"].add(joint_density_S(model, prefix), mass[code])
            ex = posterior_exact(model, prefix)
            st = initial_state(model) if n == 0 else posterior_step(model, step_states[n - 1][code // s], prefix[-2], prefix[-1])
            ex_level[code], st_level[code] = ex, st
            acc["posterior_exact"].add(ex.pi_n, oracle_pi[code])
            acc["posterior_step"].add(st.pi_n, oracle_pi[code])
            for k in WITHIN_K:
                acc["prob_change_within"].add(prob_change_within(model, st, k), within[k][code])
            S_n = mass[code]
            for l in range(n):
                start = n - l - 1
                w = prefix[start:]
                anchor = exact_states[start][code // s ** (l + 1)]
                acc["posterior_multistep"].add(posterior_multistep(model, anchor, w, start=start).pi_n, oracle_pi[code])
                acc["prob_change_before_window"].add(prob_change_before_window(model, anchor, w, start=start), before[l][code])
                S_start = joint_density_S(model, prefix[: start + 1])
                acc["factorization"].add(S_n, S_start * g_kernel(model, w, anchor.pi_n))
            if window_truth is not None:
                w = prefix[n - d1 - 1:]
                if ex.pi_n >= 1.0:
                    degenerate += 1
                    continue
                truth = window_truth[code]
                if payoff == "theorem":
                    got = window_payoff_h(model, w, ex.pi_n)
                else:
                    got = payoff_variant(model, w, ex.pi_n, payoff)
                acc["h_gate"].add(got, truth)
                for v in PAYOFF_VARIANTS:
                    variant_err[v] = max(variant_err[v], abs(payoff_variant(model, w, ex.pi_n, v) - truth))
        exact_states.append(ex_level)
        step_states.append(st_level)

    results = [acc[k].result(k) for k in ("joint_density", "posterior_exact", "posterior_step", "prob_change_within")]
    if N < 2:
        for k in ("posterior_multistep", "prob_change_before_window", "factorization"):
            results.append(GateResult(k, 0.0, TOL, 0, True, "skipped: insufficient horizon for l-step identities"))
    else:
        results += [acc[k].result(k) for k in ("posterior_multistep", "prob_change_before_window", "factorization")]
    if N < d1 + 1:
        results.append(GateResult("h_gate", 0.0, TOL, 0, True, "skipped: insufficient horizon (needs N >= d1+1)"))
    else:
        note = f"payoff variant {payoff}"
        if degenerate:
            note += f"; {degenerate} windows with posterior 1 skipped"
        results.append(acc["h_gate"].result("h_gate", note=note))
    return results, variant_err


def rule_gates(model: DisorderModel, joint: JointTable) -> list[GateResult]:
    N, d1, d2 = joint.horizon, model.d1, model.d2
    out = []
    # fixed-time rules against the prior window mass
    acc = _Acc()
    for t in range(N + 1):
        lo, hi = max(t - d1, 0), t + d2
        closed = math.fsum(prior_pmf(model.prior, j) for j in range(lo, hi + 1))
        acc.add(oracle_rule_value(joint, fixed_time_rule(t)), closed)
    out.append(acc.result("fixed_time_rule_values", tol=1e-12))
    # clamp dominance for early fixed times
    if d1 + 1 > N:
        out.append(GateResult("clamp_dominance", 0.0, 1e-14, 0, True, "skipped: insufficient horizon"))
    else:
        clamped = oracle_rule_value(joint, fixed_time_rule(d1 + 1))
        worst = min(clamped - oracle_rule_value(joint, fixed_time_rule(t)) for t in range(d1 + 1))
        count = d1 + 1
        ok = worst >= -1e-14
        note = "" if model.pi == 0 else "informational: the clamp need not dominate when pi > 0"
        out.append(GateResult("clamp_dominance", max(0.0, -worst), 1e-14, count, ok or model.pi > 0, note))
    return out


def envelope_gate(model: DisorderModel, joint: JointTable, tolerance: float = 1e-12) -> tuple[GateResult, dict]:
    """Truncated-optimality envelope over the clamped class tau >= d1 + 1.

    Checks value_lower <= V* <= value_upper for the solver's value V*, and
    V* - width <= value(tau* forced to stop at N) <= value_lower: a truncated
    rule cannot beat the truncated optimum, and tau* can lose at most the
    mass of successes it would have scored after N.
    """
    N, d1 = joint.horizon, model.d1
    if N < d1 + 1:
        return GateResult("envelope", 0.0, tolerance, 0, True, "skipped: insufficient horizon"), {}
    table, diag = solve_threshold(model, tolerance=1e-13)
    value = problem_value(model, table)
    env, _ = oracle_optimal_value(model, N, earliest=d1 + 1, joint=joint)
    rule = optimal_rule_on_prefixes(model, table)
    forced = oracle_rule_value(joint, lambda pre: rule(pre) or len(pre) - 1 == N)
    width = env.value_upper - env.value_lower
    miss = max(
        0.0,
        env.value_lower - tolerance - value,
        value - env.value_upper - tolerance,
        value - width - tolerance - forced,
        forced - env.value_lower - tolerance,
    )
    info = {
        "value_lower": env.value_lower,
        "value_upper": env.value_upper,
        "problem_value": value,
        "tau_star_forced_at_horizon": forced,
        "solver_iterations": diag.iterations,
    }
    return GateResult("envelope", miss, tolerance, 2, miss == 0.0, "clamped class tau >= d1+1"), info


def optimal_rule_on_prefixes(model: DisorderModel, table):
    """tau* as a prefix predicate, for exact evaluation by the oracle."""
    from .likelihood import detection_statistic_g

    def rule(prefix):
        n = len(prefix) - 1
        if n < model.d1 + 1:
            return False
        w = prefix[-(model.d1 + 2):]
        return detection_statistic_g(model, w) >= table[w[1:]]

    return rule


def run_oracle_gates(model: DisorderModel, horizon: int, payoff: str = "theorem") -> dict:
    joint = enumerate_joint(model, horizon)
    gates: list[GateResult] = []
    mass_err = abs(joint.total_mass() - 1.0)
    gates.append(GateResult("joint_mass", mass_err, 1e-12, 1, mass_err < 1e-12))
    marg = joint.mass.sum(axis=1)
    acc = _Acc()
    for j in range(horizon + 2):
        acc.add(marg[j], prior_pmf(model.prior, j))
    gates.append(acc.result("theta_marginal", tol=1e-14))
    post, variants = posterior_gates(model, joint, payoff)
    gates += post
    gates += rule_gates(model, joint)
    env, env_info = envelope_gate(model, joint)
    gates.append(env)
    return {
        "model_hash": model_hash(model),
        "horizon": horizon,
        "payoff_variant": payoff,
        "gates": [asdict(g) for g in gates],
        "payoff_variant_errors": variants,
        "envelope": env_info,
        "passed": all(g.passed for g in gates),
    }
