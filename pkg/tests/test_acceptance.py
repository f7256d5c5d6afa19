"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.

Tolerances are pinned here; see README.md for what each criterion checks.
"""

import itertools
import os
import time

import numpy as np
import pytest

from disorder_detect.checks import PAYOFF_VARIANTS, optimal_rule_on_prefixes, posterior_gates
from disorder_detect.detector import run_to_decision
from disorder_detect.montecarlo import ExperimentConfig, estimate_success
from disorder_detect.oracle import enumerate_joint, fixed_time_rule, oracle_optimal_value, oracle_rule_value
from disorder_detect.reference import no_information_model, reference_2state, reference_3state
from disorder_detect.solver import (
    SolverTables,
    fixed_point_residual,
    problem_value,
    solve_threshold,
    threshold_iterates,
)

IDENTITY_TOL = 1e-10
REJECT_MIN_ERROR = 1e-3
CLOSED_FORM_TOL = 1e-12
ENVELOPE_WIDTH = 0.02
ENVELOPE_SLACK = 1e-12
Z_BOUND = 3.0
DOMINANCE_TOL = 1e-14
GRID_SECONDS = 60.0
MC_SECONDS = 300.0

POSTERIOR_GATES = (
    "posterior_exact",
    "posterior_step",
    "posterior_multistep",
    "prob_change_within",
    "prob_change_before_window",
)


def report(criterion, ok, detail):
    print(f"\nACCEPTANCE {criterion} {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, detail


@pytest.fixture(scope="module")
def identity_grid():
    """Formula-vs-enumeration gates on both kernel pairs, pi in {0, 0.2}, p in {0.5, 0.9}, n <= 6."""
    start = time.perf_counter()
    rows = []
    for make, pi, p in itertools.product((reference_2state, reference_3state), (0.0, 0.2), (0.5, 0.9)):
        model = make(pi=pi, p=p)
        gates, variants = posterior_gates(model, enumerate_joint(model, 6))
        rows.append(((make.__name__, pi, p), {g.name: g for g in gates}, variants))
    return rows, time.perf_counter() - start


def test_criterion_1_posterior_identities(identity_grid):
    rows, seconds = identity_grid
    worst = max(gates[name].max_abs_error for _, gates, _ in rows for name in POSTERIOR_GATES)
    checked = sum(gates[name].checked for _, gates, _ in rows for name in POSTERIOR_GATES)
    ok = worst < IDENTITY_TOL and seconds < GRID_SECONDS and all(
        gates[name].checked > 0 for _, gates, _ in rows for name in POSTERIOR_GATES
    )
    report(1, ok, f"{len(rows)} models, {checked} comparisons, max error {worst:.2e} "
                  f"(tol {IDENTITY_TOL:g}), {seconds:.1f}s (limit {GRID_SECONDS:g}s)")


def test_criterion_2_factorization(identity_grid):
    rows, _ = identity_grid
    worst = max(gates["factorization"].max_abs_error for _, gates, _ in rows)
    checked = sum(gates["factorization"].checked for _, gates, _ in rows)
    report(2, worst < IDENTITY_TOL and checked > 0,
           f"{checked} windows (all l, n <= 6), max error {worst:.2e} (tol {IDENTITY_TOL:g})")


def test_criterion_3_payoff_index_resolution(identity_grid):
    rows, _ = identity_grid
    adopted = max(max(gates["h_gate"].max_abs_error, variants["theorem"]) for _, gates, variants in rows)
    rejected = {v: max(variants[v] for _, _, variants in rows) for v in PAYOFF_VARIANTS if v != "theorem"}
    matching = [v for v in PAYOFF_VARIANTS if max(r[2][v] for r in rows) < IDENTITY_TOL]
    ok = adopted < IDENTITY_TOL and all(e > REJECT_MIN_ERROR for e in rejected.values()) and matching == ["theorem"]
    detail = ", ".join(f"{v} {e:.3f}" for v, e in rejected.items())
    report(3, ok, f"adopted variant max error {adopted:.2e} (tol {IDENTITY_TOL:g}); "
                  f"rejected variants {detail} (need > {REJECT_MIN_ERROR:g})")


def test_criterion_4_closed_form_value():
    worst, configs, stops_ok = 0.0, 0, True
    for d1, d2, p, pi in itertools.product((0, 1, 2), (0, 1, 2), (0.3, 0.5, 0.9), (0.0, 0.2)):
        model = no_information_model(pi=pi, p=p, d1=d1, d2=d2)
        table, _ = solve_threshold(model)
        worst = max(worst, abs(problem_value(model, table) - (1 - pi) * (1 - p ** (d1 + d2 + 1))))
        configs += 1
        # the stop decision at n = d1+1 depends only on x_0..x_{d1+1}: check every such prefix
        for tail in itertools.product(range(model.n_states), repeat=d1 + 1):
            rep = run_to_decision(model, table, (model.x0_index, *tail), as_indices=True, record_trace=False)
            stops_ok &= rep.stop_time == d1 + 1
    report(4, worst < CLOSED_FORM_TOL and stops_ok,
           f"{configs} configurations, max |value - (1-pi)(1-p^(d1+d2+1))| = {worst:.2e} "
           f"(tol {CLOSED_FORM_TOL:g}); detector stops at d1+1 on every path: {stops_ok}")


def test_criterion_5_truncated_envelope():
    model, N = reference_2state(), 7
    table, _ = solve_threshold(model, tolerance=1e-13)
    joint = enumerate_joint(model, N)
    env, _ = oracle_optimal_value(model, N, earliest=model.d1 + 1, joint=joint)
    value = problem_value(model, table)
    rule = optimal_rule_on_prefixes(model, table)
    restricted = oracle_rule_value(joint, lambda pre: rule(pre) or len(pre) - 1 == N)
    lo, hi = env.value_lower - ENVELOPE_SLACK, env.value_upper + ENVELOPE_SLACK
    width = env.value_upper - env.value_lower
    ok = width < ENVELOPE_WIDTH and lo <= value <= hi and lo <= restricted <= hi
    report(5, ok, f"envelope [{env.value_lower:.10f}, {env.value_upper:.10f}] width {width:.4f} "
                  f"(< {ENVELOPE_WIDTH:g}); problem_value {value:.10f}; tau* stopped by N {restricted:.10f}")


def test_criterion_6_monte_carlo_calibration():
    start = time.perf_counter()
    lines, ok = [], True
    for name, model in (("2-state", reference_2state()), ("3-state", reference_3state())):
        table, _ = solve_threshold(model)
        big = estimate_success(ExperimentConfig(model, 100_000, seed=2026), table)
        within = 0
        for seed in range(100):
            res = estimate_success(ExperimentConfig(model, 10_000, seed=seed), table)
            within += abs(res.z_score) <= Z_BOUND
        ok &= abs(big.z_score) <= Z_BOUND and within >= 99
        lines.append(f"{name} z={big.z_score:+.2f} at 1e5, {within}/100 seeds within {Z_BOUND:g} SE")
    seconds = time.perf_counter() - start
    ok &= seconds < MC_SECONDS
    report(6, ok, "; ".join(lines) + f"; {seconds:.0f}s (limit {MC_SECONDS:g}s)")


def test_criterion_7_clamp_dominance():
    lines, ok = [], True
    for name, model in (("2-state", reference_2state()), ("3-state", reference_3state())):
        joint = enumerate_joint(model, model.d1 + model.d2 + 2)
        clamped = oracle_rule_value(joint, fixed_time_rule(model.d1 + 1))
        for t in range(model.d1 + 1):
            early = oracle_rule_value(joint, fixed_time_rule(t))
            good = clamped >= early - DOMINANCE_TOL
            ok &= good
            lines.append(f"{name} value(tau={model.d1 + 1}) {clamped:.4f} vs value(tau={t}) {early:.4f}"
                         + ("" if good else " VIOLATED"))
    report(7, ok, "; ".join(lines))


def test_criterion_8_solver_convergence():
    threads = max(os.cpu_count() or 1, 4)
    lines, ok = [], True
    models = (("2-state", reference_2state()), ("3-state", reference_3state()),
              ("3-state d1=3", reference_3state().with_(d1=3)))
    for name, model in models:
        live = SolverTables(model).live
        iterates = threshold_iterates(model)
        r = next(iterates)
        monotone = True
        for _ in range(10_000):
            new = next(iterates)
            monotone &= bool(np.all(new[live] >= r[live]))
            done = np.max(np.abs(new[live] - r[live])) < 1e-10
            r = new
            if done:
                break
        table, diag = solve_threshold(model, threads=1)
        par, _ = solve_threshold(model, threads=threads)
        residual = fixed_point_residual(model, table)
        bitwise = table.values.tobytes() == par.values.tobytes()
        good = monotone and diag.converged and residual < 2 * diag.tolerance and bitwise
        ok &= good
        lines.append(f"{name}: monotone={monotone}, residual {residual:.1e} (< {2 * diag.tolerance:g}), "
                     f"1 vs {threads} threads bitwise={bitwise}")
    report(8, ok, "; ".join(lines))
