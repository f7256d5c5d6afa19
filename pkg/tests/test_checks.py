import pytest

from disorder_detect.checks import run_oracle_gates


def gates(report):
    return {g["name"]: g for g in report["gates"]}


def test_all_gates_pass_with_zero_probability_transitions(sparse):
    report = run_oracle_gates(sparse, 5)
    assert report["passed"], [g for g in report["gates"] if not g["passed"]]
    assert "posterior 1 skipped" in gates(report)["h_gate"]["note"]


def test_gates_with_an_atom_at_zero(ref3):
    report = run_oracle_gates(ref3, 5)
    assert report["passed"]
    clamp = gates(report)["clamp_dominance"]
    # early stopping beats the clamped rule here; the gate reports it without failing
    assert clamp["max_abs_error"] > 0.1 and "informational" in clamp["note"]
    env = report["envelope"]
    assert env["value_lower"] <= env["problem_value"] <= env["value_upper"]
    assert env["tau_star_forced_at_horizon"] <= env["value_lower"] + 1e-12


@pytest.mark.parametrize("variant", ["eq8", "lemma3_proof"])
def test_misindexed_payoff_is_caught(ref3, variant):
    report = run_oracle_gates(ref3, 4, payoff=variant)
    h = gates(report)["h_gate"]
    assert not h["passed"] and h["max_abs_error"] > 1e-3
    assert not report["passed"]
