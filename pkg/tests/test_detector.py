import math

import numpy as np
import pytest

from disorder_detect.detector import (
    is_success,
    new_detector,
    parse_stream,
    push_index,
    push_observation,
    run_to_decision,
)
from disorder_detect.errors import ConfigurationError, ContractError, ModelError
from disorder_detect.likelihood import detection_statistic_g
from disorder_detect.model import make_model, sample_paths
from disorder_detect.reference import EXAMPLE_P0, EXAMPLE_P1, no_information_model
from disorder_detect.solver import solve_threshold


@pytest.fixture(scope="module")
def noinfo_solved():
    m = no_information_model(p=0.5, d1=2, d2=1, n_states=3)
    return m, solve_threshold(m)[0]


def test_new_detector_checks_table(ref2, ref2_solved):
    table = ref2_solved[0]
    state = new_detector(ref2, table, record_trace=True)
    assert state.trace == [] and state.n == -1
    with pytest.raises(ConfigurationError, match="shape"):
        new_detector(ref2.with_(d1=2), table)
    with pytest.raises(ConfigurationError, match="different model"):
        new_detector(ref2.with_(p=0.6), table)


def test_no_stop_before_d1_plus_one(ref2, ref2_solved):
    state = new_detector(ref2, ref2_solved[0])
    # a jump into the post-change regime right away still waits for the clamp
    assert not push_index(state, 0)
    assert not push_index(state, 1)
    d = push_index(state, 1)
    assert d.n == 2


def test_no_information_stops_at_d1_plus_one(noinfo_solved):
    m, table = noinfo_solved
    paths = sample_paths(m, np.full(200, 5), 6, np.random.default_rng(0))
    for path in paths:
        report = run_to_decision(m, table, path.tolist(), as_indices=True)
        assert report.stop_time == m.d1 + 1


def test_certain_change_stops_immediately(sparse):
    table, _ = solve_threshold(sparse)
    # 0 -> 2 is impossible before the change
    report = run_to_decision(sparse, table, [0, 0, 0, 0, 2, 2, 2])
    assert report.stop_time == 4
    assert report.trace[-1].g == math.inf


def test_push_after_stop_is_a_contract_error(noinfo_solved):
    m, table = noinfo_solved
    state = new_detector(m, table)
    for x in (0, 0, 0, 0):
        decision = push_index(state, x)
    assert decision.stop
    with pytest.raises(ContractError):
        push_index(state, 0)


def test_first_observation_must_be_x0(ref2, ref2_solved):
    state = new_detector(ref2, ref2_solved[0])
    with pytest.raises(ModelError):
        push_index(state, 1)


def test_unknown_label_is_rejected(ref2, ref2_solved):
    state = new_detector(ref2, ref2_solved[0])
    with pytest.raises(ModelError):
        push_observation(state, "z")


def test_labels_are_mapped(ref2_solved):
    m = make_model(0.0, 0.5, [[0.9, 0.1], [0.2, 0.8]], [[0.2, 0.8], [0.1, 0.9]], 1, 1, states=("ok", "alarm"))
    table, _ = solve_threshold(m)
    by_label = run_to_decision(m, table, ["ok", "ok", "alarm", "alarm", "alarm"])
    by_index = run_to_decision(m, table, [0, 0, 1, 1, 1], as_indices=True)
    assert by_label.stop_time == by_index.stop_time is not None


def test_short_stream_is_undecided(ref2, ref2_solved):
    report = run_to_decision(ref2, ref2_solved[0], [0, 0])
    assert report.undecided and report.stop_time is None
    assert report.success is None


def test_long_quiet_stream_is_undecided(ref2, ref2_solved):
    report = run_to_decision(ref2, ref2_solved[0], [0] * 30, theta=5)
    assert report.undecided and report.success is False


def test_trace_matches_statistic_and_threshold(ref2, ref2_solved):
    table = ref2_solved[0]
    obs = [0, 0, 0, 1, 0, 1, 1, 1]
    report = run_to_decision(ref2, table, obs)
    for rec in report.trace:
        if rec.n <= ref2.d1:
            assert rec.g is None
            continue
        w = tuple(obs[rec.n - ref2.d1 - 1: rec.n + 1])
        assert rec.g == detection_statistic_g(ref2, w)
        assert rec.r_star == table[w[1:]]
    assert report.trace[-1].g >= report.trace[-1].r_star
    assert all(r.g < r.r_star for r in report.trace[:-1] if r.g is not None)


def test_success_definition():
    assert is_success(theta=5, tau=6, d1=1, d2=2)
    assert is_success(theta=5, tau=3, d1=1, d2=2)
    assert not is_success(theta=5, tau=7, d1=1, d2=2)
    assert not is_success(theta=5, tau=2, d1=1, d2=2)


def test_batch_equals_step_by_step(ref3, ref3_solved):
    table = ref3_solved[0]
    rng = np.random.default_rng(7)
    for path in sample_paths(ref3, np.array([3, 8, 0, 15]), 25, rng):
        report = run_to_decision(ref3, table, path.tolist(), as_indices=True, record_trace=False)
        state = new_detector(ref3, table)
        stop = None
        for x in path.tolist():
            if push_index(state, x):
                stop = state.stopped_at
                break
        assert report.stop_time == stop


def test_report_serializes_infinity(sparse):
    table, _ = solve_threshold(sparse)
    doc = run_to_decision(sparse, table, [0, 0, 2]).to_dict()
    assert doc["trace"][-1]["g"] == "inf"


def test_parse_stream_formats(ref2):
    assert parse_stream(ref2, ["0", "1", "", "1"]) == [0, 1, 1]
    assert parse_stream(ref2, ["x", "0", "1"]) == [0, 1]


def test_parse_stream_cites_line_numbers(ref2):
    with pytest.raises(ModelError, match="line 5"):
        parse_stream(ref2, ["0", "0", "1", "1", "7"])
    with pytest.raises(ModelError, match="line 2"):
        parse_stream(ref2, ["0", "0,1"])
