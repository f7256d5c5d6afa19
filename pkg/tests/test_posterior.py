import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from disorder_detect.errors import ContractError, ImpossiblePathError
from disorder_detect.oracle import enumerate_joint, oracle_conditional
from disorder_detect.posterior import (
    PosteriorState,
    initial_state,
    posterior_exact,
    posterior_multistep,
    posterior_step,
    prob_change_before_window,
    prob_change_within,
    window_payoff_h,
)
from disorder_detect.reference import no_information_model, reference_3state, sparse_model

ref3_prefixes = st.lists(st.integers(0, 2), min_size=0, max_size=7).map(lambda t: (0, *t))


def test_time_zero_posterior_is_the_atom(ref3):
    assert posterior_exact(ref3, (0,)).pi_n == pytest.approx(ref3.pi, abs=1e-15)
    assert initial_state(ref3) == PosteriorState(ref3.pi, 0)


@given(st.lists(st.integers(0, 1), max_size=8), st.floats(0, 0.9))
def test_no_information_posterior_is_the_prior_cdf(tail, pi):
    m = no_information_model(pi=pi, p=0.6)
    w = (0, *tail)
    n = len(w) - 1
    assert posterior_exact(m, w).pi_n == pytest.approx(1 - 0.6**n * (1 - pi), abs=1e-12)


def test_exact_posterior_against_bayes_by_hand(example):
    # S(0,0,1) = 0.26; theta <= 2 contributes 0.125 + 0.1125
    assert posterior_exact(example, (0, 0, 1)).pi_n == pytest.approx(0.2375 / 0.26, abs=1e-14)


def test_step_is_absorbing_at_one(ref3):
    st1 = posterior_step(ref3, PosteriorState(1.0, 4), 0, 2)
    assert st1.pi_n == 1.0 and st1.n == 5


@given(st.floats(0, 1), st.integers(0, 1), st.integers(0, 1))
def test_step_without_information_is_the_prior_update(a, x, y):
    m = no_information_model(p=0.7)
    assert posterior_step(m, PosteriorState(a, 0), x, y).pi_n == pytest.approx(0.3 + 0.7 * a, abs=1e-14)


def test_transition_impossible_before_change_gives_certainty(sparse):
    assert posterior_step(sparse, PosteriorState(0.2, 3), 0, 1).pi_n == 1.0


def test_transition_impossible_always_raises(sparse):
    with pytest.raises(ImpossiblePathError):
        posterior_step(sparse, PosteriorState(1.0, 3), 2, 0)


@settings(max_examples=200)
@given(ref3_prefixes)
def test_step_composition_equals_exact(w):
    m = reference_3state()
    state = initial_state(m)
    for a, b in zip(w, w[1:]):
        state = posterior_step(m, state, a, b)
    assert state.pi_n == pytest.approx(posterior_exact(m, w).pi_n, abs=1e-12)
    assert state.n == len(w) - 1


@settings(max_examples=200)
@given(ref3_prefixes.filter(lambda w: len(w) >= 2), st.data())
def test_multistep_equals_composed_steps(w, data):
    m = reference_3state()
    n = len(w) - 1
    start = data.draw(st.integers(0, n - 1))
    anchor = posterior_exact(m, w[: start + 1])
    one_shot = posterior_multistep(m, anchor, w[start:], start=start)
    state = anchor
    for a, b in zip(w[start:], w[start + 1:]):
        state = posterior_step(m, state, a, b)
    assert one_shot.pi_n == pytest.approx(state.pi_n, abs=1e-12)
    assert one_shot.n == n


def test_multistep_with_one_transition_is_a_step(ref3):
    s = PosteriorState(0.37, 2)
    assert posterior_multistep(ref3, s, (1, 2)).pi_n == pytest.approx(posterior_step(ref3, s, 1, 2).pi_n, abs=1e-15)


def test_multistep_from_certainty_stays_certain(ref3):
    assert posterior_multistep(ref3, PosteriorState(1.0, 0), (0, 1, 2, 2)).pi_n == pytest.approx(1.0, abs=1e-15)


def test_multistep_alignment_is_checked(ref3):
    with pytest.raises(ContractError):
        posterior_multistep(ref3, PosteriorState(0.5, 2), (0, 1), start=3)


def test_prob_change_within_examples():
    m = no_information_model(p=0.5)
    assert prob_change_within(m, PosteriorState(0.0, 0), 2) == 0.75
    assert prob_change_within(m, PosteriorState(0.3, 0), 0) == pytest.approx(0.3, abs=1e-15)
    assert prob_change_within(m, PosteriorState(1.0, 0), 5) == 1.0
    with pytest.raises(ContractError):
        prob_change_within(m, PosteriorState(0.3, 0), -1)


def test_prob_change_before_window_examples(ref3):
    assert prob_change_before_window(ref3, PosteriorState(0.0, 0), (0, 1, 2)) == 0.0
    m = no_information_model(p=0.6)
    assert prob_change_before_window(m, PosteriorState(0.35, 3), (0, 1, 1, 0)) == pytest.approx(0.35, abs=1e-14)


def test_identities_against_enumeration(ref3):
    joint = enumerate_joint(ref3, 4)
    for w in [(0, 0, 0, 0, 0), (0, 2, 2, 1, 2), (0, 1, 0, 2, 2)]:
        n = len(w) - 1
        assert posterior_exact(ref3, w).pi_n == pytest.approx(oracle_conditional(joint, w, hi=n), abs=1e-12)
        state = posterior_exact(ref3, w)
        for k in range(3):
            truth = oracle_conditional(joint, w, hi=n + k)
            assert prob_change_within(ref3, state, k) == pytest.approx(truth, abs=1e-12)
        for start in range(n):
            anchor = posterior_exact(ref3, w[: start + 1])
            truth = oracle_conditional(joint, w, hi=start)
            assert prob_change_before_window(ref3, anchor, w[start:], start=start) == pytest.approx(truth, abs=1e-12)


def test_payoff_is_zero_at_certainty_with_finite_statistic(ref3):
    assert window_payoff_h(ref3, (0, 1, 2), 1.0) == 0.0


def test_payoff_undefined_when_window_proves_change_and_posterior_is_one(sparse):
    with pytest.raises(ContractError):
        window_payoff_h(sparse, (0, 0, 2), 1.0)


@pytest.mark.parametrize("n", [2, 3, 5, 8])
def test_payoff_without_information_is_prior_window_mass(n):
    m = no_information_model(p=0.5, d1=1, d2=1)
    alpha = 1 - 0.5**n
    w = (0,) * (m.d1 + 2)
    assert window_payoff_h(m, w, alpha) == pytest.approx(0.5 ** (n - 2) * (1 - 0.5**3), abs=1e-14)


def test_payoff_against_enumeration(ref3):
    joint = enumerate_joint(ref3, 5)
    for w in [(0, 0, 0, 0, 1, 2), (0, 2, 2, 2, 2, 2), (0, 1, 1, 0, 0, 0)]:
        n = len(w) - 1
        truth = oracle_conditional(joint, w, n - ref3.d1, n + ref3.d2)
        alpha = posterior_exact(ref3, w).pi_n
        assert window_payoff_h(ref3, w[-(ref3.d1 + 2):], alpha) == pytest.approx(truth, abs=1e-12)


def test_state_rejects_values_outside_unit_interval():
    with pytest.raises(ContractError):
        PosteriorState(1.5, 0)
