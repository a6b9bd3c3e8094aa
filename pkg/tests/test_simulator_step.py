import numpy as np
import pytest

from tlstm_lab.rng import substream
from tlstm_lab.simulator import (
    DIGITS,
    NULL,
    TransitionTable,
    allowed_digits,
    state_to_labels,
    step_state,
)

TABLE = TransitionTable.default()
UNIFORM_PROBS = {d: 0.5 for d in DIGITS}


def test_certain_digit_is_always_included():
    # from {9} at delta 4 only digit 9 is allowed (not even null)
    assert allowed_digits(TABLE, frozenset({9}), 4) == {9}
    probs = dict(UNIFORM_PROBS)
    probs[9] = 1.0
    rng = substream(0, "step")
    for _ in range(20):
        assert step_state(TABLE, frozenset({9}), 4, rng, probs) == frozenset({9})


def test_empty_allowed_set_yields_empty_state():
    dead = TransitionTable.from_spec(
        {row: {col: "-" for col in list(DIGITS) + [NULL]} for row in list(DIGITS) + [NULL]}
    )
    rng = substream(1, "step")
    assert step_state(dead, frozenset({3}), 5, rng, UNIFORM_PROBS) == frozenset()


def test_forcing_when_null_not_allowed():
    # empty state at delta 4 allows only digit 0; zero probabilities would
    # sample nothing, so the digit is forced
    assert allowed_digits(TABLE, frozenset(), 4) == {0}
    probs = {d: 0.0 for d in DIGITS}
    rng = substream(2, "step")
    assert step_state(TABLE, frozenset(), 4, rng, probs) == frozenset({0})


def test_forcing_tie_breaks_toward_lowest_digit():
    # from {0} at delta 7 the candidates are {0, 8, 3} with no null escape
    assert allowed_digits(TABLE, frozenset({0}), 7) == {0, 8, 3}
    probs = {d: 0.0 for d in DIGITS}
    rng = substream(3, "step")
    assert step_state(TABLE, frozenset({0}), 7, rng, probs) == frozenset({0})


def test_forcing_prefers_highest_probability():
    probs = {0: 0.0, 3: 0.0, 6: 0.0, 8: 1e-9, 9: 0.0}  # 8 largest; never sampled
    rng = substream(4, "step")
    got = step_state(TABLE, frozenset({0}), 7, rng, probs)
    assert got == frozenset({8})


@pytest.mark.parametrize(
    "state,delta,digit,expected_p",
    [
        (frozenset({8}), 10, 6, 0.6),  # allowed {6, null}
        (frozenset({3}), 2, 3, 0.7),  # allowed {3, 6, null}
        (frozenset({3}), 2, 6, 0.6),
    ],
)
def test_inclusion_frequency_matches_configured_probability(state, delta, digit, expected_p):
    assert NULL in allowed_digits(TABLE, state, delta)  # no forcing bias
    probs = {0: 0.25, 3: 0.7, 6: 0.6, 8: 0.5, 9: 0.6}
    rng = substream(5, "step", digit, delta)
    hits = sum(
        digit in step_state(TABLE, state, delta, rng, probs) for _ in range(10_000)
    )
    assert abs(hits / 10_000 - expected_p) <= 0.02


def test_next_state_is_always_subset_of_allowed():
    probs = {0: 0.25, 3: 0.7, 6: 0.6, 8: 0.5, 9: 0.6}
    rng = substream(6, "step")
    state = frozenset()
    for _ in range(2_000):
        delta = int(rng.integers(1, 11))
        nxt = step_state(TABLE, state, delta, rng, probs)
        allowed = allowed_digits(TABLE, state, delta)
        assert nxt <= {d for d in allowed if d != NULL}, (state, delta, nxt)
        state = nxt


def test_state_to_labels_order():
    labels = state_to_labels(frozenset({0, 9}))
    assert np.array_equal(labels, np.array([1.0, 0.0, 0.0, 0.0, 1.0]))
    assert np.array_equal(state_to_labels(frozenset()), np.zeros(5))
