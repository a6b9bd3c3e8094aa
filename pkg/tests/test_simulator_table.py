import json

import pytest

from table_oracle import ORACLE_TABLE, oracle_allowed
from tlstm_lab.simulator import NULL, TransitionTable, allowed_digits, parse_delta_set

TABLE = TransitionTable.default()


def _norm(allowed):
    """Normalize an allowed set to string keys for oracle comparison."""
    return {NULL if d == NULL else int(d) if not isinstance(d, str) else d for d in allowed}


def test_parse_delta_set_forms():
    assert parse_delta_set("7:10") == frozenset({7, 8, 9, 10})
    assert parse_delta_set("1:3,5:9") == frozenset({1, 2, 3, 5, 6, 7, 8, 9})
    assert parse_delta_set("3,7") == frozenset({3, 7})
    assert parse_delta_set("-") == frozenset()
    with pytest.raises(ValueError):
        parse_delta_set("0:4")
    with pytest.raises(ValueError):
        parse_delta_set("11")


def test_known_rows():
    assert allowed_digits(TABLE, frozenset({0}), 7) == {0, 8, 3}
    assert allowed_digits(TABLE, frozenset(), 10) == {8}
    assert allowed_digits(TABLE, frozenset({9}), 5) == {8, 9}


def test_exhaustive_single_state_sweep_matches_oracle():
    # all 6 rows x 10 deltas against the independently transcribed copy
    states = [frozenset()] + [frozenset({d}) for d in (0, 3, 6, 8, 9)]
    checked = 0
    for state in states:
        for delta in range(1, 11):
            got = allowed_digits(TABLE, state, delta)
            want = oracle_allowed(state, delta)
            assert got == want, (sorted(map(str, state)), delta, got, want)
            checked += 1
    assert checked == 60


def test_union_rule_for_coexisting_digits():
    # row 0 at delta 5 gives {6, null}; row 6 at delta 5 gives {6, 3}
    got = allowed_digits(TABLE, frozenset({0, 6}), 5)
    assert got == {6, 3, NULL}
    assert got == oracle_allowed({0, 6}, 5)


@pytest.mark.parametrize("delta", [0, 11, -3])
def test_delta_out_of_range(delta):
    with pytest.raises(ValueError, match="out of range"):
        allowed_digits(TABLE, frozenset(), delta)


def test_every_single_state_has_an_option_at_every_delta():
    # no (row, delta) dead ends: generation can always proceed
    states = [frozenset()] + [frozenset({d}) for d in (0, 3, 6, 8, 9)]
    for state in states:
        for delta in range(1, 11):
            assert allowed_digits(TABLE, state, delta), (state, delta)


def test_dump_is_machine_readable_and_complete():
    dump = TABLE.as_dict()
    assert set(dump) == {"0", "3", "6", "8", "9", "null"}
    for row, cells in dump.items():
        assert set(cells) == {"0", "3", "6", "8", "9", "null"}
    # round-trips through json
    assert json.loads(json.dumps(dump)) == dump
    # and agrees with the oracle transcription cell by cell
    for row, cells in ORACLE_TABLE.items():
        for col, deltas in cells.items():
            assert dump[row][col] == sorted(deltas), (row, col)


def test_from_spec_rejects_bad_rows():
    with pytest.raises(ValueError):
        TransitionTable.from_spec({0: {}})
