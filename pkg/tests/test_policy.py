import json

import numpy as np
import pytest

from emorespond.emotion import state_from_distribution
from emorespond.errors import DuplicateRule, SchemaError, UnknownMode
from emorespond.policy import ResponseMode, decide_mode, load_policy

from tables import EXPECTED_MODES as EXPECTED

CATS = ("sad", "angry", "neutral", "happy")

def state(emotion, arousal):
    dist = np.full(4, 0.1)
    dist[CATS.index(emotion)] = 0.7
    return state_from_distribution(dist, CATS, 0.9 if arousal == "high" else 0.1, 0.5)


@pytest.mark.parametrize("key", sorted(EXPECTED))
def test_default_table(key):
    assert decide_mode(state(*key), load_policy()).value == EXPECTED[key]


def test_default_table_shape():
    table = load_policy()
    assert len(table.rules) == 6
    assert table.default_mode is ResponseMode.SOOTHING


def test_unmapped_emotion_uses_default():
    assert load_policy().lookup("fearful", "low") is ResponseMode.SOOTHING


def test_first_match_wins_and_wildcards():
    doc = {
        "rules": [
            {"emotion": "happy", "arousal": "high", "mode": "play"},
            {"emotion": "*", "arousal": "high", "mode": "amplify"},
            {"emotion": "any", "arousal": "any", "mode": "empathy"},
        ],
        "default_mode": "soothing",
    }
    table = load_policy(doc)
    assert table.lookup("happy", "high") is ResponseMode.PLAY
    assert table.lookup("sad", "high") is ResponseMode.AMPLIFY
    assert table.lookup("sad", "low") is ResponseMode.EMPATHY


def test_unknown_mode():
    with pytest.raises(UnknownMode):
        load_policy({"rules": [{"emotion": "sad", "arousal": "low", "mode": "panic"}], "default_mode": "play"})


def test_duplicate_rule():
    rule = {"emotion": "sad", "arousal": "low", "mode": "empathy"}
    with pytest.raises(DuplicateRule):
        load_policy({"rules": [rule, dict(rule, mode="play")], "default_mode": "play"})


def test_schema_errors():
    with pytest.raises(SchemaError):
        load_policy({"default_mode": "play"})
    with pytest.raises(SchemaError):
        load_policy({"rules": [{"emotion": "sad", "arousal": "medium", "mode": "play"}], "default_mode": "play"})
    with pytest.raises(SchemaError) as info:
        load_policy('{"rules": [,], "default_mode": "play"}')
    assert "line 1" in str(info.value)


def test_round_trip_document(tmp_path):
    table = load_policy()
    p = tmp_path / "policy.json"
    p.write_text(json.dumps(table.to_document()))
    assert load_policy(p) == table
