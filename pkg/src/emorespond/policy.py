"""Response policy agent: first-match rule table over (emotion, arousal)."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .documents import default_text, parse_document, require
from .emotion import EmotionState
from .errors import DuplicateRule, SchemaError, UnknownMode

WILDCARDS = ("*", "any")
AROUSAL_TAGS = ("low", "high", "any")


class ResponseMode(str, Enum):
    EMPATHY = "empathy"
    SOOTHING = "soothing"
    PLAY = "play"
    AMPLIFY = "amplify"

    def __str__(self) -> str:
        return self.value


MODE_ORDER = (ResponseMode.EMPATHY, ResponseMode.SOOTHING, ResponseMode.PLAY, ResponseMode.AMPLIFY)


def parse_mode(name) -> ResponseMode:
    try:
        return ResponseMode(name)
    except ValueError:
        raise UnknownMode(f"unknown response mode {name!r}") from None


@dataclass(frozen=True)
class PolicyRule:
    emotion: str
    arousal: str
    mode: ResponseMode

    def matches(self, emotion: str, arousal: str) -> bool:
        return (self.emotion in WILDCARDS or self.emotion == emotion) and self.arousal in (arousal, "any")


@dataclass(frozen=True)
class PolicyTable:
    rules: tuple
    default_mode: ResponseMode = ResponseMode.SOOTHING

    def lookup(self, emotion: str, arousal: str) -> ResponseMode:
        for rule in self.rules:
            if rule.matches(emotion, arousal):
                return rule.mode
        return self.default_mode

    def to_document(self) -> dict:
        return {
            "rules": [{"emotion": r.emotion, "arousal": r.arousal, "mode": r.mode.value} for r in self.rules],
            "default_mode": self.default_mode.value,
        }


def decide_mode(state: EmotionState, table: PolicyTable) -> ResponseMode:
    return table.lookup(state.predicted, state.arousal)


def load_policy(document=None) -> PolicyTable:
    """Validate a policy document; ``None`` loads the shipped default."""
    data = parse_document(default_text("policy") if document is None else document)
    rules_raw = require(data, "rules", list, "policy")
    default_mode = parse_mode(require(data, "default_mode", str, "policy"))
    rules, seen = [], set()
    for i, raw in enumerate(rules_raw):
        where = f"rules[{i}]"
        if not isinstance(raw, dict):
            raise SchemaError(f"{where}: rule must be an object")
        emotion = require(raw, "emotion", str, where)
        arousal = require(raw, "arousal", str, where)
        if arousal not in AROUSAL_TAGS:
            raise SchemaError(f"{where}.arousal: expected one of {AROUSAL_TAGS}, got {arousal!r}")
        mode = parse_mode(require(raw, "mode", str, where))
        key = ("*" if emotion in WILDCARDS else emotion, arousal)
        if key in seen:
            raise DuplicateRule(f"{where}: duplicate rule for emotion={emotion!r} arousal={arousal!r}")
        seen.add(key)
        rules.append(PolicyRule(emotion, arousal, mode))
    return PolicyTable(tuple(rules), default_mode)
