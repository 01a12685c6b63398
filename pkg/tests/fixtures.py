"""Shared test doubles and a deliberately strict configuration."""

import json

import numpy as np

from emorespond.content import default_config
from emorespond.emotion import DEFAULT_CATEGORIES, state_from_distribution
from emorespond.safety import load_rules, load_templates


class StubEmotionAgent:
    """Replays a fixed (emotion, arousal), or a cycle of them, without running the CNN."""

    def __init__(self, pairs, categories=DEFAULT_CATEGORIES):
        self.pairs = list(pairs) if isinstance(pairs, list) else [pairs]
        self.categories = tuple(categories)
        self.calls = 0

    def featurize(self, segment):
        return None

    def predict(self, features, segment):
        emotion, arousal = self.pairs[self.calls % len(self.pairs)]
        self.calls += 1
        dist = np.full(len(self.categories), 0.1 / (len(self.categories) - 1))
        dist[self.categories.index(emotion)] = 0.9
        return state_from_distribution(dist, self.categories, 0.9 if arousal == "high" else 0.1, 0.5)


ALL_PAIRS = [(e, a) for e in DEFAULT_CATEGORIES for a in ("low", "high")]


def strict_templates() -> dict:
    doc = load_templates().to_document()
    doc["templates"].append({"id": "monster_mash", "age_rating": 4, "words": ["monster", "dance"]})
    doc["templates"].append({"id": "teen_quiz", "age_rating": 13, "words": ["quiz"]})
    return doc


def strict_content() -> dict:
    doc = default_config().to_document()
    doc["modes"]["amplify"]["templates"] = ["monster_mash", "celebration_dance", "high_five"]
    doc["modes"]["play"]["templates"] = ["teen_quiz", "peekaboo_game", "counting_song"]
    return doc


def strict_rules() -> dict:
    """Child bounds tighter than several per-mode defaults, so the loop has work to do."""
    doc = json.loads(json.dumps(load_rules().to_document()))
    tighter = {"stim.volume": 0.75, "stim.animation": 0.7, "stim.brightness": 0.85, "stim.tempo": 1.2}
    for r in doc["rules"]:
        if r["id"] in tighter:
            r["bound"] = tighter[r["id"]]
    doc["rules"].append({"id": "stim.warmth", "category": "stimulation_level", "kind": "lower_threshold",
                         "parameter": "color_warmth", "bound": 0.45, "profile": "child"})
    return doc
