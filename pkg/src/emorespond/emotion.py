"""Emotion recognition agent: features -> CNN -> category distribution, plus an acoustic arousal estimate."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .audio_io import AudioSegment
from .dsp import FeatureTensor, StftConfig, build_input_tensor, center_log_mel, frame_signal, zero_crossing_rate
from .neural import NetworkSpec, WeightSet, default_spec, forward, zero_weights

DEFAULT_CATEGORIES = ("sad", "angry", "neutral", "happy")
LOW, HIGH = "low", "high"


@dataclass(frozen=True)
class ArousalConfig:
    w_energy: float = 4.0
    w_zcr: float = 2.0
    bias: float = -3.0
    threshold: float = 0.5
    floor_db: float = -60.0


@dataclass
class EmotionState:
    distribution: np.ndarray
    predicted: str
    arousal: str
    arousal_score: float
    confidence: float
    categories: tuple = DEFAULT_CATEGORIES

    def to_dict(self) -> dict:
        return {
            "distribution": {c: float(p) for c, p in zip(self.categories, self.distribution)},
            "predicted": self.predicted,
            "confidence": float(self.confidence),
            "arousal": self.arousal,
            "arousal_score": float(self.arousal_score),
        }


def _logistic(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def energy_level(segment: AudioSegment, stft: StftConfig = StftConfig(), floor_db: float = -60.0) -> float:
    """Mean frame RMS in dBFS, mapped affinely from [floor_db, 0] onto [0, 1] (clipped per frame)."""
    rate = segment.sample_rate
    frames = frame_signal(segment.samples, stft.window_samples(rate), stft.hop_samples(rate))
    rms = np.sqrt(np.mean(frames ** 2, axis=1))
    with np.errstate(divide="ignore"):
        db = 20.0 * np.log10(rms)
    level = np.clip((db - floor_db) / -floor_db, 0.0, 1.0)
    return float(level.mean())


def estimate_arousal(segment: AudioSegment, cfg: ArousalConfig = ArousalConfig()) -> tuple:
    """(score in [0, 1], "low"/"high") from a logistic over loudness and zero-crossing rate."""
    e = energy_level(segment, floor_db=cfg.floor_db)
    z = float(zero_crossing_rate(segment).mean())
    score = _logistic(cfg.w_energy * e + cfg.w_zcr * z + cfg.bias)
    return score, HIGH if score >= cfg.threshold else LOW


def state_from_distribution(dist: np.ndarray, categories, arousal_score: float, threshold: float) -> EmotionState:
    dist = np.asarray(dist, dtype=np.float64)
    idx = int(np.argmax(dist))  # first maximum wins ties
    return EmotionState(
        distribution=dist,
        predicted=categories[idx],
        arousal=HIGH if arousal_score >= threshold else LOW,
        arousal_score=float(arousal_score),
        confidence=float(dist[idx]),
        categories=tuple(categories),
    )


def classifier_input(segment: AudioSegment, mode: str = "mel_only") -> FeatureTensor:
    """Network input for one segment; training and inference must both go through here."""
    return center_log_mel(build_input_tensor(segment, mode))


@dataclass
class EmotionAgent:
    """Holds the network, weights and configuration; ``classify`` is safe to call repeatedly."""

    weights: WeightSet | None = None
    categories: tuple = DEFAULT_CATEGORIES
    arousal_cfg: ArousalConfig = field(default_factory=ArousalConfig)
    input_mode: str = "mel_only"
    spec: NetworkSpec | None = None

    def __post_init__(self):
        self.categories = tuple(self.categories)
        if len(set(self.categories)) != len(self.categories):
            raise ValueError("emotion categories must be unique")
        if self.spec is None:
            self.spec = default_spec(len(self.categories), 3 if self.input_mode == "stacked" else 1)
        if self.weights is None:
            self.weights = zero_weights(self.spec)
        self.weights.check(self.spec)

    def featurize(self, segment: AudioSegment) -> FeatureTensor:
        return classifier_input(segment, self.input_mode)

    def predict(self, features: FeatureTensor, segment: AudioSegment) -> EmotionState:
        dist = forward(self.spec, self.weights, features)
        score, _ = estimate_arousal(segment, self.arousal_cfg)
        return state_from_distribution(dist, self.categories, score, self.arousal_cfg.threshold)

    def classify(self, segment: AudioSegment) -> EmotionState:
        return self.predict(self.featurize(segment), segment)


def classify(segment: AudioSegment, weights: WeightSet, categories=DEFAULT_CATEGORIES) -> EmotionState:
    return EmotionAgent(weights, tuple(categories)).classify(segment)
