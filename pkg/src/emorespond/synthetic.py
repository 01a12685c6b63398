"""Seeded tone-plus-noise audio for desk-scale training, acceptance runs and benchmarks.

Each emotion category owns a spectral band; a clip is a cluster of partials
around that band's centre plus white noise. Loud clips are labelled high
arousal, quiet clips low arousal.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio_io import CANONICAL_RATE, AudioSegment, write_wav
from .emotion import DEFAULT_CATEGORIES

BAND_CENTERS = {"sad": 250.0, "angry": 2400.0, "neutral": 600.0, "happy": 1200.0}
LOUD_AMPLITUDE = (0.6, 0.95)
QUIET_AMPLITUDE = (0.008, 0.02)
SNR_DB = (12.0, 24.0)


@dataclass(frozen=True)
class ToneClip:
    category: str
    arousal: str
    samples: np.ndarray

    def segment(self) -> AudioSegment:
        return AudioSegment(self.samples, CANONICAL_RATE)


def tone_clip(category: str, arousal: str, rng, seconds: float = 3.0) -> ToneClip:
    """One clip; ``rng`` is a Generator or an integer seed."""
    rng = np.random.default_rng(rng)
    n = int(round(seconds * CANONICAL_RATE))
    t = np.arange(n) / CANONICAL_RATE
    center = BAND_CENTERS[category] * rng.uniform(0.93, 1.07)
    x = np.zeros(n)
    for ratio in (0.94, 1.0, 1.06):
        x += rng.uniform(0.5, 1.0) * np.sin(2 * np.pi * center * ratio * t + rng.uniform(0, 2 * np.pi))
    x /= np.max(np.abs(x))
    snr = rng.uniform(*SNR_DB)
    x = x + rng.normal(0.0, np.sqrt(np.mean(x ** 2)) * 10 ** (-snr / 20), n)
    lo, hi = LOUD_AMPLITUDE if arousal == "high" else QUIET_AMPLITUDE
    x *= rng.uniform(lo, hi) / np.max(np.abs(x))
    return ToneClip(category, arousal, np.clip(x, -1.0, 1.0))


def tone_dataset(n_per_class: int, seed: int = 0, categories=DEFAULT_CATEGORIES, seconds: float = 3.0) -> list:
    """Balanced list of clips, half loud and half quiet per category, in a seeded shuffled order."""
    rng = np.random.default_rng(seed)
    clips = []
    for cat in categories:
        for i in range(n_per_class):
            clips.append(tone_clip(cat, "high" if i % 2 == 0 else "low", rng, seconds))
    order = rng.permutation(len(clips))
    return [clips[i] for i in order]


def write_dataset(out_dir: str | os.PathLike, n_per_class: int = 100, seed: int = 0, seconds: float = 3.0) -> list:
    """Write ``<out_dir>/<category>/<category>_<arousal>_<index>.wav``; returns written paths."""
    root = Path(out_dir)
    paths = []
    for i, clip in enumerate(tone_dataset(n_per_class, seed, seconds=seconds)):
        d = root / clip.category
        d.mkdir(parents=True, exist_ok=True)
        p = d / f"{clip.category}_{clip.arousal}_{i:04d}.wav"
        write_wav(p, clip.samples)
        paths.append(p)
    return paths


def benchmark_segments(count: int = 8, seed: int = 1234) -> list:
    """Deterministic 3 s segments cycling through categories and arousal levels."""
    rng = np.random.default_rng(seed)
    cats = list(BAND_CENTERS)
    return [
        tone_clip(cats[i % len(cats)], "high" if (i // len(cats)) % 2 == 0 else "low", rng).segment()
        for i in range(count)
    ]
