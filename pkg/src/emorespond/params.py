"""The bounded content-parameter vector shared by the generator and the safety checker."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

FIELD_RANGES = {
    "tempo": (0.5, 2.0),
    "volume": (0.0, 1.0),
    "tone_softness": (0.0, 1.0),
    "brightness": (0.0, 1.0),
    "color_warmth": (0.0, 1.0),
    "animation_speed": (0.0, 1.0),
    "sentiment": (-1.0, 1.0),
    "formality": (0.0, 1.0),
}
NUMERIC_FIELDS = tuple(FIELD_RANGES)

# Template-derived quantity addressable by safety rules.
AGE_RATING_RANGE = (0.0, 18.0)


@dataclass(frozen=True)
class ContentParameters:
    tempo: float
    volume: float
    tone_softness: float
    brightness: float
    color_warmth: float
    animation_speed: float
    sentiment: float
    formality: float
    template_id: str | None = None

    def __post_init__(self):
        for name, (lo, hi) in FIELD_RANGES.items():
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and lo <= v <= hi):
                raise ValueError(f"{name}={v!r} outside [{lo}, {hi}]")
            object.__setattr__(self, name, float(v))

    def vector(self) -> np.ndarray:
        return np.array([getattr(self, f) for f in NUMERIC_FIELDS])

    def normalized(self) -> np.ndarray:
        lo = np.array([FIELD_RANGES[f][0] for f in NUMERIC_FIELDS])
        hi = np.array([FIELD_RANGES[f][1] for f in NUMERIC_FIELDS])
        return (self.vector() - lo) / (hi - lo)

    @classmethod
    def from_vector(cls, values, template_id: str | None = None) -> "ContentParameters":
        return cls(*(float(v) for v in values), template_id=template_id)

    def replace(self, **changes) -> "ContentParameters":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)


assert tuple(f.name for f in fields(ContentParameters))[:-1] == NUMERIC_FIELDS
