"""Reference values typed in by hand, independent of the shipped data files."""

# (emotion, arousal) -> mode
EXPECTED_MODES = {
    ("sad", "low"): "empathy",
    ("sad", "high"): "soothing",
    ("angry", "low"): "soothing",
    ("angry", "high"): "soothing",
    ("neutral", "low"): "play",
    ("neutral", "high"): "play",
    ("happy", "low"): "play",
    ("happy", "high"): "amplify",
}

# Per-mode audio/visual values.
MODE_PARAMS = {
    "empathy": dict(tempo=0.7, volume=0.5, tone_softness=0.8, brightness=0.6, color_warmth=0.8, animation_speed=0.3),
    "soothing": dict(tempo=0.6, volume=0.4, tone_softness=0.9, brightness=0.5, color_warmth=0.7, animation_speed=0.2),
    "play": dict(tempo=1.0, volume=0.7, tone_softness=0.5, brightness=0.7, color_warmth=0.5, animation_speed=0.6),
    "amplify": dict(tempo=1.3, volume=0.8, tone_softness=0.4, brightness=0.9, color_warmth=0.6, animation_speed=0.8),
}
MODE_TEXT = {"empathy": (0.1, 0.5), "soothing": (0.3, 0.5), "play": (0.6, 0.3), "amplify": (0.8, 0.2)}
