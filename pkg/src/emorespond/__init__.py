"""Emotion-to-response engine: audio features, CNN emotion recognition, response policy, content generation and safety verification."""

__version__ = "0.1.0"
