"""Content parameter generation agent.

A two-layer ReLU network maps a one-hot response mode (plus, when
regenerating, the previous parameters and the violation mask) to eight
range-squashed outputs. The factory initialisation routes each mode's
one-hot unit straight to the inverse-activated defaults, so an untrained
network reproduces the per-mode defaults exactly.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .documents import default_text, parse_document, require
from .errors import DefaultOutOfRange, NoViolations, SchemaError
from .params import FIELD_RANGES, NUMERIC_FIELDS, ContentParameters
from .policy import MODE_ORDER, ResponseMode, parse_mode

HIDDEN = 32
JITTER = 0.25
ENDPOINT_MARGIN = 1e-4
PROJECTION_MARGIN = 0.05
_DECIMALS = 9  # output rounding keeps boundary comparisons stable
_TANH_FIELDS = ("sentiment",)
_TEMPLATE_KINDS = ("blocklist",)
_TEMPLATE_PARAMS = ("age_rating",)

_LO = np.array([FIELD_RANGES[f][0] for f in NUMERIC_FIELDS])
_HI = np.array([FIELD_RANGES[f][1] for f in NUMERIC_FIELDS])
_IS_TANH = np.array([f in _TANH_FIELDS for f in NUMERIC_FIELDS])


def activate(z: np.ndarray) -> np.ndarray:
    """Squash pre-activations into each field's range (scaled logistic; tanh for sentiment)."""
    z = np.asarray(z, dtype=np.float64)
    sig = 0.5 * (1.0 + np.tanh(0.5 * z))
    out = np.where(_IS_TANH, np.tanh(z), _LO + (_HI - _LO) * sig)
    return np.clip(out, _LO, _HI)


def inverse_activate(values) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    out = np.empty_like(v)
    u = (v[~_IS_TANH] - _LO[~_IS_TANH]) / (_HI[~_IS_TANH] - _LO[~_IS_TANH])
    out[~_IS_TANH] = np.log(u) - np.log1p(-u)
    out[_IS_TANH] = np.arctanh(v[_IS_TANH])
    return out


@dataclass(frozen=True)
class ContentConfig:
    defaults: dict  # ResponseMode -> ContentParameters (template_id = first candidate)
    candidates: dict  # ResponseMode -> tuple of template ids

    def to_document(self) -> dict:
        modes = {}
        for mode in MODE_ORDER:
            entry = {f: getattr(self.defaults[mode], f) for f in NUMERIC_FIELDS}
            entry["templates"] = list(self.candidates[mode])
            modes[mode.value] = entry
        return {"modes": modes}


def load_content(document=None) -> ContentConfig:
    data = parse_document(default_text("content") if document is None else document)
    modes = require(data, "modes", dict, "content")
    defaults, candidates = {}, {}
    for name, entry in modes.items():
        mode = parse_mode(name)
        where = f"modes.{name}"
        values = [require(entry, f, (int, float), where) for f in NUMERIC_FIELDS]
        templates = entry.get("templates", [])
        if not isinstance(templates, list) or not all(isinstance(t, str) for t in templates):
            raise SchemaError(f"{where}.templates: expected a list of template ids")
        try:
            params = ContentParameters.from_vector(values, templates[0] if templates else None)
        except ValueError as exc:
            raise SchemaError(f"{where}: {exc}") from None
        defaults[mode], candidates[mode] = params, tuple(templates)
    missing = [m.value for m in MODE_ORDER if m not in defaults]
    if missing:
        raise SchemaError(f"content: no defaults for modes {missing}")
    return ContentConfig(defaults, candidates)


_DEFAULT_CONFIG: ContentConfig | None = None


def default_config() -> ContentConfig:
    global _DEFAULT_CONFIG
    if _DEFAULT_CONFIG is None:
        _DEFAULT_CONFIG = load_content()
    return _DEFAULT_CONFIG


def default_params(mode, config: ContentConfig | None = None) -> ContentParameters:
    return (config or default_config()).defaults[parse_mode(mode)]


@dataclass
class GeneratorNet:
    """Input layout: [one-hot mode (4) | previous params normalised (8) | violation mask (n_rules)]."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    n_rules: int

    @property
    def input_size(self) -> int:
        return len(MODE_ORDER) + len(NUMERIC_FIELDS) + self.n_rules

    def preactivation(self, mode, previous=None, mask=None) -> np.ndarray:
        x = np.zeros(self.input_size)
        x[MODE_ORDER.index(parse_mode(mode))] = 1.0
        offset = len(MODE_ORDER)
        if previous is not None:
            x[offset:offset + len(NUMERIC_FIELDS)] = previous.normalized()
        if mask is not None:
            m = np.asarray(mask, dtype=np.float64)
            if m.shape != (self.n_rules,):
                raise ValueError(f"violation mask must have length {self.n_rules}")
            x[offset + len(NUMERIC_FIELDS):] = m
        h = np.maximum(x @ self.w1 + self.b1, 0.0)
        return h @ self.w2 + self.b2


def init_generator(defaults=None, n_rules: int = 0) -> GeneratorNet:
    """Factory network whose untrained output equals ``defaults`` for every mode."""
    if defaults is None:
        defaults = default_config().defaults
    defaults = {parse_mode(m): p for m, p in defaults.items()}
    if set(defaults) != set(MODE_ORDER):
        raise ValueError("defaults must cover every response mode")
    n_in = len(MODE_ORDER) + len(NUMERIC_FIELDS) + n_rules
    w1 = np.zeros((n_in, HIDDEN))
    w2 = np.zeros((HIDDEN, len(NUMERIC_FIELDS)))
    for i, mode in enumerate(MODE_ORDER):
        w1[i, i] = 1.0
        values = defaults[mode].vector()
        clamped = np.clip(values, _LO + ENDPOINT_MARGIN, _HI - ENDPOINT_MARGIN)
        for f, before, after in zip(NUMERIC_FIELDS, values, clamped):
            if before != after:
                warnings.warn(
                    f"{mode.value}.{f}={before} sits on a range endpoint; generator targets {after}",
                    DefaultOutOfRange,
                    stacklevel=2,
                )
        w2[i] = inverse_activate(clamped)
    return GeneratorNet(w1, np.zeros(HIDDEN), w2, np.zeros(len(NUMERIC_FIELDS)), n_rules)


def _rng(seed, attempt: int):
    return np.random.default_rng([int(seed), int(attempt)])


def _emit(z: np.ndarray, template_id) -> ContentParameters:
    return ContentParameters.from_vector(np.round(activate(z), _DECIMALS), template_id)


def _pick_template(candidates, rng, exclude=()):
    pool = [t for t in candidates if t not in exclude]
    if not pool:
        return None
    if rng is None:
        return pool[0]
    return pool[int(rng.integers(len(pool)))]


def generate(mode, net: GeneratorNet, jitter_seed=None, config: ContentConfig | None = None) -> ContentParameters:
    """Forward pass for ``mode``; with a seed, pre-activations get uniform +-0.25 noise."""
    mode = parse_mode(mode)
    config = config or default_config()
    z = net.preactivation(mode)
    rng = None
    if jitter_seed is not None:
        rng = _rng(jitter_seed, 0)
        z = z + rng.uniform(-JITTER, JITTER, z.shape)
    return _emit(z, _pick_template(config.candidates[mode], rng))


def project(previous: ContentParameters, violations) -> ContentParameters:
    """Move every violated threshold parameter 5% of its range inside the bound; drop offending templates."""
    changes = {}
    for v in violations:
        if v.kind in _TEMPLATE_KINDS or v.parameter in _TEMPLATE_PARAMS:
            changes["template_id"] = None
            continue
        lo, hi = FIELD_RANGES[v.parameter]
        margin = PROJECTION_MARGIN * (hi - lo)
        if v.kind == "upper_threshold":
            target = min(changes.get(v.parameter, hi), v.bound - margin)
        else:
            target = max(changes.get(v.parameter, lo), v.bound + margin)
        changes[v.parameter] = target
    for name, value in changes.items():
        if name != "template_id":
            lo, hi = FIELD_RANGES[name]
            changes[name] = round(float(np.clip(value, lo, hi)), _DECIMALS)
    return previous.replace(**changes)


def regenerate(
    mode,
    previous: ContentParameters,
    violations,
    net: GeneratorNet,
    attempt: int,
    max_iterations: int = 3,
    jitter_seed=None,
    config: ContentConfig | None = None,
) -> ContentParameters:
    """Violation-conditioned retry; the last permitted attempt is a deterministic projection."""
    if violations.passed:
        raise NoViolations("regenerate called with a passing verification result")
    if attempt < 1:
        raise ValueError("regeneration attempts are numbered from 1")
    if attempt >= max_iterations - 1:
        return project(previous, violations.violations)
    mode = parse_mode(mode)
    config = config or default_config()
    z = net.preactivation(mode, previous, violations.mask)
    rng = None
    if jitter_seed is not None:
        rng = _rng(jitter_seed, attempt)
        z = z + rng.uniform(-JITTER, JITTER, z.shape)
    bad_template = any(v.kind in _TEMPLATE_KINDS or v.parameter in _TEMPLATE_PARAMS for v in violations.violations)
    exclude = (previous.template_id,) if bad_template else ()
    return _emit(z, _pick_template(config.candidates[mode], rng, exclude))


class ContentAgent:
    def __init__(self, config: ContentConfig | None = None, n_rules: int = 0, net: GeneratorNet | None = None):
        self.config = config or default_config()
        self.net = net or init_generator(self.config.defaults, n_rules)

    def generate(self, mode, jitter_seed=None) -> ContentParameters:
        return generate(mode, self.net, jitter_seed, self.config)

    def regenerate(self, mode, previous, violations, attempt, max_iterations, jitter_seed=None) -> ContentParameters:
        return regenerate(mode, previous, violations, self.net, attempt, max_iterations, jitter_seed, self.config)
