"""Safety verification agent: every active rule is evaluated, the result is their conjunction."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .documents import default_text, parse_document, require
from .errors import (
    BoundOutOfRange,
    DuplicateRuleId,
    SchemaError,
    UnknownParameterField,
    UnsafeFallback,
)
from .params import AGE_RATING_RANGE, FIELD_RANGES, ContentParameters

CATEGORIES = ("age_appropriateness", "stimulation_level", "prohibited_expression")
KINDS = ("upper_threshold", "lower_threshold", "blocklist")
PROFILES = ("child", "general", "all")
RULE_FIELDS = {**FIELD_RANGES, "age_rating": AGE_RATING_RANGE}


@dataclass(frozen=True)
class Template:
    id: str
    age_rating: float
    words: frozenset


@dataclass(frozen=True)
class TemplateRegistry:
    templates: dict = field(default_factory=dict)

    def get(self, template_id):
        if template_id is None:
            return None
        try:
            return self.templates[template_id]
        except KeyError:
            raise UnknownParameterField(f"template {template_id!r} is not registered") from None

    def to_document(self) -> dict:
        return {
            "templates": [
                {"id": t.id, "age_rating": t.age_rating, "words": sorted(t.words)} for t in self.templates.values()
            ]
        }


def load_templates(document=None) -> TemplateRegistry:
    data = parse_document(default_text("templates") if document is None else document)
    out = {}
    for i, raw in enumerate(require(data, "templates", list, "templates")):
        where = f"templates[{i}]"
        tid = require(raw, "id", str, where)
        if tid in out:
            raise SchemaError(f"{where}: duplicate template id {tid!r}")
        rating = require(raw, "age_rating", (int, float), where)
        lo, hi = AGE_RATING_RANGE
        if not lo <= rating <= hi:
            raise BoundOutOfRange(f"{where}.age_rating={rating} outside [{lo}, {hi}]")
        words = require(raw, "words", list, where)
        out[tid] = Template(tid, float(rating), frozenset(str(w).lower() for w in words))
    return TemplateRegistry(out)


@dataclass(frozen=True)
class SafetyRule:
    id: str
    category: str
    kind: str
    parameter: str | None = None
    bound: float | None = None
    profile: str = "all"
    words: frozenset = frozenset()

    def active_for(self, profile: str) -> bool:
        return self.profile == "all" or self.profile == profile


@dataclass(frozen=True)
class Violation:
    rule_id: str
    category: str
    kind: str
    parameter: str | None
    observed: object
    bound: float | None

    def to_dict(self) -> dict:
        return {
            "rule_id": self.rule_id,
            "category": self.category,
            "observed": self.observed,
            "bound": self.bound,
        }


@dataclass(frozen=True)
class VerificationResult:
    passed: bool
    violations: tuple
    mask: np.ndarray

    def to_dict(self) -> dict:
        return {"passed": self.passed, "violations": [v.to_dict() for v in self.violations]}


@dataclass(frozen=True)
class RuleSet:
    rules: tuple
    active_profile: str = "child"
    blocklist: frozenset = frozenset()

    def __len__(self) -> int:
        return len(self.rules)

    def with_profile(self, profile: str) -> "RuleSet":
        if profile not in ("child", "general"):
            raise SchemaError(f"unknown profile {profile!r}")
        return RuleSet(self.rules, profile, self.blocklist)

    def to_document(self) -> dict:
        rules = []
        for r in self.rules:
            entry = {"id": r.id, "category": r.category, "kind": r.kind, "profile": r.profile}
            if r.kind == "blocklist":
                if r.words != self.blocklist:
                    entry["words"] = sorted(r.words)
            else:
                entry["parameter"], entry["bound"] = r.parameter, r.bound
            rules.append(entry)
        return {
            "profile_defaults": {"profile": self.active_profile},
            "blocklist": sorted(self.blocklist),
            "rules": rules,
        }


def _observed(rule: SafetyRule, params: ContentParameters, templates: TemplateRegistry):
    if rule.parameter == "age_rating":
        t = templates.get(params.template_id)
        return 0.0 if t is None else t.age_rating
    if rule.parameter not in FIELD_RANGES:
        raise UnknownParameterField(f"rule {rule.id!r} references unknown field {rule.parameter!r}")
    return getattr(params, rule.parameter)


def check_rule(rule: SafetyRule, params: ContentParameters, templates: TemplateRegistry):
    """Violation for one rule, or None when it holds."""
    if rule.kind == "blocklist":
        t = templates.get(params.template_id)
        hits = sorted(t.words & rule.words) if t is not None else []
        return Violation(rule.id, rule.category, rule.kind, None, hits[0], None) if hits else None
    value = _observed(rule, params, templates)
    failed = value > rule.bound if rule.kind == "upper_threshold" else value < rule.bound
    return Violation(rule.id, rule.category, rule.kind, rule.parameter, value, rule.bound) if failed else None


def verify(params: ContentParameters, rules: RuleSet, templates: TemplateRegistry | None = None) -> VerificationResult:
    """Evaluate all rules active for the rule set's profile; no short-circuit, the full mask is returned."""
    templates = templates if templates is not None else TemplateRegistry()
    mask = np.zeros(len(rules.rules), dtype=np.int8)
    violations = []
    for i, rule in enumerate(rules.rules):
        if not rule.active_for(rules.active_profile):
            continue
        v = check_rule(rule, params, templates)
        if v is not None:
            mask[i] = 1
            violations.append(v)
    return VerificationResult(not violations, tuple(violations), mask)


def _fallback_params() -> ContentParameters:
    from .content import default_params

    return default_params("soothing")


def load_rules(document=None, fallback: ContentParameters | None = None, templates: TemplateRegistry | None = None) -> RuleSet:
    """Validate a rule-set document.

    Besides schema checks, the child profile must be at least as strict as
    the general one on every shared (parameter, kind), and the fallback
    content (soothing defaults unless given) must pass under both profiles.
    """
    data = parse_document(default_text("rules") if document is None else document)
    defaults = data.get("profile_defaults", {})
    if not isinstance(defaults, dict):
        raise SchemaError("profile_defaults: expected an object")
    profile = defaults.get("profile", "child")
    if profile not in ("child", "general"):
        raise SchemaError(f"profile_defaults.profile: unknown profile {profile!r}")
    blocklist = data.get("blocklist", [])
    if not isinstance(blocklist, list):
        raise SchemaError("blocklist: expected a list of words")
    blocklist = frozenset(str(w).lower() for w in blocklist)

    rules, ids = [], set()
    for i, raw in enumerate(require(data, "rules", list, "rules")):
        where = f"rules[{i}]"
        rid = require(raw, "id", str, where)
        if rid in ids:
            raise DuplicateRuleId(f"{where}: duplicate rule id {rid!r}")
        ids.add(rid)
        category = require(raw, "category", str, where)
        if category not in CATEGORIES:
            raise SchemaError(f"{where}.category: unknown category {category!r}")
        kind = require(raw, "kind", str, where)
        if kind not in KINDS:
            raise SchemaError(f"{where}.kind: unknown kind {kind!r}")
        rprofile = raw.get("profile", "all")
        if rprofile not in PROFILES:
            raise SchemaError(f"{where}.profile: unknown profile {rprofile!r}")
        if kind == "blocklist":
            words = raw.get("words")
            words = blocklist if words is None else frozenset(str(w).lower() for w in words)
            if not words:
                raise SchemaError(f"{where}: blocklist rule has no words")
            rules.append(SafetyRule(rid, category, kind, None, None, rprofile, words))
            continue
        parameter = require(raw, "parameter", str, where)
        if parameter not in RULE_FIELDS:
            raise SchemaError(f"{where}.parameter: unknown field {parameter!r}")
        bound = float(require(raw, "bound", (int, float), where))
        lo, hi = RULE_FIELDS[parameter]
        if not lo <= bound <= hi:
            raise BoundOutOfRange(f"{where}: bound {bound} outside {parameter} range [{lo}, {hi}]")
        rules.append(SafetyRule(rid, category, kind, parameter, bound, rprofile))

    _check_profile_order(rules)
    ruleset = RuleSet(tuple(rules), profile, blocklist)
    check_fallback(ruleset, fallback or _fallback_params(), templates)
    return ruleset


def _check_profile_order(rules) -> None:
    by_key: dict = {}
    for r in rules:
        if r.kind != "blocklist" and r.profile in ("child", "general"):
            by_key.setdefault((r.parameter, r.kind), {}).setdefault(r.profile, []).append(r.bound)
    for (parameter, kind), bounds in by_key.items():
        if "child" in bounds and "general" in bounds:
            if kind == "upper_threshold":
                ok = max(bounds["child"]) <= min(bounds["general"])
            else:
                ok = min(bounds["child"]) >= max(bounds["general"])
            if not ok:
                raise SchemaError(f"child profile is looser than general on {parameter} ({kind})")


def check_fallback(ruleset: RuleSet, fallback: ContentParameters, templates: TemplateRegistry | None = None) -> None:
    if fallback.template_id is not None and (templates is None or fallback.template_id not in templates.templates):
        fallback = fallback.replace(template_id=None)
    for profile in ("child", "general"):
        result = verify(fallback, ruleset.with_profile(profile), templates)
        if not result.passed:
            ids = ", ".join(v.rule_id for v in result.violations)
            raise UnsafeFallback(f"fallback content fails rules [{ids}] under profile {profile}")
