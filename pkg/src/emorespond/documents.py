"""Loading of the JSON configuration documents (policy, rules, content, templates)."""

from __future__ import annotations

import json
import os
from importlib import resources
from pathlib import Path

from .errors import SchemaError

KINDS = ("policy", "rules", "content", "templates")


def default_text(kind: str) -> str:
    if kind not in KINDS:
        raise ValueError(f"unknown document kind {kind!r}")
    return resources.files("emorespond.data").joinpath(f"{kind}.json").read_text(encoding="utf-8")


def parse_document(document) -> dict:
    """Accept a mapping, JSON text, or a path to a JSON file."""
    if isinstance(document, dict):
        return document
    if isinstance(document, Path) or (isinstance(document, str) and not document.lstrip().startswith("{")):
        try:
            document = Path(document).read_text(encoding="utf-8")
        except OSError as exc:
            raise SchemaError(f"cannot read document {os.fspath(document)}: {exc.strerror}") from None
    try:
        data = json.loads(document)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise SchemaError("document root must be an object")
    return data


def require(obj: dict, key: str, types, where: str):
    if not isinstance(obj, dict) or key not in obj:
        raise SchemaError(f"{where}: missing field '{key}'")
    value = obj[key]
    allowed = types if isinstance(types, tuple) else (types,)
    if not isinstance(value, allowed) or (isinstance(value, bool) and bool not in allowed):
        raise SchemaError(f"{where}.{key}: wrong type {type(value).__name__}")
    return value
