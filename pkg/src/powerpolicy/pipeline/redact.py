"""Text sanitization for UI descriptors before they leave the device."""
from __future__ import annotations

import re
from typing import Any

EMAIL = "⟨EMAIL⟩"
PHONE = "⟨PHONE⟩"
NUMBER = "⟨NUMBER⟩"

_EMAIL_RE = re.compile(r"[A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,}")
_PHONE_RE = re.compile(
    r"(?<![\w])(?:\+\d{1,3}[\s.-]?)?(?:\(\d{2,4}\)[\s.-]?|\d{2,4}[\s.-])\d{3,4}(?:[\s.-]\d{3,4})?(?![\w])")
_NUMBER_RE = re.compile(r"\d{6,}")

# keys that carry structure rather than user-visible text
STRUCTURAL_KEYS = frozenset({"package", "scenario", "class", "resource_id", "id", "type", "role"})


def redact_text(s: str) -> str:
    s = _EMAIL_RE.sub(EMAIL, s)
    s = _PHONE_RE.sub(PHONE, s)
    return _NUMBER_RE.sub(NUMBER, s)


def redact(descriptor: Any, _key: str | None = None) -> Any:
    """Copy of `descriptor` with sensitive text replaced by placeholder tokens."""
    if isinstance(descriptor, str):
        return descriptor if _key in STRUCTURAL_KEYS else redact_text(descriptor)
    if isinstance(descriptor, dict):
        return {k: redact(v, k) for k, v in descriptor.items()}
    if isinstance(descriptor, (list, tuple)):
        return type(descriptor)(redact(v, _key) for v in descriptor)
    return descriptor
