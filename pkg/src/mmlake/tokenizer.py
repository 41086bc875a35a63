"""Deterministic tokenizer shared by discovery and the text backend.

Rules: NFC-normalize, lowercase, split on anything that is not a letter or
digit, drop the fixed stop list below. No stemming.
"""

from __future__ import annotations

import re
import unicodedata
from typing import Any, Iterable, List

STOP_WORDS = frozenset(
    """a an the of in on at to for by with and or not is are was were be
    which what who how from that this as it over do""".split()
)
assert len(STOP_WORDS) == 30

_WORD = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> List[str]:
    text = unicodedata.normalize("NFC", text).lower()
    return [t for t in _WORD.findall(text) if t not in STOP_WORDS]


def value_tokens(value: Any) -> List[str]:
    """Tokens of a stored value; lists contribute their elements' tokens."""
    if value is None or isinstance(value, bool):
        return []
    if isinstance(value, (list, tuple)):
        out: List[str] = []
        for v in value:
            out.extend(value_tokens(v))
        return out
    if isinstance(value, float) and value.is_integer():
        value = int(value)
    return tokenize(str(value))


def tokenize_all(texts: Iterable[str]) -> List[str]:
    out: List[str] = []
    for t in texts:
        out.extend(tokenize(t))
    return out
