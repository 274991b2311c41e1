"""Ligature folding, comparison keys and Levenshtein similarity."""

from __future__ import annotations

import unicodedata
from typing import NewType

ComparisonKey = NewType("ComparisonKey", str)

# U+FB00..U+FB06, the Latin compatibility ligatures
_LIGATURES = {
    "ﬀ": "ff",
    "ﬁ": "fi",
    "ﬂ": "fl",
    "ﬃ": "ffi",
    "ﬄ": "ffl",
    "ﬅ": "st",
    "ﬆ": "st",
}
_LIGATURE_TABLE = str.maketrans(_LIGATURES)


def fold_ligatures(text: str) -> str:
    """Replace Latin ligature glyphs with their letter sequences.

    >>> fold_ligatures("e\\ufb00ective \\ufb02ow")
    'effective flow'
    """
    return text.translate(_LIGATURE_TABLE)


def normalize_value(text: str) -> str:
    """Fold ligatures and collapse whitespace runs; used on every extracted value."""
    return " ".join(fold_ligatures(text).split())


def comparison_key(text: str) -> ComparisonKey:
    """Lowercase letters and digits only, diacritics stripped.

    Titles and punctuation vanish, so ``"Taryo, S.T., M.T."`` and
    ``"Taryo, ST., MT."`` share the key ``"taryostmt"``.
    """
    decomposed = unicodedata.normalize("NFKD", fold_ligatures(text))
    out = []
    for ch in decomposed.casefold():
        if unicodedata.combining(ch):
            continue
        if ("a" <= ch <= "z") or ("0" <= ch <= "9"):
            out.append(ch)
    return ComparisonKey("".join(out))


def levenshtein(a: str, b: str) -> int:
    """Unit-cost edit distance over code points."""
    if a == b:
        return 0
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        current = [i]
        for j, cb in enumerate(b, 1):
            current.append(min(
                previous[j] + 1,
                current[j - 1] + 1,
                previous[j - 1] + (ca != cb),
            ))
        previous = current
    return previous[-1]


def similarity(a: str, b: str) -> float:
    """``1 - distance / max(len)``; two empty strings are identical (1.0)."""
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1.0 - levenshtein(a, b) / longest
