"""Deterministic check that a draft contains each required target term.

This is a pure string-level test: NFKC-normalize, case-fold, then look for
the term as a whole word (no letter or digit immediately adjacent). It
deliberately does not credit inflected variants; the self-check prompt asks
for exact terms.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass
from typing import Sequence

from .lexicon import ConstraintSet


@dataclass(frozen=True)
class VerifierConfig:
    casefold: bool = True
    unicode_normalize: bool = True  # NFKC
    word_boundary: bool = True


DEFAULT_VERIFIER = VerifierConfig()


def _normalize(text: str, cfg: VerifierConfig) -> str:
    if cfg.unicode_normalize:
        text = unicodedata.normalize("NFKC", text)
    if cfg.casefold:
        text = text.casefold()
    return text


def _is_word_char(ch: str) -> bool:
    return ch.isalpha() or ch.isdigit()


def _contains_term(haystack: str, term: str, word_boundary: bool) -> bool:
    # Multi-word terms must appear with exactly one space between words.
    needle = " ".join(term.split())
    if not needle:
        return False
    start = 0
    while True:
        found = haystack.find(needle, start)
        if found < 0:
            return False
        if not word_boundary:
            return True
        before_ok = found == 0 or not _is_word_char(haystack[found - 1])
        end = found + len(needle)
        after_ok = end == len(haystack) or not _is_word_char(haystack[end])
        if before_ok and after_ok:
            return True
        start = found + 1


def verify(
    draft_text: str,
    constraints: ConstraintSet | Sequence,
    cfg: VerifierConfig = DEFAULT_VERIFIER,
) -> list[bool]:
    """One verdict per constraint: does its target term occur in the draft?"""
    haystack = _normalize(draft_text, cfg)
    return [
        _contains_term(haystack, _normalize(c.target_term, cfg), cfg.word_boundary)
        for c in constraints
    ]
