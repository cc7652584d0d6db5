"""Prompt templates for every pipeline stage.

All user-visible wording lives in this one file so a run fingerprint pinned
to PROMPT_VERSION identifies exactly what the models were asked.
"""

from __future__ import annotations

from typing import Iterable

PROMPT_VERSION = "1"

TRANSLATOR_SYSTEM = "You are a professional translator."
ANALYST_SYSTEM = "You are a translation analyst."

# The unconstrained instruction. Kept free of any extra wording: baseline
# runs must issue it exactly as written here.
BASELINE_TEMPLATE = "Translate the following sentence from {src} to {tgt}."

KEYWORD_TEMPLATE = (
    "Identify the words most critical for accurately translating the following "
    "{src} sentence into {tgt}. Return ONLY a JSON object mapping each word's "
    "0-based index to an importance score between 0 and 1. "
    "Sentence tokens: {tokens}"
)

KEYWORD_RETRY_TEMPLATE = (
    "That response was not valid. Return ONLY a JSON object mapping each token "
    "index from 0 to {last_index} to a score between 0 and 1. No prose."
)

NOTES_TEMPLATE = (
    "Translate the following sentence from {src} to {tgt}. "
    "Translation notes — use these exact term translations: {notes}. "
    "Output only the translation.\n"
    "Sentence: {text}"
)

SELF_CHECK_TEMPLATE = (
    "Your previous translation: {draft}. The following required terms are "
    "missing or mistranslated: {unmet}. Revise the translation so every "
    "required term translation appears, preserving fluency. "
    "Output only the revised translation."
)

SELECTION_TEMPLATE = (
    "Given the source sentence and required term translations, which candidate "
    "better satisfies the required terms while remaining fluent? "
    "Candidate 1: {first} Candidate 2: {second}. Answer with exactly 1 or 2."
)


def render_term_pairs(pairs: Iterable[tuple[str, str]]) -> str:
    """Format (source word, target term) pairs as the notes/unmet list."""
    return "; ".join(f"{word} → {term}" for word, term in pairs)


def render_indexed_tokens(tokens: Iterable[str]) -> str:
    return ", ".join(f"{i}: {token}" for i, token in enumerate(tokens))
