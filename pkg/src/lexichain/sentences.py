"""Sentence tokenization and the score/selection types shared by all stages."""

from __future__ import annotations

import math
import unicodedata
from dataclasses import dataclass

# Keyword count grows with sentence length but is clamped so the translation
# notes never dominate the prompt.
MAX_KEYWORDS = 8
TOKENS_PER_KEYWORD = 5


def _strip_edge_punctuation(token: str) -> str:
    start, end = 0, len(token)
    while start < end and unicodedata.category(token[start])[0] in "PS":
        start += 1
    while end > start and unicodedata.category(token[end - 1])[0] in "PS":
        end -= 1
    return token[start:end]


def tokenize(text: str) -> list[str]:
    """Split text on whitespace into word tokens.

    Leading and trailing punctuation/symbol characters are stripped from each
    token; word-internal ones are kept. Tokens that are punctuation-only are
    dropped. Empty text yields an empty list.
    """
    tokens = []
    for raw in text.split():
        word = _strip_edge_punctuation(raw)
        if word:
            tokens.append(word)
    return tokens


@dataclass(frozen=True)
class SourceSentence:
    """A sentence to translate, with its word tokens and language pair."""

    text: str
    tokens: tuple[str, ...]
    src_lang: str
    tgt_lang: str

    def __post_init__(self):
        if self.src_lang == self.tgt_lang:
            raise ValueError(
                f"source and target language must differ (both {self.src_lang!r})"
            )

    @classmethod
    def from_text(cls, text: str, src_lang: str, tgt_lang: str) -> "SourceSentence":
        return cls(text=text, tokens=tuple(tokenize(text)), src_lang=src_lang, tgt_lang=tgt_lang)


@dataclass(frozen=True)
class PriorityScores:
    """Per-token importance scores, one value in [0, 1] per sentence token."""

    values: tuple[float, ...]

    def __post_init__(self):
        for v in self.values:
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"priority score {v!r} outside [0, 1]")


@dataclass(frozen=True)
class KeywordSelection:
    """The selected keywords of a sentence, in sentence (token index) order.

    ``k`` is the requested count; fewer keywords appear when the sentence is
    shorter than ``k``. ``scores`` carries the per-keyword priority scores
    when the selection came from model scoring, else None.
    """

    k: int
    keywords: tuple[tuple[int, str], ...]
    scores: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("k must be non-negative")
        if self.scores is not None and len(self.scores) != len(self.keywords):
            raise ValueError("scores must align with keywords")

    @property
    def words(self) -> tuple[str, ...]:
        return tuple(word for _, word in self.keywords)

    @property
    def indices(self) -> tuple[int, ...]:
        return tuple(index for index, _ in self.keywords)


def adaptive_k(n: int) -> int:
    """Keyword count for a sentence of ``n`` tokens: ceil(n/5) clamped to [1, 8]."""
    if n < 1:
        raise ValueError("token count must be >= 1")
    return max(1, min(MAX_KEYWORDS, math.ceil(n / TOKENS_PER_KEYWORD)))


def select_top_k(sentence: SourceSentence, scores: PriorityScores, k: int) -> KeywordSelection:
    """Pick the k highest-scoring tokens, ties broken by smaller token index.

    Returns all tokens when the sentence has fewer than k. The result lists
    keywords in ascending token-index order.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(scores.values) != len(sentence.tokens):
        raise ValueError(
            f"got {len(scores.values)} scores for {len(sentence.tokens)} tokens"
        )
    ranked = sorted(range(len(sentence.tokens)), key=lambda i: (-scores.values[i], i))
    chosen = sorted(ranked[: min(k, len(ranked))])
    return KeywordSelection(
        k=k,
        keywords=tuple((i, sentence.tokens[i]) for i in chosen),
        scores=tuple(scores.values[i] for i in chosen),
    )
