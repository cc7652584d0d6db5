"""Keyword extraction: model-scored word priorities plus ablation policies.

The scoring prompt demands a JSON object mapping each token index to an
importance score; malformed replies get up to two corrective retries before
the extraction counts as failed.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass

from . import prompts
from .errors import ExtractionError
from .gateway import ChatMessage, ChatRequest, LlmBackend
from .languages import language_name
from .sentences import (
    KeywordSelection,
    PriorityScores,
    SourceSentence,
    adaptive_k,
    select_top_k,
)

SCORE_RETRIES = 2  # corrective re-asks after the first malformed reply
_VARIANTS = ("none", "fixed", "random", "llm")


@dataclass(frozen=True)
class KeywordPolicy:
    """Which keyword-selection strategy a run uses.

    ``llm`` with k=None picks k adaptively from sentence length; ``fixed``
    takes the first k tokens; ``random`` samples k tokens with a recorded
    seed; ``none`` selects nothing (unconstrained translation).
    """

    variant: str
    k: int | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.variant not in _VARIANTS:
            raise ValueError(f"unknown policy variant {self.variant!r}")
        if self.variant in ("fixed", "random") and (self.k is None or self.k < 1):
            raise ValueError(f"{self.variant} policy needs k >= 1")
        if self.variant == "random" and self.seed is None:
            raise ValueError("random policy needs a seed")
        if self.variant == "llm" and self.k is not None and self.k < 1:
            raise ValueError("llm policy k must be >= 1 when given")

    @classmethod
    def none(cls) -> "KeywordPolicy":
        return cls("none")

    @classmethod
    def fixed(cls, k: int) -> "KeywordPolicy":
        return cls("fixed", k=k)

    @classmethod
    def random(cls, k: int, seed: int) -> "KeywordPolicy":
        return cls("random", k=k, seed=seed)

    @classmethod
    def llm(cls, k: int | None = None) -> "KeywordPolicy":
        return cls("llm", k=k)

    def __str__(self) -> str:
        if self.variant == "fixed":
            return f"fixed:{self.k}"
        if self.variant == "random":
            return f"random:{self.k}:{self.seed}"
        if self.variant == "llm" and self.k is not None:
            return f"llm:{self.k}"
        return self.variant

    @classmethod
    def parse(cls, text: str) -> "KeywordPolicy":
        parts = text.strip().split(":")
        name = parts[0]
        if name == "none" and len(parts) == 1:
            return cls.none()
        if name == "fixed" and len(parts) == 2:
            return cls.fixed(int(parts[1]))
        if name == "random" and len(parts) == 3:
            return cls.random(int(parts[1]), int(parts[2]))
        if name == "llm" and len(parts) == 1:
            return cls.llm()
        if name == "llm" and len(parts) == 2:
            return cls.llm(int(parts[1]))
        raise ValueError(f"cannot parse keyword policy {text!r}")


@dataclass(frozen=True)
class ScoringPromptResult:
    """What came back from the scoring prompt, parsed or not."""

    raw_response: str
    parsed: PriorityScores | None
    attempts: int

    def __post_init__(self):
        if self.attempts < 1:
            raise ValueError("attempts must be >= 1")


def _strip_fencing(text: str) -> str:
    text = text.strip()
    if text.startswith("```") and text.endswith("```"):
        inner = text[3:-3]
        first_newline = inner.find("\n")
        if first_newline != -1 and " " not in inner[:first_newline]:
            inner = inner[first_newline + 1 :]
        text = inner.strip()
    return text


def _parse_score_json(raw: str, n_tokens: int) -> list[float] | None:
    try:
        data = json.loads(_strip_fencing(raw))
    except ValueError:
        return None
    if not isinstance(data, dict):
        return None
    scores: dict[int, float] = {}
    for key, value in data.items():
        try:
            index = int(key)
        except (TypeError, ValueError):
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            return None
        scores[index] = float(value)
    if set(scores) != set(range(n_tokens)):
        return None
    return [min(1.0, max(0.0, scores[i])) for i in range(n_tokens)]


def _scoring_request(sentence: SourceSentence, model: str) -> ChatRequest:
    user = prompts.KEYWORD_TEMPLATE.format(
        src=language_name(sentence.src_lang),
        tgt=language_name(sentence.tgt_lang),
        tokens=prompts.render_indexed_tokens(sentence.tokens),
    )
    return ChatRequest(
        model=model,
        messages=(
            ChatMessage("system", prompts.ANALYST_SYSTEM),
            ChatMessage("user", user),
        ),
        max_tokens=512,
    )


def request_scores(sentence: SourceSentence, gateway: LlmBackend) -> ScoringPromptResult:
    """Ask the model to score every token; retry malformed replies.

    Transport errors propagate; parse failures are captured in the result so
    callers can decide how to degrade.
    """
    if not sentence.tokens:
        raise ValueError("cannot score a sentence with no tokens")
    request = _scoring_request(sentence, gateway.model)
    raw = ""
    for attempt in range(1, SCORE_RETRIES + 2):
        response = gateway.complete(request)
        raw = response.content
        values = _parse_score_json(raw, len(sentence.tokens))
        if values is not None:
            return ScoringPromptResult(
                raw_response=raw,
                parsed=PriorityScores(tuple(values)),
                attempts=attempt,
            )
        reminder = prompts.KEYWORD_RETRY_TEMPLATE.format(last_index=len(sentence.tokens) - 1)
        request = ChatRequest(
            model=request.model,
            messages=request.messages
            + (ChatMessage("assistant", raw), ChatMessage("user", reminder)),
            temperature=request.temperature,
            max_tokens=request.max_tokens,
        )
    return ScoringPromptResult(raw_response=raw, parsed=None, attempts=SCORE_RETRIES + 1)


def score_words(sentence: SourceSentence, gateway: LlmBackend) -> PriorityScores:
    """Per-token priority scores in [0, 1]; raises ExtractionError on failure."""
    result = request_scores(sentence, gateway)
    if result.parsed is None:
        raise ExtractionError(
            f"no parseable scores after {result.attempts} attempts; "
            f"last reply: {result.raw_response[:200]!r}"
        )
    return result.parsed


def extract_keywords(
    sentence: SourceSentence,
    policy: KeywordPolicy,
    gateway: LlmBackend,
) -> KeywordSelection:
    """Produce the keyword selection dictated by the policy.

    Raises ExtractionError when the llm policy cannot get scores; callers
    degrade to an unconstrained translation and record the fallback.
    """
    n = len(sentence.tokens)
    if policy.variant == "none" or n == 0:
        return KeywordSelection(k=0, keywords=())
    if policy.variant == "fixed":
        count = min(policy.k, n)
        return KeywordSelection(
            k=policy.k,
            keywords=tuple((i, sentence.tokens[i]) for i in range(count)),
        )
    if policy.variant == "random":
        rng = random.Random(policy.seed)
        indices = sorted(rng.sample(range(n), min(policy.k, n)))
        return KeywordSelection(
            k=policy.k,
            keywords=tuple((i, sentence.tokens[i]) for i in indices),
        )
    scores = score_words(sentence, gateway)
    k = adaptive_k(n) if policy.k is None else policy.k
    return select_top_k(sentence, scores, k)
