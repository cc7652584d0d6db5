"""The translation chain: constrained draft, self-check loop, final selection.

One chain instance handles one sentence. The first pass translates with the
constraint notes in context (or the plain baseline prompt when there are
none). While any constraint is unmet, the model is asked to revise its own
draft, up to a fixed iteration budget and with an early exit when a revision
repeats its predecessor verbatim. When first and final drafts differ, one
more call picks the better candidate.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from typing import Sequence

from . import prompts
from .errors import EmptyTranslationError, TransportError
from .gateway import ChatMessage, ChatRequest, LlmBackend
from .languages import language_name
from .lexicon import ConstraintSet
from .sentences import SourceSentence
from .verifier import DEFAULT_VERIFIER, VerifierConfig, verify

DEFAULT_MAX_ITERS = 3
_STANDALONE_CHOICE = re.compile(r"(?<!\d)[12](?!\d)")
_QUOTE_PAIRS = {'"': '"', "'": "'", "“": "”", "‘": "’", "«": "»"}


@dataclass(frozen=True)
class TranslationDraft:
    """One draft in the refinement sequence, with per-constraint verdicts."""

    text: str
    iteration: int
    satisfied: tuple[bool, ...]

    def __post_init__(self):
        if self.iteration < 1:
            raise ValueError("iterations start at 1")

    @property
    def all_satisfied(self) -> bool:
        return all(self.satisfied)

    @property
    def satisfied_count(self) -> int:
        return sum(self.satisfied)


@dataclass(frozen=True)
class DegradedFlags:
    extraction_fallback: bool = False
    selection_fallback: bool = False


@dataclass(frozen=True)
class ChainResult:
    """Everything the chain produced for one sentence."""

    drafts: tuple[TranslationDraft, ...]
    best: str  # "first" | "final"
    best_text: str
    degraded: DegradedFlags = DegradedFlags()

    def __post_init__(self):
        if not self.drafts:
            raise ValueError("a chain result needs at least one draft")
        if self.best not in ("first", "final"):
            raise ValueError(f"best must be 'first' or 'final', not {self.best!r}")
        chosen = self.drafts[0] if self.best == "first" else self.drafts[-1]
        if self.best_text != chosen.text:
            raise ValueError("best_text must equal the chosen draft's text")

    @property
    def first(self) -> TranslationDraft:
        return self.drafts[0]

    @property
    def final(self) -> TranslationDraft:
        return self.drafts[-1]


def clean_response(text: str) -> str:
    """Strip markdown fencing and one layer of surrounding quotes."""
    text = text.strip()
    while text.startswith("```") and text.endswith("```") and len(text) > 6:
        inner = text[3:-3]
        first_newline = inner.find("\n")
        if first_newline != -1 and " " not in inner[:first_newline]:
            inner = inner[first_newline + 1 :]
        text = inner.strip()
    if len(text) >= 2 and text[0] in _QUOTE_PAIRS and text[-1] == _QUOTE_PAIRS[text[0]]:
        text = text[1:-1].strip()
    return text


def _shot_messages(shots: Sequence[tuple[str, str]]) -> tuple[ChatMessage, ...]:
    messages: list[ChatMessage] = []
    for example_source, example_target in shots:
        messages.append(ChatMessage("user", example_source))
        messages.append(ChatMessage("assistant", example_target))
    return tuple(messages)


def translation_messages(
    sentence: SourceSentence,
    constraints: ConstraintSet,
    shots: Sequence[tuple[str, str]] = (),
) -> tuple[ChatMessage, ...]:
    """Messages for the first pass.

    With constraints, the notes template carries sentence and terms in one
    user message. Without constraints this is the plain baseline: the
    instruction message contains nothing but the baseline string, and the
    sentence rides in its own user message (optionally preceded by few-shot
    example turns).
    """
    src = language_name(sentence.src_lang)
    tgt = language_name(sentence.tgt_lang)
    if constraints:
        user = prompts.NOTES_TEMPLATE.format(
            src=src,
            tgt=tgt,
            notes=prompts.render_term_pairs(
                (c.source_word, c.target_term) for c in constraints
            ),
            text=sentence.text,
        )
        return (
            ChatMessage("system", prompts.TRANSLATOR_SYSTEM),
            ChatMessage("user", user),
        )
    instruction = prompts.BASELINE_TEMPLATE.format(src=src, tgt=tgt)
    return (
        (ChatMessage("user", instruction),)
        + _shot_messages(shots)
        + (ChatMessage("user", sentence.text),)
    )


def _complete_draft(
    gateway: LlmBackend,
    messages: tuple[ChatMessage, ...],
    iteration: int,
    constraints: ConstraintSet,
    verifier_cfg: VerifierConfig,
    max_tokens: int,
) -> TranslationDraft:
    request = ChatRequest(model=gateway.model, messages=messages, max_tokens=max_tokens)
    response = gateway.complete(request)
    text = clean_response(response.content)
    if not text:
        raise EmptyTranslationError(f"empty translation at iteration {iteration}")
    return TranslationDraft(
        text=text,
        iteration=iteration,
        satisfied=tuple(verify(text, constraints, verifier_cfg)),
    )


def translate_initial(
    sentence: SourceSentence,
    constraints: ConstraintSet,
    gateway: LlmBackend,
    shots: Sequence[tuple[str, str]] = (),
    verifier_cfg: VerifierConfig = DEFAULT_VERIFIER,
    max_tokens: int = 512,
) -> TranslationDraft:
    """First-pass translation with the constraint notes in context."""
    messages = translation_messages(sentence, constraints, shots)
    return _complete_draft(gateway, messages, 1, constraints, verifier_cfg, max_tokens)


def self_check_step(
    sentence: SourceSentence,
    constraints: ConstraintSet,
    prior: TranslationDraft,
    gateway: LlmBackend,
    verifier_cfg: VerifierConfig = DEFAULT_VERIFIER,
    max_tokens: int = 512,
) -> TranslationDraft:
    """Ask the model to revise its draft against the unmet constraints.

    The revision call replays the original constrained request and the prior
    draft as conversation history, then names exactly the unmet terms.
    """
    unmet = [
        (c.source_word, c.target_term)
        for c, ok in zip(constraints, prior.satisfied)
        if not ok
    ]
    check = prompts.SELF_CHECK_TEMPLATE.format(
        draft=prior.text,
        unmet=prompts.render_term_pairs(unmet),
    )
    messages = translation_messages(sentence, constraints) + (
        ChatMessage("assistant", prior.text),
        ChatMessage("user", check),
    )
    return _complete_draft(
        gateway, messages, prior.iteration + 1, constraints, verifier_cfg, max_tokens
    )


def select_best(
    first_draft: TranslationDraft,
    final_draft: TranslationDraft,
    constraints: ConstraintSet,
    gateway: LlmBackend,
) -> tuple[str, bool]:
    """Let the model pick candidate 1 or 2; fall back to verdict counts.

    Returns ("first" | "final", fallback_used). The fallback prefers the
    final draft unless the first satisfies strictly more constraints.
    """
    user = prompts.SELECTION_TEMPLATE.format(first=first_draft.text, second=final_draft.text)
    request = ChatRequest(
        model=gateway.model,
        messages=(
            ChatMessage("system", prompts.TRANSLATOR_SYSTEM),
            ChatMessage("user", user),
        ),
        max_tokens=8,
    )
    try:
        answer = gateway.complete(request).content
        match = _STANDALONE_CHOICE.search(answer)
        if match:
            return ("first" if match.group() == "1" else "final", False)
    except TransportError:
        pass
    if final_draft.satisfied_count >= first_draft.satisfied_count:
        return ("final", True)
    return ("first", True)


def run_chain(
    sentence: SourceSentence,
    constraints: ConstraintSet,
    gateway: LlmBackend,
    max_iters: int = DEFAULT_MAX_ITERS,
    shots: Sequence[tuple[str, str]] = (),
    verifier_cfg: VerifierConfig = DEFAULT_VERIFIER,
    max_tokens: int = 512,
) -> ChainResult:
    """Run the full chain for one sentence.

    Stops refining when every constraint is satisfied, the iteration budget
    is spent, a revision stalls (repeats its predecessor), or a mid-loop
    transport failure leaves only the drafts so far. With an empty
    constraint set this reduces to exactly one translation call.
    """
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    first = translate_initial(sentence, constraints, gateway, shots, verifier_cfg, max_tokens)
    drafts = [first]
    while not drafts[-1].all_satisfied and drafts[-1].iteration < max_iters:
        try:
            revision = self_check_step(
                sentence, constraints, drafts[-1], gateway, verifier_cfg, max_tokens
            )
        except (TransportError, EmptyTranslationError):
            break
        drafts.append(revision)
        if revision.text == drafts[-2].text:
            break
    final = drafts[-1]
    if final.text == first.text:
        best, fallback = "final", False
    else:
        best, fallback = select_best(first, final, constraints, gateway)
    best_text = first.text if best == "first" else final.text
    return ChainResult(
        drafts=tuple(drafts),
        best=best,
        best_text=best_text,
        degraded=DegradedFlags(selection_fallback=fallback),
    )


def mark_extraction_fallback(result: ChainResult) -> ChainResult:
    """Tag a result whose constraints were dropped by a failed extraction."""
    return replace(result, degraded=replace(result.degraded, extraction_fallback=True))
