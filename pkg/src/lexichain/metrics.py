"""Corpus BLEU and chrF++ scored the same way the standard tools score them.

BLEU uses the mteval-13a tokenization, clipped n-gram counts up to order 4,
exponential smoothing for zero counts, and the brevity penalty. chrF++
combines character n-grams of order 1-6 (whitespace removed) with word
n-grams of order 1-2 (leading/trailing ASCII punctuation split off), scoring
an F2 per order and averaging over the orders observed. Both aggregate a
corpus by summing per-sentence statistics before computing the score.

Single-reference only; every score carries a signature string recording the
configuration that produced it.
"""

from __future__ import annotations

import math
import re
import string
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

BLEU_ORDER = 4
CHRF_CHAR_ORDER = 6
CHRF_WORD_ORDER = 2
CHRF_BETA = 2.0

# Stand-in for log(0); drives exp() to zero without raising.
_LOG_ZERO = -9999999999

_13A_RULES = (
    (re.compile(r"([\{-\~\[-\` -\&\(-\+\:-\@\/])"), r" \1 "),
    # split period/comma unless both neighbors are digits
    (re.compile(r"([^0-9])([\.,])"), r"\1 \2 "),
    (re.compile(r"([\.,])([^0-9])"), r" \1 \2"),
    # split dash after a digit
    (re.compile(r"([0-9])(\-)"), r"\1 \2 "),
)


def tokenize_13a(line: str) -> list[str]:
    """The minimal WMT tokenization used for BLEU."""
    line = line.replace("<skipped>", "")
    line = line.replace("-\n", "")
    line = line.replace("\n", " ")
    if "&" in line:
        line = line.replace("&quot;", '"')
        line = line.replace("&amp;", "&")
        line = line.replace("&lt;", "<")
        line = line.replace("&gt;", ">")
    line = f" {line} "
    for pattern, repl in _13A_RULES:
        line = pattern.sub(repl, line)
    return line.split()


@dataclass(frozen=True)
class BleuConfig:
    max_ngram: int = BLEU_ORDER
    tokenizer: str = "13a"
    smoothing: str = "exp"
    case_sensitive: bool = True

    def __post_init__(self):
        if self.max_ngram != BLEU_ORDER:
            raise ValueError("only 4-gram BLEU is supported")
        if self.tokenizer != "13a":
            raise ValueError("only the 13a tokenizer is supported")
        if self.smoothing != "exp":
            raise ValueError("only exponential smoothing is supported")

    @property
    def signature(self) -> str:
        case = "mixed" if self.case_sensitive else "lc"
        return f"nrefs:1|case:{case}|eff:no|tok:{self.tokenizer}|smooth:{self.smoothing}"


@dataclass(frozen=True)
class ChrfConfig:
    char_order: int = CHRF_CHAR_ORDER
    word_order: int = CHRF_WORD_ORDER
    beta: float = CHRF_BETA
    whitespace_in_chars: bool = False

    def __post_init__(self):
        if self.word_order < 1:
            raise ValueError("chrF++ needs word_order >= 1")
        if self.char_order < 1 or self.beta <= 0:
            raise ValueError("char_order must be >= 1 and beta > 0")

    @property
    def order(self) -> int:
        return self.char_order + self.word_order

    @property
    def signature(self) -> str:
        space = "yes" if self.whitespace_in_chars else "no"
        return (
            f"nrefs:1|case:mixed|eff:yes|nc:{self.char_order}"
            f"|nw:{self.word_order}|space:{space}"
        )


@dataclass(frozen=True)
class CorpusScore:
    """A 0-100 corpus score plus the statistics behind it.

    For BLEU, ``per_order`` holds the four n-gram precisions (percent) and
    ``sys_len``/``ref_len`` are token counts. For chrF++ it holds the eight
    per-order F2 components (percent) and the lengths count characters.
    """

    metric: str
    score: float
    per_order: tuple[float, ...]
    brevity_penalty: float
    sys_len: int
    ref_len: int
    signature: str

    def to_record(self) -> dict:
        return {
            "metric": self.metric,
            "score": self.score,
            "signature": self.signature,
            "details": {
                "per_order": list(self.per_order),
                "brevity_penalty": self.brevity_penalty,
                "sys_len": self.sys_len,
                "ref_len": self.ref_len,
            },
        }


def _validate_corpus(hyps: Sequence[str], refs: Sequence[str]) -> None:
    if len(hyps) != len(refs):
        raise ValueError(f"{len(hyps)} hypotheses vs {len(refs)} references")
    if not hyps:
        raise ValueError("empty corpus")


def _ngram_counts(tokens: list[str], max_order: int) -> Counter:
    counts: Counter = Counter()
    for order in range(1, max_order + 1):
        for start in range(len(tokens) - order + 1):
            counts[tuple(tokens[start : start + order])] += 1
    return counts


def bleu_corpus(
    hyps: Sequence[str], refs: Sequence[str], cfg: BleuConfig = BleuConfig()
) -> CorpusScore:
    """Corpus BLEU on 13a-tokenized text, scaled to 0-100."""
    _validate_corpus(hyps, refs)
    correct = [0] * BLEU_ORDER
    total = [0] * BLEU_ORDER
    sys_len = 0
    ref_len = 0
    for hyp, ref in zip(hyps, refs):
        if not cfg.case_sensitive:
            hyp, ref = hyp.lower(), ref.lower()
        hyp_tokens = tokenize_13a(hyp.rstrip())
        ref_tokens = tokenize_13a(ref.rstrip())
        sys_len += len(hyp_tokens)
        ref_len += len(ref_tokens)
        ref_counts = _ngram_counts(ref_tokens, BLEU_ORDER)
        for ngram, count in _ngram_counts(hyp_tokens, BLEU_ORDER).items():
            n = len(ngram)
            total[n - 1] += count
            correct[n - 1] += min(count, ref_counts.get(ngram, 0))

    precisions = [0.0] * BLEU_ORDER
    smooth_scale = 1.0
    for n in range(1, BLEU_ORDER + 1):
        if total[n - 1] == 0:
            break
        if correct[n - 1] == 0:
            smooth_scale *= 2.0
            precisions[n - 1] = 100.0 / (smooth_scale * total[n - 1])
        else:
            precisions[n - 1] = 100.0 * correct[n - 1] / total[n - 1]

    if sys_len == 0:
        brevity_penalty = 0.0
    elif sys_len < ref_len:
        brevity_penalty = math.exp(1 - ref_len / sys_len)
    else:
        brevity_penalty = 1.0
    log_sum = sum(math.log(p) if p > 0.0 else _LOG_ZERO for p in precisions)
    score = brevity_penalty * math.exp(log_sum / BLEU_ORDER)
    return CorpusScore(
        metric="BLEU",
        score=score,
        per_order=tuple(precisions),
        brevity_penalty=brevity_penalty,
        sys_len=sys_len,
        ref_len=ref_len,
        signature=cfg.signature,
    )


_PUNCT_CHARS = set(string.punctuation)


def _chrf_words(segment: str) -> list[str]:
    """Whitespace split with one leading or trailing punctuation mark split off."""
    words: list[str] = []
    for token in segment.split():
        if len(token) == 1:
            words.append(token)
        elif token[-1] in _PUNCT_CHARS:
            words.extend([token[:-1], token[-1]])
        elif token[0] in _PUNCT_CHARS:
            words.extend([token[0], token[1:]])
        else:
            words.append(token)
    return words


def _char_ngram_counts(text: str, order: int) -> Counter:
    return Counter(text[i : i + order] for i in range(len(text) - order + 1))


def _overlap_triple(hyp_counts: Counter, ref_counts: Counter) -> tuple[int, int, int]:
    matched = sum(
        min(count, ref_counts[gram]) for gram, count in hyp_counts.items() if gram in ref_counts
    )
    return sum(hyp_counts.values()), sum(ref_counts.values()), matched


def _chrf_pair_statistics(hyp: str, ref: str, cfg: ChrfConfig) -> list[int]:
    stats: list[int] = []
    if cfg.whitespace_in_chars:
        hyp_chars, ref_chars = hyp, ref
    else:
        hyp_chars, ref_chars = "".join(hyp.split()), "".join(ref.split())
    for order in range(1, cfg.char_order + 1):
        stats.extend(
            _overlap_triple(
                _char_ngram_counts(hyp_chars, order), _char_ngram_counts(ref_chars, order)
            )
        )
    hyp_words = _chrf_words(hyp)
    ref_words = _chrf_words(ref)
    for order in range(1, cfg.word_order + 1):
        stats.extend(
            _overlap_triple(
                Counter(tuple(hyp_words[i : i + order]) for i in range(len(hyp_words) - order + 1)),
                Counter(tuple(ref_words[i : i + order]) for i in range(len(ref_words) - order + 1)),
            )
        )
    return stats


def _chrf_score_from_stats(stats: list[int], cfg: ChrfConfig) -> tuple[float, list[float]]:
    eps = 1e-16
    factor = cfg.beta**2
    per_order: list[float] = []
    effective_orders = 0
    total = 0.0
    for i in range(cfg.order):
        n_hyp, n_ref, n_match = stats[3 * i : 3 * i + 3]
        precision = n_match / n_hyp if n_hyp > 0 else eps
        recall = n_match / n_ref if n_ref > 0 else eps
        denominator = factor * precision + recall
        fscore = ((1 + factor) * precision * recall / denominator) if denominator > 0 else eps
        per_order.append(100.0 * fscore)
        total += fscore
        if n_hyp > 0 and n_ref > 0:
            effective_orders += 1
    if effective_orders == 0:
        return 0.0, per_order
    return 100.0 * total / effective_orders, per_order


def chrf_pp(
    hyps: Sequence[str], refs: Sequence[str], cfg: ChrfConfig = ChrfConfig()
) -> CorpusScore:
    """Corpus chrF++ (character order 6, word order 2, beta 2), 0-100."""
    _validate_corpus(hyps, refs)
    totals = [0] * (3 * cfg.order)
    sys_len = 0
    ref_len = 0
    for hyp, ref in zip(hyps, refs):
        sys_len += len("".join(hyp.split()))
        ref_len += len("".join(ref.split()))
        for i, value in enumerate(_chrf_pair_statistics(hyp, ref, cfg)):
            totals[i] += value
    score, per_order = _chrf_score_from_stats(totals, cfg)
    return CorpusScore(
        metric="chrF2++" if cfg.word_order == 2 else f"chrF{cfg.beta:g}+w{cfg.word_order}",
        score=score,
        per_order=tuple(per_order),
        brevity_penalty=1.0,
        sys_len=sys_len,
        ref_len=ref_len,
        signature=cfg.signature,
    )
