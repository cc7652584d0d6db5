"""Independent reference scorers used as oracles by the metric tests.

These are plain transcriptions of the published corpus-BLEU and chrF++
algorithms, written in a naive per-sentence style with string n-gram keys.
They share no code with the package implementation on purpose: the test
suite checks the two routes agree.
"""

from __future__ import annotations

import math
import re
import string
from collections import Counter

# ---------------------------------------------------------------- BLEU

NGRAM_ORDER = 4


def ref_tokenize_13a(line):
    norm = line
    norm = norm.replace("<skipped>", "")
    norm = norm.replace("-\n", "")
    norm = norm.replace("\n", " ")
    norm = norm.replace("&quot;", '"')
    norm = norm.replace("&amp;", "&")
    norm = norm.replace("&lt;", "<")
    norm = norm.replace("&gt;", ">")
    norm = " {} ".format(norm)
    norm = re.sub(r"([\{-\~\[-\` -\&\(-\+\:-\@\/])", " \\1 ", norm)
    norm = re.sub(r"([^0-9])([\.,])", "\\1 \\2 ", norm)
    norm = re.sub(r"([\.,])([^0-9])", " \\1 \\2", norm)
    norm = re.sub(r"([0-9])(-)", "\\1 \\2 ", norm)
    norm = re.sub(r"\s+", " ", norm)
    return norm.strip()


def _extract_ngrams(line, max_order=NGRAM_ORDER):
    ngrams = Counter()
    tokens = line.split()
    for n in range(1, max_order + 1):
        for i in range(0, len(tokens) - n + 1):
            ngrams[" ".join(tokens[i : i + n])] += 1
    return ngrams


def _my_log(num):
    if num == 0.0:
        return -9999999999
    return math.log(num)


def ref_corpus_bleu(hypotheses, references):
    """Corpus BLEU, 13a tokenization, exp smoothing, case-sensitive, 0-100."""
    correct = [0] * NGRAM_ORDER
    total = [0] * NGRAM_ORDER
    sys_len = 0
    ref_len = 0
    for hyp_line, ref_line in zip(hypotheses, references):
        output = ref_tokenize_13a(hyp_line.rstrip())
        ref = ref_tokenize_13a(ref_line.rstrip())
        sys_len += len(output.split())
        ref_len += len(ref.split())
        ref_ngrams = _extract_ngrams(ref)
        sys_ngrams = _extract_ngrams(output)
        for ngram in sys_ngrams.keys():
            n = len(ngram.split())
            correct[n - 1] += min(sys_ngrams[ngram], ref_ngrams.get(ngram, 0))
            total[n - 1] += sys_ngrams[ngram]

    precisions = [0.0] * NGRAM_ORDER
    smooth_mteval = 1.0
    for n in range(1, NGRAM_ORDER + 1):
        if total[n - 1] == 0:
            break
        if correct[n - 1] == 0:
            smooth_mteval *= 2
            precisions[n - 1] = 100.0 / (smooth_mteval * total[n - 1])
        else:
            precisions[n - 1] = 100.0 * correct[n - 1] / total[n - 1]

    brevity_penalty = 1.0
    if sys_len < ref_len:
        brevity_penalty = math.exp(1 - ref_len / sys_len) if sys_len > 0 else 0.0
    return brevity_penalty * math.exp(
        sum(map(_my_log, precisions[:NGRAM_ORDER])) / NGRAM_ORDER
    )


# ---------------------------------------------------------------- chrF++

CHRF_CHAR_ORDER = 6
CHRF_WORD_ORDER = 2
CHRF_BETA = 2


def _separate_characters(line):
    return list(line.strip().replace(" ", "").replace("\t", ""))


def _separate_punctuation(line):
    words = line.strip().split()
    tokenized = []
    for w in words:
        if len(w) == 1:
            tokenized.append(w)
        else:
            last_char = w[-1]
            first_char = w[0]
            if last_char in string.punctuation:
                tokenized += [w[:-1], last_char]
            elif first_char in string.punctuation:
                tokenized += [first_char, w[1:]]
            else:
                tokenized.append(w)
    return tokenized


def _ngram_counts(sequence, order):
    counts = {}
    for n in range(1, order + 1):
        for i in range(len(sequence) - n + 1):
            key = (n, tuple(sequence[i : i + n]))
            counts[key] = counts.get(key, 0) + 1
    return counts


def _sentence_statistics(hyp_line, ref_line):
    """[hyp_count, ref_count, match_count] per order: chars 1-6 then words 1-2."""
    stats = []
    hyp_chars = _separate_characters(hyp_line)
    ref_chars = _separate_characters(ref_line)
    hyp_char_ngrams = _ngram_counts(hyp_chars, CHRF_CHAR_ORDER)
    ref_char_ngrams = _ngram_counts(ref_chars, CHRF_CHAR_ORDER)
    for n in range(1, CHRF_CHAR_ORDER + 1):
        hyp_total = sum(v for (order, _), v in hyp_char_ngrams.items() if order == n)
        ref_total = sum(v for (order, _), v in ref_char_ngrams.items() if order == n)
        match = 0
        for key, count in hyp_char_ngrams.items():
            if key[0] == n and key in ref_char_ngrams:
                match += min(count, ref_char_ngrams[key])
        stats.extend([hyp_total, ref_total, match])
    hyp_words = _separate_punctuation(hyp_line)
    ref_words = _separate_punctuation(ref_line)
    hyp_word_ngrams = _ngram_counts(hyp_words, CHRF_WORD_ORDER)
    ref_word_ngrams = _ngram_counts(ref_words, CHRF_WORD_ORDER)
    for n in range(1, CHRF_WORD_ORDER + 1):
        hyp_total = sum(v for (order, _), v in hyp_word_ngrams.items() if order == n)
        ref_total = sum(v for (order, _), v in ref_word_ngrams.items() if order == n)
        match = 0
        for key, count in hyp_word_ngrams.items():
            if key[0] == n and key in ref_word_ngrams:
                match += min(count, ref_word_ngrams[key])
        stats.extend([hyp_total, ref_total, match])
    return stats


def ref_corpus_chrf_pp(hypotheses, references):
    """chrF++ (char order 6, word order 2, beta 2), summed statistics, 0-100."""
    n_orders = CHRF_CHAR_ORDER + CHRF_WORD_ORDER
    totals = [0] * (3 * n_orders)
    for hyp_line, ref_line in zip(hypotheses, references):
        for i, value in enumerate(_sentence_statistics(hyp_line, ref_line)):
            totals[i] += value

    eps = 1e-16
    beta_sq = CHRF_BETA**2
    score_sum = 0.0
    effective = 0
    for i in range(n_orders):
        hyp_total, ref_total, match = totals[3 * i : 3 * i + 3]
        precision = match / hyp_total if hyp_total > 0 else eps
        recall = match / ref_total if ref_total > 0 else eps
        denom = beta_sq * precision + recall
        if denom > 0:
            score_sum += (1 + beta_sq) * precision * recall / denom
        else:
            score_sum += eps
        if hyp_total > 0 and ref_total > 0:
            effective += 1
    if effective == 0:
        return 0.0
    return 100.0 * score_sum / effective
