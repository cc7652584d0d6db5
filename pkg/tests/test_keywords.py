"""Keyword policies and model-based scoring with retries."""

import pytest
from hypothesis import given, settings, strategies as st

from lexichain.errors import ExtractionError
from lexichain.gateway import MockBackend, MockScript
from lexichain.keywords import (
    KeywordPolicy,
    extract_keywords,
    request_scores,
    score_words,
)
from lexichain.sentences import SourceSentence


def _sentence(text="The committee approved the budget", src="en", tgt="ca"):
    return SourceSentence.from_text(text, src, tgt)


def _scoring_backend(*responses):
    return MockBackend(MockScript(list(responses)))


class TestPolicy:
    def test_parse_roundtrip(self):
        for text in ("none", "fixed:4", "random:3:42", "llm", "llm:6"):
            assert str(KeywordPolicy.parse(text)) == text

    def test_invalid_rejected(self):
        for bad in ("fixed", "fixed:0", "random:2", "unknown", "llm:0"):
            with pytest.raises(ValueError):
                KeywordPolicy.parse(bad)

    def test_random_needs_seed(self):
        with pytest.raises(ValueError):
            KeywordPolicy("random", k=2)


class TestScoreWords:
    def test_scripted_scores_parsed(self):
        backend = _scoring_backend('{"0":0.9,"1":0.1,"2":0.8}')
        scores = score_words(_sentence("gat gos sol"), backend)
        assert scores.values == (0.9, 0.1, 0.8)

    def test_prose_then_valid_json_takes_two_attempts(self):
        backend = _scoring_backend(
            "Sure! The most important words are...",
            '{"0":0.2,"1":0.7,"2":0.4}',
        )
        result = request_scores(_sentence("gat gos sol"), backend)
        assert result.attempts == 2
        assert result.parsed.values == (0.2, 0.7, 0.4)
        # the retry carries a corrective reminder
        retry_request = backend.call_log[1]
        assert retry_request.messages[-1].role == "user"
        assert "not valid" in retry_request.messages[-1].content

    def test_out_of_range_scores_clamped(self):
        backend = _scoring_backend('{"0":1.7,"1":-0.2,"2":0.5}')
        scores = score_words(_sentence("gat gos sol"), backend)
        assert scores.values == (1.0, 0.0, 0.5)

    def test_all_attempts_malformed_raises(self):
        backend = _scoring_backend("nope", "still nope", "not json either")
        with pytest.raises(ExtractionError):
            score_words(_sentence("gat gos sol"), backend)
        assert len(backend.call_log) == 3  # initial + two retries

    def test_missing_index_is_malformed(self):
        backend = _scoring_backend('{"0":0.9,"2":0.8}', '{"0":0.9,"1":0.5,"2":0.8}')
        result = request_scores(_sentence("gat gos sol"), backend)
        assert result.attempts == 2

    def test_extra_index_is_malformed(self):
        backend = _scoring_backend('{"0":0.9,"1":0.5,"2":0.8,"3":0.1}', '{"0":1,"1":0,"2":1}')
        result = request_scores(_sentence("gat gos sol"), backend)
        assert result.attempts == 2

    def test_fenced_json_accepted(self):
        backend = _scoring_backend('```json\n{"0":0.9,"1":0.1,"2":0.8}\n```')
        assert score_words(_sentence("gat gos sol"), backend).values == (0.9, 0.1, 0.8)

    def test_prompt_mentions_language_names_and_tokens(self):
        backend = _scoring_backend('{"0":0.5,"1":0.5,"2":0.5}')
        score_words(_sentence("gat gos sol", src="ca", tgt="en"), backend)
        prompt = backend.call_log[0].messages[-1].content
        assert "Catalan" in prompt and "English" in prompt
        assert "0: gat, 1: gos, 2: sol" in prompt

    def test_empty_sentence_rejected(self):
        with pytest.raises(ValueError):
            score_words(_sentence("...!"), _scoring_backend())


class TestExtractKeywords:
    def test_policy_none_selects_nothing(self):
        selection = extract_keywords(_sentence(), KeywordPolicy.none(), MockBackend())
        assert selection.keywords == ()

    def test_fixed_takes_leading_tokens(self):
        selection = extract_keywords(_sentence("a b c d e"), KeywordPolicy.fixed(2), MockBackend())
        assert selection.words == ("a", "b")

    def test_random_is_reproducible(self):
        sentence = _sentence("one two three four five six")
        policy = KeywordPolicy.random(2, seed=42)
        first = extract_keywords(sentence, policy, MockBackend())
        second = extract_keywords(sentence, policy, MockBackend())
        assert first == second
        assert len(first.keywords) == 2

    def test_random_differs_across_seeds(self):
        sentence = _sentence("one two three four five six seven eight nine ten")
        picks = {
            extract_keywords(sentence, KeywordPolicy.random(3, seed=s), MockBackend()).indices
            for s in range(12)
        }
        assert len(picks) > 1

    def test_llm_adaptive_on_21_tokens_selects_5(self):
        tokens = [f"w{i}" for i in range(21)]
        scores = {str(i): 0.5 for i in range(21)}
        for i in (2, 5, 8, 13, 20):
            scores[str(i)] = 0.9
        backend = _scoring_backend(str(scores).replace("'", '"'))
        selection = extract_keywords(
            _sentence(" ".join(tokens)), KeywordPolicy.llm(), backend
        )
        assert selection.k == 5
        assert selection.indices == (2, 5, 8, 13, 20)

    def test_llm_fixed_k_overrides_adaptive(self):
        backend = _scoring_backend('{"0":0.1,"1":0.9,"2":0.5}')
        selection = extract_keywords(_sentence("un dos tres"), KeywordPolicy.llm(2), backend)
        assert selection.indices == (1, 2)

    def test_llm_equal_scores_selects_first_k(self):
        backend = _scoring_backend('{"0":0.5,"1":0.5,"2":0.5,"3":0.5,"4":0.5}')
        selection = extract_keywords(
            _sentence("a b c d e"), KeywordPolicy.llm(2), backend
        )
        assert selection.indices == (0, 1)

    def test_extraction_failure_propagates(self):
        backend = _scoring_backend("junk", "junk", "junk")
        with pytest.raises(ExtractionError):
            extract_keywords(_sentence("a b c"), KeywordPolicy.llm(), backend)

    def test_empty_token_sentence_yields_empty_selection(self):
        selection = extract_keywords(
            SourceSentence.from_text("?!—", "en", "ca"), KeywordPolicy.llm(), MockBackend()
        )
        assert selection.keywords == ()

    @settings(max_examples=40)
    @given(
        st.text("abcdef ghij", min_size=1, max_size=50),
        st.sampled_from(["none", "fixed:2", "random:3:7", "fixed:9"]),
    )
    def test_selection_is_subset_without_duplicates(self, text, policy_text):
        sentence = SourceSentence.from_text(text, "en", "ca")
        policy = KeywordPolicy.parse(policy_text)
        selection = extract_keywords(sentence, policy, MockBackend())
        indices = selection.indices
        assert len(set(indices)) == len(indices)
        for index, word in selection.keywords:
            assert sentence.tokens[index] == word
