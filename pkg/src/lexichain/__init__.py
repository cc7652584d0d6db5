"""Terminology-constrained machine translation with LLM prompt chains.

Pipeline: score source words for translation-critical keywords, retrieve
their translations from a bilingual dictionary by embedding similarity,
inject them as translation notes, then iteratively self-check the draft
until every required term appears. Includes native BLEU/chrF++ scoring and
a batch evaluation harness.
"""

from .chain import (
    ChainResult,
    DegradedFlags,
    TranslationDraft,
    run_chain,
    select_best,
    self_check_step,
    translate_initial,
)
from .errors import (
    ComparisonError,
    DatasetError,
    EmptyDictionaryError,
    EmptyTranslationError,
    ExtractionError,
    IndexBuildError,
    LexichainError,
    ProtocolError,
    RunFailedError,
    ScriptExhaustedError,
    TransportError,
)
from .gateway import (
    ChatMessage,
    ChatRequest,
    ChatResponse,
    GatewayConfig,
    HttpBackend,
    MockBackend,
    MockRule,
    MockScript,
    mock_embedding,
)
from .harness import (
    DatasetSpec,
    RunConfig,
    RunRecord,
    load_dataset,
    report,
    rescore_run,
    run_batch,
    run_sentence,
)
from .keywords import KeywordPolicy, ScoringPromptResult, extract_keywords, score_words
from .languages import REGISTRY, LanguageRegistryEntry, flores_code, language_name
from .lexicon import (
    ConstraintSet,
    DictionaryEntry,
    EmbeddingVector,
    LexicalConstraint,
    LexiconIndex,
    build_constraints,
    cosine_distance,
    cosine_similarity,
    embed_all,
    ingest_dictionary,
    resolve,
)
from .metrics import (
    BleuConfig,
    ChrfConfig,
    CorpusScore,
    bleu_corpus,
    chrf_pp,
    tokenize_13a,
)
from .sentences import (
    KeywordSelection,
    PriorityScores,
    SourceSentence,
    adaptive_k,
    select_top_k,
    tokenize,
)
from .verifier import VerifierConfig, verify

__version__ = "0.1.0"
