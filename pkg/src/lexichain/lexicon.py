"""Bilingual dictionary ingestion, the embedding index, and constraint retrieval.

Dictionaries are plain text, one ``source target`` pair per line (tab or
space separated); a source word appearing on several lines accumulates all
its translations. Retrieval embeds keywords into the same vector space as
the dictionary and scans it exhaustively, so nearest-neighbor answers are
exact by construction.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Protocol, Sequence

import numpy as np

from .errors import EmptyDictionaryError, IndexBuildError
from .sentences import KeywordSelection

logger = logging.getLogger(__name__)

EMBED_BATCH = 128
DEFAULT_NN_THRESHOLD = 0.6


@dataclass(frozen=True)
class EmbeddingVector:
    """A fixed-length vector of finite floats."""

    values: tuple[float, ...]

    def __post_init__(self):
        if not self.values:
            raise ValueError("embedding vector must not be empty")
        for v in self.values:
            if not math.isfinite(v):
                raise ValueError("embedding vector values must be finite")

    @property
    def dim(self) -> int:
        return len(self.values)


class EmbeddingBackend(Protocol):
    """Anything that can map words to fixed-dimension vectors."""

    @property
    def embedder_id(self) -> str: ...

    def embed(self, words: Sequence[str]) -> list[EmbeddingVector]: ...


def cosine_similarity(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Cosine of the angle between two vectors, in [-1, 1]."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    va = np.asarray(a.values, dtype=np.float64)
    vb = np.asarray(b.values, dtype=np.float64)
    norm_a = float(np.linalg.norm(va))
    norm_b = float(np.linalg.norm(vb))
    if norm_a == 0.0 or norm_b == 0.0:
        raise ValueError("cosine similarity is undefined for zero vectors")
    return float(np.clip(np.dot(va, vb) / (norm_a * norm_b), -1.0, 1.0))


def cosine_distance(a: EmbeddingVector, b: EmbeddingVector) -> float:
    return 1.0 - cosine_similarity(a, b)


@dataclass(frozen=True)
class DictionaryEntry:
    """One source word and its translations, in file order, deduplicated."""

    source_word: str  # case-folded lookup key
    original: str  # surface form as first seen in the file
    translations: tuple[str, ...]

    def __post_init__(self):
        if not self.translations:
            raise ValueError(f"entry {self.source_word!r} has no translations")
        if any(ch.isspace() for ch in self.source_word):
            raise ValueError(f"source word {self.source_word!r} contains whitespace")
        if len(set(self.translations)) != len(self.translations):
            raise ValueError(f"entry {self.source_word!r} has duplicate translations")


@dataclass(frozen=True)
class LexicalConstraint:
    """A required (source word, target term) pair for the translation prompt."""

    source_word: str
    target_term: str
    match_kind: str  # "exact" | "nearest_neighbor"
    similarity: float
    matched_entry: str = ""

    def __post_init__(self):
        if not self.target_term:
            raise ValueError("constraint target term must be non-empty")
        if self.match_kind not in ("exact", "nearest_neighbor"):
            raise ValueError(f"unknown match kind {self.match_kind!r}")
        if not -1.0 <= self.similarity <= 1.0:
            raise ValueError(f"similarity {self.similarity!r} outside [-1, 1]")
        if self.match_kind == "exact" and self.similarity != 1.0:
            raise ValueError("exact matches must record similarity 1.0")


ConstraintSet = tuple[LexicalConstraint, ...]


class LexiconIndex:
    """Dictionary entries plus (optionally) one unit vector per known word.

    Instances are treated as immutable once built: ``embed_all`` returns a
    new index rather than mutating in place.
    """

    def __init__(
        self,
        entries: dict[str, DictionaryEntry],
        src_lang: str,
        tgt_lang: str,
        skipped_lines: int = 0,
        vectors: dict[str, Sequence[float]] | None = None,
        embedder_id: str | None = None,
    ):
        self.entries = dict(entries)
        self.src_lang = src_lang
        self.tgt_lang = tgt_lang
        self.skipped_lines = skipped_lines
        self.embedder_id = embedder_id
        self.fresh_embeddings = 0
        self.dim: int | None = None
        self._vectors: dict[str, np.ndarray] = {}
        self._keys = list(self.entries)
        self._key_matrix: np.ndarray | None = None
        if vectors:
            self._store_vectors(vectors)

    def _store_vectors(self, vectors: dict[str, Sequence[float]]) -> None:
        for word, values in vectors.items():
            arr = np.asarray(values, dtype=np.float64)
            if arr.ndim != 1 or arr.size == 0:
                raise IndexBuildError(f"bad vector for {word!r}")
            if self.dim is None:
                self.dim = int(arr.size)
            elif arr.size != self.dim:
                raise IndexBuildError(
                    f"dimension mismatch: {word!r} has {arr.size}, index has {self.dim}"
                )
            norm = float(np.linalg.norm(arr))
            if norm == 0.0 or not np.isfinite(arr).all():
                raise IndexBuildError(f"degenerate vector for {word!r}")
            self._vectors[word] = arr / norm
        missing = [w for w in self.vocabulary() if w not in self._vectors]
        if missing:
            raise IndexBuildError(f"missing vectors for {len(missing)} words, e.g. {missing[0]!r}")

    @property
    def has_vectors(self) -> bool:
        return bool(self._vectors)

    def vocabulary(self) -> list[str]:
        """All entry keys and translation candidates, insertion-ordered, unique."""
        vocab: dict[str, None] = {}
        for key, entry in self.entries.items():
            vocab.setdefault(key)
            for term in entry.translations:
                vocab.setdefault(term)
        return list(vocab)

    def vector(self, word: str) -> EmbeddingVector:
        arr = self._vectors.get(word)
        if arr is None:
            raise KeyError(f"no vector stored for {word!r}")
        return EmbeddingVector(tuple(float(v) for v in arr))

    def unit(self, word: str) -> np.ndarray:
        arr = self._vectors.get(word)
        if arr is None:
            raise KeyError(f"no vector stored for {word!r}")
        return arr

    def key_matrix(self) -> np.ndarray:
        """Unit vectors of all entry keys, rows aligned with ``entry_keys``."""
        if self._key_matrix is None:
            if not self.has_vectors:
                raise IndexBuildError("index has no vectors yet")
            self._key_matrix = np.stack([self._vectors[k] for k in self._keys])
        return self._key_matrix

    @property
    def entry_keys(self) -> list[str]:
        return list(self._keys)

    def to_json_dict(self) -> dict:
        return {
            "src_lang": self.src_lang,
            "tgt_lang": self.tgt_lang,
            "embedder": self.embedder_id,
            "dim": self.dim,
            "skipped_lines": self.skipped_lines,
            "entries": [
                {
                    "key": entry.source_word,
                    "original": entry.original,
                    "translations": list(entry.translations),
                }
                for entry in self.entries.values()
            ],
            "vectors": {word: [float(v) for v in arr] for word, arr in self._vectors.items()},
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_json_dict(), ensure_ascii=False), encoding="utf-8"
        )

    @classmethod
    def from_json_dict(cls, data: dict) -> "LexiconIndex":
        entries: dict[str, DictionaryEntry] = {}
        for item in data["entries"]:
            entries[item["key"]] = DictionaryEntry(
                source_word=item["key"],
                original=item.get("original", item["key"]),
                translations=tuple(item["translations"]),
            )
        return cls(
            entries=entries,
            src_lang=data["src_lang"],
            tgt_lang=data["tgt_lang"],
            skipped_lines=data.get("skipped_lines", 0),
            vectors=data.get("vectors") or None,
            embedder_id=data.get("embedder"),
        )

    @classmethod
    def load(cls, path: str | Path) -> "LexiconIndex":
        return cls.from_json_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _parse_line(line: str) -> tuple[str, str] | None:
    if "\t" in line:
        source, _, target = line.partition("\t")
        source = source.strip()
        target = target.strip()
    else:
        fields = line.split()
        if len(fields) != 2:
            return None
        source, target = fields
    if not source or not target or any(ch.isspace() for ch in source):
        return None
    return source, target


def ingest_dictionary(path: str | Path, src_lang: str, tgt_lang: str) -> LexiconIndex:
    """Parse a bilingual dictionary file into an index (without vectors).

    Repeated source words accumulate translations; source keys are
    case-folded. Blank or malformed lines are skipped and counted.
    """
    text = Path(path).read_text(encoding="utf-8")
    translations: dict[str, dict[str, None]] = {}
    originals: dict[str, str] = {}
    skipped = 0
    for line in text.splitlines():
        line = line.strip()
        parsed = _parse_line(line) if line else None
        if parsed is None:
            skipped += 1
            continue
        source, target = parsed
        key = source.casefold()
        originals.setdefault(key, source)
        translations.setdefault(key, {}).setdefault(target)
    if skipped:
        logger.warning("skipped %d malformed or blank dictionary lines in %s", skipped, path)
    if not translations:
        raise EmptyDictionaryError(f"no usable entries in {path}")
    entries = {
        key: DictionaryEntry(
            source_word=key, original=originals[key], translations=tuple(terms)
        )
        for key, terms in translations.items()
    }
    return LexiconIndex(entries, src_lang=src_lang, tgt_lang=tgt_lang, skipped_lines=skipped)


def _load_cache(cache_path: Path, embedder_id: str) -> dict[str, list[float]]:
    cached: dict[str, list[float]] = {}
    if not cache_path.exists():
        return cached
    dim: int | None = None
    for line in cache_path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        record = json.loads(line)
        if record.get("embedder") != embedder_id:
            continue
        values = record["v"]
        if dim is None:
            dim = len(values)
        elif len(values) != dim:
            raise IndexBuildError(
                f"embedding cache {cache_path} mixes dimensions {dim} and {len(values)}"
            )
        cached[record["word"]] = values
    return cached


def _append_cache(cache_path: Path, embedder_id: str, fresh: dict[str, list[float]]) -> None:
    if not fresh:
        return
    cache_path.parent.mkdir(parents=True, exist_ok=True)
    with cache_path.open("a", encoding="utf-8") as fh:
        for word, values in fresh.items():
            fh.write(
                json.dumps(
                    {"embedder": embedder_id, "word": word, "dim": len(values), "v": values},
                    ensure_ascii=False,
                )
                + "\n"
            )


def _batches(items: list[str], size: int) -> Iterable[list[str]]:
    for start in range(0, len(items), size):
        yield items[start : start + size]


def embed_all(
    index: LexiconIndex,
    embedder: EmbeddingBackend,
    cache_path: str | Path | None = None,
) -> LexiconIndex:
    """Attach a vector to every source word and translation candidate.

    Vectors are L2-normalized at storage time. When a cache sidecar is given,
    known (embedder, word) pairs are reused and fresh ones appended, so a
    warm rebuild issues zero embedder calls.
    """
    vocab = index.vocabulary()
    cache = Path(cache_path) if cache_path is not None else None
    cached = _load_cache(cache, embedder.embedder_id) if cache else {}
    known = {word: cached[word] for word in vocab if word in cached}
    missing = [word for word in vocab if word not in known]

    fresh: dict[str, list[float]] = {}
    dim = len(next(iter(known.values()))) if known else None
    for chunk in _batches(missing, EMBED_BATCH):
        vectors = embedder.embed(chunk)
        if len(vectors) != len(chunk):
            raise IndexBuildError(
                f"embedder returned {len(vectors)} vectors for {len(chunk)} words"
            )
        for word, vector in zip(chunk, vectors):
            if dim is None:
                dim = vector.dim
            elif vector.dim != dim:
                raise IndexBuildError(
                    f"dimension mismatch: {word!r} got {vector.dim}, expected {dim}"
                )
            fresh[word] = list(vector.values)
    if cache:
        _append_cache(cache, embedder.embedder_id, fresh)

    all_vectors: dict[str, Sequence[float]] = {**known, **fresh}
    built = LexiconIndex(
        entries=index.entries,
        src_lang=index.src_lang,
        tgt_lang=index.tgt_lang,
        skipped_lines=index.skipped_lines,
        vectors=all_vectors,
        embedder_id=embedder.embedder_id,
    )
    built.fresh_embeddings = len(fresh)
    return built


def _query_unit(keyword: str, index: LexiconIndex, embedder: EmbeddingBackend) -> np.ndarray:
    vector = embedder.embed([keyword])[0]
    if index.dim is not None and vector.dim != index.dim:
        raise IndexBuildError(
            f"query vector for {keyword!r} has dim {vector.dim}, index has {index.dim}"
        )
    arr = np.asarray(vector.values, dtype=np.float64)
    norm = float(np.linalg.norm(arr))
    if norm == 0.0:
        raise ValueError(f"embedder returned a zero vector for {keyword!r}")
    return arr / norm


def resolve(
    keyword: str,
    index: LexiconIndex,
    embedder: EmbeddingBackend,
    threshold: float = DEFAULT_NN_THRESHOLD,
) -> LexicalConstraint | None:
    """Map a keyword to its best dictionary translation, or None.

    Exact case-folded hits win outright. Otherwise the keyword is embedded
    and matched to the nearest entry key by cosine similarity; below
    ``threshold`` the lookup abstains. Among the matched entry's candidate
    translations the most similar one to the keyword is chosen, ties going
    to the first listed.
    """
    if not index.has_vectors:
        raise ValueError("index has no vectors; run embed_all first")
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold {threshold!r} outside [0, 1]")

    entry = index.entries.get(keyword.casefold())
    if entry is not None:
        query = index.unit(entry.source_word)
        match_kind, similarity = "exact", 1.0
    else:
        query = _query_unit(keyword, index, embedder)
        sims = index.key_matrix() @ query
        best = int(np.argmax(sims))
        similarity = float(np.clip(sims[best], -1.0, 1.0))
        if similarity < threshold:
            return None
        entry = index.entries[index.entry_keys[best]]
        match_kind = "nearest_neighbor"

    candidates = np.stack([index.unit(term) for term in entry.translations])
    target = entry.translations[int(np.argmax(candidates @ query))]
    return LexicalConstraint(
        source_word=keyword,
        target_term=target,
        match_kind=match_kind,
        similarity=similarity,
        matched_entry=entry.source_word,
    )


def build_constraints(
    selection: KeywordSelection,
    index: LexiconIndex,
    embedder: EmbeddingBackend,
    threshold: float = DEFAULT_NN_THRESHOLD,
) -> ConstraintSet:
    """Resolve each distinct keyword in sentence order, dropping misses.

    Keywords are deduplicated case-insensitively (lookups case-fold anyway),
    one constraint per distinct word. The result may be empty, in which case
    the chain behaves as unconstrained translation.
    """
    seen: set[str] = set()
    constraints: list[LexicalConstraint] = []
    for _, word in selection.keywords:
        key = word.casefold()
        if key in seen:
            continue
        seen.add(key)
        constraint = resolve(word, index, embedder, threshold)
        if constraint is not None:
            constraints.append(constraint)
    return tuple(constraints)
