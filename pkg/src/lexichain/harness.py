"""Dataset loading, batch pipeline runs with ablation toggles, and reports.

A run walks every (source, reference) pair through the chain under one
configuration, appends one JSON line per sentence to the run file (ordered
by sentence index no matter how workers finish), and scores the surviving
best translations with BLEU and chrF++. Reports compare labeled runs in a
per-pair table with the better value bolded, plus a CSV mirror for
plotting.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from . import prompts
from .chain import ChainResult, mark_extraction_fallback, run_chain
from .errors import (
    ComparisonError,
    DatasetError,
    ExtractionError,
    LexichainError,
    RunFailedError,
)
from .gateway import LlmBackend, MeteredBackend
from .keywords import KeywordPolicy, extract_keywords
from .lexicon import DEFAULT_NN_THRESHOLD, LexiconIndex, build_constraints
from .metrics import BleuConfig, ChrfConfig, bleu_corpus, chrf_pp
from .sentences import KeywordSelection, SourceSentence


@dataclass(frozen=True)
class DatasetSpec:
    """Line-aligned source/reference files for one language pair."""

    name: str
    src_path: str | Path
    ref_path: str | Path
    src_lang: str
    tgt_lang: str
    expected_size: int | None = None

    @property
    def pair(self) -> str:
        return f"{self.src_lang}-{self.tgt_lang}"


def _read_lines(path: str | Path) -> list[str]:
    try:
        return Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DatasetError(f"cannot read {path}: {exc}") from exc


def load_dataset(spec: DatasetSpec) -> list[tuple[str, str]]:
    """Line-aligned (source, reference) pairs; trailing newlines trimmed only."""
    sources = _read_lines(spec.src_path)
    references = _read_lines(spec.ref_path)
    if len(sources) != len(references):
        raise DatasetError(
            f"{spec.name}: {len(sources)} source lines vs {len(references)} reference lines"
        )
    if spec.expected_size is not None and len(sources) != spec.expected_size:
        raise DatasetError(
            f"{spec.name}: expected {spec.expected_size} sentences, found {len(sources)}"
        )
    return list(zip(sources, references))


@dataclass
class RunConfig:
    """Everything one evaluation run depends on."""

    dataset: DatasetSpec
    out_path: str | Path
    label: str = "run"
    keyword_policy: KeywordPolicy = field(default_factory=KeywordPolicy.none)
    self_check_enabled: bool = True
    max_iters: int = 3
    nn_threshold: float = DEFAULT_NN_THRESHOLD
    bleu: bool = True
    chrf: bool = True
    max_concurrency: int = 4
    failure_threshold: float = 0.10
    shots: int = 0
    shots_seed: int = 0
    dev_src_path: str | Path | None = None
    dev_ref_path: str | Path | None = None

    def __post_init__(self):
        if not self.self_check_enabled:
            self.max_iters = 1  # no self-check means the first draft is final
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.shots > 0 and not (self.dev_src_path and self.dev_ref_path):
            raise ValueError("few-shot runs need dev_src_path and dev_ref_path")

    def fingerprint_payload(self, model: str, embedder_id: str) -> dict:
        return {
            "policy": str(self.keyword_policy),
            "self_check": self.self_check_enabled,
            "max_iters": self.max_iters,
            "nn_threshold": self.nn_threshold,
            "shots": self.shots,
            "shots_seed": self.shots_seed,
            "model": model,
            "embedder": embedder_id,
            "prompt_version": prompts.PROMPT_VERSION,
            "metrics": {
                "bleu": BleuConfig().signature if self.bleu else None,
                "chrf": ChrfConfig().signature if self.chrf else None,
            },
            "dataset": {
                "name": self.dataset.name,
                "src_lang": self.dataset.src_lang,
                "tgt_lang": self.dataset.tgt_lang,
                "expected_size": self.dataset.expected_size,
            },
        }

    def fingerprint(self, model: str, embedder_id: str) -> str:
        canonical = json.dumps(
            self.fingerprint_payload(model, embedder_id), sort_keys=True, ensure_ascii=False
        )
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]


@dataclass
class RunRecord:
    """Full provenance of one sentence's journey through the chain."""

    sentence_index: int
    source: str
    reference: str | None
    policy: str
    fingerprint: str
    keywords: list[dict] = field(default_factory=list)
    constraints: list[dict] = field(default_factory=list)
    drafts: list[dict] = field(default_factory=list)
    best: str | None = None
    best_text: str | None = None
    degraded: dict = field(default_factory=dict)
    calls: list[dict] = field(default_factory=list)
    embedded_words: int = 0
    error: dict | None = None

    def to_json(self) -> str:
        payload = {"kind": "record", **self.__dict__}
        return json.dumps(payload, sort_keys=True, ensure_ascii=False)

    @classmethod
    def from_json_dict(cls, data: dict) -> "RunRecord":
        fields = {k: v for k, v in data.items() if k != "kind"}
        return cls(**fields)


def _selection_dicts(selection: KeywordSelection) -> list[dict]:
    scores = selection.scores or (None,) * len(selection.keywords)
    return [
        {"index": index, "word": word, "score": score}
        for (index, word), score in zip(selection.keywords, scores)
    ]


def _chain_dicts(result: ChainResult) -> tuple[list[dict], dict]:
    drafts = [
        {
            "text": draft.text,
            "iteration": draft.iteration,
            "satisfied": list(draft.satisfied),
            "all_satisfied": draft.all_satisfied,
        }
        for draft in result.drafts
    ]
    degraded = {
        "extraction_fallback": result.degraded.extraction_fallback,
        "selection_fallback": result.degraded.selection_fallback,
    }
    return drafts, degraded


def run_sentence(
    index: int,
    source: str,
    reference: str | None,
    cfg: RunConfig,
    backend: LlmBackend,
    lexicon: LexiconIndex | None,
    shots: Sequence[tuple[str, str]] = (),
    fingerprint: str = "",
) -> RunRecord:
    """One sentence through extraction, retrieval, and the chain.

    Operational failures become an error record rather than an exception so
    a batch survives isolated bad sentences.
    """
    record = RunRecord(
        sentence_index=index,
        source=source,
        reference=reference,
        policy=str(cfg.keyword_policy),
        fingerprint=fingerprint,
    )
    meter = MeteredBackend(backend)
    try:
        sentence = SourceSentence.from_text(source, cfg.dataset.src_lang, cfg.dataset.tgt_lang)
        selection = KeywordSelection(k=0, keywords=())
        extraction_failed = False
        if cfg.keyword_policy.variant != "none" and sentence.tokens:
            try:
                selection = extract_keywords(sentence, cfg.keyword_policy, meter)
            except ExtractionError:
                selection = KeywordSelection(k=0, keywords=())
                extraction_failed = True
        constraints = ()
        if selection.keywords and lexicon is not None:
            constraints = build_constraints(selection, lexicon, meter, cfg.nn_threshold)
        result = run_chain(
            sentence, constraints, meter, max_iters=cfg.max_iters, shots=shots
        )
        if extraction_failed:
            result = mark_extraction_fallback(result)
        record.keywords = _selection_dicts(selection)
        record.constraints = [
            {
                "source_word": c.source_word,
                "target_term": c.target_term,
                "match_kind": c.match_kind,
                "similarity": c.similarity,
                "matched_entry": c.matched_entry,
            }
            for c in constraints
        ]
        record.drafts, record.degraded = _chain_dicts(result)
        record.best = result.best
        record.best_text = result.best_text
    except LexichainError as exc:
        record.error = {"kind": type(exc).__name__, "message": str(exc)}
    record.calls = [
        {
            "prompt_tokens": call.prompt_tokens,
            "completion_tokens": call.completion_tokens,
            "latency_s": call.latency_s,
        }
        for call in meter.calls
    ]
    record.embedded_words = meter.embedded_words
    return record


@dataclass
class RunReport:
    run_path: Path
    label: str
    scores: dict[str, dict]
    failures: int
    total: int


def _sample_shots(
    cfg: RunConfig, dev_pairs: list[tuple[str, str]], index: int
) -> list[tuple[str, str]]:
    if cfg.shots <= 0 or not dev_pairs:
        return []
    rng = random.Random(f"{cfg.shots_seed}:{index}")
    return rng.sample(dev_pairs, min(cfg.shots, len(dev_pairs)))


def run_batch(
    cfg: RunConfig,
    backend: LlmBackend,
    lexicon: LexiconIndex | None = None,
) -> RunReport:
    """Run the whole dataset, persist records, and score the survivors.

    Records land in the run file ordered by sentence index. Failed sentences
    keep their slot with an error field and are excluded from scoring; when
    more than ``failure_threshold`` of the run fails, the file is still
    written but the run raises RunFailedError.
    """
    pairs = load_dataset(cfg.dataset)
    dev_pairs: list[tuple[str, str]] = []
    if cfg.shots > 0:
        dev_sources = _read_lines(cfg.dev_src_path)
        dev_references = _read_lines(cfg.dev_ref_path)
        if len(dev_sources) != len(dev_references):
            raise DatasetError("development set files are not line-aligned")
        dev_pairs = list(zip(dev_sources, dev_references))
    fingerprint = cfg.fingerprint(backend.model, backend.embedder_id)

    def worker(index: int) -> RunRecord:
        source, reference = pairs[index]
        return run_sentence(
            index,
            source,
            reference,
            cfg,
            backend,
            lexicon,
            shots=_sample_shots(cfg, dev_pairs, index),
            fingerprint=fingerprint,
        )

    with ThreadPoolExecutor(max_workers=max(1, cfg.max_concurrency)) as pool:
        records = list(pool.map(worker, range(len(pairs))))

    ok = [r for r in records if r.error is None]
    scores: dict[str, dict] = {}
    if ok:
        hyps = [r.best_text for r in ok]
        refs = [r.reference for r in ok]
        if cfg.bleu:
            scores["bleu"] = bleu_corpus(hyps, refs).to_record()
        if cfg.chrf:
            scores["chrf"] = chrf_pp(hyps, refs).to_record()

    out_path = Path(cfg.out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    header = {
        "kind": "header",
        "label": cfg.label,
        "fingerprint": fingerprint,
        "config": cfg.fingerprint_payload(backend.model, backend.embedder_id),
        "started_at": _dt.datetime.now(_dt.timezone.utc).isoformat(),
    }
    summary = {
        "kind": "summary",
        "fingerprint": fingerprint,
        "scores": scores,
        "failures": len(records) - len(ok),
        "total": len(records),
    }
    with out_path.open("w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True, ensure_ascii=False) + "\n")
        for record in records:
            fh.write(record.to_json() + "\n")
        fh.write(json.dumps(summary, sort_keys=True, ensure_ascii=False) + "\n")

    failures = len(records) - len(ok)
    if records and failures > cfg.failure_threshold * len(records):
        raise RunFailedError(
            f"{failures}/{len(records)} sentences failed "
            f"(threshold {cfg.failure_threshold:.0%}); run file kept at {out_path}",
            run_path=out_path,
            failures=failures,
            total=len(records),
        )
    return RunReport(
        run_path=out_path,
        label=cfg.label,
        scores=scores,
        failures=failures,
        total=len(records),
    )


@dataclass
class LoadedRun:
    path: Path
    label: str
    fingerprint: str
    config: dict
    scores: dict[str, dict]
    records: list[RunRecord]
    failures: int
    total: int


def load_run(path: str | Path) -> LoadedRun:
    lines = _read_lines(path)
    if len(lines) < 2:
        raise ComparisonError(f"{path} is not a complete run file")
    header = json.loads(lines[0])
    summary = json.loads(lines[-1])
    if header.get("kind") != "header" or summary.get("kind") != "summary":
        raise ComparisonError(f"{path} lacks a header or summary line")
    records = [RunRecord.from_json_dict(json.loads(line)) for line in lines[1:-1]]
    return LoadedRun(
        path=Path(path),
        label=header.get("label", "run"),
        fingerprint=header["fingerprint"],
        config=header["config"],
        scores=summary.get("scores", {}),
        records=records,
        failures=summary.get("failures", 0),
        total=summary.get("total", len(records)),
    )


_METRIC_TITLES = {"bleu": "BLEU", "chrf": "chrF++"}


def _format_cell(value: float, bold: bool) -> str:
    text = f"{value:.2f}"
    return f"**{text}**" if bold else text


@dataclass
class ReportTables:
    markdown: str
    csv: str


def report(
    run_files: Sequence[str | Path], labels: Sequence[str] | None = None
) -> ReportTables:
    """Compare labeled runs: a per-pair Markdown table plus a CSV mirror.

    Runs grouped into a row by language pair must share dataset identity;
    all runs must share metric configuration. The better value per pair and
    metric is bolded when several runs compete.
    """
    runs = [load_run(path) for path in run_files]
    if not runs:
        raise ComparisonError("no run files given")
    if labels is not None:
        if len(labels) != len(runs):
            raise ComparisonError(f"{len(labels)} labels for {len(runs)} runs")
        for run, label in zip(runs, labels):
            run.label = label

    metrics = [m for m in ("bleu", "chrf") if all(m in run.scores for run in runs)]
    if not metrics:
        raise ComparisonError("runs share no scored metric")
    for metric in metrics:
        signatures = {run.scores[metric]["signature"] for run in runs}
        if len(signatures) > 1:
            raise ComparisonError(f"{metric} signatures differ across runs: {signatures}")

    by_pair: dict[str, list[LoadedRun]] = {}
    for run in runs:
        dataset = run.config["dataset"]
        pair = f"{dataset['src_lang']}-{dataset['tgt_lang']}"
        by_pair.setdefault(pair, []).append(run)

    label_order: list[str] = []
    for run in runs:
        if run.label not in label_order:
            label_order.append(run.label)
    for pair, group in by_pair.items():
        names = {run.config["dataset"]["name"] for run in group}
        if len(names) > 1:
            raise ComparisonError(f"pair {pair} mixes datasets {sorted(names)}")
        totals = {run.total for run in group}
        if len(totals) > 1:
            raise ComparisonError(
                f"pair {pair} mixes dataset sizes {sorted(totals)}; runs are not comparable"
            )
        group_labels = [run.label for run in group]
        if sorted(group_labels) != sorted(label_order):
            raise ComparisonError(
                f"pair {pair} has labels {group_labels}, expected {label_order}"
            )

    columns = [
        (metric, label) for metric in metrics for label in label_order
    ]
    header_cells = ["Pair"] + [f"{_METRIC_TITLES[m]} {label}" for m, label in columns]
    md_lines = [
        "| " + " | ".join(header_cells) + " |",
        "|" + "|".join(["---"] * len(header_cells)) + "|",
    ]
    csv_lines = ["pair,metric,run_label,score"]
    for pair in sorted(by_pair):
        group = {run.label: run for run in by_pair[pair]}
        cells = [pair]
        for metric in metrics:
            values = {
                label: group[label].scores[metric]["score"] for label in label_order
            }
            best = max(values.values())
            winners = [label for label, value in values.items() if value == best]
            bold_winner = len(label_order) > 1 and len(winners) == 1
            for label in label_order:
                cells.append(
                    _format_cell(values[label], bold_winner and label == winners[0])
                )
                csv_lines.append(
                    f"{pair},{_METRIC_TITLES[metric]},{label},{values[label]:.4f}"
                )
        md_lines.append("| " + " | ".join(cells) + " |")
    return ReportTables(markdown="\n".join(md_lines) + "\n", csv="\n".join(csv_lines) + "\n")


def rescore_run(path: str | Path) -> dict[str, dict]:
    """Recompute corpus scores from a run file's persisted best_text column."""
    run = load_run(path)
    ok = [r for r in run.records if r.error is None]
    if not ok:
        return {}
    hyps = [r.best_text for r in ok]
    refs = [r.reference for r in ok]
    fresh: dict[str, dict] = {}
    if "bleu" in run.scores:
        fresh["bleu"] = bleu_corpus(hyps, refs).to_record()
    if "chrf" in run.scores:
        fresh["chrf"] = chrf_pp(hyps, refs).to_record()
    return fresh
