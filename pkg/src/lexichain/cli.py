"""Command-line entry point.

Subcommands: ingest-dict (build a lexicon index), translate (one sentence
through the chain), evaluate (batch run from a config file), report
(compare run files). Exit codes: 0 success, 2 input or build problem,
3 backend failure, 4 run or comparison failure.

The backend comes from LEXICHAIN_MOCK_SCRIPT (a mock-script path, used for
offline runs and tests) or LEXICHAIN_BASE_URL / LEXICHAIN_API_KEY, unless a
config file says otherwise.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys
from pathlib import Path

from .errors import (
    ComparisonError,
    DatasetError,
    IndexBuildError,
    LexichainError,
    ProtocolError,
    RunFailedError,
    ScriptExhaustedError,
    TransportError,
)
from .gateway import GatewayConfig, HttpBackend, MockBackend, MockScript
from .harness import DatasetSpec, RunConfig, report, run_batch, run_sentence
from .keywords import KeywordPolicy
from .lexicon import DEFAULT_NN_THRESHOLD, LexiconIndex, embed_all, ingest_dictionary

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_BACKEND = 3
EXIT_RUN = 4

_BACKEND_ERRORS = (TransportError, ProtocolError, ScriptExhaustedError)
_INPUT_ERRORS = (DatasetError, IndexBuildError, OSError, ValueError, KeyError)


def _build_backend(
    mock_script: str | None = None,
    base_url: str | None = None,
    api_key: str | None = None,
    gateway: GatewayConfig | None = None,
):
    script_path = mock_script or os.environ.get("LEXICHAIN_MOCK_SCRIPT")
    if script_path:
        return MockBackend(MockScript.from_file(script_path))
    if gateway is not None and gateway.base_url:
        return HttpBackend(gateway)
    url = base_url or os.environ.get("LEXICHAIN_BASE_URL")
    if url:
        cfg = GatewayConfig(
            base_url=url, api_key=api_key or os.environ.get("LEXICHAIN_API_KEY")
        )
        return HttpBackend(cfg)
    raise ValueError(
        "no backend configured: set LEXICHAIN_MOCK_SCRIPT or LEXICHAIN_BASE_URL"
    )


def cmd_ingest_dict(args: argparse.Namespace) -> int:
    try:
        index = ingest_dictionary(args.dict, args.src, args.tgt)
        backend = _build_backend()
        built = embed_all(index, backend, cache_path=args.embed_cache)
        built.save(args.out)
    except _BACKEND_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except (LexichainError, *_INPUT_ERRORS) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    print(
        f"{len(built.entries)} entries, {len(built.vocabulary())} vectors, "
        f"{built.skipped_lines} lines skipped, "
        f"{built.fresh_embeddings} embeddings computed -> {args.out}"
    )
    return EXIT_OK


def cmd_translate(args: argparse.Namespace) -> int:
    try:
        lexicon = LexiconIndex.load(args.index) if args.index else None
        backend = _build_backend()
        policy = KeywordPolicy.parse(args.policy)
        spec = DatasetSpec(
            name="adhoc",
            src_path="-",
            ref_path="-",
            src_lang=args.src,
            tgt_lang=args.tgt,
        )
        cfg = RunConfig(
            dataset=spec,
            out_path="-",
            keyword_policy=policy,
            max_iters=args.max_iters,
            nn_threshold=args.nn_threshold,
        )
        record = run_sentence(
            0,
            args.text,
            None,
            cfg,
            backend,
            lexicon,
            fingerprint=cfg.fingerprint(backend.model, backend.embedder_id),
        )
    except _BACKEND_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except (LexichainError, *_INPUT_ERRORS) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if record.error is not None:
        print(f"error: {record.error['kind']}: {record.error['message']}", file=sys.stderr)
        return EXIT_BACKEND
    if args.json:
        print(record.to_json())
    else:
        print(record.best_text)
    return EXIT_OK


def _config_get(parser: configparser.ConfigParser, section: str, key: str, fallback=None):
    if parser.has_option(section, key):
        return parser.get(section, key)
    return fallback


def load_run_setup(path: str | Path, overrides: list[str]) -> tuple[RunConfig, dict]:
    """Parse the INI run config; ``--set section.key=value`` wins over the file."""
    parser = configparser.ConfigParser()
    read = parser.read(path, encoding="utf-8")
    if not read:
        raise DatasetError(f"cannot read config file {path}")
    for override in overrides:
        target, _, value = override.partition("=")
        section, _, key = target.partition(".")
        if not (section and key and _):
            raise ValueError(f"bad --set {override!r}, expected section.key=value")
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, key, value)

    spec = DatasetSpec(
        name=_config_get(parser, "dataset", "name", "dataset"),
        src_path=parser.get("dataset", "src"),
        ref_path=parser.get("dataset", "ref"),
        src_lang=parser.get("dataset", "src_lang"),
        tgt_lang=parser.get("dataset", "tgt_lang"),
        expected_size=(
            int(_config_get(parser, "dataset", "expected_size"))
            if _config_get(parser, "dataset", "expected_size")
            else None
        ),
    )
    cfg = RunConfig(
        dataset=spec,
        out_path=_config_get(parser, "run", "out", "run.jsonl"),
        label=_config_get(parser, "run", "label", "run"),
        keyword_policy=KeywordPolicy.parse(_config_get(parser, "policy", "keywords", "none")),
        self_check_enabled=parser.getboolean("policy", "self_check", fallback=True),
        max_iters=parser.getint("policy", "max_iters", fallback=3),
        nn_threshold=parser.getfloat(
            "dictionary", "nn_threshold", fallback=DEFAULT_NN_THRESHOLD
        ),
        bleu=parser.getboolean("run", "bleu", fallback=True),
        chrf=parser.getboolean("run", "chrf", fallback=True),
        max_concurrency=parser.getint("gateway", "max_concurrency", fallback=4),
        failure_threshold=parser.getfloat("run", "failure_threshold", fallback=0.10),
        shots=parser.getint("policy", "shots", fallback=0),
        shots_seed=parser.getint("policy", "shots_seed", fallback=0),
        dev_src_path=_config_get(parser, "dataset", "dev_src"),
        dev_ref_path=_config_get(parser, "dataset", "dev_ref"),
    )
    gateway_keys = {
        "mock_script": _config_get(parser, "gateway", "mock_script"),
        "base_url": _config_get(parser, "gateway", "base_url"),
        "api_key": _config_get(parser, "gateway", "api_key"),
        "model": _config_get(parser, "gateway", "model"),
        "embed_model": _config_get(parser, "gateway", "embed_model"),
        "timeout_s": _config_get(parser, "gateway", "timeout_s"),
        "retries": _config_get(parser, "gateway", "retries"),
        "index": _config_get(parser, "dictionary", "index"),
    }
    return cfg, gateway_keys


def cmd_evaluate(args: argparse.Namespace) -> int:
    try:
        cfg, gateway_keys = load_run_setup(args.config, args.set or [])
        gateway_cfg = None
        if gateway_keys["base_url"]:
            gateway_cfg = GatewayConfig(
                base_url=gateway_keys["base_url"],
                api_key=gateway_keys["api_key"],
                model=gateway_keys["model"] or GatewayConfig.__dataclass_fields__["model"].default,
                embed_model=gateway_keys["embed_model"]
                or GatewayConfig.__dataclass_fields__["embed_model"].default,
                timeout_s=float(gateway_keys["timeout_s"] or 30.0),
                max_concurrency=cfg.max_concurrency,
                retries=int(gateway_keys["retries"] or 2),
            )
        backend = _build_backend(
            mock_script=gateway_keys["mock_script"], gateway=gateway_cfg
        )
        lexicon = (
            LexiconIndex.load(gateway_keys["index"]) if gateway_keys["index"] else None
        )
    except _BACKEND_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except (LexichainError, *_INPUT_ERRORS) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        result = run_batch(cfg, backend, lexicon)
    except RunFailedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUN
    except _BACKEND_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except (LexichainError, *_INPUT_ERRORS) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    for key, title in (("bleu", "BLEU"), ("chrf", "chrF++")):
        if key in result.scores:
            record = result.scores[key]
            print(f"{title} {record['score']:.2f} ({record['signature']})")
    print(
        f"{result.total - result.failures}/{result.total} sentences scored -> {result.run_path}"
    )
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    run_files = [p for chunk in args.runs for p in chunk.split(",") if p]
    labels = None
    if args.labels:
        labels = [l for chunk in args.labels for l in chunk.split(",") if l]
    try:
        tables = report(run_files, labels)
    except (ComparisonError, RunFailedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUN
    except (LexichainError, *_INPUT_ERRORS) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if args.out:
        Path(args.out).write_text(tables.markdown, encoding="utf-8")
    else:
        print(tables.markdown, end="")
    if args.csv:
        Path(args.csv).write_text(tables.csv, encoding="utf-8")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lexichain",
        description="Terminology-constrained machine translation pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    ingest = sub.add_parser("ingest-dict", help="build a lexicon index from a dictionary file")
    ingest.add_argument("--dict", required=True, help="dictionary file (source<TAB>target lines)")
    ingest.add_argument("--src", required=True, help="source language code")
    ingest.add_argument("--tgt", required=True, help="target language code")
    ingest.add_argument("--out", required=True, help="index output path (JSON)")
    ingest.add_argument("--embed-cache", default=None, help="embedding cache sidecar (JSONL)")
    ingest.set_defaults(func=cmd_ingest_dict)

    translate = sub.add_parser("translate", help="translate one sentence through the chain")
    translate.add_argument("--text", required=True)
    translate.add_argument("--src", required=True)
    translate.add_argument("--tgt", required=True)
    translate.add_argument("--index", default=None, help="lexicon index path")
    translate.add_argument("--policy", default="llm", help="none | fixed:K | random:K:SEED | llm[:K]")
    translate.add_argument("--max-iters", type=int, default=3)
    translate.add_argument("--nn-threshold", type=float, default=DEFAULT_NN_THRESHOLD)
    translate.add_argument("--json", action="store_true", help="print the full run record")
    translate.set_defaults(func=cmd_translate)

    evaluate = sub.add_parser("evaluate", help="run a dataset per the config file")
    evaluate.add_argument("--config", required=True)
    evaluate.add_argument(
        "--set",
        action="append",
        metavar="SECTION.KEY=VALUE",
        help="override a config value (repeatable)",
    )
    evaluate.set_defaults(func=cmd_evaluate)

    rep = sub.add_parser("report", help="compare run files")
    rep.add_argument("--runs", action="append", required=True, help="run files, comma separated")
    rep.add_argument("--labels", action="append", help="labels, comma separated")
    rep.add_argument("--out", default=None, help="write Markdown here instead of stdout")
    rep.add_argument("--csv", default=None, help="also write the CSV mirror here")
    rep.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
