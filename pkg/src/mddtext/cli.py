"""Command-line pipeline over cacheable on-disk artifacts.

Each stage reads the previous stage's files, verifies their content hashes
against the recorded manifest, and writes its own artifact plus a manifest.
Stages are deterministic given (inputs, config): rerunning one produces
byte-identical artifacts, with timestamps confined to manifests.

    extract     corpus dir -> ngrams.tsv
    build-trie  ngrams.tsv -> trie/ bundle
    compile     trie/ -> solution.mdd.gz
    enumerate   solution.mdd.gz -> sentences.txt
    score       sentences.txt -> scored.jsonl (+ table, figures)
    validate    any sentence file -> per-sentence rule report
    stats       any .mdd artifact or trie bundle -> size report (+ figure)
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .compiler import MddStats, Timer, iter_sentences, sentence_text, stats, unfold
from .config import (
    PipelineConfig,
    config_hash,
    file_sha256,
    load_pipeline_config,
    tree_sha256,
)
from .corpus import (
    build_lexicon,
    corpus_token_sentences,
    extract_corpus_dir,
    read_ngram_file,
    write_ngram_file,
)
from .errors import ConfigError, InternalError, MddTextError
from .mdd import load_mdd, save_mdd
from .report import (
    render_score_figures,
    render_stats_figure,
    score_table,
    stats_table,
    validation_table,
)
from .rules import check_sentence
from .scoring import (
    ExternalScorer,
    MarkovScorer,
    SubprocessScorer,
    score_and_rank,
    train_markov,
)
from .trie import build_trie, load_bundle, save_bundle

NGRAM_FILE = "ngrams.tsv"
TRIE_DIR = "trie"
SOLUTION_FILE = "solution.mdd.gz"
SENTENCE_FILE = "sentences.txt"
SCORED_FILE = "scored.jsonl"


def _hash_path(path: Path) -> str:
    return tree_sha256(path) if path.is_dir() else file_sha256(path)


def _write_manifest(
    cfg: PipelineConfig,
    stage: str,
    inputs: dict[str, Path],
    outputs: dict[str, Path],
    stage_stats: dict,
    elapsed: float,
) -> Path:
    manifest = {
        "stage": stage,
        "config_hash": config_hash(cfg),
        "created": datetime.now(timezone.utc).isoformat(),
        "elapsed_seconds": round(elapsed, 3),
        "inputs": {name: _hash_path(p) for name, p in inputs.items()},
        "outputs": {name: _hash_path(p) for name, p in outputs.items()},
        "stats": stage_stats,
    }
    path = cfg.output_dir / f"{stage}.manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", "utf-8")
    return path


def _verify_upstream(cfg: PipelineConfig, stage: str, artifacts: dict[str, Path]) -> None:
    """If the producing stage left a manifest, the artifact bytes must still
    match it; hand-supplied artifacts without a manifest pass through."""
    manifest_path = cfg.output_dir / f"{stage}.manifest.json"
    if not manifest_path.exists():
        return
    recorded = json.loads(manifest_path.read_text("utf-8")).get("outputs", {})
    for name, path in artifacts.items():
        if name in recorded and recorded[name] != _hash_path(path):
            raise ConfigError(
                f"{path} does not match the {stage} manifest; rerun '{stage}'"
            )


def _require_artifact(path: Path, producer: str) -> None:
    if not path.exists():
        raise ConfigError(f"missing artifact {path}; run '{producer}' first")


# -- stages -------------------------------------------------------------------


def cmd_extract(cfg: PipelineConfig, args) -> int:
    cfg.require("corpus_dir", "lemma_file")
    timer = Timer()
    lexicon = build_lexicon(cfg.lemma_file, cfg.inflection_file)
    ngrams, report = extract_corpus_dir(
        cfg.corpus_dir, lexicon, cfg.rules, cfg.ngram_order, jobs=cfg.jobs
    )
    out = cfg.output_dir / NGRAM_FILE
    write_ngram_file(ngrams, out)
    report_path = cfg.output_dir / "extract_report.json"
    report_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", "utf-8")
    if report["files"] == 0:
        print("warning: corpus directory has no .txt files", file=sys.stderr)
    if not ngrams:
        print("warning: no n-grams extracted", file=sys.stderr)
    _write_manifest(
        cfg,
        "extract",
        inputs={"corpus": cfg.corpus_dir, "lemmas": cfg.lemma_file},
        outputs={NGRAM_FILE: out},
        stage_stats=report,
        elapsed=timer.elapsed(),
    )
    print(
        f"extract: {report['accepted_sentences']}/{report['sentences']} sentences kept, "
        f"{report['ngrams']} distinct {cfg.ngram_order}-grams -> {out}"
    )
    return 0


def cmd_build_trie(cfg: PipelineConfig, args) -> int:
    ngram_path = cfg.output_dir / NGRAM_FILE
    _require_artifact(ngram_path, "extract")
    _verify_upstream(cfg, "extract", {NGRAM_FILE: ngram_path})
    timer = Timer()
    ngrams = read_ngram_file(ngram_path)
    # mismatched orders in the file surface as a MixedArityError here
    trie = build_trie(ngrams, order=cfg.ngram_order)
    bundle_dir = cfg.output_dir / TRIE_DIR
    save_bundle(trie, bundle_dir)
    elapsed = timer.elapsed()
    rows = _trie_stats_rows(trie, elapsed)
    print(stats_table(rows), end="")
    _write_manifest(
        cfg,
        "build-trie",
        inputs={NGRAM_FILE: ngram_path},
        outputs={TRIE_DIR: bundle_dir},
        stage_stats={name: st.as_dict() for name, st in rows.items()},
        elapsed=elapsed,
    )
    return 0


def _trie_stats_rows(trie, elapsed) -> dict[str, MddStats]:
    from .corpus import Position

    return {
        f"trie[{p.value}]": stats(trie.by_position[p], elapsed)
        for p in (Position.INITIAL, Position.MIDDLE, Position.FINAL)
    }


def cmd_compile(cfg: PipelineConfig, args) -> int:
    bundle_dir = cfg.output_dir / TRIE_DIR
    _require_artifact(bundle_dir, "build-trie")
    _verify_upstream(cfg, "build-trie", {TRIE_DIR: bundle_dir})
    trie = load_bundle(bundle_dir)
    timer = Timer()
    solution = unfold(trie, cfg.rules, cfg.fonts)
    elapsed = timer.elapsed()
    out = cfg.output_dir / SOLUTION_FILE
    save_mdd(solution, out)
    st = stats(solution, elapsed)
    print(stats_table({"solution": st}), end="")
    if st.solutions == 0:
        print("note: constraints admit zero sentences for this corpus")
    _write_manifest(
        cfg,
        "compile",
        inputs={TRIE_DIR: bundle_dir},
        outputs={SOLUTION_FILE: out},
        stage_stats=st.as_dict(),
        elapsed=elapsed,
    )
    return 0


def cmd_enumerate(cfg: PipelineConfig, args) -> int:
    solution_path = cfg.output_dir / SOLUTION_FILE
    _require_artifact(solution_path, "compile")
    _verify_upstream(cfg, "compile", {SOLUTION_FILE: solution_path})
    timer = Timer()
    solution = load_mdd(solution_path)
    limit = args.limit if args.limit is not None else cfg.limit
    out = cfg.output_dir / SENTENCE_FILE
    count = 0
    with open(out, "w", encoding="utf-8") as fh:
        for words in iter_sentences(solution, limit):
            fh.write(sentence_text(words) + "\n")
            count += 1
    _write_manifest(
        cfg,
        "enumerate",
        inputs={SOLUTION_FILE: solution_path},
        outputs={SENTENCE_FILE: out},
        stage_stats={"sentences": count, "limit": limit},
        elapsed=timer.elapsed(),
    )
    print(f"enumerate: {count} sentences -> {out}")
    return 0


def _make_scorer(cfg: PipelineConfig):
    if cfg.scorer_kind == "markov":
        cfg.require("corpus_dir", "lemma_file")
        lexicon = build_lexicon(cfg.lemma_file, cfg.inflection_file)
        model = train_markov(
            corpus_token_sentences(cfg.corpus_dir, lexicon, cfg.rules),
            order=cfg.markov_order,
            alpha=cfg.markov_alpha,
        )
        return MarkovScorer(model)
    if cfg.scorer_kind == "external":
        if not cfg.external_endpoint:
            raise ConfigError("scorer.kind is 'external' but no endpoint is set")
        return ExternalScorer(cfg.external_endpoint)
    if not cfg.scorer_command:
        raise ConfigError("scorer.kind is 'subprocess' but no command is set")
    return SubprocessScorer(cfg.scorer_command)


def _read_sentence_file(path: Path) -> list[tuple[str, ...]]:
    sentences = []
    for line in path.read_text("utf-8").splitlines():
        line = line.strip()
        if not line:
            continue
        if line.endswith("."):
            line = line[:-1]
        sentences.append(tuple(line.split()))
    return sentences


def cmd_score(cfg: PipelineConfig, args) -> int:
    sentence_path = cfg.output_dir / SENTENCE_FILE
    _require_artifact(sentence_path, "enumerate")
    _verify_upstream(cfg, "enumerate", {SENTENCE_FILE: sentence_path})
    sentences = _read_sentence_file(sentence_path)
    timer = Timer()
    scorer = _make_scorer(cfg)
    try:
        ranked = score_and_rank(sentences, scorer, batch_size=cfg.batch_size)
    finally:
        if isinstance(scorer, SubprocessScorer):
            scorer.close()
    out = cfg.output_dir / SCORED_FILE
    with open(out, "w", encoding="utf-8") as fh:
        for s in ranked:
            fh.write(json.dumps(s.as_dict(), ensure_ascii=False) + "\n")
    outputs = {SCORED_FILE: out}
    if args.format == "text":
        table = score_table(ranked, cfg.ppl_bands)
        table_path = cfg.output_dir / "scored.txt"
        table_path.write_text(table, "utf-8")
        outputs["scored.txt"] = table_path
        print(table, end="")
    figures: list[Path] = []
    if cfg.figures:
        figures = render_score_figures(ranked, cfg.output_dir / "scored", cfg.ppl_bands)
        for fig in figures:
            outputs[fig.name] = fig
    _write_manifest(
        cfg,
        "score",
        inputs={SENTENCE_FILE: sentence_path},
        outputs=outputs,
        stage_stats={
            "sentences": len(ranked),
            "scorer": ranked[0].scorer_id if ranked else None,
            "ppl_min": ranked[0].ppl if ranked else None,
            "ppl_max": ranked[-1].ppl if ranked else None,
            "seed": cfg.seed,
        },
        elapsed=timer.elapsed(),
    )
    print(f"score: {len(ranked)} sentences -> {out}")
    for fig in figures:
        print(f"figure: {fig}")
    return 0


def cmd_validate(cfg: PipelineConfig, args) -> int:
    path = Path(args.sentences) if args.sentences else cfg.output_dir / SENTENCE_FILE
    if not path.exists():
        raise ConfigError(f"sentence file not found: {path}")
    rows = []
    for i, words in enumerate(_read_sentence_file(path), start=1):
        verdict = check_sentence(words, cfg.rules, cfg.fonts)
        rows.append(
            {
                "line": i,
                "text": sentence_text(words),
                "word_count": verdict.word_count,
                "char_count": verdict.char_count,
                "word_count_ok": verdict.word_count_ok,
                "char_budget_ok": verdict.char_budget_ok,
                "display_ok": verdict.display_ok,
                "line_breaks": list(verdict.line_breaks or ()) or None,
                "passed": verdict.passed,
            }
        )
    if args.format == "jsonl":
        for row in rows:
            print(json.dumps(row, ensure_ascii=False))
    else:
        if rows:
            print(validation_table(rows), end="")
        failed = sum(1 for r in rows if not r["passed"])
        print(f"validate: {len(rows) - failed}/{len(rows)} sentences pass")
    return 0


def cmd_stats(cfg: PipelineConfig, args) -> int:
    target = Path(args.artifact) if args.artifact else cfg.output_dir / SOLUTION_FILE
    if not target.exists():
        raise ConfigError(f"no such artifact: {target}")
    rows: dict[str, MddStats] = {}
    if target.is_dir():
        trie = load_bundle(target)
        rows = _trie_stats_rows(trie, None)
    else:
        timer = Timer()
        mdd = load_mdd(target)
        rows[target.name.removesuffix(".gz").removesuffix(".mdd")] = stats(
            mdd, timer.elapsed()
        )
    if args.format == "jsonl":
        for name, st in rows.items():
            print(json.dumps({"mdd": name, **st.as_dict()}))
    else:
        print(stats_table(rows), end="")
    if cfg.figures:
        fig = render_stats_figure(rows, cfg.output_dir / "stats.png")
        print(f"figure: {fig}")
    return 0


# -- wiring -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mddtext",
        description="Generate and rank strongly constrained standardized sentences.",
    )
    parser.add_argument("--version", action="version", version=f"mddtext {__version__}")
    parser.add_argument("--config", required=True, help="pipeline config (JSON)")
    parser.add_argument("--jobs", type=int, default=None, help="parallel workers")
    parser.add_argument("--limit", type=int, default=None, help="cap enumerated items")
    parser.add_argument(
        "--format", choices=("text", "jsonl"), default="text", help="report format"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("extract", help="corpus -> filtered n-gram set").set_defaults(
        func=cmd_extract
    )
    sub.add_parser("build-trie", help="n-grams -> trie bundle").set_defaults(
        func=cmd_build_trie
    )
    sub.add_parser("compile", help="trie -> solution MDD").set_defaults(
        func=cmd_compile
    )
    sub.add_parser("enumerate", help="solution MDD -> sentence file").set_defaults(
        func=cmd_enumerate
    )
    sub.add_parser("score", help="sentence file -> ranked JSONL").set_defaults(
        func=cmd_score
    )
    validate = sub.add_parser("validate", help="rule report for a sentence file")
    validate.add_argument("sentences", nargs="?", help="sentence file (default: pipeline output)")
    validate.set_defaults(func=cmd_validate)
    stats_cmd = sub.add_parser("stats", help="size report for an MDD artifact")
    stats_cmd.add_argument("artifact", nargs="?", help=".mdd file or trie bundle dir")
    stats_cmd.set_defaults(func=cmd_stats)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_pipeline_config(args.config)
        if args.jobs is not None:
            cfg.jobs = args.jobs
        if args.limit is not None:
            cfg.limit = args.limit
        cfg.output_dir.mkdir(parents=True, exist_ok=True)
        return args.func(cfg, args)
    except InternalError as err:
        print(f"internal error: {err}", file=sys.stderr)
        return 2
    except (MddTextError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
