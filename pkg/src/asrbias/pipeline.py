"""End-to-end orchestration: run configuration, stages and on-disk artifacts."""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Mapping, NamedTuple

from asrbias.alignment import (
    COST_MODELS, PER, WER, ScoreTable, ScoringOptions, align_corpus, aggregate, normalize_tokens,
    reference_tokens,
)
from asrbias.codes import ALL_MARKERS
from asrbias.corpus import (
    Manifest, ReferenceUtterance, extract_reference, read_hypotheses, read_manifest,
    read_marker_annotations, read_textgrid,
)
from asrbias.errors import ConfigError, DataError
from asrbias.lexicon import Lexicon, overlay, read_dictionary
from asrbias.markers import CooccurrenceTable, cooccurrence, detect_contexts
from asrbias.report import DEFAULT_TABLE_MARKERS, CSV_FILES, build_report, write_report
from asrbias.stats import run_battery

log = logging.getLogger(__name__)

OOV_WARN_RATE = 0.05
ARTIFACTS = "artifacts"


@dataclass
class RunConfig:
    manifest: str | None = None
    dictionary: str | None = None
    overlay: str | None = None
    hypotheses: list[str] = field(default_factory=list)
    markers: str | None = None
    word_tier: str = "word"
    phone_tier: str = "phone"
    stress_mode: str = "strip"
    cost_model: str = "sclite"
    out: str = "out"
    alpha: float = 0.05
    workers: int = 1
    reference_group: str | None = None
    reference_system: str | None = None
    cooccurrence_mode: str = "realized"
    table_markers: list[str] = field(default_factory=lambda: list(DEFAULT_TABLE_MARKERS))

    # CLI flag spellings accepted in JSON config files too
    ALIASES = {"dict": "dictionary", "hyp": "hypotheses"}

    @classmethod
    def from_mapping(cls, data: Mapping, base: "RunConfig | None" = None) -> "RunConfig":
        names = {f.name for f in fields(cls)}
        values = {}
        for key, value in data.items():
            key = cls.ALIASES.get(key, key)
            if key not in names:
                raise ConfigError(f"unknown configuration key {key!r}")
            values[key] = value
        if isinstance(values.get("hypotheses"), str):
            values["hypotheses"] = [values["hypotheses"]]
        return replace(base or cls(), **values)

    @property
    def costs(self):
        return COST_MODELS[self.cost_model]

    @property
    def artifact_dir(self) -> Path:
        return Path(self.out) / ARTIFACTS


class Diagnostic(NamedTuple):
    level: str   # "fatal" or "warning"
    message: str


# what each stage reads from the configuration
NEEDS = {
    "score": {"manifest", "hypotheses"},
    "per": {"manifest", "hypotheses", "dictionary"},
    "markers": {"manifest", "hypotheses", "dictionary", "markers"},
    "stats": set(),
    "report": set(),
}
NEEDS["all"] = NEEDS["score"] | NEEDS["per"] | NEEDS["markers"]


def validate(config: RunConfig, command: str = "all") -> list[Diagnostic]:
    """Check a configuration. Fatal problems and warnings are both returned."""
    diags: list[Diagnostic] = []
    fatal = lambda msg: diags.append(Diagnostic("fatal", msg))  # noqa: E731
    warn = lambda msg: diags.append(Diagnostic("warning", msg))  # noqa: E731
    needs = NEEDS.get(command, NEEDS["all"])

    if "manifest" in needs:
        if not config.manifest:
            fatal("--manifest is required")
        else:
            for name in ("speakers.csv", "utterances.csv"):
                if not (Path(config.manifest) / name).is_file():
                    fatal(f"manifest file not found: {Path(config.manifest) / name}")
    if "hypotheses" in needs:
        if not config.hypotheses:
            fatal("--hyp is required")
        for p in config.hypotheses:
            if not Path(p).is_file():
                fatal(f"hypothesis file not found: {p}")
    if "dictionary" in needs:
        if not config.dictionary:
            fatal("--dict is required")
        elif not Path(config.dictionary).is_file():
            fatal(f"dictionary not found: {config.dictionary}")
    if config.overlay and not Path(config.overlay).is_file():
        fatal(f"overlay dictionary not found: {config.overlay}")
    if "markers" in needs:
        if not config.markers:
            fatal("--markers is required")
        elif not Path(config.markers).is_file():
            fatal(f"marker annotation file not found: {config.markers}")
    if config.stress_mode not in ("strip", "keep"):
        fatal(f"--stress-mode must be strip or keep, not {config.stress_mode!r}")
    if config.cost_model not in COST_MODELS:
        fatal(f"--costs must be one of {', '.join(COST_MODELS)}, not {config.cost_model!r}")
    if config.cooccurrence_mode not in ("realized", "context"):
        fatal(f"--cooccurrence-mode must be realized or context, not {config.cooccurrence_mode!r}")
    if not 0 < config.alpha < 1:
        fatal(f"--alpha must lie in (0, 1), got {config.alpha}")
    if config.workers < 1:
        fatal(f"--workers must be at least 1, got {config.workers}")
    codes = {str(c) for c in ALL_MARKERS}
    for m in config.table_markers:
        if m not in codes:
            fatal(f"unknown marker code {m!r} in table markers")
    if command in ("stats", "report"):
        for name in ("wer.json",):
            if not (config.artifact_dir / name).is_file():
                fatal(f"missing artifact {config.artifact_dir / name}; run 'score' first")
    if any(d.level == "fatal" for d in diags):
        return diags

    # content checks that only produce warnings
    if "markers" in needs:
        try:
            anns = read_marker_annotations(config.markers)
        except DataError:
            anns = None   # reported as a data error when the stage runs
        if anns is not None and not any(a.realized for a in anns):
            warn(f"{config.markers}: no realized marker records")
    if "dictionary" in needs:
        try:
            lex = load_lexicon(config)
            hyps = read_hypotheses(config.hypotheses)
        except DataError:
            return diags
        tokens = [t for h in hyps for t in normalize_tokens(h.text)]
        oov = sum(1 for t in tokens if lex.pronounce(t)[0] is None)
        if tokens and oov / len(tokens) > OOV_WARN_RATE:
            warn(f"{oov} of {len(tokens)} hypothesis tokens ({oov / len(tokens):.1%}) have no "
                 f"pronunciation")
    return diags


# ------------------------------------------------------------- loading

def load_lexicon(config: RunConfig) -> Lexicon:
    lex = read_dictionary(config.dictionary)
    if config.overlay:
        lex = overlay(lex, read_dictionary(config.overlay))
    return lex


def load_references(manifest: Manifest, config: RunConfig) -> dict[str, ReferenceUtterance]:
    refs = {}
    for u in manifest.utterances:
        path = manifest.textgrid_file(u)
        if path is None:
            continue
        if not path.is_file():
            raise DataError(f"TextGrid for utterance {u.id!r} not found", str(path))
        grid = read_textgrid(path)
        try:
            refs[u.id] = extract_reference(grid, config.word_tier, config.phone_tier,
                                           u.id, u.speaker_id)
        except DataError as exc:
            raise DataError(exc.message, str(path)) from None
    return refs


class Corpus(NamedTuple):
    manifest: Manifest
    hypotheses: list
    references: dict
    lexicon: Lexicon | None


def load_corpus(config: RunConfig, phones: bool) -> Corpus:
    manifest = read_manifest(config.manifest)
    hyps = read_hypotheses(config.hypotheses, manifest.utterance_index)
    refs = load_references(manifest, config) if phones else {}
    lex = load_lexicon(config) if phones else None
    return Corpus(manifest, hyps, refs, lex)


def _options(config: RunConfig, metrics) -> ScoringOptions:
    return ScoringOptions(tuple(metrics), config.stress_mode, config.costs, config.workers)


def _dump(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n",
                    encoding="utf-8")


def _load(path: Path):
    return json.loads(path.read_text(encoding="utf-8"))


# -------------------------------------------------------------- stages

def stage_score(config: RunConfig, corpus: Corpus | None = None) -> ScoreTable:
    corpus = corpus or load_corpus(config, phones=False)
    table = _score(corpus, config, WER)
    _dump(config.artifact_dir / "wer.json", table.to_dict())
    return table


def stage_per(config: RunConfig, corpus: Corpus | None = None) -> ScoreTable:
    corpus = corpus or load_corpus(config, phones=True)
    table = _score(corpus, config, PER)
    _dump(config.artifact_dir / "per.json", table.to_dict())
    return table


def _score(corpus: Corpus, config: RunConfig, metric: str) -> ScoreTable:
    opts = _options(config, [metric])
    alignments = align_corpus(corpus.manifest, corpus.hypotheses, corpus.references,
                              corpus.lexicon, opts)
    covered = {(h.utterance_id, h.system_id) for h in corpus.hypotheses}
    return aggregate(corpus.manifest, alignments, {h.system_id for h in corpus.hypotheses},
                     [metric], corpus.references, corpus.lexicon, covered)


def stage_markers(config: RunConfig, corpus: Corpus | None = None) -> CooccurrenceTable:
    corpus = corpus or load_corpus(config, phones=True)
    anns = read_marker_annotations(config.markers)
    opts = _options(config, [WER])
    word = align_corpus(corpus.manifest, corpus.hypotheses, corpus.references, None, opts)
    word_alignments = {(uid, sys): res for (uid, sys, _), res in word.items()}
    contexts = []
    skipped: list = []
    for uid in sorted(corpus.references):
        contexts += detect_contexts(corpus.references[uid], corpus.lexicon, skipped)
    counts = {uid: len(toks) for uid, toks in
              reference_tokens(corpus.manifest, corpus.references).items()}
    mismatched = sorted(uid for uid, ref in corpus.references.items()
                        if len(ref.words) != counts.get(uid))
    table = cooccurrence(word_alignments, contexts, anns, corpus.manifest,
                         config.cooccurrence_mode, counts)
    table.diagnostics["skipped_words"] = [list(s) for s in skipped]
    table.diagnostics["token_count_mismatch"] = mismatched
    _dump(config.artifact_dir / "markers.json", table.to_dict())
    return table


def _read_artifacts(config: RunConfig):
    ad = config.artifact_dir
    if not (ad / "wer.json").is_file():
        raise ConfigError(f"missing artifact {ad / 'wer.json'}; run 'score' first")
    table = ScoreTable.from_dict(_load(ad / "wer.json"))
    if (ad / "per.json").is_file():
        table = table.merge(ScoreTable.from_dict(_load(ad / "per.json")))
    cooc = None
    if (ad / "markers.json").is_file():
        cooc = CooccurrenceTable.from_dict(_load(ad / "markers.json"))
    return table, cooc


def stage_stats(config: RunConfig) -> dict:
    table, cooc = _read_artifacts(config)
    if cooc is not None and cooc.digest != table.digest:
        raise DataError("markers.json and wer.json come from different manifests")
    result = run_battery(table, cooc, reference_group=config.reference_group,
                         reference_system=config.reference_system, alpha=config.alpha,
                         markers=config.table_markers)
    _dump(config.artifact_dir / "stats.json", result)
    return result


def stage_report(config: RunConfig, warnings: list[str] | None = None):
    table, cooc = _read_artifacts(config)
    stats_path = config.artifact_dir / "stats.json"
    stats = _load(stats_path) if stats_path.is_file() else None
    diagnostics = {}
    if cooc is not None:
        diagnostics["skipped_words"] = cooc.diagnostics.get("skipped_words", [])
    if warnings:
        diagnostics["warnings"] = list(warnings)
    report = build_report(table, cooc, stats, diagnostics, config.table_markers)
    tables = Path(config.out) / "tables"
    for fname in CSV_FILES.values():
        stale = tables / fname
        if stale.exists():
            os.remove(stale)
    write_report(report, config.out)
    return report


def run_all(config: RunConfig, warnings: list[str] | None = None):
    corpus = load_corpus(config, phones=True)
    stage_score(config, corpus)
    stage_per(config, corpus)
    stage_markers(config, corpus)
    stage_stats(config)
    return stage_report(config, warnings)
