"""Word- and phone-level alignment, WER/PER scoring and corpus aggregation."""

from __future__ import annotations

import math
import re
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence

from asrbias.codes import group_order
from asrbias.corpus.hypotheses import Hypothesis
from asrbias.corpus.manifest import Manifest
from asrbias.corpus.reference import ReferenceUtterance
from asrbias.errors import DataError
from asrbias.lexicon import Lexicon, strip_stress

CORRECT, SUB, DEL, INS = "correct", "substitution", "deletion", "insertion"
WER, PER = "WER", "PER"


class Costs(NamedTuple):
    sub: float = 4
    dels: float = 3
    ins: float = 3


SCLITE_COSTS = Costs(4, 3, 3)
UNIT_COSTS = Costs(1, 1, 1)
COST_MODELS = {"sclite": SCLITE_COSTS, "unit": UNIT_COSTS}


class EditOp(NamedTuple):
    kind: str
    ref_index: int | None
    hyp_index: int | None


@dataclass(frozen=True)
class AlignmentResult:
    ops: tuple[EditOp, ...]
    S: int
    D: int
    I: int
    C: int
    N: int
    oov: tuple[str, ...] = ()

    @property
    def errors(self) -> int:
        return self.S + self.D + self.I

    @property
    def rate(self) -> float:
        return error_rate(self.errors, self.N)

    def ref_kinds(self) -> dict[int, str]:
        """Reference position -> op kind (no insertions)."""
        return {op.ref_index: op.kind for op in self.ops if op.ref_index is not None}


def error_rate(errors: int, n: int) -> float:
    if n > 0:
        return errors / n
    return math.inf if errors else 0.0


# ---------------------------------------------------------------- tokens

_PUNCT_RE = re.compile(r"[.,?!;:\"()…—]")
_EDGE_QUOTES = "'‘’"


def normalize_tokens(text: str) -> list[str]:
    text = _PUNCT_RE.sub(" ", text.lower()).replace("-", " ")
    out = []
    for tok in text.split():
        tok = tok.strip(_EDGE_QUOTES)
        if tok:
            out.append(tok)
    return out


# ------------------------------------------------------------- alignment

def align(ref: Sequence[str], hyp: Sequence[str], costs: Costs = SCLITE_COSTS) -> AlignmentResult:
    """Minimum-cost alignment of ``hyp`` against ``ref``.

    Among minimum-cost alignments the one with the most diagonal steps
    (correct or substitution) wins; that fixes S, D and I independently of
    argument order. Remaining ties in the backtrace go to the diagonal, then
    deletion, then insertion.
    """
    if costs.sub <= 0 or costs.dels <= 0 or costs.ins <= 0:
        raise ValueError("alignment costs must be positive")
    n, m = len(ref), len(hyp)
    # each cell holds (cost, -diagonal steps), compared lexicographically
    d = [[(0.0, 0)] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        d[i][0] = (d[i - 1][0][0] + costs.dels, 0)
    for j in range(1, m + 1):
        d[0][j] = (d[0][j - 1][0] + costs.ins, 0)
    for i in range(1, n + 1):
        row, prev = d[i], d[i - 1]
        r = ref[i - 1]
        for j in range(1, m + 1):
            c, k = prev[j - 1]
            diag = (c + (0 if r == hyp[j - 1] else costs.sub), k - 1)
            c, k = prev[j]
            up = (c + costs.dels, k)
            c, k = row[j - 1]
            left = (c + costs.ins, k)
            row[j] = min(diag, up, left)

    ops: list[EditOp] = []
    i, j = n, m
    while i > 0 or j > 0:
        here = d[i][j]
        if i > 0 and j > 0:
            same = ref[i - 1] == hyp[j - 1]
            c, k = d[i - 1][j - 1]
            if here == (c + (0 if same else costs.sub), k - 1):
                ops.append(EditOp(CORRECT if same else SUB, i - 1, j - 1))
                i, j = i - 1, j - 1
                continue
        if i > 0 and here == (d[i - 1][j][0] + costs.dels, d[i - 1][j][1]):
            ops.append(EditOp(DEL, i - 1, None))
            i -= 1
        else:
            ops.append(EditOp(INS, None, j - 1))
            j -= 1
    ops.reverse()

    counts = {CORRECT: 0, SUB: 0, DEL: 0, INS: 0}
    for op in ops:
        counts[op.kind] += 1
    return AlignmentResult(tuple(ops), counts[SUB], counts[DEL], counts[INS], counts[CORRECT], n)


def alignment_cost(result: AlignmentResult, costs: Costs) -> float:
    return result.S * costs.sub + result.D * costs.dels + result.I * costs.ins


def score_wer(ref_text: str, hyp_text: str, costs: Costs = SCLITE_COSTS) -> AlignmentResult:
    return align(normalize_tokens(ref_text), normalize_tokens(hyp_text), costs)


def score_per(ref: ReferenceUtterance, hyp_tokens: Sequence[str], lex: Lexicon,
              stress_mode: str = "strip", costs: Costs = SCLITE_COSTS) -> AlignmentResult:
    if stress_mode not in ("strip", "keep"):
        raise ValueError(f"stress_mode must be 'strip' or 'keep', not {stress_mode!r}")
    hyp_phones, oov = lex.hypothesis_phones(hyp_tokens)
    ref_phones = ref.phone_labels
    if stress_mode == "strip":
        ref_phones = strip_stress(ref_phones)
        hyp_phones = strip_stress(hyp_phones)
    res = align(ref_phones, hyp_phones, costs)
    return AlignmentResult(res.ops, res.S, res.D, res.I, res.C, res.N, tuple(oov))


# ----------------------------------------------------------- aggregation

@dataclass(frozen=True)
class Counts:
    S: int = 0
    D: int = 0
    I: int = 0
    C: int = 0
    N: int = 0
    utterances: int = 0

    def __add__(self, other: "Counts") -> "Counts":
        return Counts(self.S + other.S, self.D + other.D, self.I + other.I,
                      self.C + other.C, self.N + other.N, self.utterances + other.utterances)

    @classmethod
    def of(cls, r: AlignmentResult) -> "Counts":
        return cls(r.S, r.D, r.I, r.C, r.N, 1)

    @property
    def errors(self) -> int:
        return self.S + self.D + self.I

    @property
    def rate(self) -> float:
        return error_rate(self.errors, self.N)


@dataclass(frozen=True)
class GroupStat:
    mean: float
    se: float | None
    n: int


def mean_se(values: Sequence[float]) -> GroupStat:
    n = len(values)
    if n == 0:
        return GroupStat(math.nan, None, 0)
    m = math.fsum(values) / n
    se = statistics.stdev(values) / math.sqrt(n) if n > 1 else None
    return GroupStat(m, se, n)


@dataclass(frozen=True)
class ScoreTable:
    """Pooled per-speaker counts and per-group rollups.

    ``cells`` is keyed by (speaker_id, system_id, metric); ``groups`` by
    (ethnicity, system_id, metric) and averages speaker rates.
    """
    cells: dict[tuple[str, str, str], Counts]
    groups: dict[tuple[str, str, str], GroupStat]
    speaker_groups: dict[str, str]
    digest: str
    missing: tuple[tuple[str, str], ...] = ()      # (system, utterance) without hypothesis
    oov: dict[str, int] = field(default_factory=dict)   # token -> occurrences (PER path)
    unscored: tuple[str, ...] = ()                  # utterances without reference phones
    derived_words: tuple[str, ...] = ()
    excluded_infinite: tuple[tuple[str, str, str], ...] = ()
    uncovered: tuple[str, ...] = ()                 # utterances with no hypothesis at all

    @property
    def systems(self) -> list[str]:
        return sorted({k[1] for k in self.cells})

    @property
    def metrics(self) -> list[str]:
        return [m for m in (WER, PER) if any(k[2] == m for k in self.cells)]

    @property
    def group_names(self) -> list[str]:
        return group_order({k[0] for k in self.groups})

    def speaker_rates(self, metric: str) -> dict[tuple[str, str], float]:
        return {(s, sys): c.rate for (s, sys, m), c in self.cells.items() if m == metric}

    def merge(self, other: "ScoreTable") -> "ScoreTable":
        if other.digest != self.digest:
            raise DataError("cannot merge score tables computed from different manifests")
        oov = dict(self.oov)
        for k, v in other.oov.items():
            oov[k] = oov.get(k, 0) + v
        return ScoreTable(
            {**self.cells, **other.cells}, {**self.groups, **other.groups},
            {**self.speaker_groups, **other.speaker_groups}, self.digest,
            tuple(sorted(set(self.missing) | set(other.missing))),
            dict(sorted(oov.items())),
            tuple(sorted(set(self.unscored) | set(other.unscored))),
            tuple(sorted(set(self.derived_words) | set(other.derived_words))),
            tuple(sorted(set(self.excluded_infinite) | set(other.excluded_infinite))),
            tuple(sorted(set(self.uncovered) & set(other.uncovered))),
        )

    # serialization -----------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "digest": self.digest,
            "cells": {f"{s}/{sys}/{m}": _counts_dict(c)
                      for (s, sys, m), c in sorted(self.cells.items())},
            "groups": {f"{g}/{sys}/{m}": {"mean": _finite(st.mean), "se": st.se, "n": st.n}
                       for (g, sys, m), st in sorted(self.groups.items())},
            "speaker_groups": dict(sorted(self.speaker_groups.items())),
            "missing": [list(x) for x in self.missing],
            "oov": dict(sorted(self.oov.items())),
            "unscored": list(self.unscored),
            "derived_words": list(self.derived_words),
            "excluded_infinite": [list(x) for x in self.excluded_infinite],
            "uncovered": list(self.uncovered),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ScoreTable":
        cells = {}
        for key, c in d["cells"].items():
            s, sys, m = key.rsplit("/", 2)
            cells[(s, sys, m)] = Counts(c["S"], c["D"], c["I"], c["C"], c["N"], c["utterances"])
        groups = {}
        for key, g in d["groups"].items():
            grp, sys, m = key.rsplit("/", 2)
            groups[(grp, sys, m)] = GroupStat(
                math.nan if g["mean"] is None else g["mean"], g["se"], g["n"])
        return cls(cells, groups, dict(d["speaker_groups"]), d["digest"],
                   tuple(tuple(x) for x in d.get("missing", [])), dict(d.get("oov", {})),
                   tuple(d.get("unscored", [])), tuple(d.get("derived_words", [])),
                   tuple(tuple(x) for x in d.get("excluded_infinite", [])),
                   tuple(d.get("uncovered", [])))


def _finite(x: float) -> float | None:
    return x if math.isfinite(x) else None


def _counts_dict(c: Counts) -> dict:
    return {"S": c.S, "D": c.D, "I": c.I, "C": c.C, "N": c.N, "utterances": c.utterances,
            "rate": _finite(c.rate), "rate_infinite": math.isinf(c.rate)}


@dataclass(frozen=True)
class ScoringOptions:
    metrics: tuple[str, ...] = (WER, PER)
    stress_mode: str = "strip"
    costs: Costs = SCLITE_COSTS
    workers: int = 1


def reference_tokens(manifest: Manifest, references: Mapping[str, ReferenceUtterance]
                     ) -> dict[str, list[str]]:
    """Word-level reference per utterance: the manifest text, else the TextGrid words."""
    out = {}
    for u in manifest.utterances:
        if u.reference_text.strip():
            out[u.id] = normalize_tokens(u.reference_text)
        elif u.id in references:
            out[u.id] = normalize_tokens(" ".join(references[u.id].word_labels))
        else:
            out[u.id] = []
    return out


def align_corpus(
    manifest: Manifest,
    hypotheses: Sequence[Hypothesis],
    references: Mapping[str, ReferenceUtterance] | None = None,
    lex: Lexicon | None = None,
    options: ScoringOptions = ScoringOptions(),
) -> dict[tuple[str, str, str], AlignmentResult]:
    """Per-utterance alignments keyed by (utterance_id, system_id, metric)."""
    references = references or {}
    index = manifest.utterance_index
    for h in hypotheses:
        if h.utterance_id not in index:
            raise DataError(f"hypothesis for unknown utterance {h.utterance_id!r} "
                            f"(system {h.system_id!r})")
    if PER in options.metrics and lex is None:
        raise ValueError("PER scoring needs a lexicon")
    ref_tokens = reference_tokens(manifest, references)

    def work(h: Hypothesis):
        hyp_tokens = normalize_tokens(h.text)
        out = []
        if WER in options.metrics:
            out.append(((h.utterance_id, h.system_id, WER),
                        align(ref_tokens[h.utterance_id], hyp_tokens, options.costs)))
        if PER in options.metrics and h.utterance_id in references:
            out.append(((h.utterance_id, h.system_id, PER),
                        score_per(references[h.utterance_id], hyp_tokens, lex,
                                  options.stress_mode, options.costs)))
        return out

    if options.workers > 1:
        with ThreadPoolExecutor(max_workers=options.workers) as pool:
            chunks = list(pool.map(work, hypotheses))
    else:
        chunks = [work(h) for h in hypotheses]
    results = {}
    for chunk in chunks:
        for key, res in chunk:
            results[key] = res
    return dict(sorted(results.items()))


def aggregate(
    manifest: Manifest,
    alignments: Mapping[tuple[str, str, str], AlignmentResult],
    systems: Iterable[str],
    metrics: Sequence[str],
    references: Mapping[str, ReferenceUtterance] | None = None,
    lex: Lexicon | None = None,
    covered: set[tuple[str, str]] | None = None,
) -> ScoreTable:
    references = references or {}
    utt_speaker = {u.id: u.speaker_id for u in manifest.utterances}
    speaker_groups = {s.id: s.ethnicity for s in manifest.speakers}
    systems = sorted(set(systems))

    cells: dict[tuple[str, str, str], Counts] = {}
    oov: dict[str, int] = {}
    for (uid, sys, metric), res in sorted(alignments.items()):
        key = (utt_speaker[uid], sys, metric)
        cells[key] = cells.get(key, Counts()) + Counts.of(res)
        if metric == PER:
            for tok in res.oov:
                oov[tok] = oov.get(tok, 0) + 1

    if covered is None:
        covered = {(uid, sys) for uid, sys, _ in alignments}
    missing = [(sys, u.id) for sys in systems for u in manifest.utterances
               if (u.id, sys) not in covered]
    seen = {uid for uid, _ in covered}
    uncovered = tuple(u.id for u in manifest.utterances if u.id not in seen)
    unscored = []
    if PER in metrics:
        unscored = sorted(u.id for u in manifest.utterances if u.id not in references)

    groups: dict[tuple[str, str, str], GroupStat] = {}
    excluded = []
    buckets: dict[tuple[str, str, str], list[float]] = {}
    for (spk, sys, metric), c in sorted(cells.items()):
        if math.isinf(c.rate):
            excluded.append((spk, sys, metric))
            continue
        buckets.setdefault((speaker_groups[spk], sys, metric), []).append(c.rate)
    for key, rates in sorted(buckets.items()):
        groups[key] = mean_se(rates)

    derived = tuple(sorted(lex.derived)) if (lex is not None and PER in metrics) else ()
    return ScoreTable(cells, groups, speaker_groups, manifest.digest, tuple(missing),
                      dict(sorted(oov.items())), tuple(unscored), derived, tuple(excluded),
                      uncovered)


def score_corpus(
    manifest: Manifest,
    hypotheses: Sequence[Hypothesis],
    references: Mapping[str, ReferenceUtterance] | None = None,
    lex: Lexicon | None = None,
    options: ScoringOptions = ScoringOptions(),
) -> ScoreTable:
    alignments = align_corpus(manifest, hypotheses, references, lex, options)
    return aggregate(manifest, alignments, {h.system_id for h in hypotheses}, options.metrics,
                     references, lex, {(h.utterance_id, h.system_id) for h in hypotheses})


def per_reduction(table: ScoreTable) -> dict[str, float]:
    """Mean over speakers of (WER - PER) / WER, per system."""
    wer = table.speaker_rates(WER)
    per = table.speaker_rates(PER)
    buckets: dict[str, list[float]] = {}
    for (spk, sys), w in sorted(wer.items()):
        p = per.get((spk, sys))
        if p is None or w == 0 or not math.isfinite(w) or not math.isfinite(p):
            continue
        buckets.setdefault(sys, []).append((w - p) / w)
    return {sys: math.fsum(v) / len(v) for sys, v in sorted(buckets.items())}
