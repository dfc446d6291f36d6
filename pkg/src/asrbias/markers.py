"""Sociophonetic marker contexts and their overlap with word-level errors."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence

from asrbias.alignment import DEL, SUB, AlignmentResult
from asrbias.codes import ALL_MARKERS, CONSONANTS, VOICED_CONSONANTS, VOWELS, MarkerCode, group_order
from asrbias.corpus.annotations import MarkerRealization
from asrbias.corpus.manifest import Manifest
from asrbias.corpus.reference import ReferenceUtterance
from asrbias.errors import DataError
from asrbias.lexicon import BASE, Lexicon, strip_stress

VOICED = VOWELS | VOICED_CONSONANTS
DEVOICING_FINALS = frozenset("B D G V Z ZH JH DH".split())
DEBUCCAL_FINALS = frozenset("T D".split())
NASALS = frozenset("N M NG".split())
PRELAT_BACK_VOWELS = frozenset("UH UW AH OW".split())
PRELAT_FRONT_VOWELS = frozenset("IH IY".split())
DENTAL_FRICATIVES = frozenset("TH DH".split())


class MarkerContext(NamedTuple):
    utterance_id: str
    token_index: int
    marker: MarkerCode
    trigger: tuple[str, ...]


def marker_triggers(pron: Sequence[str]) -> dict[MarkerCode, tuple[str, ...]]:
    """Markers whose context predicate holds on one pronunciation.

    Maps each firing marker to the first phone subsequence that fired it.
    Stress digits are ignored.
    """
    ph = strip_stress(pron)
    n = len(ph)
    found: dict[MarkerCode, tuple[str, ...]] = {}

    def fire(code: MarkerCode, trig: Sequence[str]) -> None:
        found.setdefault(code, tuple(trig))

    for i, p in enumerate(ph):
        nxt = ph[i + 1] if i + 1 < n else None
        if p == "AO":
            fire(MarkerCode.LOW_BACK, [p])
        if p in ("IH", "EH") and nxt in NASALS:
            fire(MarkerCode.PRE_NASAL, [p, nxt])
        if p == "AY" and (nxt is None or nxt in VOICED):
            fire(MarkerCode.AY_MONO, [p] if nxt is None else [p, nxt])
        if p in VOWELS and p != "ER" and nxt == "R":
            fire(MarkerCode.R_DELETION, [p, nxt])
        if p == "ER" and i > 0:
            fire(MarkerCode.R_DELETION, [p])
        if p in DENTAL_FRICATIVES:
            fire(MarkerCode.TH_STOPPING, [p])
            fire(MarkerCode.TH_FRONTING, [p])
        if nxt == "L" and p in PRELAT_BACK_VOWELS:
            fire(MarkerCode.PRELAT_BACK, [p, nxt])
        if nxt == "L" and p in PRELAT_FRONT_VOWELS:
            fire(MarkerCode.PRELAT_FRONT, [p, nxt])
    if n >= 2 and ph[-1] in CONSONANTS and ph[-2] in CONSONANTS:
        k = n
        while k > 0 and ph[k - 1] in CONSONANTS:
            k -= 1
        fire(MarkerCode.CLUSTER, ph[k:])
    if n and ph[-1] in DEVOICING_FINALS:
        fire(MarkerCode.DEVOICING, ph[-1:])
    if n and ph[-1] in DEBUCCAL_FINALS:
        fire(MarkerCode.DEBUCCAL, ph[-1:])
    return {code: found[code] for code in ALL_MARKERS if code in found}


def _word_key(label: str) -> str:
    return label.lower().strip(".,?!;:\"()'")


def canonical_pronunciation(lex: Lexicon, word: str) -> list[str] | None:
    variants = lex.variants(_word_key(word))
    for v in variants:
        if v.source == BASE:
            return list(v.phones)
    return list(variants[0].phones) if variants else None


def detect_contexts(ref: ReferenceUtterance, lex: Lexicon,
                    skipped: list[tuple[str, int, str]] | None = None) -> list[MarkerContext]:
    """Marker contexts of every reference word.

    Uses the word's first base-dictionary variant (regional overlay
    variants describe realizations, not where a variable can occur), then
    its first variant of any source, then its annotated phones. Words with neither are appended to ``skipped`` as
    (utterance_id, token_index, word).
    """
    out: list[MarkerContext] = []
    for k, word in enumerate(ref.words):
        pron = canonical_pronunciation(lex, word.label) or ref.word_phones(k)
        if not pron:
            if skipped is not None:
                skipped.append((ref.id, k, word.label))
            continue
        for code, trig in marker_triggers(pron).items():
            out.append(MarkerContext(ref.id, k, code, trig))
    return out


# ------------------------------------------------------------------ tables

@dataclass(frozen=True)
class CoocCell:
    overlap: int = 0
    contexts: int = 0
    realized: int = 0
    total_errors: int = 0

    @property
    def normalized(self) -> float | None:
        return self.overlap / self.contexts if self.contexts else None


@dataclass(frozen=True)
class CooccurrenceTable:
    cells: dict[tuple[str, str, str], CoocCell]
    realization_means: dict[tuple[str, str], float]
    annotated_speakers: dict[str, int]
    digest: str
    mode: str = "realized"
    diagnostics: dict = field(default_factory=dict)

    @property
    def systems(self) -> list[str]:
        return sorted({k[1] for k in self.cells})

    @property
    def group_names(self) -> list[str]:
        return group_order({k[0] for k in self.cells} | set(self.annotated_speakers))

    def to_dict(self) -> dict:
        return {
            "digest": self.digest,
            "mode": self.mode,
            "cells": {f"{g}/{s}/{m}": {"overlap": c.overlap, "contexts": c.contexts,
                                       "realized": c.realized, "total_errors": c.total_errors,
                                       "normalized": c.normalized}
                      for (g, s, m), c in sorted(self.cells.items())},
            "realization_means": {f"{g}/{m}": v for (g, m), v in sorted(self.realization_means.items())},
            "annotated_speakers": dict(sorted(self.annotated_speakers.items())),
            "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "CooccurrenceTable":
        cells = {}
        for key, c in d["cells"].items():
            g, rest = key.split("/", 1)
            s, m = rest.rsplit("/", 1)
            cells[(g, s, m)] = CoocCell(c["overlap"], c["contexts"], c["realized"], c["total_errors"])
        means = {}
        for key, v in d["realization_means"].items():
            g, m = key.split("/", 1)
            means[(g, m)] = v
        return cls(cells, means, dict(d["annotated_speakers"]), d["digest"], d["mode"],
                   d.get("diagnostics", {}))


def realization_means(
    realizations: Iterable[MarkerRealization],
    manifest: Manifest,
    markers: Sequence[MarkerCode] = ALL_MARKERS,
) -> tuple[dict[tuple[str, str], float], dict[str, int], list[str]]:
    """Mean realized instances per annotated speaker, by (group, marker).

    Returns (means, annotated speaker count per group, diagnostics).
    """
    utt_speaker = {u.id: u.speaker_id for u in manifest.utterances}
    spk_group = {s.id: s.ethnicity for s in manifest.speakers}
    annotated: dict[str, set[str]] = {}
    counts: dict[tuple[str, str], int] = {}
    for r in realizations:
        if r.utterance_id not in utt_speaker:
            raise DataError(f"annotation names unknown utterance {r.utterance_id!r}")
        spk = utt_speaker[r.utterance_id]
        g = spk_group[spk]
        annotated.setdefault(g, set()).add(spk)
        if r.realized:
            key = (g, str(r.marker))
            counts[key] = counts.get(key, 0) + 1
    means = {}
    diagnostics = []
    for g in group_order(set(spk_group.values())):
        if not annotated.get(g):
            diagnostics.append(f"group {g} has no annotated speakers; realization means omitted")
            continue
        n = len(annotated[g])
        for m in markers:
            means[(g, str(m))] = counts.get((g, str(m)), 0) / n
    return means, {g: len(v) for g, v in sorted(annotated.items())}, diagnostics


def cooccurrence(
    word_alignments: Mapping[tuple[str, str], AlignmentResult],
    contexts: Iterable[MarkerContext],
    realizations: Iterable[MarkerRealization],
    manifest: Manifest,
    mode: str = "realized",
    word_counts: Mapping[str, int] | None = None,
) -> CooccurrenceTable:
    """Cross-tabulate marker contexts, realizations and word errors.

    ``word_alignments`` maps (utterance_id, system_id) to the word-level
    alignment. A reference token counts as errored when it was substituted
    or deleted. In ``"realized"`` mode only realized markers can overlap;
    ``"context"`` mode counts every errored context (sensitivity analysis).
    """
    if mode not in ("realized", "context"):
        raise ValueError(f"mode must be 'realized' or 'context', not {mode!r}")
    realizations = list(realizations)
    contexts = list(contexts)
    utt_group = manifest.group_of_utterance()

    if word_counts is None:
        word_counts = {}
        for (uid, _), res in word_alignments.items():
            word_counts.setdefault(uid, res.N)
    for r in realizations:
        if r.utterance_id not in utt_group:
            raise DataError(f"annotation {r.utterance_id}\t{r.token_index}\t{r.marker} "
                            f"names an unknown utterance")
        n = word_counts.get(r.utterance_id)
        if n is not None and r.token_index >= n:
            raise DataError(f"annotation {r.utterance_id}\t{r.token_index}\t{r.marker}: "
                            f"token_index out of range (utterance has {n} words)")

    realized = {(r.utterance_id, r.token_index, str(r.marker)) for r in realizations if r.realized}
    ctx_by_utt: dict[str, list[MarkerContext]] = {}
    ctx_keys = set()
    for c in contexts:
        ctx_by_utt.setdefault(c.utterance_id, []).append(c)
        ctx_keys.add((c.utterance_id, c.token_index, str(c.marker)))
    off_context = sorted(k for k in realized if k not in ctx_keys)

    systems = sorted({sys for _, sys in word_alignments})
    groups = group_order(set(utt_group.values()))
    acc: dict[tuple[str, str, str], list[int]] = {
        (g, s, str(m)): [0, 0, 0, 0] for g in groups for s in systems for m in ALL_MARKERS}
    errors: dict[tuple[str, str], int] = {}
    for (uid, sys), res in sorted(word_alignments.items()):
        g = utt_group[uid]
        errors[(g, sys)] = errors.get((g, sys), 0) + res.errors
        kinds = res.ref_kinds()
        for c in ctx_by_utt.get(uid, ()):
            cell = acc[(g, sys, str(c.marker))]
            is_realized = (uid, c.token_index, str(c.marker)) in realized
            errored = kinds.get(c.token_index) in (SUB, DEL)
            cell[1] += 1
            cell[2] += is_realized
            if errored and (is_realized or mode == "context"):
                cell[0] += 1

    cells = {key: CoocCell(o, n, r, errors.get((key[0], key[1]), 0))
             for key, (o, n, r, _) in acc.items()}
    means, annotated, diag_means = realization_means(realizations, manifest)
    diagnostics = {
        "off_context_realizations": [list(k) for k in off_context],
        "realization_means": diag_means,
    }
    return CooccurrenceTable(cells, means, annotated, manifest.digest, mode, diagnostics)


def normalized_rates(table: CooccurrenceTable) -> dict[tuple[str, str, str], float | None]:
    """overlap / contexts per cell; None where the marker has no context."""
    return {key: cell.normalized for key, cell in sorted(table.cells.items())}
