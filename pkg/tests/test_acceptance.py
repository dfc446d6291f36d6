"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line that is printed in the terminal summary.
"""

import contextlib
import math
import random
import time

import numpy as np

from asrbias.alignment import (
    CORRECT, DEL, SUB, UNIT_COSTS, Costs, align, alignment_cost, normalize_tokens,
    score_per, score_wer,
)
from asrbias.cli import run
from asrbias.codes import MarkerCode as M
from asrbias.corpus import ReferenceUtterance, TimedToken, load_manifest, MarkerRealization
from asrbias.lexicon import UnderivableWord, parse_dictionary, strip_stress
from asrbias.markers import (
    canonical_pronunciation, cooccurrence, detect_contexts, marker_triggers, normalized_rates,
)
from asrbias.stats import LmmDesign, fit_lmm, two_proportion_test

import inflection_data
from conftest import ACCEPTANCE
from oracles import brute_force_costs, dense_reml, grid_reml, ols


@contextlib.contextmanager
def criterion(number, title, budget=None):
    start = time.perf_counter()
    notes = []
    try:
        yield notes
        elapsed = time.perf_counter() - start
        if budget is not None:
            assert elapsed < budget, f"took {elapsed:.2f}s, budget {budget}s"
    except BaseException as exc:
        reason = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        line = f"criterion {number}: FAIL  {title} ({reason})"
        ACCEPTANCE.append(line)
        print(line)
        raise
    else:
        extra = f" [{'; '.join(notes)}]" if notes else ""
        line = f"criterion {number}: PASS  {title} ({elapsed:.2f}s){extra}"
        ACCEPTANCE.append(line)
        print(line)


def utterance(words_phones, uid="u1", spk="s1"):
    words, phones, spans, t = [], [], [], 0.0
    for w, ps in words_phones:
        start, t0 = len(phones), t
        for p in ps:
            phones.append(TimedToken(p, t, t + 0.05))
            t += 0.05
        t = max(t, t0 + 0.05)
        words.append(TimedToken(w, t0, t))
        spans.append((start, len(phones)))
    return ReferenceUtterance(uid, spk, tuple(words), tuple(phones), tuple(spans))


# ----------------------------------------------------------------------- 1

def test_criterion_1_phone_alignment_examples():
    with criterion(1, "caught/cot and test/tess phone alignments", budget=1.0):
        lex = parse_dictionary("COT  K AA1 T\nTESS  T EH1 S\n")
        res = score_per(utterance([("caught", ["K", "AO", "T"])]), ["cot"], lex)
        pairs = [(op.kind, op.ref_index, op.hyp_index) for op in res.ops]
        assert pairs == [(CORRECT, 0, 0), (SUB, 1, 1), (CORRECT, 2, 2)]
        assert res.rate == 1 / 3
        res = score_per(utterance([("test", ["T", "EH", "S", "T"])]), ["tess"], lex)
        assert [op.kind for op in res.ops] == [CORRECT, CORRECT, CORRECT, DEL]
        assert res.ops[-1].ref_index == 3
        assert (res.S, res.D, res.I) == (0, 1, 0)
        assert res.rate == 1 / 4


# ----------------------------------------------------------------------- 2

def test_criterion_2_alignment_optimality():
    with criterion(2, "DP cost equals exhaustive search on 1000 random pairs", budget=30.0) as notes:
        rng = random.Random(20240611)
        models = [UNIT_COSTS, Costs(4, 3, 3)]
        checked = 0
        for _ in range(1000):
            alpha = "abcde"[:rng.randint(1, 5)]
            ref = [rng.choice(alpha) for _ in range(rng.randint(0, 8))]
            hyp = [rng.choice(alpha) for _ in range(rng.randint(0, 8))]
            want = brute_force_costs(ref, hyp, models)
            for costs, w in zip(models, want):
                assert alignment_cost(align(ref, hyp, costs), costs) == w, (ref, hyp, costs)
                checked += 1
        notes.append(f"{checked} alignments")


# ----------------------------------------------------------------------- 3

def test_criterion_3_wer_formula():
    with criterion(3, "WER formula"):
        assert score_wer("write caught today", "write cot today").rate == 1 / 3
        assert score_wer("write caught today", "write caught today").rate == 0
        assert score_wer("write caught today", "").rate == 1


# ----------------------------------------------------------------------- 4

def test_criterion_4_inflection_oracle():
    with criterion(4, "derived inflections match attested dictionary entries") as notes:
        lex = parse_dictionary(inflection_data.STEMS)
        words = list(inflection_data.ATTESTED)
        assert len(words) >= 20
        mismatches = {}
        for w in words:
            assert not lex.lookup(w), f"{w} must be out of vocabulary"
            attested = [p.split() for p in inflection_data.ATTESTED[w]]
            try:
                derived = lex.derive_oov(w)
            except UnderivableWord:
                mismatches[w] = None
                continue
            if not any(strip_stress(derived) == strip_stress(a) for a in attested):
                mismatches[w] = " ".join(derived)
        rate = 1 - len(mismatches) / len(words)
        notes.append(f"{len(words) - len(mismatches)}/{len(words)} = {rate:.1%}; "
                     f"deviations: {', '.join(sorted(mismatches))}")
        assert rate >= 0.90
        assert set(mismatches) == set(inflection_data.KNOWN_DEVIATIONS)


# ----------------------------------------------------------------------- 5

EXAMPLE_DICT = parse_dictionary("""\
CAUGHT  K AO1 T
PIN  P IH1 N
PEN  P EH1 N
TIME  T AY1 M
CAR  K AA1 R
THIS  DH IH1 S
WITH  W IH1 DH
WITH(2)  W IH1 TH
TEST  T EH1 S T
HAD  HH AE1 D
SIDE  S AY1 D
FOOL  F UW1 L
FULL  F UH1 L
FEEL  F IY1 L
FILL  F IH1 L
""")

TH = {M.TH_STOPPING, M.TH_FRONTING}
EXAMPLE_MARKERS = {
    "caught": {M.LOW_BACK}, "pin": {M.PRE_NASAL}, "pen": {M.PRE_NASAL},
    "time": {M.AY_MONO}, "car": {M.R_DELETION}, "this": TH, "with": TH,
    "test": {M.CLUSTER, M.DEBUCCAL}, "had": {M.DEVOICING}, "side": {M.DEBUCCAL},
    "fool": {M.PRELAT_BACK}, "full": {M.PRELAT_BACK},
    "feel": {M.PRELAT_FRONT}, "fill": {M.PRELAT_FRONT},
}


def test_criterion_5_marker_detection():
    with criterion(5, "example words fire exactly the listed markers"):
        wrong = {}
        for word, expected in EXAMPLE_MARKERS.items():
            got = set(marker_triggers(canonical_pronunciation(EXAMPLE_DICT, word)))
            if got != expected:
                wrong[word] = (sorted(map(str, got)), sorted(map(str, expected)))
        assert not wrong, "; ".join(f"{w}: fired {g}, listed {e}" for w, (g, e) in wrong.items())


# ----------------------------------------------------------------------- 6

C6_DICT = parse_dictionary("""\
WRITE  R AY1 T
RIGHT  R AY1 T
CAUGHT  K AO1 T
COT  K AA1 T
PEN  P EH1 N
PIN  P IH1 N
TEST  T EH1 S T
TESS  T EH1 S
TODAY  T AH0 D EY1
THE  DH AH0
""")

C6_REALIZED = {   # (speaker, word) -> repetitions (0-4) realized at token 1
    ("AA1", "caught"): {0, 1, 2, 3}, ("AA1", "pen"): {0, 1}, ("AA1", "test"): {0, 1, 2},
    ("AA2", "caught"): {0, 1, 2}, ("AA2", "pen"): {0}, ("AA2", "test"): {0, 1, 2, 3, 4},
    ("CA1", "caught"): {0}, ("CA1", "pen"): set(), ("CA1", "test"): {0, 1},
    ("CA2", "caught"): set(), ("CA2", "pen"): {0, 1}, ("CA2", "test"): {0},
}
C6_MARKER = {"caught": M.LOW_BACK, "pen": M.PRE_NASAL, "test": M.CLUSTER}
C6_ERRORS = {     # (speaker, word, repetition) -> hypothesis for system s1
    ("AA1", "caught", 0): "write cot today",
    ("AA1", "caught", 1): "write cot today",
    ("AA1", "caught", 4): "write cot today",
    ("AA1", "pen", 0): "write pin today",
    ("AA1", "pen", 4): "write pen the today",
    ("AA1", "test", 0): "write tess today",
    ("AA1", "test", 3): "write tess today",
    ("AA2", "caught", 0): "write today",
    ("AA2", "caught", 3): "write cot today",
    ("AA2", "pen", 1): "write pin today",
    ("AA2", "pen", 2): "write pin today",
    **{("AA2", "test", k): "write tess today" for k in range(5)},
    ("CA1", "caught", 0): "write cot today",
    ("CA1", "caught", 1): "right caught today",
    ("CA1", "test", 2): "write tess today",
    ("CA2", "test", 4): "write test",
}

# counted by hand from the two tables above: (overlap, contexts, realized, total_errors)
C6_EXPECTED = {
    ("AA", "s1", "-AO"): (3, 10, 7, 16), ("AA", "s1", "IN"): (1, 10, 3, 16),
    ("AA", "s1", "CC"): (6, 10, 8, 16), ("AA", "s1", "Db"): (0, 50, 0, 16),
    ("CA", "s1", "-AO"): (1, 10, 1, 4), ("CA", "s1", "IN"): (0, 10, 2, 4),
    ("CA", "s1", "CC"): (0, 10, 3, 4), ("CA", "s1", "Db"): (0, 50, 0, 4),
    ("AA", "s2", "-AO"): (0, 10, 7, 0), ("AA", "s2", "IN"): (0, 10, 3, 0),
    ("AA", "s2", "CC"): (0, 10, 8, 0), ("AA", "s2", "Db"): (0, 50, 0, 0),
    ("CA", "s2", "-AO"): (0, 10, 1, 0), ("CA", "s2", "IN"): (0, 10, 2, 0),
    ("CA", "s2", "CC"): (0, 10, 3, 0), ("CA", "s2", "Db"): (0, 50, 0, 0),
}
C6_RATES = {("AA", "s1", "-AO"): 0.3, ("AA", "s1", "IN"): 0.1, ("AA", "s1", "CC"): 0.6,
            ("CA", "s1", "-AO"): 0.1}
# context mode: every errored context overlaps
C6_CONTEXT_OVERLAP = {("AA", "s1", "-AO"): 5, ("AA", "s1", "IN"): 3, ("AA", "s1", "CC"): 7,
                      ("AA", "s1", "Db"): 12, ("CA", "s1", "-AO"): 1, ("CA", "s1", "IN"): 0,
                      ("CA", "s1", "CC"): 1, ("CA", "s1", "Db"): 3}


def c6_corpus():
    speakers = ["AA1", "AA2", "CA1", "CA2"]
    m = load_manifest(
        "speaker_id,ethnicity,gender,age\n" + "".join(f"{s},{s[:2]},F,30\n" for s in speakers),
        "utterance_id,speaker_id,textgrid_path,reference_text\n" + "".join(
            f"{s}-{w}-{k},{s},,write {w} today\n"
            for s in speakers for w in C6_MARKER for k in range(5)))
    refs, alignments, records = [], {}, []
    for s in speakers:
        for w in C6_MARKER:
            for k in range(5):
                uid = f"{s}-{w}-{k}"
                words = ["write", w, "today"]
                refs.append(utterance([(x, []) for x in words], uid, s))
                hyp = C6_ERRORS.get((s, w, k), "write " + w + " today")
                alignments[(uid, "s1")] = align(words, normalize_tokens(hyp))
                alignments[(uid, "s2")] = align(words, words)
                records.append(MarkerRealization(uid, 1, C6_MARKER[w], k in C6_REALIZED[(s, w)]))
    # a realized record where the marker has no context
    records.append(MarkerRealization("AA1-pen-0", 1, M.LOW_BACK, True))
    contexts = [c for r in refs for c in detect_contexts(r, C6_DICT)]
    return m, alignments, contexts, records


def test_criterion_6_cooccurrence_counts():
    with criterion(6, "co-occurrence counts on a 60-utterance hand-planted corpus") as notes:
        m, alignments, contexts, records = c6_corpus()
        assert len(m.utterances) == 60
        table = cooccurrence(alignments, contexts, records, m)
        got = {k: (c.overlap, c.contexts, c.realized, c.total_errors)
               for k, c in table.cells.items() if c.contexts}
        assert got == C6_EXPECTED
        rates = normalized_rates(table)
        for key, cell in table.cells.items():
            assert cell.overlap <= cell.realized <= cell.contexts
            if key in C6_EXPECTED:
                assert rates[key] == C6_RATES.get(key, 0.0)
            else:
                assert cell.contexts == 0 and rates[key] is None
        assert table.diagnostics["off_context_realizations"] == [["AA1-pen-0", 1, "-AO"]]
        ctx = cooccurrence(alignments, contexts, records, m, mode="context")
        assert {k: c.overlap for k, c in ctx.cells.items() if k in C6_CONTEXT_OVERLAP} \
            == C6_CONTEXT_OVERLAP
        notes.append(f"{len(got)} populated cells")


# ----------------------------------------------------------------------- 7

def simulate(rng, n_speakers, per_speaker, beta, sigma_b, sigma_e):
    groups, rows, y = [], [], []
    for s in range(n_speakers):
        flag = 1.0 if s % 2 == 0 else 0.0
        b = rng.normal(0, sigma_b) if sigma_b else 0.0
        for _ in range(per_speaker):
            groups.append(f"s{s}")
            rows.append([1.0, flag])
            y.append(beta[0] + beta[1] * flag + b + rng.normal(0, sigma_e))
    return LmmDesign(np.array(y), np.array(rows), tuple(groups), ("(intercept)", "group:AA"))


def test_criterion_7_lmm():
    with criterion(7, "LMM: OLS collapse, grid-search optimum, Monte-Carlo recovery",
                   budget=60.0) as notes:
        # (a) no between-speaker variation: speaker means sit on the fixed effects
        rng = np.random.default_rng(70)
        d = simulate(rng, 24, 4, (0.15, 0.05), 0.0, 0.01)
        y = d.y.copy()
        for g in set(d.groups):
            idx = [i for i, x in enumerate(d.groups) if x == g]
            y[idx] += (0.15 + 0.05 * d.X[idx[0], 1]) - y[idx].mean()
        d = LmmDesign(y, d.X, d.groups, d.columns)
        fit = fit_lmm(d)
        gap_a = float(np.max(np.abs(fit.beta - ols(d.y, d.X))))
        assert fit.sigma_b2 == 0.0 and gap_a <= 1e-8

        # (b) exhaustive grid over log ratio, step 1e-4
        d = simulate(np.random.default_rng(71), 16, 4, (0.15, 0.05), 0.03, 0.01)
        fit = fit_lmm(d)
        grid = np.arange(-120000, 120001) * 1e-4
        best = max(float(np.max(grid_reml(d.y, d.X, d.groups, chunk)))
                   for chunk in np.array_split(grid, 24))
        best = max(best, dense_reml(d.y, d.X, d.groups, 0.0)[0])
        gap_b = abs(fit.reml_loglik - best)
        assert gap_b <= 1e-6 and fit.reml_loglik >= best - 1e-12

        # (c) 200 speakers, known beta, repeated simulation
        rng = np.random.default_rng(72)
        true = np.array([0.15, 0.05])
        est = np.array([fit_lmm(simulate(rng, 200, 4, true, 0.02, 0.01)).beta for _ in range(50)])
        mc_se = est.std(axis=0, ddof=1) / math.sqrt(len(est))
        dev = np.abs(est.mean(axis=0) - true) / mc_se
        assert np.all(dev <= 3)
        notes.append(f"|b-ols|={gap_a:.1e}, |ll-grid|={gap_b:.1e}, "
                     f"bias/MCSE={dev[0]:.2f},{dev[1]:.2f}")


# ----------------------------------------------------------------------- 8

def test_criterion_8_proportion_test():
    with criterion(8, "two-proportion z test and antisymmetry") as notes:
        r = two_proportion_test(60, 100, 40, 100)
        assert abs(r.z - 2.828) <= 0.001
        assert abs(r.p_two_sided - 0.0047) <= 0.0005
        assert two_proportion_test(40, 100, 60, 100).z == -r.z
        rng = random.Random(8)
        for _ in range(2000):
            n1, n2 = rng.randint(1, 500), rng.randint(1, 500)
            a = (rng.randint(0, n1), n1)
            b = (rng.randint(0, n2), n2)
            x, y = two_proportion_test(*a, *b), two_proportion_test(*b, *a)
            assert (x.z is None and y.z is None) or x.z == -y.z
        notes.append(f"z={r.z:.4f}, p={r.p_two_sided:.5f}")


# ----------------------------------------------------------------------- 9

def test_criterion_9_pipeline_determinism(fixture_corpus, tmp_path):
    with criterion(9, "byte-identical report.json across runs and worker counts"):
        outputs = []
        for k, workers in enumerate((1, 1, 4)):
            out = tmp_path / f"run{k}"
            args = ["all", "--manifest", str(fixture_corpus.manifest),
                    "--dict", str(fixture_corpus.dictionary),
                    "--overlay", str(fixture_corpus.overlay),
                    "--hyp", str(fixture_corpus.hypotheses),
                    "--markers", str(fixture_corpus.annotations),
                    "--out", str(out), "--workers", str(workers)]
            assert run(args) == 0
            outputs.append((out / "report.json").read_bytes())
        assert outputs[0] == outputs[1] == outputs[2]


# ---------------------------------------------------------------------- 10

def test_criterion_10_merged_vs_unmerged(fixture_corpus, tmp_path):
    with criterion(10, "unmerged speakers get higher -AO normalized rates than merged") as notes:
        from asrbias.pipeline import load_corpus
        from conftest import fixture_config
        corpus = load_corpus(fixture_config(fixture_corpus, tmp_path), phones=True)
        # relabel speakers by merger status; group codes serve only as labels
        label = {s.id: ("AA" if s.id in fixture_corpus.unmerged else "CA")
                 for s in corpus.manifest.speakers}
        speakers = "speaker_id,ethnicity,gender,age\n" + "".join(
            f"{s.id},{label[s.id]},{s.gender},{s.age}\n" for s in corpus.manifest.speakers)
        utts = "utterance_id,speaker_id,textgrid_path,reference_text\n" + "".join(
            f"{u.id},{u.speaker_id},,{u.reference_text}\n" for u in corpus.manifest.utterances)
        relabelled = load_manifest(speakers, utts)
        from asrbias.alignment import WER, ScoringOptions, align_corpus
        from asrbias.corpus import read_marker_annotations
        word = align_corpus(corpus.manifest, corpus.hypotheses, corpus.references, None,
                            ScoringOptions(metrics=(WER,)))
        alignments = {(u, s): r for (u, s, _), r in word.items()}
        contexts = [c for uid in sorted(corpus.references)
                    for c in detect_contexts(corpus.references[uid], corpus.lexicon)]
        table = cooccurrence(alignments, contexts,
                             read_marker_annotations(fixture_corpus.annotations), relabelled)
        rates = normalized_rates(table)
        gaps = []
        for sys in fixture_corpus.systems:
            unmerged, merged = rates[("AA", sys, "-AO")], rates[("CA", sys, "-AO")]
            assert unmerged is not None and merged is not None
            assert unmerged > merged, (sys, unmerged, merged)
            gaps.append(f"{sys} {unmerged:.3f}>{merged:.3f}")
        notes.append(", ".join(gaps))
