"""Synthetic word-list corpus for demos and end-to-end tests.

Sixteen speakers (four per group, two F / two M) read target words in the
carrier phrase "write ___ today". Some speakers keep the cot/caught
distinction; the simulated recognizers are modeled on merged speech, so an
unmerged /AO/ is often heard as its /AA/ minimal pair. Pre-nasal merger
and final cluster reduction are planted the same way.

    python -m asrbias.fixture OUT_DIR
"""

from __future__ import annotations

import json
import random
import sys
from dataclasses import dataclass
from pathlib import Path

from asrbias.corpus.textgrid import Interval, TextGrid, Tier, to_long_format

# Pronunciations follow CMUdict; AO words list only the unmerged variant.
BASE_DICT = """\
;;; excerpt in CMUdict format for the synthetic fixture corpus
WRITE  R AY1 T
RIGHT  R AY1 T
TODAY  T AH0 D EY1
TODAY(2)  T UW0 D EY1
THE  DH AH0
THE(2)  DH AH1
THE(3)  DH IY0
CAUGHT  K AO1 T
COT  K AA1 T
TAUGHT  T AO1 T
TOT  T AA1 T
DAWN  D AO1 N
DON  D AA1 N
HAWK  HH AO1 K
HOCK  HH AA1 K
STALK  S T AO1 K
STOCK  S T AA1 K
NAUGHT  N AO1 T
NOT  N AA1 T
PEN  P EH1 N
PIN  P IH1 N
TEN  T EH1 N
TIN  T IH1 N
WHEN  W EH1 N
WHEN(2)  HH W EH1 N
WIN  W IH1 N
TEST  T EH1 S T
TESS  T EH1 S
BEST  B EH1 S T
BESS  B EH1 S
MIST  M IH1 S T
MISS  M IH1 S
NEXT  N EH1 K S T
NECK  N EH1 K
TIME  T AY1 M
CAR  K AA1 R
THIS  DH IH1 S
WITH  W IH1 DH
HAD  HH AE1 D
SIDE  S AY1 D
FOOL  F UW1 L
FULL  F UH1 L
FEEL  F IY1 L
FILL  F IH1 L
BAG  B AE1 G
"""

# Regional overlay: merged low-back pronunciations.
OVERLAY_DICT = """\
;;; regional overlay: low-back merged variants
CAUGHT  K AA1 T
TAUGHT  T AA1 T
DAWN  D AA1 N
HAWK  HH AA1 K
STALK  S T AA1 K
NAUGHT  N AA1 T
"""

AO_PAIRS = {"caught": "cot", "taught": "tot", "dawn": "don", "hawk": "hock",
            "stalk": "stock", "naught": "not"}
IN_PAIRS = {"pen": "pin", "ten": "tin", "when": "win"}
CC_PAIRS = {"test": "tess", "best": "bess", "mist": "miss", "next": "neck"}
OTHER_WORDS = ["time", "car", "this", "with", "had", "side", "fool", "full", "feel", "fill", "bag"]
TARGETS = list(AO_PAIRS) + list(IN_PAIRS) + list(CC_PAIRS) + OTHER_WORDS

GROUP_AGES = {"AA": [23, 41, 52, 64], "CA": [21, 35, 48, 61],
              "CX": [22, 30, 45, 53], "YA": [24, 38, 47, 59]}
UNMERGED = {"AA01", "AA02", "AA03", "AA04", "CA01", "CA02", "CX01", "CX02", "CX03"}
PRENASAL_MERGED = {"AA01", "AA02", "AA03", "AA04", "CA03", "YA01", "YA02"}
CC_REDUCTION_RATE = 0.5


@dataclass(frozen=True)
class SystemProfile:
    ao: float          # P(minimal-pair error | unmerged /AO/)
    prenasal: float
    cluster: float
    homophone: float   # write -> right
    deletion: float    # drops "today"
    insertion: float   # inserts "the"
    digits: float      # "ten" -> "10"


SYSTEMS = {
    "sysA": SystemProfile(0.8, 0.6, 0.5, 0.30, 0.05, 0.05, 0.10),
    "sysB": SystemProfile(0.5, 0.3, 0.3, 0.10, 0.02, 0.02, 0.00),
    "sysC": SystemProfile(0.7, 0.6, 0.4, 0.35, 0.05, 0.10, 0.20),
    "sysD": SystemProfile(0.9, 0.5, 0.6, 0.25, 0.10, 0.05, 0.05),
}


def _pron_table() -> dict[str, list[str]]:
    out: dict[str, list[str]] = {}
    for line in BASE_DICT.splitlines():
        if not line or line.startswith(";;;"):
            continue
        word, *phones = line.split()
        if "(" not in word:
            out[word.lower()] = [p.rstrip("012") for p in phones]
    return out


def _word_grid(words: list[tuple[str, list[str]]]) -> TextGrid:
    """Evenly timed grid with leading/trailing silence."""
    t, step = 0.1, 0.5
    word_iv = [Interval(0.0, 0.1, "")]
    phone_iv = [Interval(0.0, 0.1, "")]
    for label, phones in words:
        start, end = round(t, 4), round(t + step, 4)
        word_iv.append(Interval(start, end, label))
        width = (end - start) / len(phones)
        for k, ph in enumerate(phones):
            a = start if k == 0 else round(start + k * width, 4)
            b = end if k == len(phones) - 1 else round(start + (k + 1) * width, 4)
            phone_iv.append(Interval(a, b, ph))
        t += step
    end = round(t + 0.2, 4)
    word_iv.append(Interval(round(t, 4), end, ""))
    phone_iv.append(Interval(round(t, 4), end, ""))
    return TextGrid(0.0, end, (Tier("word", tuple(word_iv), 0.0, end),
                               Tier("phone", tuple(phone_iv), 0.0, end)))


@dataclass(frozen=True)
class FixtureInfo:
    root: Path
    manifest: Path
    dictionary: Path
    overlay: Path
    hypotheses: Path
    annotations: Path
    unmerged: frozenset
    systems: tuple


def build_fixture(out_dir: str | Path, seed: int = 0) -> FixtureInfo:
    root = Path(out_dir)
    manifest = root / "manifest"
    grids = manifest / "textgrids"
    grids.mkdir(parents=True, exist_ok=True)
    prons = _pron_table()

    speakers = []
    for g, ages in GROUP_AGES.items():
        for k, age in enumerate(ages, 1):
            speakers.append((f"{g}{k:02d}", g, "FM"[(k - 1) % 2], age))

    utt_rows, ann_rows, hyp_rows = [], [], []
    for sid, _, _, _ in speakers:
        spk_rng = random.Random(f"{seed}:cc:{sid}")
        for w_index, target in enumerate(TARGETS):
            uid = f"{sid}_WL{w_index + 1:02d}"
            phones = list(prons[target])
            ao = in_ = cc = None
            if target in AO_PAIRS:
                ao = sid in UNMERGED
                if not ao:
                    phones = ["AA" if p == "AO" else p for p in phones]
            if target in IN_PAIRS:
                in_ = sid in PRENASAL_MERGED
                if in_:
                    phones = ["IH" if p == "EH" else p for p in phones]
            if target in CC_PAIRS:
                cc = spk_rng.random() < CC_REDUCTION_RATE
                if cc:
                    phones = phones[:-1]
            grid = _word_grid([("write", prons["write"]), (target, phones),
                               ("today", prons["today"])])
            (grids / f"{uid}.TextGrid").write_text(to_long_format(grid), encoding="utf-8")
            utt_rows.append(f"{uid},{sid},textgrids/{uid}.TextGrid,write {target} today")
            for code, flag in (("-AO", ao), ("IN", in_), ("CC", cc)):
                if flag is not None:
                    ann_rows.append(f"{uid}\t1\t{code}\t{int(flag)}")

            for sys_id, prof in SYSTEMS.items():
                rng = random.Random(f"{seed}:{sys_id}:{uid}")
                word = target
                if ao and rng.random() < prof.ao:
                    word = AO_PAIRS[target]
                elif in_ and rng.random() < prof.prenasal:
                    word = IN_PAIRS[target]
                elif cc and rng.random() < prof.cluster:
                    word = CC_PAIRS[target]
                elif target == "ten" and rng.random() < prof.digits:
                    word = "10"
                elif target == "test" and rng.random() < prof.digits:
                    word = "tests"
                tokens = ["right" if rng.random() < prof.homophone else "write"]
                if rng.random() < prof.insertion:
                    tokens.append("the")
                tokens.append(word)
                if rng.random() >= prof.deletion:
                    tokens.append("today")
                text = " ".join(tokens)
                text = text[0].upper() + text[1:] + "."
                hyp_rows.append(json.dumps({"utterance_id": uid, "system_id": sys_id,
                                            "text": text}, sort_keys=True))

    (manifest / "speakers.csv").write_text(
        "speaker_id,ethnicity,gender,age\n"
        + "".join(f"{s},{g},{sex},{age}\n" for s, g, sex, age in speakers), encoding="utf-8")
    (manifest / "utterances.csv").write_text(
        "utterance_id,speaker_id,textgrid_path,reference_text\n"
        + "".join(r + "\n" for r in utt_rows), encoding="utf-8")
    (root / "cmudict-excerpt.txt").write_text(BASE_DICT, encoding="utf-8")
    (root / "regional-overlay.txt").write_text(OVERLAY_DICT, encoding="utf-8")
    (root / "hypotheses.jsonl").write_text("".join(r + "\n" for r in hyp_rows), encoding="utf-8")
    (root / "annotations.tsv").write_text(
        "utterance_id\ttoken_index\tmarker\trealized\n"
        + "".join(r + "\n" for r in ann_rows), encoding="utf-8")
    (root / "fixture.json").write_text(json.dumps(
        {"seed": seed, "unmerged_speakers": sorted(UNMERGED),
         "prenasal_merged_speakers": sorted(PRENASAL_MERGED), "systems": list(SYSTEMS)},
        indent=2) + "\n", encoding="utf-8")
    return FixtureInfo(root, manifest, root / "cmudict-excerpt.txt", root / "regional-overlay.txt",
                       root / "hypotheses.jsonl", root / "annotations.tsv",
                       frozenset(UNMERGED), tuple(SYSTEMS))


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 1:
        print("usage: python -m asrbias.fixture OUT_DIR", file=sys.stderr)
        return 1
    info = build_fixture(argv[0])
    print(f"wrote fixture corpus to {info.root}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
