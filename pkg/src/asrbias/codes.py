"""Closed inventories: sociophonetic marker codes, speaker groups, ARPABET."""

from __future__ import annotations

from enum import Enum


class MarkerCode(str, Enum):
    LOW_BACK = "-AO"          # low-back merger resistance (cot/caught)
    PRE_NASAL = "IN"          # pin/pen merger
    AY_MONO = "AY"            # /ai/ monophthongization
    R_DELETION = "R"          # post-vocalic /r/ weakening
    TH_STOPPING = "TH-s"
    TH_FRONTING = "TH-f"
    CLUSTER = "CC"            # final cluster reduction
    DEVOICING = "Dv"          # word-final devoicing
    DEBUCCAL = "Db"           # word-final /t d/ debuccalization
    PRELAT_BACK = "prel-o"    # fool/full
    PRELAT_FRONT = "prel-i"   # feel/fill

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse(cls, code: str) -> "MarkerCode":
        try:
            return cls(code)
        except ValueError:
            raise ValueError(f"unknown marker code {code!r}") from None


ALL_MARKERS: tuple[MarkerCode, ...] = tuple(MarkerCode)

ETHNICITY_CODES = ("AA", "CA", "CX", "YA")
GENDER_CODES = ("F", "M")
OTHER = "other"

VOWELS = frozenset("AA AE AH AO AW AY EH ER EY IH IY OW OY UH UW".split())
CONSONANTS = frozenset(
    "B CH D DH F G HH JH K L M N NG P R S SH T TH V W Y Z ZH".split())
ARPABET = VOWELS | CONSONANTS
VOICELESS = frozenset("P T K F TH S SH CH HH".split())
VOICED_CONSONANTS = CONSONANTS - VOICELESS


def group_order(groups) -> list[str]:
    """Reporting order: AA, CA, CX, YA, then any other group alphabetically."""
    known = [g for g in ETHNICITY_CODES if g in groups]
    return known + sorted(g for g in groups if g not in ETHNICITY_CODES)
