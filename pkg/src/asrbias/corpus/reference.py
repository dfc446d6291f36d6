"""Reference word/phone sequences extracted from annotation TextGrids."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

from asrbias.corpus.textgrid import TextGrid, Tier
from asrbias.errors import DataError

DEFAULT_WORD_ALIASES = ("word", "words", "ortho")
DEFAULT_PHONE_ALIASES = ("phone", "phones", "segment")

# Phones may overhang their word by this much (manual segmentation jitter).
STRADDLE_TOLERANCE = 0.001


class TimedToken(NamedTuple):
    label: str
    xmin: float
    xmax: float


@dataclass(frozen=True)
class ReferenceUtterance:
    id: str
    speaker_id: str
    words: tuple[TimedToken, ...]
    phones: tuple[TimedToken, ...]
    # word index -> half-open [start, end) range into ``phones``
    word_phone_map: tuple[tuple[int, int], ...]

    @property
    def word_labels(self) -> list[str]:
        return [w.label for w in self.words]

    @property
    def phone_labels(self) -> list[str]:
        return [p.label for p in self.phones]

    def word_phones(self, index: int) -> list[str]:
        start, end = self.word_phone_map[index]
        return [p.label for p in self.phones[start:end]]


def find_tier(grid: TextGrid, name: str, aliases: Sequence[str] = ()) -> Tier:
    """Case-insensitive tier lookup; ``name`` is tried before its aliases."""
    wanted = [name.lower()] + [a.lower() for a in aliases if a.lower() != name.lower()]
    by_name = {}
    for tier in grid.tiers:
        by_name.setdefault(tier.name.lower(), tier)
    for candidate in wanted:
        if candidate in by_name:
            return by_name[candidate]
    raise DataError(f"no tier named {name!r} (looked for {', '.join(wanted)}; "
                    f"grid has {', '.join(grid.tier_names()) or 'no tiers'})")


def _is_silence(label: str) -> bool:
    return label.strip() == ""


def extract_reference(
    grid: TextGrid,
    word_tier_name: str = "word",
    phone_tier_name: str = "phone",
    utterance_id: str = "",
    speaker_id: str = "",
    word_aliases: Sequence[str] = DEFAULT_WORD_ALIASES,
    phone_aliases: Sequence[str] = DEFAULT_PHONE_ALIASES,
) -> ReferenceUtterance:
    word_tier = find_tier(grid, word_tier_name, word_aliases)
    phone_tier = find_tier(grid, phone_tier_name, phone_aliases)

    words = tuple(TimedToken(iv.label.strip(), iv.xmin, iv.xmax)
                  for iv in word_tier.intervals if not _is_silence(iv.label))
    phones = tuple(TimedToken(iv.label.strip().upper(), iv.xmin, iv.xmax)
                   for iv in phone_tier.intervals if not _is_silence(iv.label))

    owner: list[int] = []
    w = 0
    for p in phones:
        mid = (p.xmin + p.xmax) / 2
        while w < len(words) and words[w].xmax <= mid:
            w += 1
        if w == len(words) or words[w].xmin > mid:
            raise DataError(
                f"utterance {utterance_id!r}: phone {p.label!r} at [{p.xmin}, {p.xmax}] "
                f"lies outside every word")
        word = words[w]
        if p.xmin < word.xmin - STRADDLE_TOLERANCE or p.xmax > word.xmax + STRADDLE_TOLERANCE:
            raise DataError(
                f"utterance {utterance_id!r}: phone {p.label!r} at [{p.xmin}, {p.xmax}] "
                f"straddles the boundary of word {word.label!r} [{word.xmin}, {word.xmax}]")
        owner.append(w)

    ranges = []
    i = 0
    for k in range(len(words)):
        start = i
        while i < len(owner) and owner[i] == k:
            i += 1
        ranges.append((start, i))

    return ReferenceUtterance(utterance_id, speaker_id, words, phones, tuple(ranges))
