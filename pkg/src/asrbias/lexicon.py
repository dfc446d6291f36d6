"""ARPABET pronunciation lexicon with regional overlay and inflection fallback."""

from __future__ import annotations

import re
import threading
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, Sequence

from asrbias.codes import ARPABET, VOICELESS, VOWELS
from asrbias.errors import DataError, UnderivableWord

BASE, OVERLAY, DERIVED = "base", "overlay", "derived"

SIBILANTS = frozenset("S Z SH ZH CH JH".split())
ALVEOLAR_STOPS = frozenset("T D".split())

_VARIANT_RE = re.compile(r"^(?P<word>.+?)\((?P<index>\d+)\)$")

Pron = tuple[str, ...]


class Variant(NamedTuple):
    phones: Pron
    source: str


def split_stress(phone: str) -> tuple[str, str | None]:
    if phone and phone[-1].isdigit():
        return phone[:-1], phone[-1]
    return phone, None


def strip_stress(phones: Iterable[str]) -> list[str]:
    return [split_stress(p)[0] for p in phones]


def check_phone(phone: str) -> bool:
    symbol, stress = split_stress(phone)
    if symbol not in ARPABET:
        return False
    if stress is not None and (symbol not in VOWELS or stress not in "012"):
        return False
    return True


class Lexicon:
    """Word -> ordered pronunciation variants.

    Entries are fixed at construction. Pronunciations derived for
    out-of-vocabulary words are memoised separately under a lock so that
    concurrent scoring sees identical results in any interleaving.
    """

    def __init__(self, entries: Mapping[str, Sequence[Variant]] | None = None):
        self._entries: dict[str, tuple[Variant, ...]] = {
            w: tuple(vs) for w, vs in (entries or {}).items()}
        self._derived: dict[str, Pron | None] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, word: str) -> bool:
        return word.lower() in self._entries

    def words(self) -> list[str]:
        return list(self._entries)

    def variants(self, word: str) -> tuple[Variant, ...]:
        return self._entries.get(word.lower(), ())

    def lookup(self, word: str) -> list[Pron]:
        return [v.phones for v in self.variants(word)]

    @property
    def derived(self) -> dict[str, Pron]:
        """Successfully derived OOV pronunciations so far."""
        with self._lock:
            return {w: p for w, p in self._derived.items() if p is not None}

    def derive_oov(self, word: str) -> Pron:
        w = word.lower()
        with self._lock:
            if w in self._derived:
                cached = self._derived[w]
                if cached is None:
                    raise UnderivableWord(word)
                return cached
        result = _derive(self, w, depth=0)
        with self._lock:
            result = self._derived.setdefault(w, result)
        if result is None:
            raise UnderivableWord(word)
        return result

    def pronounce(self, word: str) -> tuple[Pron | None, str | None]:
        """First variant of ``word`` (or its derived form) plus the source tag."""
        vs = self.variants(word)
        if vs:
            return vs[0].phones, vs[0].source
        try:
            return self.derive_oov(word), DERIVED
        except UnderivableWord:
            return None, None

    def hypothesis_phones(self, tokens: Sequence[str]) -> tuple[list[str], list[str]]:
        phones: list[str] = []
        oov: list[str] = []
        for tok in tokens:
            pron, _ = self.pronounce(tok)
            if pron is None:
                oov.append(tok)
            else:
                phones.extend(pron)
        return phones, oov


def _suffix_plural(final: str) -> Pron:
    if final in SIBILANTS:
        return ("IH0", "Z")
    if final in VOICELESS:
        return ("S",)
    return ("Z",)


def _suffix_past(final: str) -> Pron:
    if final in ALVEOLAR_STOPS:
        return ("IH0", "D")
    if final in VOICELESS:
        return ("T",)
    return ("D",)


def _suffix_gerund(final: str) -> Pron:
    return ("IH0", "NG")


def _undouble(stem: str) -> str | None:
    if len(stem) >= 3 and stem[-1] == stem[-2] and stem[-1] not in "aeiou":
        return stem[:-1]
    return None


def _ends_in_consonant_letter(s: str) -> bool:
    return bool(s) and s[-1].isalpha() and s[-1] not in "aeiouy"


def _rule_candidates(w: str) -> list[tuple[list[str], object]]:
    """(stem candidates, suffix rule) in rule priority order."""
    rules: list[tuple[list[str], object]] = []
    if w.endswith("'s") and len(w) > 2:
        rules.append(([w[:-2]], _suffix_plural))
    if w.endswith("s"):
        stems = [w[:-1]]
        if w.endswith("es"):
            stems.append(w[:-2])
        if w.endswith("ies"):
            stems.append(w[:-3] + "y")
        rules.append((stems, _suffix_plural))
    if w.endswith("ed"):
        stems = [w[:-1], w[:-2]]
        if w.endswith("ied"):
            stems.append(w[:-3] + "y")
        if (u := _undouble(w[:-2])):
            stems.append(u)
        rules.append((stems, _suffix_past))
    if w.endswith("ing"):
        base = w[:-3]
        stems = [base + "e"] if _ends_in_consonant_letter(base) else []
        stems.append(base)
        if (u := _undouble(base)):
            stems.append(u)
        rules.append((stems, _suffix_gerund))
    return rules


def _derive(lex: Lexicon, w: str, depth: int) -> Pron | None:
    if w.endswith("s'") and len(w) > 2 and depth == 0:
        # plural possessive sounds like the plural
        plural = w[:-1]
        found = lex.lookup(plural)
        if found:
            return found[0]
        return _derive(lex, plural, depth + 1)
    for stems, suffix in _rule_candidates(w):
        for stem in stems:
            if not stem:
                continue
            found = lex.lookup(stem)
            if not found:
                continue
            base = found[0]
            final = split_stress(base[-1])[0]
            return tuple(base) + suffix(final)
    return None


def parse_dictionary(stream: str | Iterable[str], source: str = "<dictionary>",
                     tag: str = BASE) -> Lexicon:
    """Read CMUdict-format text.

    Accepts both the classic uppercase ``WORD  PH1 PH2`` layout with ``;;;``
    comments and the newer lowercase layout with trailing ``# comments``.
    """
    lines = stream.splitlines() if isinstance(stream, str) else stream
    collected: dict[str, list[tuple[int, int, Pron]]] = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith(";;;"):
            continue
        if " #" in line:
            line = line.split(" #", 1)[0].rstrip()
        parts = line.split()
        head, phones = parts[0], parts[1:]
        m = _VARIANT_RE.match(head)
        index = 1
        if m:
            head, index = m.group("word"), int(m.group("index"))
        word = head.lower()
        if not phones:
            raise DataError(f"empty pronunciation for {word!r}", source, lineno)
        for p in phones:
            if not check_phone(p):
                raise DataError(f"unknown phone symbol {p!r} in entry {word!r}", source, lineno)
        collected.setdefault(word, []).append((index, lineno, tuple(phones)))
    entries = {
        w: [Variant(p, tag) for _, _, p in sorted(vs, key=lambda t: (t[0], t[1]))]
        for w, vs in collected.items()
    }
    return Lexicon(entries)


def read_dictionary(path: str | Path, tag: str = BASE) -> Lexicon:
    path = Path(path)
    data = path.read_bytes()
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError:
        # cmudict-0.7b ships as latin-1
        text = data.decode("latin-1")
    return parse_dictionary(text, source=str(path), tag=tag)


def overlay(base: Lexicon, regional: Lexicon) -> Lexicon:
    """Merge a regional dictionary over a base one; regional variants come first."""
    merged: dict[str, list[Variant]] = {w: list(base.variants(w)) for w in base.words()}
    for w in regional.words():
        top = [Variant(v.phones, OVERLAY) for v in regional.variants(w)]
        merged[w] = top + merged.get(w, [])
    return Lexicon(merged)


def lookup(lex: Lexicon, word: str) -> list[Pron]:
    return lex.lookup(word)


def derive_oov(lex: Lexicon, word: str) -> Pron:
    return lex.derive_oov(word)


def hypothesis_phones(lex: Lexicon, tokens: Sequence[str]) -> tuple[list[str], list[str]]:
    return lex.hypothesis_phones(tokens)
