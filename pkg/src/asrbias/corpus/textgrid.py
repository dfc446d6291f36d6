"""Praat TextGrid reading and writing (IntervalTier only).

Both the long ("verbose") and short text serializations are read with the
same tokenizer: Praat itself reads either format by scanning for the next
number, quoted string or ``<flag>``, so labels such as ``xmin =`` and
``item [1]:`` are noise to be skipped.
"""

from __future__ import annotations

import codecs
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, NamedTuple

from asrbias.errors import ParseError

# Tier spans must match the grid span to within this many seconds.
SPAN_TOLERANCE = 1e-6


class Interval(NamedTuple):
    xmin: float
    xmax: float
    label: str


@dataclass(frozen=True)
class Tier:
    name: str
    intervals: tuple[Interval, ...]
    xmin: float
    xmax: float

    def __len__(self) -> int:
        return len(self.intervals)


@dataclass(frozen=True)
class TextGrid:
    xmin: float
    xmax: float
    tiers: tuple[Tier, ...]

    def tier_names(self) -> list[str]:
        return [t.name for t in self.tiers]

    def get_tier(self, name: str) -> Tier:
        for tier in self.tiers:
            if tier.name == name:
                return tier
        raise KeyError(name)


class _Tok(NamedTuple):
    kind: str  # "num", "str", "flag"
    value: object
    line: int


_TOKEN_RE = re.compile(
    r'"(?P<str>(?:[^"]|"")*)"'
    r"|(?P<flag><[A-Za-z]+>)"
    r"|\[[^\]\n]*\]"  # item [1], intervals [3]: array indices, never data
    r"|(?<![\w.])(?P<num>[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)(?![\w.])"
    r"|(?P<nl>\n)"
)


def decode_document(data: bytes | str) -> str:
    """Decode raw TextGrid bytes, honouring UTF-8/UTF-16 byte-order marks."""
    if isinstance(data, str):
        return data.lstrip("﻿")
    if data.startswith(codecs.BOM_UTF16_LE) or data.startswith(codecs.BOM_UTF16_BE):
        return data.decode("utf-16")
    if data.startswith(codecs.BOM_UTF8):
        return data[len(codecs.BOM_UTF8):].decode("utf-8")
    # Praat writes BOM-less UTF-16 on some platforms; NUL bytes give it away.
    if len(data) >= 2 and b"\x00" in data[:4]:
        return data.decode("utf-16-le" if data[1] == 0 else "utf-16-be")
    return data.decode("utf-8")


def _tokenize(text: str) -> Iterator[_Tok]:
    line = 1
    for m in _TOKEN_RE.finditer(text):
        if m.group("nl") is not None:
            line += 1
            continue
        s = m.group("str")
        if s is not None:
            yield _Tok("str", s.replace('""', '"'), line)
            line += s.count("\n")
        elif m.group("flag") is not None:
            yield _Tok("flag", m.group("flag"), line)
        elif m.group("num") is not None:
            yield _Tok("num", m.group("num"), line)


class _Reader:
    def __init__(self, text: str, source: str | None):
        self.toks = list(_tokenize(text))
        self.pos = 0
        self.source = source

    def error(self, msg: str, tok: _Tok | None = None) -> ParseError:
        if tok is None:
            tok = self.toks[self.pos] if self.pos < len(self.toks) else None
        line = tok.line if tok is not None else (self.toks[-1].line if self.toks else 1)
        return ParseError(msg, self.source, line)

    def next(self, kind: str, what: str) -> _Tok:
        if self.pos >= len(self.toks):
            raise self.error(f"unexpected end of file while reading {what}")
        tok = self.toks[self.pos]
        if tok.kind != kind:
            raise self.error(f"expected {what}, found {tok.value!r}", tok)
        self.pos += 1
        return tok

    def number(self, what: str) -> tuple[float, int]:
        tok = self.next("num", what)
        return float(tok.value), tok.line

    def integer(self, what: str) -> tuple[int, int]:
        tok = self.next("num", what)
        try:
            return int(tok.value), tok.line
        except ValueError:
            raise self.error(f"expected integer {what}, found {tok.value!r}", tok) from None

    def string(self, what: str) -> tuple[str, int]:
        tok = self.next("str", what)
        return tok.value, tok.line

    def at_end(self) -> bool:
        return self.pos >= len(self.toks)


def parse_textgrid(document: str | bytes, source: str | None = None) -> TextGrid:
    """Parse a TextGrid in long or short text format.

    Point tiers are read and discarded. Raises :class:`ParseError` with a
    line number on structural problems.
    """
    text = decode_document(document)
    r = _Reader(text, source)
    file_type, line = r.string("file type")
    if file_type != "ooTextFile":
        raise ParseError(f"not a Praat text file (file type {file_type!r})", source, line)
    obj_class, line = r.string("object class")
    if obj_class != "TextGrid":
        raise ParseError(f"object class is {obj_class!r}, expected 'TextGrid'", source, line)
    xmin, _ = r.number("grid xmin")
    xmax, line = r.number("grid xmax")
    if xmin > xmax:
        raise ParseError(f"grid xmin {xmin} > xmax {xmax}", source, line)
    flag = r.next("flag", "tiers flag")
    if flag.value == "<absent>":
        return TextGrid(xmin, xmax, ())
    if flag.value != "<exists>":
        raise r.error(f"unknown tiers flag {flag.value}", flag)
    n_tiers, size_line = r.integer("tier count")

    tiers: list[Tier] = []
    for k in range(n_tiers):
        if r.at_end():
            raise ParseError(
                f"tier count mismatch: header declares {n_tiers} tiers, found {k}",
                source, size_line)
        cls, cls_line = r.string("tier class")
        name, _ = r.string("tier name")
        t_min, _ = r.number("tier xmin")
        t_max, t_line = r.number("tier xmax")
        n_items, _ = r.integer("item count")
        if cls == "IntervalTier":
            intervals = []
            prev_end = None
            for _ in range(n_items):
                a, ln = r.number("interval xmin")
                b, _ = r.number("interval xmax")
                label, _ = r.string("interval label")
                if not a < b:
                    raise ParseError(f"tier {name!r}: interval [{a}, {b}] is empty or reversed",
                                     source, ln)
                if prev_end is not None and a < prev_end - SPAN_TOLERANCE:
                    raise ParseError(f"tier {name!r}: non-monotonic interval boundary at {a}",
                                     source, ln)
                prev_end = b
                intervals.append(Interval(a, b, label))
            if abs(t_min - xmin) > SPAN_TOLERANCE or abs(t_max - xmax) > SPAN_TOLERANCE:
                raise ParseError(
                    f"tier {name!r} spans [{t_min}, {t_max}] but grid spans [{xmin}, {xmax}]",
                    source, t_line)
            tiers.append(Tier(name, tuple(intervals), t_min, t_max))
        elif cls == "TextTier":
            for _ in range(n_items):
                r.number("point time")
                r.string("point mark")
        else:
            raise ParseError(f"unknown tier class {cls!r}", source, cls_line)

    if not r.at_end():
        raise r.error(f"tier count mismatch: trailing data after {n_tiers} declared tiers")
    return TextGrid(xmin, xmax, tuple(tiers))


def read_textgrid(path: str | Path) -> TextGrid:
    path = Path(path)
    return parse_textgrid(path.read_bytes(), source=str(path))


def _num(x: float) -> str:
    return repr(float(x))


def _quote(s: str) -> str:
    return '"' + s.replace('"', '""') + '"'


def to_long_format(grid: TextGrid) -> str:
    out = [
        'File type = "ooTextFile"',
        'Object class = "TextGrid"',
        "",
        f"xmin = {_num(grid.xmin)} ",
        f"xmax = {_num(grid.xmax)} ",
    ]
    if not grid.tiers:
        out.append("tiers? <absent> ")
        return "\n".join(out) + "\n"
    out.append("tiers? <exists> ")
    out.append(f"size = {len(grid.tiers)} ")
    out.append("item []: ")
    for i, tier in enumerate(grid.tiers, 1):
        out.append(f"    item [{i}]:")
        out.append('        class = "IntervalTier" ')
        out.append(f"        name = {_quote(tier.name)} ")
        out.append(f"        xmin = {_num(tier.xmin)} ")
        out.append(f"        xmax = {_num(tier.xmax)} ")
        out.append(f"        intervals: size = {len(tier.intervals)} ")
        for j, iv in enumerate(tier.intervals, 1):
            out.append(f"        intervals [{j}]:")
            out.append(f"            xmin = {_num(iv.xmin)} ")
            out.append(f"            xmax = {_num(iv.xmax)} ")
            out.append(f"            text = {_quote(iv.label)} ")
    return "\n".join(out) + "\n"


def to_short_format(grid: TextGrid) -> str:
    out = ['File type = "ooTextFile"', 'Object class = "TextGrid"', "",
           _num(grid.xmin), _num(grid.xmax)]
    if not grid.tiers:
        out.append("<absent>")
        return "\n".join(out) + "\n"
    out.append("<exists>")
    out.append(str(len(grid.tiers)))
    for tier in grid.tiers:
        out += ['"IntervalTier"', _quote(tier.name), _num(tier.xmin), _num(tier.xmax),
                str(len(tier.intervals))]
        for iv in tier.intervals:
            out += [_num(iv.xmin), _num(iv.xmax), _quote(iv.label)]
    return "\n".join(out) + "\n"
