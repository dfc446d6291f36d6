"""Marker realization annotations (TSV)."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, NamedTuple

from asrbias.codes import MarkerCode
from asrbias.errors import DataError

FIELDS = ["utterance_id", "token_index", "marker", "realized"]


class MarkerRealization(NamedTuple):
    utterance_id: str
    token_index: int
    marker: MarkerCode
    realized: bool


def load_marker_annotations(stream: str | Iterable[str],
                            source: str = "<annotations>") -> list[MarkerRealization]:
    """Parse the annotation TSV.

    ``token_index`` is only checked for sign here; range checks need the
    utterance and happen when annotations are joined against references.
    """
    lines = stream.splitlines() if isinstance(stream, str) else list(stream)
    reader = csv.reader(lines, delimiter="\t")
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise DataError("empty annotation file (missing header)", source, 1) from None
    if header[:4] != FIELDS:
        raise DataError(f"header must be {' '.join(FIELDS)}", source, 1)

    out: list[MarkerRealization] = []
    seen: set[tuple[str, int, MarkerCode]] = set()
    for row in reader:
        lineno = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) < 4:
            raise DataError(f"expected 4 fields, got {len(row)}", source, lineno)
        uid, idx, code, realized = (c.strip() for c in row[:4])
        try:
            marker = MarkerCode.parse(code)
        except ValueError as exc:
            raise DataError(str(exc), source, lineno) from None
        try:
            index = int(idx)
        except ValueError:
            raise DataError(f"token_index {idx!r} is not an integer", source, lineno) from None
        if index < 0:
            raise DataError(f"negative token_index {index}", source, lineno)
        if realized not in ("0", "1"):
            raise DataError(f"realized must be 0 or 1, got {realized!r}", source, lineno)
        key = (uid, index, marker)
        if key in seen:
            raise DataError(f"duplicate annotation for {uid!r} token {index} marker {marker}",
                            source, lineno)
        seen.add(key)
        out.append(MarkerRealization(uid, index, marker, realized == "1"))
    return out


def read_marker_annotations(path: str | Path) -> list[MarkerRealization]:
    path = Path(path)
    return load_marker_annotations(path.read_text(encoding="utf-8-sig"), source=str(path))
