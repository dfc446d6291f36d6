"""ASR hypotheses as JSON lines: {"utterance_id", "system_id", "text"}."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Container, Iterable, NamedTuple

from asrbias.errors import DataError

REQUIRED_KEYS = ("utterance_id", "system_id", "text")


class Hypothesis(NamedTuple):
    utterance_id: str
    system_id: str
    text: str


def load_hypotheses(stream: str | Iterable[str], source: str = "<hypotheses>",
                    known_utterances: Container[str] | None = None) -> list[Hypothesis]:
    """Parse JSON lines; with ``known_utterances``, unknown ids are rejected here."""
    lines = stream.splitlines() if isinstance(stream, str) else stream
    out: list[Hypothesis] = []
    seen: dict[tuple[str, str], int] = {}
    for lineno, raw in enumerate(lines, 1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise DataError(f"malformed JSON: {exc.msg}", source, lineno) from None
        if not isinstance(obj, dict):
            raise DataError("expected a JSON object", source, lineno)
        missing = [k for k in REQUIRED_KEYS if k not in obj]
        if missing:
            raise DataError(f"missing key(s) {', '.join(missing)}", source, lineno)
        if not all(isinstance(obj[k], str) for k in REQUIRED_KEYS):
            raise DataError("utterance_id, system_id and text must be strings", source, lineno)
        key = (obj["utterance_id"], obj["system_id"])
        if key in seen:
            raise DataError(f"duplicate hypothesis for utterance {key[0]!r}, system {key[1]!r} "
                            f"(first at line {seen[key]})", source, lineno)
        if known_utterances is not None and key[0] not in known_utterances:
            raise DataError(f"hypothesis for unknown utterance {key[0]!r} (system {key[1]!r})",
                            source, lineno)
        seen[key] = lineno
        out.append(Hypothesis(*key, obj["text"]))
    return out


def read_hypotheses(paths: Iterable[str | Path],
                    known_utterances: Container[str] | None = None) -> list[Hypothesis]:
    """Load several JSONL files; duplicates across files are rejected too."""
    out: list[Hypothesis] = []
    seen: dict[tuple[str, str], str] = {}
    for path in paths:
        path = Path(path)
        with path.open(encoding="utf-8") as fh:
            hyps = load_hypotheses(fh, str(path), known_utterances)
        for h in hyps:
            key = (h.utterance_id, h.system_id)
            if key in seen:
                raise DataError(f"duplicate hypothesis for utterance {key[0]!r}, system "
                                f"{key[1]!r} (also in {seen[key]})", str(path))
            seen[key] = str(path)
        out.extend(hyps)
    return out
