"""Parsing of corpus inputs into the toolkit's data model."""

from asrbias.corpus.annotations import (
    MarkerRealization,
    load_marker_annotations,
    read_marker_annotations,
)
from asrbias.corpus.hypotheses import Hypothesis, load_hypotheses, read_hypotheses
from asrbias.corpus.manifest import Manifest, Speaker, UtteranceEntry, load_manifest, read_manifest
from asrbias.corpus.reference import ReferenceUtterance, TimedToken, extract_reference, find_tier
from asrbias.corpus.textgrid import (
    Interval,
    TextGrid,
    Tier,
    parse_textgrid,
    read_textgrid,
    to_long_format,
    to_short_format,
)

__all__ = [
    "Hypothesis", "Interval", "Manifest", "MarkerRealization", "ReferenceUtterance", "Speaker",
    "TextGrid", "Tier", "TimedToken", "UtteranceEntry", "extract_reference", "find_tier",
    "load_hypotheses", "load_manifest", "load_marker_annotations", "parse_textgrid",
    "read_hypotheses", "read_manifest", "read_marker_annotations", "read_textgrid",
    "to_long_format", "to_short_format",
]
