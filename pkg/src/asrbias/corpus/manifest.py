"""Corpus manifest: speakers.csv + utterances.csv."""

from __future__ import annotations

import csv
import hashlib
import io
import logging
from dataclasses import dataclass, field
from pathlib import Path

from asrbias.codes import ETHNICITY_CODES, GENDER_CODES, OTHER
from asrbias.errors import DataError

log = logging.getLogger(__name__)

SPEAKER_FIELDS = ["speaker_id", "ethnicity", "gender", "age"]
UTTERANCE_FIELDS = ["utterance_id", "speaker_id", "textgrid_path", "reference_text"]


@dataclass(frozen=True)
class Speaker:
    id: str
    ethnicity: str
    gender: str
    age: int
    # original code when ethnicity/gender were mapped to "other"
    ethnicity_label: str = ""
    gender_label: str = ""


@dataclass(frozen=True)
class UtteranceEntry:
    id: str
    speaker_id: str
    textgrid_path: str
    reference_text: str


@dataclass(frozen=True)
class Manifest:
    speakers: tuple[Speaker, ...]
    utterances: tuple[UtteranceEntry, ...]
    digest: str
    base_dir: Path | None = None
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def speaker(self, speaker_id: str) -> Speaker:
        return self.speaker_index[speaker_id]

    @property
    def speaker_index(self) -> dict[str, Speaker]:
        return {s.id: s for s in self.speakers}

    @property
    def utterance_index(self) -> dict[str, UtteranceEntry]:
        return {u.id: u for u in self.utterances}

    def group_of_utterance(self) -> dict[str, str]:
        spk = self.speaker_index
        return {u.id: spk[u.speaker_id].ethnicity for u in self.utterances}

    def textgrid_file(self, entry: UtteranceEntry) -> Path | None:
        if not entry.textgrid_path:
            return None
        p = Path(entry.textgrid_path)
        if not p.is_absolute() and self.base_dir is not None:
            p = self.base_dir / p
        return p


def _rows(document: str, expected: list[str], source: str):
    reader = csv.DictReader(io.StringIO(document))
    header = [h.strip() for h in (reader.fieldnames or [])]
    if not header:
        raise DataError("empty CSV (missing header)", source, 1)
    missing = [f for f in expected if f not in header]
    if missing:
        raise DataError(f"header lacks column(s) {', '.join(missing)}", source, 1)
    reader.fieldnames = header
    for row in reader:
        yield reader.line_num, {k: (v or "").strip() for k, v in row.items() if k is not None}


def manifest_digest(speakers_csv: str, utterances_csv: str) -> str:
    h = hashlib.sha256()
    for doc in (speakers_csv, utterances_csv):
        body = doc.replace("\r\n", "\n").encode("utf-8")
        h.update(len(body).to_bytes(8, "big"))
        h.update(body)
    return h.hexdigest()


def load_manifest(
    speakers_csv: str,
    utterances_csv: str,
    base_dir: Path | None = None,
    speakers_source: str = "speakers.csv",
    utterances_source: str = "utterances.csv",
) -> Manifest:
    warnings: list[str] = []
    speakers: dict[str, Speaker] = {}
    for line, row in _rows(speakers_csv, SPEAKER_FIELDS, speakers_source):
        sid = row["speaker_id"]
        if not sid:
            raise DataError("empty speaker_id", speakers_source, line)
        if sid in speakers:
            raise DataError(f"duplicate speaker_id {sid!r}", speakers_source, line)
        eth = row["ethnicity"]
        eth_label = ""
        if eth not in ETHNICITY_CODES:
            msg = f"{speakers_source}:{line}: unknown ethnicity code {eth!r}, mapped to {OTHER!r}"
            log.warning(msg)
            warnings.append(msg)
            eth, eth_label = OTHER, eth
        gender = row["gender"]
        gender_label = ""
        if gender not in GENDER_CODES:
            gender, gender_label = OTHER, gender
        try:
            age = int(row["age"])
        except ValueError:
            raise DataError(f"age {row['age']!r} is not an integer", speakers_source, line) from None
        if age <= 0:
            raise DataError(f"age must be positive, got {age}", speakers_source, line)
        speakers[sid] = Speaker(sid, eth, gender, age, eth_label, gender_label)

    utterances: dict[str, UtteranceEntry] = {}
    for line, row in _rows(utterances_csv, UTTERANCE_FIELDS, utterances_source):
        uid = row["utterance_id"]
        if not uid:
            raise DataError("empty utterance_id", utterances_source, line)
        if uid in utterances:
            raise DataError(f"duplicate utterance_id {uid!r}", utterances_source, line)
        if row["speaker_id"] not in speakers:
            raise DataError(f"utterance {uid!r} names unknown speaker {row['speaker_id']!r}",
                            utterances_source, line)
        utterances[uid] = UtteranceEntry(uid, row["speaker_id"], row["textgrid_path"],
                                         row["reference_text"])

    return Manifest(tuple(speakers.values()), tuple(utterances.values()),
                    manifest_digest(speakers_csv, utterances_csv), base_dir, tuple(warnings))


def read_manifest(directory: str | Path) -> Manifest:
    directory = Path(directory)
    sp, ut = directory / "speakers.csv", directory / "utterances.csv"
    for p in (sp, ut):
        if not p.is_file():
            raise DataError("manifest file not found", str(p))
    return load_manifest(sp.read_text(encoding="utf-8-sig"), ut.read_text(encoding="utf-8-sig"),
                         base_dir=directory, speakers_source=str(sp), utterances_source=str(ut))
