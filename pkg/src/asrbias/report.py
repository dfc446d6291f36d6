"""Assembly and rendering of the result tables.

``build_report`` does all arithmetic; the renderers only format numbers
(rounding half-up at display time).
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, fields
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Mapping, Sequence

from asrbias.alignment import PER, WER, ScoreTable, per_reduction
from asrbias.codes import ALL_MARKERS, group_order
from asrbias.errors import DataError
from asrbias.markers import CooccurrenceTable

DEFAULT_TABLE_MARKERS = ("-AO", "CC", "IN")

CSV_FILES = {
    "wer_table": "wer.csv",
    "per_table": "per.csv",
    "reduction_by_system": "reduction.csv",
    "realization_means": "realization.csv",
    "cooccurrence": "cooccurrence.csv",
    "normalized_rates": "normalized.csv",
}


@dataclass
class Report:
    digest: str
    wer_table: dict | None = None
    per_table: dict | None = None
    reduction_by_system: dict | None = None
    realization_means: dict | None = None
    cooccurrence: dict | None = None
    normalized_rates: dict | None = None
    stats_results: dict | None = None
    diagnostics: dict = field(default_factory=dict)
    table_markers: list = field(default_factory=lambda: list(DEFAULT_TABLE_MARKERS))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping) -> "Report":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})

    def sections(self) -> dict[str, bool]:
        return {name: getattr(self, name) is not None for name in CSV_FILES}


def _metric_table(table: ScoreTable, metric: str) -> dict | None:
    keys = [k for k in table.groups if k[2] == metric]
    if not keys:
        return None
    groups = group_order({g for g, _, _ in keys})
    systems = sorted({s for _, s, _ in keys})
    cells: dict = {}
    for sys in systems:
        row = {}
        for g in groups:
            st = table.groups.get((g, sys, metric))
            if st is not None:
                row[g] = {"mean": st.mean, "se": st.se, "n": st.n}
        cells[sys] = row
    mean_row = {}
    for g in groups:
        vals = [cells[s][g]["mean"] for s in systems if g in cells[s]]
        mean_row[g] = math.fsum(vals) / len(vals) if vals else None
    return {"metric": metric, "groups": groups, "systems": systems, "cells": cells,
            "mean": mean_row}


def build_report(
    score_table: ScoreTable | None = None,
    cooc: CooccurrenceTable | None = None,
    stats: dict | None = None,
    diagnostics: dict | None = None,
    table_markers: Sequence[str] = DEFAULT_TABLE_MARKERS,
) -> Report:
    digests = {name: obj.digest for name, obj in
               (("scores", score_table), ("cooccurrence", cooc)) if obj is not None}
    if stats is not None:
        digests["stats"] = stats.get("digest")
    if not digests:
        raise DataError("nothing to report: no computed artifacts given")
    if len(set(digests.values())) > 1:
        detail = ", ".join(f"{k}={str(v)[:12]}" for k, v in sorted(digests.items()))
        raise DataError(f"manifest digest mismatch between inputs ({detail})")
    digest = next(iter(digests.values()))
    for m in table_markers:
        if m not in {str(c) for c in ALL_MARKERS}:
            raise DataError(f"unknown marker code {m!r} in table markers")

    report = Report(digest=digest, diagnostics=dict(diagnostics or {}),
                    table_markers=list(table_markers))
    if score_table is not None:
        report.wer_table = _metric_table(score_table, WER)
        report.per_table = _metric_table(score_table, PER)
        if report.wer_table is not None and report.per_table is not None:
            report.reduction_by_system = per_reduction(score_table)
        report.diagnostics.setdefault("oov_tokens", dict(score_table.oov))
        report.diagnostics.setdefault("missing_hypotheses", [list(x) for x in score_table.missing])
        report.diagnostics.setdefault("uncovered_utterances", list(score_table.uncovered))
        report.diagnostics.setdefault("unscored_utterances", list(score_table.unscored))
        report.diagnostics.setdefault("derived_words", list(score_table.derived_words))
    if cooc is not None:
        groups = cooc.group_names
        systems = cooc.systems
        markers = [str(m) for m in ALL_MARKERS]
        report.realization_means = {
            "groups": [g for g in groups if g in cooc.annotated_speakers],
            "speakers": dict(cooc.annotated_speakers),
            "markers": markers,
            "cells": {g: {m: cooc.realization_means[(g, m)] for m in markers
                          if (g, m) in cooc.realization_means}
                      for g in groups if g in cooc.annotated_speakers},
        }
        cells: dict = {}
        rates: dict = {}
        errs: dict = {}
        for g in groups:
            cells[g], rates[g], errs[g] = {}, {}, {}
            for s in systems:
                cells[g][s] = {}
                rates[g][s] = {}
                for m in markers:
                    c = cooc.cells.get((g, s, m))
                    if c is None:
                        continue
                    cells[g][s][m] = {"overlap": c.overlap, "contexts": c.contexts,
                                      "realized": c.realized}
                    rates[g][s][m] = c.normalized
                    errs[g][s] = c.total_errors
        report.cooccurrence = {"groups": groups, "systems": systems, "markers": markers,
                               "mode": cooc.mode, "cells": cells, "errors": errs}
        report.normalized_rates = {"groups": groups, "systems": systems, "markers": markers,
                                   "cells": rates}
        report.diagnostics.setdefault("cooccurrence", cooc.diagnostics)
    if stats is not None:
        report.stats_results = stats
    return report


# --------------------------------------------------------------- format

def fmt_pct(x: float | None, digits: int = 0) -> str:
    if x is None:
        return "NA"
    if not math.isfinite(x):
        return "inf"
    q = Decimal(1).scaleb(-digits)
    return f"{(Decimal(repr(x)) * 100).quantize(q, rounding=ROUND_HALF_UP)}%"


def fmt_num(x: float | None, digits: int = 2) -> str:
    if x is None:
        return "NA"
    q = Decimal(1).scaleb(-digits)
    return str(Decimal(repr(x)).quantize(q, rounding=ROUND_HALF_UP))


def fmt_p(p: float | None) -> str:
    if p is None:
        return "NA"
    if p < 0.001:
        return "<0.001"
    return fmt_num(p, 3)


def _metric_rows(t: dict) -> list[list[str]]:
    rows = [["System"] + t["groups"]]
    for s in t["systems"]:
        rows.append([s] + [fmt_pct(t["cells"][s][g]["mean"]) if g in t["cells"][s] else "NA"
                           for g in t["groups"]])
    rows.append(["Mean"] + [fmt_pct(t["mean"][g]) for g in t["groups"]])
    return rows


def _table_rows(report: Report, name: str) -> list[list[str]] | None:
    sec = getattr(report, name)
    if sec is None:
        return None
    if name in ("wer_table", "per_table"):
        return _metric_rows(sec)
    if name == "reduction_by_system":
        return [["System", "Reduction"]] + [[s, fmt_pct(v)] for s, v in sec.items()]
    markers = report.table_markers
    if name == "realization_means":
        rows = [["Ethnicity", "Spkrs"] + markers]
        for g in sec["groups"]:
            rows.append([g, str(sec["speakers"][g])]
                        + [fmt_num(sec["cells"][g].get(m)) for m in markers])
        return rows
    if name == "cooccurrence":
        head = ["Group"] + [f"{s}:{m}" for s in sec["systems"] for m in markers + ["Err"]]
        rows = [head]
        for g in sec["groups"]:
            row = [g]
            for s in sec["systems"]:
                for m in markers:
                    c = sec["cells"][g][s].get(m)
                    row.append("NA" if c is None else str(c["overlap"]))
                row.append(str(sec["errors"][g].get(s, 0)))
            rows.append(row)
        return rows
    if name == "normalized_rates":
        rows = [["Group"] + [f"{s}:{m}" for s in sec["systems"] for m in markers]]
        for g in sec["groups"]:
            rows.append([g] + [fmt_pct(sec["cells"][g][s].get(m), 1)
                               for s in sec["systems"] for m in markers])
        return rows
    raise KeyError(name)


def _csv(rows: list[list[str]]) -> bytes:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue().encode("utf-8")


def _md_table(rows: list[list[str]]) -> list[str]:
    out = ["| " + " | ".join(rows[0]) + " |", "|" + "---|" * len(rows[0])]
    out += ["| " + " | ".join(r) + " |" for r in rows[1:]]
    return out


_TITLES = {
    "wer_table": "Word error rate by group and system",
    "per_table": "Phonetic error rate by group and system",
    "reduction_by_system": "Mean relative reduction from WER to PER",
    "realization_means": "Mean realized markers per speaker",
    "cooccurrence": "Error overlap with realized markers",
    "normalized_rates": "Overlap normalized by marker contexts",
}


def _render_markdown(report: Report) -> bytes:
    lines = ["# ASR bias report", "", f"Manifest digest: `{report.digest}`", ""]
    for name, title in _TITLES.items():
        lines += [f"## {title}", ""]
        rows = _table_rows(report, name)
        lines += ["(absent)"] if rows is None else _md_table(rows)
        lines.append("")
    lines += ["## Statistical tests", ""]
    st = report.stats_results
    if st is None:
        lines += ["(absent)", ""]
    else:
        alpha = st.get("alpha", 0.05)
        for metric, block in st.get("lmm", {}).items():
            fit = block["fit"]
            lines += [f"### Mixed-effects model ({metric}, {block['n_obs']} observations)", "",
                      f"sigma_b2 = {fit['sigma_b2']:.6g}, sigma_e2 = {fit['sigma_e2']:.6g}, "
                      f"REML log-likelihood = {fit['reml_loglik']:.6f}, "
                      f"converged = {fit['converged']}", ""]
            rows = [["Coefficient", "Estimate", "SE", "z", "p", f"p < {alpha}"]]
            for col, t in block["tests"].items():
                rows.append([col, f"{t['estimate']:.4f}", f"{t['se']:.4f}", f"{t['z']:.3f}",
                             fmt_p(t["p"]), "yes" if t["significant"] else "no"])
            lines += _md_table(rows) + [""]
        if st.get("proportion"):
            lines += ["### Proportion tests on marker overlap", ""]
            rows = [["Contrast", "Difference", "z", "p", "Cohen's h", f"p < {alpha}"]]
            for key, t in st["proportion"].items():
                rows.append([key, f"{t['estimate']:.4f}",
                             "NA" if t["z"] is None else f"{t['z']:.3f}", fmt_p(t["p"]),
                             "NA" if t["effect_size"] is None else f"{t['effect_size']:.3f}",
                             "yes" if t["significant"] else "no"])
            lines += _md_table(rows) + [""]
        for err in st.get("errors", []):
            lines.append(f"- not estimated: {err}")
        if st.get("errors"):
            lines.append("")
    d = report.diagnostics
    lines += ["## Diagnostics", ""]
    lines.append(f"- OOV hypothesis tokens: {sum(d.get('oov_tokens', {}).values())} "
                 f"({len(d.get('oov_tokens', {}))} types)")
    lines.append(f"- Utterance/system pairs without hypothesis: "
                 f"{len(d.get('missing_hypotheses', []))}")
    lines.append(f"- Utterances with no hypothesis from any system: "
                 f"{len(d.get('uncovered_utterances', []))}")
    lines.append(f"- Utterances without reference phones: {len(d.get('unscored_utterances', []))}")
    lines.append(f"- Rule-derived pronunciations: {len(d.get('derived_words', []))}")
    lines.append(f"- Words skipped in context detection: {len(d.get('skipped_words', []))}")
    for w in d.get("warnings", []):
        lines.append(f"- warning: {w}")
    lines.append("")
    return "\n".join(lines).encode("utf-8")


def render(report: Report, format: str = "json"):
    """Render to ``json`` or ``markdown`` bytes, or ``csv-bundle`` (filename -> bytes)."""
    if format == "json":
        return (json.dumps(report.to_dict(), indent=2, sort_keys=True, allow_nan=False)
                + "\n").encode("utf-8")
    if format == "markdown":
        return _render_markdown(report)
    if format == "csv-bundle":
        out = {}
        for name, fname in CSV_FILES.items():
            rows = _table_rows(report, name)
            if rows is not None:
                out[fname] = _csv(rows)
        return out
    raise ValueError(f"unknown format {format!r}")


def load_report(data: bytes | str) -> Report:
    return Report.from_dict(json.loads(data))


def write_report(report: Report, out_dir: str | Path) -> list[Path]:
    out_dir = Path(out_dir)
    tables = out_dir / "tables"
    tables.mkdir(parents=True, exist_ok=True)
    written = []
    p = out_dir / "report.json"
    p.write_bytes(render(report, "json"))
    written.append(p)
    for fname, data in render(report, "csv-bundle").items():
        p = tables / fname
        p.write_bytes(data)
        written.append(p)
    p = out_dir / "report.md"
    p.write_bytes(render(report, "markdown"))
    written.append(p)
    return written
