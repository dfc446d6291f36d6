import json
import subprocess
import sys
from pathlib import Path

import pytest

from asrbias.cli import run
from asrbias.pipeline import validate

from conftest import fixture_config


def argv(info, out, command="all"):
    return [command, "--manifest", str(info.manifest), "--dict", str(info.dictionary),
            "--overlay", str(info.overlay), "--hyp", str(info.hypotheses),
            "--markers", str(info.annotations), "--out", str(out)]


def test_all_writes_full_report(fixture_corpus, tmp_path):
    assert run(argv(fixture_corpus, tmp_path)) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["wer_table"] and report["per_table"] and report["cooccurrence"]
    assert (tmp_path / "report.md").read_text().startswith("#")


def test_per_without_dictionary_is_validation_error(fixture_corpus, tmp_path, capsys):
    args = ["per", "--manifest", str(fixture_corpus.manifest), "--hyp",
            str(fixture_corpus.hypotheses), "--out", str(tmp_path)]
    assert run(args) == 1
    err = capsys.readouterr().err
    assert "--dict" in err and "usage:" in err


def test_unknown_utterance_is_data_error_naming_line(fixture_corpus, tmp_path, capsys):
    hyp = tmp_path / "bad.jsonl"
    good = fixture_corpus.hypotheses.read_text().splitlines()[:2]
    hyp.write_text("\n".join(good + ['{"utterance_id":"nope","system_id":"sysA","text":"x"}']) + "\n")
    args = ["score", "--manifest", str(fixture_corpus.manifest), "--hyp", str(hyp),
            "--out", str(tmp_path / "out")]
    assert run(args) == 2
    err = capsys.readouterr().err
    assert f"{hyp}:3:" in err and "nope" in err


def test_bad_flag_value_exits_one(capsys):
    assert run(["score", "--costs", "weird"]) == 1
    assert run(["frobnicate"]) == 1


def test_stats_before_score_is_validation_error(tmp_path, capsys):
    assert run(["stats", "--out", str(tmp_path)]) == 1
    assert "run 'score' first" in capsys.readouterr().err


def test_validate_examples(fixture_corpus, tmp_path):
    cfg = fixture_config(fixture_corpus, tmp_path)
    assert [d for d in validate(cfg) if d.level == "fatal"] == []
    missing = fixture_config(fixture_corpus, tmp_path, overlay=str(tmp_path / "absent.txt"))
    assert any("overlay" in d.message for d in validate(missing) if d.level == "fatal")
    ann = tmp_path / "none.tsv"
    ann.write_text("utterance_id\ttoken_index\tmarker\trealized\n")
    quiet = fixture_config(fixture_corpus, tmp_path, markers=str(ann))
    diags = validate(quiet)
    assert not [d for d in diags if d.level == "fatal"]
    assert any("no realized" in d.message for d in diags if d.level == "warning")


def test_oov_rate_warning(fixture_corpus, tmp_path):
    hyp = tmp_path / "oov.jsonl"
    hyp.write_text('{"utterance_id":"AA01-001","system_id":"x","text":"florbit gnarzle today"}\n')
    cfg = fixture_config(fixture_corpus, tmp_path, hypotheses=[str(hyp)])
    assert any("no pronunciation" in d.message for d in validate(cfg, "per"))


def test_config_file_with_flag_override(fixture_corpus, tmp_path):
    cfg = {"manifest": str(fixture_corpus.manifest), "dict": str(fixture_corpus.dictionary),
           "hyp": str(fixture_corpus.hypotheses), "out": str(tmp_path / "from-file"),
           "cost_model": "unit"}
    path = tmp_path / "run.json"
    path.write_text(json.dumps(cfg))
    out = tmp_path / "from-flag"
    assert run(["score", "--config", str(path), "--out", str(out)]) == 0
    assert (out / "artifacts" / "wer.json").is_file()
    assert not (tmp_path / "from-file").exists()


def test_unknown_config_key(tmp_path, capsys):
    path = tmp_path / "run.json"
    path.write_text('{"manifets": "x"}')
    assert run(["score", "--config", str(path)]) == 1
    assert "manifets" in capsys.readouterr().err


def test_all_equals_subcommands_in_order(fixture_corpus, tmp_path):
    assert run(argv(fixture_corpus, tmp_path / "a")) == 0
    for cmd in ("score", "per", "markers", "stats", "report"):
        assert run(argv(fixture_corpus, tmp_path / "b", cmd)) == 0, cmd
    for rel in ["report.json", "report.md"] + [f"artifacts/{n}" for n in
                                               ("wer.json", "per.json", "markers.json", "stats.json")]:
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes(), rel


def test_report_without_markers_marks_sections_absent(fixture_corpus, tmp_path):
    base = ["--manifest", str(fixture_corpus.manifest), "--hyp", str(fixture_corpus.hypotheses),
            "--out", str(tmp_path)]
    assert run(["score"] + base) == 0
    assert run(["report"] + base) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["per_table"] is None and report["cooccurrence"] is None
    assert sorted(p.name for p in (tmp_path / "tables").iterdir()) == ["wer.csv"]


def test_module_entry_point(fixture_corpus, tmp_path):
    proc = subprocess.run([sys.executable, "-m", "asrbias", "score", "--manifest",
                           str(fixture_corpus.manifest), "--hyp", str(fixture_corpus.hypotheses),
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr


def test_bundled_fixture_is_current(fixture_corpus):
    bundled = Path(__file__).resolve().parent.parent / "fixtures"
    if not bundled.is_dir():
        pytest.skip("bundled fixture directory not present")
    fresh = sorted(p.relative_to(fixture_corpus.root) for p in fixture_corpus.root.rglob("*")
                   if p.is_file())
    shipped = sorted(p.relative_to(bundled) for p in bundled.rglob("*") if p.is_file())
    assert fresh == shipped
    for rel in fresh:
        assert (fixture_corpus.root / rel).read_bytes() == (bundled / rel).read_bytes(), rel
