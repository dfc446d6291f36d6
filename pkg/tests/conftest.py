import pytest

from asrbias.fixture import build_fixture

# one line per acceptance criterion, printed after the run
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def fixture_corpus(tmp_path_factory):
    return build_fixture(tmp_path_factory.mktemp("fixture"))


@pytest.fixture(scope="session")
def cmudict_entries():
    """word -> list of pronunciations from the installed cmudict package."""
    cmudict = pytest.importorskip("cmudict")
    return cmudict.dict()


def long_grid(tiers, xmax):
    """Hand-written long-format TextGrid; tiers = [(name, [(a, b, label), ...])]."""
    out = [
        'File type = "ooTextFile"',
        'Object class = "TextGrid"',
        "",
        "xmin = 0 ",
        f"xmax = {xmax} ",
        "tiers? <exists> ",
        f"size = {len(tiers)} ",
        "item []: ",
    ]
    for i, (name, ivs) in enumerate(tiers, 1):
        out += [f"    item [{i}]:", '        class = "IntervalTier" ',
                f'        name = "{name}" ', "        xmin = 0 ", f"        xmax = {xmax} ",
                f"        intervals: size = {len(ivs)} "]
        for j, (a, b, label) in enumerate(ivs, 1):
            out += [f"        intervals [{j}]:", f"            xmin = {a} ",
                    f"            xmax = {b} ", f'            text = "{label}" ']
    return "\n".join(out) + "\n"


CAUGHT_GRID = long_grid(
    [("word", [(0, 0.1, ""), (0.1, 0.5, "caught"), (0.5, 0.7, "")]),
     ("phone", [(0, 0.1, ""), (0.1, 0.2, "K"), (0.2, 0.4, "AO"), (0.4, 0.5, "T"),
                (0.5, 0.7, "")])],
    0.7)


def fixture_config(info, out, **overrides):
    from asrbias.pipeline import RunConfig
    values = dict(manifest=str(info.manifest), dictionary=str(info.dictionary),
                  overlay=str(info.overlay), hypotheses=[str(info.hypotheses)],
                  markers=str(info.annotations), out=str(out))
    values.update(overrides)
    return RunConfig(**values)


@pytest.fixture(scope="session")
def full_run(fixture_corpus, tmp_path_factory):
    """(config, report) of one complete pipeline run on the fixture corpus."""
    from asrbias.pipeline import run_all
    cfg = fixture_config(fixture_corpus, tmp_path_factory.mktemp("run"))
    return cfg, run_all(cfg)
