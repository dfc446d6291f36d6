"""Command-line entry point: ``asrbias {score,per,markers,stats,report,all}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from asrbias.errors import ConfigError, DataError, FitError
from asrbias.pipeline import (
    RunConfig, run_all, stage_markers, stage_per, stage_report, stage_score, stage_stats, validate,
)

EXIT_OK, EXIT_VALIDATION, EXIT_DATA = 0, 1, 2
COMMANDS = ("score", "per", "markers", "stats", "report", "all")


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; 2 is reserved for data errors here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="JSON file with RunConfig fields; flags override it")
    p.add_argument("--manifest", help="directory holding speakers.csv and utterances.csv")
    p.add_argument("--dict", dest="dictionary", help="base pronunciation dictionary (CMUdict format)")
    p.add_argument("--overlay", help="regional dictionary layered over --dict")
    p.add_argument("--hyp", dest="hypotheses", action="append",
                   help="hypothesis JSONL file (repeatable)")
    p.add_argument("--markers", help="marker realization TSV")
    p.add_argument("--word-tier", dest="word_tier")
    p.add_argument("--phone-tier", dest="phone_tier")
    p.add_argument("--stress-mode", dest="stress_mode", choices=("strip", "keep"))
    p.add_argument("--costs", dest="cost_model", choices=("sclite", "unit"),
                   help="alignment cost model (default sclite: sub 4, del 3, ins 3)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--alpha", type=float, help="significance threshold (default 0.05)")
    p.add_argument("--workers", type=int, help="threads for per-utterance scoring")
    p.add_argument("--reference-group", dest="reference_group")
    p.add_argument("--reference-system", dest="reference_system")
    p.add_argument("--cooccurrence-mode", dest="cooccurrence_mode",
                   choices=("realized", "context"))
    p.add_argument("--table-markers", dest="table_markers",
                   help="comma-separated marker codes shown in tables (default -AO,CC,IN)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="asrbias", description="ASR bias evaluation against phonetically "
                                                 "annotated corpora")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "score": "word error rates",
        "per": "phonetic error rates",
        "markers": "marker contexts and error co-occurrence",
        "stats": "mixed-effects and proportion tests on computed artifacts",
        "report": "render tables from computed artifacts",
        "all": "run every stage in order",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[_common()], help=helps[name])
    return parser


def make_config(args: argparse.Namespace) -> RunConfig:
    config = RunConfig()
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"config {args.config} must hold a JSON object")
        config = RunConfig.from_mapping(data)
    overrides = {k: v for k, v in vars(args).items()
                 if k not in ("command", "config", "verbose") and v is not None}
    if "table_markers" in overrides:
        overrides["table_markers"] = [m.strip() for m in overrides["table_markers"].split(",")
                                      if m.strip()]
    return RunConfig.from_mapping(overrides, base=config)


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return exc.code if isinstance(exc.code, int) else EXIT_VALIDATION
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        config = make_config(args)
        diags = validate(config, args.command)
    except ConfigError as exc:
        print(f"asrbias: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    fatal = [d.message for d in diags if d.level == "fatal"]
    warnings = [d.message for d in diags if d.level == "warning"]
    for msg in warnings:
        print(f"asrbias: warning: {msg}", file=sys.stderr)
    if fatal:
        for msg in fatal:
            print(f"asrbias: error: {msg}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_VALIDATION

    try:
        if args.command == "score":
            stage_score(config)
        elif args.command == "per":
            stage_per(config)
        elif args.command == "markers":
            stage_markers(config)
        elif args.command == "stats":
            stage_stats(config)
        elif args.command == "report":
            stage_report(config, warnings)
        else:
            run_all(config, warnings)
    except ConfigError as exc:
        print(f"asrbias: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (DataError, FitError) as exc:
        print(f"asrbias: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
