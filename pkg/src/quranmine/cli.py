"""Command-line entry point: run the whole pipeline or a single stage."""
from __future__ import annotations

import argparse
import sys

from .arabic import ConfigError
from .corpus import CorpusError
from .mining import MiningError
from .ontology import OntologyError
from .pipeline import (
    STAGES, PipelineError, default_config_path, load_config, run_pipeline, run_stage,
)
from .relations import LexiconError
from .terms import TermError

_MODULE_OF = {
    CorpusError: "corpus",
    ConfigError: "arabic",
    TermError: "terms",
    MiningError: "mining",
    LexiconError: "relations",
    OntologyError: "ontology",
    PipelineError: "pipeline",
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quranmine",
        description="Mine a concept ontology from a verse-segmented corpus "
                    "via association rules.",
    )
    parser.add_argument("--config", default=None,
                        help="pipeline config (YAML); defaults to the bundled config")
    parser.add_argument("--corpus", default=None, help="override the corpus path")
    parser.add_argument("--suras", default=None,
                        help="override sura selection: comma-separated list or 'all'")
    parser.add_argument("--out", default=None, help="override the output directory")
    parser.add_argument("--seedless", action="store_true",
                        help="run each stage twice and assert byte-identical outputs")
    sub = parser.add_subparsers(dest="command")
    run = sub.add_parser("run", help="run the full pipeline (default)")
    run.add_argument("--stage", choices=STAGES, default=None,
                     help="run only this stage")
    for name in STAGES:
        sub.add_parser(name, help=f"run the {name} stage")
    return parser


def _parse_suras(value: str | None):
    if value is None:
        return None
    if value.strip() == "all":
        return "all"
    try:
        return tuple(int(s) for s in value.split(",") if s.strip())
    except ValueError:
        raise PipelineError(f"--suras must be a comma-separated list or 'all', got {value!r}") from None


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config_path = args.config if args.config else default_config_path()
        cfg = load_config(
            config_path,
            corpus_override=args.corpus,
            suras_override=_parse_suras(args.suras),
            out_override=args.out,
        )
        command = args.command or "run"
        stage = getattr(args, "stage", None)
        if command == "run" and stage:
            command = stage
        if command == "run":
            results = run_pipeline(cfg, seedless=args.seedless)
            for name, artifacts in results.items():
                print(f"{name}: wrote {', '.join(sorted(artifacts))}")
        else:
            artifacts = run_stage(command, cfg, seedless=args.seedless)
            print(f"{command}: wrote {', '.join(sorted(artifacts))}")
        print(f"artifacts in {cfg.out_dir}")
        return 0
    except (CorpusError, ConfigError, TermError, MiningError, LexiconError,
            OntologyError, PipelineError) as exc:
        module = next(
            (m for t, m in _MODULE_OF.items() if isinstance(exc, t)), "pipeline")
        print(f"quranmine: {module}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
