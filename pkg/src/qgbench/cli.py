"""Command-line entry point.

    qgbench <stage> --config run.json [--strict] [--mock script.jsonl]
    qgbench calibrate --config run.json --annotations human.jsonl [--ratings path]

Stages: ingest, generate, classify, coverage, answer, shorten, report, all.
Exit codes: 0 success, 1 validation, 2 dependency, 3 runtime failure
(including per-question failures escalated by --strict).
"""
from __future__ import annotations

import argparse
import logging
import sys

from .config import load_config
from .errors import (
    ConfigError,
    DatasetImportError,
    DependencyError,
    EmptyCorpusError,
    QGBenchError,
)
from .gateway import Gateway, HttpTransport, MockTransport
from .pipeline import STAGE_ORDER, calibrate_judge, run_stage

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_DEPENDENCY = 2
EXIT_RUNTIME = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qgbench",
        description="Generate questions from a corpus with chat models and measure them.",
    )
    parser.add_argument(
        "stage",
        choices=STAGE_ORDER + ["all", "calibrate"],
        help="pipeline stage to run",
    )
    parser.add_argument("--config", required=True, help="path to the run-config JSON file")
    parser.add_argument(
        "--strict", action="store_true", help="make per-question failures fatal"
    )
    parser.add_argument(
        "--mock",
        metavar="SCRIPT",
        help="serve responses from a JSONL mock script instead of the network",
    )
    parser.add_argument("--annotations", help="human annotation JSONL (calibrate only)")
    parser.add_argument("--ratings", help="ratings JSONL override (calibrate only)")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = load_config(args.config)

        if args.stage == "calibrate":
            if not args.annotations:
                raise ConfigError("calibrate needs --annotations")
            r = calibrate_judge(config, args.annotations, args.ratings)
            print(f"pearson_r={r:.4f}")
            return EXIT_OK

        if args.mock:
            transport = MockTransport.from_jsonl(args.mock)
        else:
            transport = HttpTransport()
        gateway = Gateway(config.cache_dir, transport, max_concurrency=config.concurrency)
        stats = run_stage(args.stage, config, gateway, strict=args.strict)
        print(f"{args.stage}: {stats}")
        return EXIT_OK
    except (ConfigError, DatasetImportError, EmptyCorpusError) as exc:
        logger.error("%s", exc)
        return EXIT_VALIDATION
    except DependencyError as exc:
        logger.error("%s", exc)
        return EXIT_DEPENDENCY
    except QGBenchError as exc:
        logger.error("%s", exc)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
