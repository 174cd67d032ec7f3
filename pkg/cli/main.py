"""
cavityecho command line

    python -m cli.main --config config/eseem.yaml --out runs/eseem [--seed N] [--check]

Exit codes: 0 ok, 1 config error, 2 numerical or domain failure,
3 acceptance-check failure.
"""

import argparse
import sys
from pathlib import Path
from typing import List, NoReturn, Optional

import structlog

from cli.artifacts import ArtifactWriter
from cli.pipelines import RunContext, run_pipeline
from config.experiment import ExperimentConfig, load_config
from config.settings import Settings, configure_logging, get_settings
from core.exceptions import CavityEchoError, ConfigError, NumericalError
from evaluation.acceptance import AcceptanceRunner

logger = structlog.get_logger(__name__)

EXIT_OK = 0
EXIT_CONFIG = ConfigError.exit_code
EXIT_NUMERICAL = NumericalError.exit_code


class _Parser(argparse.ArgumentParser):
    """Usage mistakes are config errors (exit 1), not argparse's default 2"""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="cavityecho",
        description="Run a cavity-echo experiment pipeline from a YAML config",
    )
    parser.add_argument("--config", required=True, type=Path, help="experiment config (YAML)")
    parser.add_argument("--out", type=Path, default=None, help="output directory (default: config output_dir)")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument(
        "--check",
        action="store_true",
        help="run the acceptance checks for this experiment and exit 3 on failure",
    )
    return parser


def _resolve(args: argparse.Namespace) -> ExperimentConfig:
    config = load_config(args.config)
    if args.seed is not None:
        config = config.model_copy(update={"seed": args.seed})
    return config


def _report(exc: CavityEchoError) -> None:
    if isinstance(exc, ConfigError):
        print(str(exc), file=sys.stderr)
    else:
        context = ", ".join(f"{k}={v}" for k, v in exc.context.items())
        suffix = f" ({context})" if context else ""
        print(f"{type(exc).__name__}: {exc.message}{suffix}", file=sys.stderr)


def run(args: argparse.Namespace, settings: Settings) -> int:
    """Parse, write the manifest, run the pipeline, optionally check; returns the exit code"""
    writer: Optional[ArtifactWriter] = None
    try:
        config = _resolve(args)
        out_dir = args.out if args.out is not None else Path(config.output_dir)
        writer = ArtifactWriter(out_dir, config)
        writer.write_manifest()
        ctx = RunContext(config=config, writer=writer, base_dir=Path(args.config).parent, n_jobs=settings.n_jobs)
        run_pipeline(ctx)
        if args.check:
            report = AcceptanceRunner(seed=config.seed, n_jobs=settings.n_jobs).run_for_experiment(
                config.experiment.value
            )
            writer.write_json("checks.json", report.to_dict())
            report.raise_for_failures()
        writer.finalize(EXIT_OK)
        return EXIT_OK
    except CavityEchoError as exc:
        logger.error("run_failed", error=exc.message, exit_code=exc.exit_code, context=exc.context)
        _report(exc)
        if writer is not None:
            writer.finalize(exc.exit_code, exc)
        return exc.exit_code
    except Exception as exc:
        logger.error("run_failed_unexpectedly", error=str(exc), exc_info=True)
        wrapped = NumericalError(f"unexpected failure: {exc}")
        _report(wrapped)
        if writer is not None:
            writer.finalize(EXIT_NUMERICAL, wrapped)
        return EXIT_NUMERICAL


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = get_settings()
    except ConfigError as exc:
        _report(exc)
        return exc.exit_code
    configure_logging(settings)
    return run(args, settings)


if __name__ == "__main__":
    sys.exit(main())
