"""
Command line entry point: `maskcheck verify FILE --order d --width κ ...`.

Exit codes: 0 secure, 1 leaky, 2 undecided sets remain, 3 input or
configuration error.
"""

import logging
import sys
from pathlib import Path
from typing import List, Optional

import click

from app.application.use_cases.verification_use_cases import VerificationUseCases
from app.core.config import settings
from app.core.database import Base, SessionLocal, engine
from app.core.exceptions import MaskcheckError, ParseError
from app.core.logging_config import configure_logging
from app.domain.entities.exploration import ExplorationStats
from app.domain.entities.report import SUPPORTED_WIDTHS, RunConfig, RunMode
from app.domain.ports.pattern_repository import PatternRepository
from app.infrastructure.repositories.pattern_repository_impl import (
    JsonLinesPatternRepository,
    PatternRepositoryImpl,
)
from app.infrastructure.services.parser_service import ProgramPrinter
from app.infrastructure.services.report_generator import ReportGenerator

logger = logging.getLogger(__name__)

EXIT_ERROR = 3


def open_pattern_store(path: Optional[str]) -> PatternRepository:
    if path:
        return JsonLinesPatternRepository(path)
    Base.metadata.create_all(bind=engine)
    return PatternRepositoryImpl(SessionLocal())


def _progress(stats: ExplorationStats, calls: int) -> None:
    logger.info(f"Explored {calls} calls: {stats.checks} checks, {stats.extension_checks} extension checks")


def _width(ctx, param, value: Optional[str]) -> Optional[int]:
    return int(value) if value is not None else None


@click.group(help="Verify masked programs against the d-threshold probing model.")
def cli() -> None:
    pass


@cli.command("verify")
@click.argument("file")
@click.option("--order", "-d", type=int, help=f"Probing order (default {settings.ORDER}).")
@click.option(
    "--width", "-k",
    type=click.Choice([str(w) for w in SUPPORTED_WIDTHS]),
    callback=_width,
    help=f"Word width in bits (default {settings.WIDTH}).",
)
@click.option("--mode", type=click.Choice([m.value for m in RunMode]), help="`types` stops after the type phase.")
@click.option("--workers", "-j", type=int, help="Worker threads for exploration and counting.")
@click.option("--bit-budget", type=int, help="Counting budget in bits.")
@click.option("--smt-dir", help="Write SMT-LIB encodings of over-budget sets here.")
@click.option("--solver", help="Solver for over-budget sets: `z3` or a command (`{file}` is substituted).")
@click.option("--patterns", help="Line-delimited JSON pattern store (default: PATTERN_DB_URL).")
@click.option("--format", "report_format", type=click.Choice(["text", "json"]), help="Report format.")
@click.option("--output", "-o", help="Write the report to a file instead of stdout.")
@click.option("--emit-ssa", is_flag=True, help="Print the elaborated program and stop.")
@click.option("--log-level", help=f"Logging level (default {settings.LOG_LEVEL}).")
def verify(file: str, output: Optional[str], emit_ssa: bool, log_level: Optional[str], **options) -> int:
    """Verify a .mask program."""
    configure_logging(log_level)
    try:
        return run_verify(file, output, emit_ssa, **options)
    except ParseError as exc:
        click.echo(exc.diagnostic(), err=True)
    except MaskcheckError as exc:
        line = getattr(exc, "line", 0)
        column = getattr(exc, "column", 0)
        click.echo(f"{file}:{line}:{column}: error: {exc}", err=True)
    except (OSError, ValueError) as exc:
        click.echo(f"{file}: error: {exc}", err=True)
    return EXIT_ERROR


def run_verify(file: str, output: Optional[str], emit_ssa: bool, **options) -> int:
    config = RunConfig.from_settings(path=file, **options)

    if emit_ssa:
        program = VerificationUseCases().load(config)
        click.echo(ProgramPrinter.render(program), nl=False)
        return 0

    store = open_pattern_store(config.patterns) if config.mode == RunMode.FULL else None
    report = VerificationUseCases(pattern_store=store).run(config, progress=_progress)

    if config.report_format == "json":
        text = ReportGenerator.generate_json(report) + "\n"
    else:
        text = ReportGenerator.generate_text(report)
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)
    return report.exit_code


def main(argv: Optional[List[str]] = None) -> int:
    """Run the command line and return its exit code; usage errors exit with 3."""
    try:
        return cli.main(args=argv, prog_name="maskcheck", standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
    except click.Abort:
        click.echo("Aborted!", err=True)
    return EXIT_ERROR


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
