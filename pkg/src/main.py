import json
import sys
from pathlib import Path
from typing import Annotated, List, Optional

import click
import typer

from src.commands import data, evaluation, features, training
from src.commands.common import EXIT_FAILURE, EXIT_USAGE, emit_error
from src.container.container import TOOL_VERSION, get_container
from src.container.log_config import configure_logging


def _show_version(value: bool) -> None:
    if value:
        typer.echo(f"uregm {TOOL_VERSION}")
        raise typer.Exit()


def _load_config(ctx: typer.Context, path: Optional[Path]) -> None:
    """JSON sections keyed by command name become click defaults, so explicit flags still win."""
    if path is None:
        return
    try:
        sections = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise typer.BadParameter(f"cannot read config {path}: {e}", param_hint="--config") from None
    if not isinstance(sections, dict):
        raise typer.BadParameter("config must be a JSON object keyed by command name", param_hint="--config")
    ctx.default_map = {**(ctx.default_map or {}), **sections}


def create_app() -> typer.Typer:
    app = typer.Typer(
        name="uregm",
        help="Predict CPU and memory changes caused by refactoring code smells.",
        no_args_is_help=True,
        add_completion=False,
        pretty_exceptions_enable=False,
    )

    @app.callback()
    def configure(
        ctx: typer.Context,
        version: Annotated[bool, typer.Option("--version", callback=_show_version, is_eager=True)] = False,
        config: Annotated[Optional[Path], typer.Option("--config", help="JSON defaults per command.")] = None,
        log_level: Annotated[Optional[str], typer.Option("--log-level", help="Default UREGM_LOG_LEVEL or INFO.")] = None,
        error_format: Annotated[str, typer.Option("--format", "--error-format", click_type=click.Choice(["text", "json"]),
                                                  help="Error output on stderr.")] = "text",
        timing: Annotated[Optional[bool], typer.Option("--timing/--no-timing",
                                                       help="Record wall times (off for byte-identical output).")] = None,
    ):
        container = get_container()
        container.override(log_level=log_level.upper() if log_level else None, timing=timing,
                           error_format=error_format)
        try:
            configure_logging(container.settings.log_level)
        except ValueError as e:
            raise typer.BadParameter(str(e), param_hint="--log-level") from None
        _load_config(ctx, config)

    data.register(app)
    features.register(app)
    training.register(app)
    evaluation.register(app)
    return app


app = create_app()


ERROR_FORMAT_FLAGS = ("--format", "--error-format")
# global options that take a value
VALUED_GLOBALS = ("--config", "--log-level") + ERROR_FORMAT_FLAGS


def _requested_error_format(argv: List[str]) -> str:
    """Error format among the global options; command options of the same name are not consulted."""
    requested = "text"
    i = 0
    while i < len(argv) and argv[i].startswith("-"):
        flag, _, inline = argv[i].partition("=")
        value = inline if inline else (argv[i + 1] if i + 1 < len(argv) else "")
        if flag in ERROR_FORMAT_FLAGS:
            requested = value
        i += 1 if inline or flag not in VALUED_GLOBALS else 2
    return "json" if requested == "json" else "text"


def run(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    command = typer.main.get_command(app)
    try:
        result = command.main(args=argv, prog_name="uregm", standalone_mode=False)
    except click.UsageError as e:
        if _requested_error_format(argv) == "json":
            emit_error("UsageError", e.format_message(), EXIT_USAGE, error_format="json")
        else:
            e.show()
        return EXIT_USAGE
    except click.ClickException as e:
        e.show()
        return e.exit_code
    except click.Abort:
        return EXIT_FAILURE
    return result if isinstance(result, int) else 0


def main() -> None:
    sys.exit(run())
