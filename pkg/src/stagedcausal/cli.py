"""
stagedcausal CLI: main entry point.

Staged event trees for categorical data: fit and learn stagings, query and
intervene on models, estimate treatment effects and compare estimators on
simulated data.

Commands are organized into modules:
- model: fit, learn, intervene, sample, export-dot
- effects: ate, bootstrap, cate, positivity
- simulate: estimator comparison
- config: configuration management
"""

import sys
from typing import List, Optional

import click
import structlog
import typer
from rich.console import Console

from .commands.config import config_app
from .commands.effects import ate_cmd, bootstrap_cmd, cate_cmd, positivity_cmd
from .commands.model import export_dot_cmd, fit_cmd, intervene_cmd, learn_cmd, sample_cmd
from .commands.simulate import simulate_cmd
from .core.errors import StagedCausalError
from .core.logging import setup_logging
from .core.settings import load_settings, locate_config

log = structlog.get_logger()

app = typer.Typer(
    help=(
        "stagedcausal: staged event trees for causal inference on categorical data.\n\n"
        "Machine-readable outputs go to --out files; summaries go to standard output."
    ),
    context_settings={"help_option_names": ["-h", "--help"]},
    no_args_is_help=True,
)

console = Console()

app.add_typer(config_app, name="config", help="Manage stagedcausal TOML configuration")

app.command("fit")(fit_cmd)
app.command("learn")(learn_cmd)
app.command("intervene")(intervene_cmd)
app.command("sample")(sample_cmd)
app.command("export-dot")(export_dot_cmd)
app.command("ate")(ate_cmd)
app.command("bootstrap")(bootstrap_cmd)
app.command("cate")(cate_cmd)
app.command("positivity")(positivity_cmd)
app.command("simulate")(simulate_cmd)


@app.callback()
def main_callback(
    ctx: typer.Context,
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Enable debug logging"),
    log_json: bool = typer.Option(True, "--log-json/--log-plain", help="JSON or plain-text log lines on stderr"),
    config: Optional[str] = typer.Option(None, "--config", "-c", help="Path to configuration file"),
):
    """Global setup: logging and settings."""
    setup_logging(verbose=verbose, json=log_json)
    if config and not locate_config(config):
        console.print(f"[yellow]Configuration file '{config}' not found; using defaults[/]")
    ctx.obj = {"settings": load_settings(config)}


@app.command("version")
def version_cmd():
    """Show version information."""
    from . import __version__

    console.print(f"stagedcausal version: [cyan]{__version__}[/]")


def main(argv: Optional[List[str]] = None) -> int:
    """Run the CLI and return its exit code (0 ok, 1 user error, 2 internal error)."""
    try:
        result = app(args=argv, prog_name="stagedcausal", standalone_mode=False)
    except click.exceptions.Abort:
        console.print("\n[yellow]Aborted[/]")
        return 1
    except click.ClickException as e:
        e.show()
        return 1
    except StagedCausalError as e:
        console.print(f"[red]Error: {e}[/]")
        return 1
    except Exception as e:
        log.exception("cli.internal_error", error=str(e))
        return 2
    return result if isinstance(result, int) else 0


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
