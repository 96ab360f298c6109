"""Config commands for the stagedcausal CLI."""

import os
from typing import Optional

import structlog
import typer
from rich.table import Table

from ..core.settings import CONFIG_NAME, Settings, load_settings, locate_config, save_settings
from .common import console

log = structlog.get_logger()

config_app = typer.Typer(
    help="Manage stagedcausal TOML configuration",
    no_args_is_help=True,
)


@config_app.command("init")
def config_init(
    config: str = typer.Option(CONFIG_NAME, "--config", "-c", help="Path to TOML configuration file"),
):
    """Write a configuration file with the default settings."""
    if os.path.exists(config):
        console.print(f"[yellow]Configuration file '{config}' already exists.[/]")
        raise typer.Exit(1)
    path = save_settings(config, Settings())
    console.print(f"[green]Created configuration file: {path}[/]")


@config_app.command("show")
def config_show(
    config: Optional[str] = typer.Option(None, "--config", "-c", help="Path to TOML configuration file"),
):
    """Display the effective configuration."""
    settings = load_settings(config)
    source = locate_config(config)
    table = Table(title=f"stagedcausal configuration ({source or 'defaults'})")
    table.add_column("Setting", style="cyan")
    table.add_column("Value", style="magenta")
    for section, values in settings.model_dump().items():
        for key, value in values.items():
            shown = ", ".join(str(v) for v in value) if isinstance(value, list) else str(value)
            table.add_row(f"{section}.{key}", shown)
    console.print(table)
