"""Helpers shared by the CLI commands: settings, data loading, error mapping."""

from contextlib import contextmanager
from typing import Dict, Iterator, List, Optional

import structlog
import typer
from rich.console import Console

from ..causal.models import CausalFrame
from ..core.errors import StagedCausalError
from ..core.settings import Settings, load_settings
from ..formats.csv_data import read_csv, read_schema
from ..trees.models import Dataset, EventTree, SchemaError

console = Console()
log = structlog.get_logger()

USER_ERROR = 1
INTERNAL_ERROR = 2


def settings_from(ctx: Optional[typer.Context]) -> Settings:
    """Settings loaded by the root callback, or the default lookup."""
    obj = ctx.find_root().obj if ctx is not None else None
    if isinstance(obj, dict) and "settings" in obj:
        return obj["settings"]
    return load_settings(None)


@contextmanager
def guarded() -> Iterator[None]:
    """Map user errors to exit code 1 and anything unexpected to 2."""
    try:
        yield
    except typer.Exit:
        raise
    except StagedCausalError as e:
        console.print(f"[red]Error: {e}[/]")
        raise typer.Exit(USER_ERROR)
    except Exception as e:
        log.exception("cli.internal_error", error=str(e))
        console.print(f"[red]Internal error: {e}[/]")
        raise typer.Exit(INTERNAL_ERROR)


def split_list(raw: Optional[str]) -> List[str]:
    if not raw:
        return []
    return [part.strip() for part in raw.split(",") if part.strip()]


def parse_assignment(raw: List[str]) -> Dict[str, str]:
    """``["A=x,B=y", "C=z"]`` -> ``{"A": "x", "B": "y", "C": "z"}``."""
    out: Dict[str, str] = {}
    for chunk in raw:
        for item in split_list(chunk):
            name, sep, value = item.partition("=")
            if not sep or not name.strip():
                raise SchemaError(f"expected NAME=LEVEL, got '{item}'")
            out[name.strip()] = value.strip()
    return out


def resolve_order(
    columns: List[str],
    order: Optional[str],
    treatment: Optional[str] = None,
    outcome: Optional[str] = None,
) -> List[str]:
    """Explicit ``--order``, or covariates in file order then treatment then outcome."""
    if order:
        return split_list(order)
    if treatment is None or outcome is None:
        raise SchemaError("the causal variable order is required: pass --order or --schema")
    rest = [c for c in columns if c not in (treatment, outcome)]
    log.warning("cli.order_inferred", order=[*rest, treatment, outcome])
    console.print(
        f"[yellow]No --order given; using {', '.join([*rest, treatment, outcome])}[/]"
    )
    return [*rest, treatment, outcome]


def load_dataset(
    data: str,
    order: Optional[str] = None,
    schema: Optional[str] = None,
    treatment: Optional[str] = None,
    outcome: Optional[str] = None,
    tree: Optional[EventTree] = None,
) -> Dataset:
    """Read ``data`` in causal order.

    The order comes from ``--order``, else the schema file, else a loaded
    model's tree, else covariates followed by treatment and outcome.
    """
    variables = list(tree.variables) if tree is not None else None
    if schema:
        variables = read_schema(schema)
    if order or variables is not None:
        names = split_list(order) if order else [v.name for v in variables]
        return read_csv(data, order=names, schema=variables)
    header = read_csv(data)
    names = resolve_order(list(header.names), None, treatment, outcome)
    return header.reorder(names)


def frame_for(
    tree: EventTree,
    treatment: str,
    outcome: str,
    treated: Optional[str] = None,
    positive: Optional[str] = None,
) -> CausalFrame:
    return CausalFrame.from_names(tree, treatment, outcome, positive_outcome=positive, treated=treated)


def to_choice(enum_cls, value: str, option: str):
    """Enum member for a CLI string, exiting with a usage message when unknown."""
    try:
        return enum_cls(value)
    except ValueError:
        allowed = ", ".join(m.value for m in enum_cls)
        console.print(f"[red]Invalid {option} '{value}'; choose from {allowed}[/]")
        raise typer.Exit(USER_ERROR)
