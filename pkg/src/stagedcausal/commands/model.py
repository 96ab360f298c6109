"""Model commands: fit, learn, intervene, sample, export-dot."""

from typing import List, Optional

import structlog
import typer
from rich.table import Table

from ..causal.positivity import one_sided_contexts
from ..formats.csv_data import write_csv
from ..formats.dot import export_dot
from ..formats.model_json import read_model, staging_from_model_file, write_model
from ..formats.results import write_distribution
from ..learning.bhc import learn_bhc
from ..learning.hclust import learn_hclust
from ..learning.scores import bic
from ..trees.build import build_event_tree, independence_staging, prune_unobserved, saturated_staging
from ..trees.fitting import fit_mle
from ..trees.inference import InterventionSpec, intervene, marginal, sample
from ..trees.models import StagedTreeModel, Staging
from .common import console, frame_for, guarded, load_dataset, parse_assignment, settings_from, split_list

log = structlog.get_logger()


def print_model_summary(model: StagedTreeModel, title: str) -> None:
    table = Table(title=title)
    table.add_column("Variable", style="cyan")
    table.add_column("Levels")
    table.add_column("Contexts", justify="right")
    table.add_column("Stages", justify="right", style="magenta")
    table.add_column("Undefined", justify="right")
    for i, var in enumerate(model.tree.variables):
        undefined = sum(1 for j, _ in model.undefined if j == i)
        table.add_row(
            var.name,
            ", ".join(var.levels),
            str(model.tree.n_contexts(i)),
            str(model.staging.n_stages(i)),
            str(undefined) if undefined else "",
        )
    console.print(table)


def fit_cmd(
    ctx: typer.Context,
    data: str = typer.Option(..., "--data", "-d", help="CSV data file with header"),
    order: Optional[str] = typer.Option(None, "--order", help="Comma-separated causal order"),
    schema: Optional[str] = typer.Option(None, "--schema", help="JSON schema with variables and levels"),
    staging: str = typer.Option(
        "saturated", "--staging", help="saturated, independence, or a model JSON to take the staging from"
    ),
    alpha: Optional[float] = typer.Option(None, "--alpha", help="Additive smoothing (default from config)"),
    prune: Optional[bool] = typer.Option(None, "--prune/--no-prune", help="Drop unobserved contexts"),
    out: str = typer.Option(..., "--out", "-o", help="Model JSON to write"),
):
    """Fit stage probabilities for a given staging."""
    settings = settings_from(ctx)
    with guarded():
        source: Optional[Staging] = None
        tree = None
        if staging not in ("saturated", "independence"):
            template = read_model(staging)
            tree = build_event_tree(template.tree.variables)
        dataset = load_dataset(data, order, schema, tree=tree)
        tree = build_event_tree(dataset.variables)
        if settings.learning.prune_unobserved if prune is None else prune:
            tree = prune_unobserved(tree, dataset)
        if staging == "saturated":
            source = saturated_staging(tree)
        elif staging == "independence":
            source = independence_staging(tree)
        else:
            full, _ = staging_from_model_file(staging, tree)
            source = Staging(
                tuple({c: full.stage_of(i, c) for c in tree.contexts(i)} for i in range(tree.p))
            )
        model = fit_mle(tree, source, dataset, alpha=settings.fit.alpha if alpha is None else alpha)
        write_model(model, out)
    print_model_summary(model, f"Fitted model ({dataset.n} rows)")
    console.print(f"[green]Wrote model: {out}[/]")


def learn_cmd(
    ctx: typer.Context,
    data: str = typer.Option(..., "--data", "-d", help="CSV data file with header"),
    method: Optional[str] = typer.Option(None, "--method", "-m", help="bhc or hclust (default from config)"),
    order: Optional[str] = typer.Option(None, "--order", help="Comma-separated causal order"),
    schema: Optional[str] = typer.Option(None, "--schema", help="JSON schema with variables and levels"),
    alpha: Optional[float] = typer.Option(None, "--alpha", help="Additive smoothing of the final fit"),
    prune: Optional[bool] = typer.Option(None, "--prune/--no-prune", help="Drop unobserved contexts"),
    out: str = typer.Option(..., "--out", "-o", help="Model JSON to write"),
    show_trace: bool = typer.Option(False, "--trace", help="Print the BIC after every merge (bhc)"),
):
    """Learn a staging by BIC (bhc) or by clustering (hclust) and fit it."""
    settings = settings_from(ctx)
    method = method or settings.learning.default_learner
    if method not in ("bhc", "hclust"):
        console.print(f"[red]Unknown method '{method}'; choose bhc or hclust[/]")
        raise typer.Exit(1)
    with guarded():
        dataset = load_dataset(data, order, schema)
        tree = build_event_tree(dataset.variables)
        if settings.learning.prune_unobserved if prune is None else prune:
            tree = prune_unobserved(tree, dataset)
        scored = learn_bhc(tree, dataset) if method == "bhc" else learn_hclust(tree, dataset)
        model = fit_mle(tree, scored.staging, dataset, alpha=settings.fit.alpha if alpha is None else alpha)
        write_model(model, out)
        baseline = bic(tree, saturated_staging(tree), dataset).bic
    print_model_summary(model, f"Learned staging ({method})")
    console.print(f"BIC: [cyan]{scored.bic:.4f}[/] (saturated {baseline:.4f})")
    if scored.flagged_contexts:
        console.print(
            f"[yellow]{len(scored.flagged_contexts)} context(s) had no observations and were clustered as uniform[/]"
        )
    if show_trace and scored.trace:
        for step, value in enumerate(scored.trace):
            console.print(f"  step {step}: {value:.4f}")
    console.print(f"[green]Wrote model: {out}[/]")


def intervene_cmd(
    model_path: str = typer.Option(..., "--model", help="Model JSON"),
    do: List[str] = typer.Option(..., "--do", help="Intervention NAME=LEVEL (repeatable or comma-separated)"),
    out: Optional[str] = typer.Option(None, "--out", "-o", help="Write the intervened model JSON"),
    marginal_of: Optional[str] = typer.Option(
        None, "--marginal", help="Comma-separated variables whose interventional marginal to report"
    ),
    table_out: Optional[str] = typer.Option(None, "--table-out", help="CSV for the marginal table"),
):
    """Apply do(...) to a model; optionally report an interventional marginal."""
    with guarded():
        model = read_model(model_path)
        spec = InterventionSpec.from_labels(model.tree, parse_assignment(do))
        result = intervene(model, spec)
        if out:
            write_model(result, out)
            console.print(f"[green]Wrote intervened model: {out}[/]")
        if marginal_of:
            dist = marginal(result, split_list(marginal_of))
            table = Table(title="Interventional distribution")
            for name in dist.scope:
                table.add_column(name, style="cyan")
            table.add_column("P", justify="right", style="magenta")
            for row in dist.to_frame().itertuples(index=False):
                *labels, prob = row
                table.add_row(*[str(x) for x in labels], f"{prob:.6f}")
            console.print(table)
            if table_out:
                write_distribution(dist, table_out)


def sample_cmd(
    ctx: typer.Context,
    model_path: str = typer.Option(..., "--model", help="Model JSON"),
    n: int = typer.Option(..., "--n", "-n", min=1, help="Rows to draw"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Random seed (default from config)"),
    out: str = typer.Option(..., "--out", "-o", help="CSV to write"),
    schema_out: Optional[str] = typer.Option(
        None, "--schema-out", help="Schema JSON to write (default: <out>.schema.json)"
    ),
    allow_undefined: bool = typer.Option(False, "--allow-undefined", help="Sample through undefined stages"),
):
    """Draw i.i.d. rows from a model."""
    settings = settings_from(ctx)
    with guarded():
        model = read_model(model_path)
        data = sample(model, n, seed=settings.runtime.seed if seed is None else seed, allow_undefined=allow_undefined)
        sidecar = write_csv(data, out, schema_out=schema_out)
    console.print(f"[green]Wrote {data.n} rows: {out} (schema: {sidecar})[/]")


def export_dot_cmd(
    model_path: str = typer.Option(..., "--model", help="Model JSON"),
    out: str = typer.Option(..., "--out", "-o", help="DOT file to write"),
    show_probs: bool = typer.Option(False, "--show-probs", help="Annotate nodes and edges with probabilities"),
    data: Optional[str] = typer.Option(None, "--data", "-d", help="Data for positivity highlighting"),
    treatment: Optional[str] = typer.Option(None, "--treatment", help="Treatment variable (with --data)"),
    outcome: Optional[str] = typer.Option(None, "--outcome", help="Outcome variable (with --data)"),
):
    """Write the staged tree as Graphviz DOT, one colour per stage."""
    with guarded():
        model = read_model(model_path)
        highlight = []
        if data:
            if not treatment or not outcome:
                console.print("[red]--data needs --treatment and --outcome for highlighting[/]")
                raise typer.Exit(1)
            dataset = load_dataset(data, tree=model.tree)
            frame = frame_for(model.tree, treatment, outcome)
            highlight = [(frame.treatment, z) for z in one_sided_contexts(dataset, frame, model.tree)]
        text = export_dot(model, show_probs=show_probs, highlight=highlight)
        with open(out, "w") as f:
            f.write(text)
    if highlight:
        console.print(f"[yellow]{len(highlight)} treatment context(s) with one treatment arm highlighted[/]")
    console.print(f"[green]Wrote DOT: {out}[/]")
