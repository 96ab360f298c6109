"""Simulation command: estimator comparison on random staged trees."""

from typing import List, Optional

import pandas as pd
import structlog
import typer
from rich.progress import BarColumn, Progress, TextColumn, TimeElapsedColumn
from rich.table import Table

from ..core.settings import resolve_threads
from ..formats.results import write_results
from ..simulation.experiment import Generator, SimConfig, run_grid
from ..simulation.generators import ParamDist
from .common import console, guarded, settings_from, split_list, to_choice

log = structlog.get_logger()


def simulate_cmd(
    ctx: typer.Context,
    generator: str = typer.Option("sevt", "--generator", help="sevt (random staged tree) or dag"),
    join: List[float] = typer.Option([0.0], "--join", help="Stage joining probability (repeatable)"),
    dist: List[str] = typer.Option(["exp"], "--dist", help="exp or unif stage probabilities (repeatable)"),
    p: int = typer.Option(8, "--p", min=3, help="Total binary variables, treatment and outcome included"),
    reps: Optional[int] = typer.Option(None, "--reps", min=1, help="Repetitions (default from config)"),
    sizes: Optional[str] = typer.Option(None, "--sizes", help="Comma-separated sample sizes"),
    estimators: Optional[str] = typer.Option(None, "--estimators", help="Comma-separated estimators"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Random seed (default from config)"),
    alpha: Optional[float] = typer.Option(None, "--alpha", help="Additive smoothing of the tree fits"),
    threads: Optional[int] = typer.Option(None, "--threads", min=1, help="Worker threads for repetitions"),
    timings: bool = typer.Option(False, "--timings", help="Record estimator runtimes (not reproducible)"),
    out: str = typer.Option(..., "--out", "-o", help="Long-format results CSV"),
    summary_out: Optional[str] = typer.Option(None, "--summary-out", help="CSV of median absolute errors"),
):
    """Compare estimators on data sampled from random generator models."""
    settings = settings_from(ctx)
    kind = to_choice(Generator, generator, "--generator")
    dists = [to_choice(ParamDist, d, "--dist") for d in dist]
    with guarded():
        try:
            config = SimConfig(
                p=p,
                generator=kind,
                sample_sizes=[int(n) for n in split_list(sizes)] or settings.simulation.sample_sizes,
                repetitions=reps or settings.simulation.repetitions,
                seed=settings.runtime.seed if seed is None else seed,
                dag_edge_prob=settings.simulation.dag_edge_prob,
                alpha=settings.fit.alpha if alpha is None else alpha,
                threads=threads or resolve_threads(settings.runtime.threads),
                timings=timings,
                **({"estimators": split_list(estimators)} if estimators else {}),
            )
        except ValueError as e:
            console.print(f"[red]Invalid simulation settings: {e}[/]")
            raise typer.Exit(1)
        total = config.repetitions * len(join) * len(dists)
        with Progress(
            TextColumn("[bold blue]Simulating"),
            BarColumn(),
            TextColumn("{task.completed}/{task.total} repetitions"),
            TimeElapsedColumn(),
            console=console,
            transient=True,
        ) as prog:
            task = prog.add_task("simulate", total=total)
            finished = {"base": 0}

            def advance(done: int, of: int) -> None:
                prog.update(task, completed=finished["base"] + done)
                if done == of:
                    finished["base"] += of

            result = run_grid(config, join, dists, on_progress=advance)
        write_results(result.records, out)
        if summary_out:
            write_results(result.summary, summary_out)

    table = Table(title="Median absolute error")
    for col in ("generator", "pi", "dist", "n", "estimator", "median_abs_error", "failures"):
        table.add_column(col, justify="right" if col in ("n", "median_abs_error", "failures") else "left")
    for row in result.summary.itertuples(index=False):
        err = row.median_abs_error
        table.add_row(
            row.generator,
            f"{row.pi:g}",
            row.dist,
            str(row.n),
            row.estimator,
            "" if pd.isna(err) else f"{err:.4f}",
            str(row.failures) if row.failures else "",
        )
    console.print(table)
    console.print(f"[green]Wrote results: {out}[/]")
