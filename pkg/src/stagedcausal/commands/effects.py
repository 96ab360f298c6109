"""Causal commands: ate, bootstrap, cate, positivity."""

import json
from typing import Dict, List, Optional

import structlog
import typer
from rich.progress import BarColumn, Progress, TextColumn, TimeElapsedColumn
from rich.table import Table

from ..causal.baselines import ComponentModel, IrlsOptions, baseline_aipw, baseline_ipw, baseline_outcome_regression
from ..causal.bootstrap import BootstrapConfig, EstimatorKind, Learner, bootstrap_ate, estimate_pipeline
from ..causal.estimators import baseline_full_stratification, cate
from ..causal.models import AteEstimate, CausalFrame, PositivityPolicy
from ..causal.positivity import positivity_report
from ..core.settings import Settings, resolve_threads
from ..formats.model_json import read_model, staging_from_model_file
from ..formats.results import write_estimate, write_replicates
from ..trees.build import build_event_tree
from ..trees.models import Dataset, Prefix
from .common import console, frame_for, guarded, load_dataset, parse_assignment, settings_from, to_choice

log = structlog.get_logger()

TREE_ESTIMATORS = ("randomized", "ps-stratified")
BASELINES = ("full", "q.model", "ipw", "aipw")


def print_estimate(est: AteEstimate) -> None:
    console.print(f"Estimator: [cyan]{est.estimator}[/]")
    console.print(f"ATE: [bold magenta]{est.ate:.4f}[/]")
    if est.ci is not None:
        extra = f" from {est.ci.n_bootstrap} replicates" if est.ci.n_bootstrap else ""
        console.print(f"{est.ci.level:.0%} CI: ({est.ci.lower:.4f}, {est.ci.upper:.4f}){extra}")
    if est.per_stratum:
        table = Table(title="Strata")
        table.add_column("Stratum", style="cyan")
        table.add_column("Weight", justify="right")
        table.add_column("Effect", justify="right", style="magenta")
        table.add_column("Note")
        for s in est.per_stratum:
            note = s.reason or ""
            if s.imputed:
                note = f"imputed: {note}"
            table.add_row(
                s.stratum,
                f"{s.weight:.4f}",
                "" if s.effect is None else f"{s.effect:.4f}",
                note,
            )
        console.print(table)
    diag = est.diagnostics
    if diag.excluded_strata:
        console.print(f"[yellow]Excluded strata (positivity): {', '.join(diag.excluded_strata)}[/]")
    if diag.imputed_strata:
        console.print(f"[yellow]Imputed strata: {', '.join(diag.imputed_strata)}[/]")
    if diag.undefined_stages:
        console.print(f"[yellow]Undefined stages: {', '.join(diag.undefined_stages)}[/]")
    if diag.failed_replicates:
        console.print(f"[yellow]Failed replicates: {diag.failed_replicates}[/]")
    for msg in diag.messages:
        console.print(f"[yellow]{msg}[/]")


def _baseline(name: str, data: Dataset, frame: CausalFrame, settings: Settings, positivity: PositivityPolicy) -> AteEstimate:
    est = settings.estimation
    irls = IrlsOptions(max_iter=est.irls_max_iter, tol=est.irls_tol, ridge=est.irls_ridge)
    if name == "full":
        return baseline_full_stratification(data, frame, positivity)
    if name == "q.model":
        return baseline_outcome_regression(data, frame, irls=irls)
    if name == "ipw":
        return baseline_ipw(data, frame, clip=est.propensity_clip, irls=irls)
    return baseline_aipw(
        data,
        frame,
        outcome_model=ComponentModel.LOGISTIC,
        propensity_model=ComponentModel.LOGISTIC,
        clip=est.propensity_clip,
        irls=irls,
    )


def _treatment_stages(path: Optional[str], data: Dataset, frame: CausalFrame) -> Optional[Dict[Prefix, str]]:
    if not path:
        return None
    staging, _ = staging_from_model_file(path, build_event_tree(data.variables))
    return dict(staging.stages[frame.treatment])


def run_ate(
    ctx: typer.Context,
    data: str,
    treatment: str,
    outcome: str,
    order: Optional[str],
    schema: Optional[str],
    learner: Optional[str],
    estimator: str,
    replicates: int,
    seed: Optional[int],
    alpha: Optional[float],
    positivity: Optional[str],
    ci_level: Optional[float],
    threads: Optional[int],
    treated: Optional[str],
    positive: Optional[str],
    merge_strata: Optional[str],
    out: Optional[str],
    replicates_out: Optional[str],
) -> None:
    settings = settings_from(ctx)
    if estimator not in TREE_ESTIMATORS + BASELINES:
        console.print(f"[red]Unknown estimator '{estimator}'; choose from {', '.join(TREE_ESTIMATORS + BASELINES)}[/]")
        raise typer.Exit(1)
    with guarded():
        dataset = load_dataset(data, order, schema, treatment=treatment, outcome=outcome)
        frame = frame_for(build_event_tree(dataset.variables), treatment, outcome, treated, positive)
        policy = to_choice(PositivityPolicy, positivity or settings.estimation.positivity, "--positivity")
        chosen = to_choice(Learner, learner or settings.learning.default_learner, "--learner")
        if estimator in BASELINES:
            if replicates:
                console.print("[yellow]--bootstrap applies to the tree estimators only; ignored[/]")
            est = _baseline(estimator, dataset, frame, settings, policy)
        else:
            kind = EstimatorKind(estimator)
            stages = _treatment_stages(merge_strata, dataset, frame)
            fit_alpha = settings.fit.alpha if alpha is None else alpha
            if replicates:
                config = BootstrapConfig(
                    learner=chosen,
                    estimator=kind,
                    replicates=replicates,
                    seed=settings.runtime.seed if seed is None else seed,
                    ci_level=settings.bootstrap.ci_level if ci_level is None else ci_level,
                    alpha=fit_alpha,
                    positivity=policy,
                    prune=settings.learning.prune_unobserved,
                    max_failure_rate=settings.bootstrap.max_failure_rate,
                    threads=threads or resolve_threads(settings.runtime.threads),
                )
                with Progress(
                    TextColumn("[bold blue]Bootstrap"),
                    BarColumn(),
                    TextColumn("{task.completed}/{task.total}"),
                    TimeElapsedColumn(),
                    console=console,
                    transient=True,
                ) as prog:
                    task = prog.add_task("bootstrap", total=replicates)
                    est = bootstrap_ate(
                        dataset,
                        frame,
                        config,
                        on_progress=lambda done, total: prog.update(task, completed=done),
                        treatment_stages=stages,
                    )
            else:
                est = estimate_pipeline(
                    dataset,
                    frame,
                    chosen,
                    kind,
                    fit_alpha,
                    policy,
                    settings.learning.prune_unobserved,
                    stages,
                )
        if out:
            write_estimate(est, out)
        if replicates_out:
            if not est.replicates:
                console.print("[yellow]No bootstrap replicates to write[/]")
            else:
                write_replicates(est.replicates, replicates_out)
    print_estimate(est)
    if out:
        console.print(f"[green]Wrote report: {out}[/]")


def ate_cmd(
    ctx: typer.Context,
    data: str = typer.Option(..., "--data", "-d", help="CSV data file with header"),
    treatment: str = typer.Option(..., "--treatment", help="Binary treatment variable"),
    outcome: str = typer.Option(..., "--outcome", help="Binary outcome variable"),
    order: Optional[str] = typer.Option(None, "--order", help="Comma-separated causal order"),
    schema: Optional[str] = typer.Option(None, "--schema", help="JSON schema with variables and levels"),
    learner: Optional[str] = typer.Option(None, "--learner", help="bhc or hclust (default from config)"),
    estimator: str = typer.Option(
        "randomized", "--estimator", help="randomized, ps-stratified, full, q.model, ipw or aipw"
    ),
    bootstrap: int = typer.Option(0, "--bootstrap", min=0, help="Bootstrap replicates (0 = point estimate)"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Random seed (default from config)"),
    alpha: Optional[float] = typer.Option(None, "--alpha", help="Additive smoothing"),
    positivity: Optional[str] = typer.Option(None, "--positivity", help="exclude or impute violating strata"),
    ci_level: Optional[float] = typer.Option(None, "--ci-level", help="Interval level"),
    threads: Optional[int] = typer.Option(None, "--threads", min=1, help="Worker threads for replicates"),
    treated: Optional[str] = typer.Option(None, "--treated", help="Level label of the treated arm"),
    positive: Optional[str] = typer.Option(None, "--positive-outcome", help="Level label counted as Y=1"),
    merge_strata: Optional[str] = typer.Option(
        None, "--merge-violating-strata", help="Model JSON whose treatment staging replaces the learned one"
    ),
    out: Optional[str] = typer.Option(None, "--out", "-o", help="JSON report"),
    replicates_out: Optional[str] = typer.Option(None, "--replicates-out", help="CSV of replicate ATEs"),
):
    """Estimate the average treatment effect from data."""
    run_ate(
        ctx, data, treatment, outcome, order, schema, learner, estimator, bootstrap, seed, alpha,
        positivity, ci_level, threads, treated, positive, merge_strata, out, replicates_out,
    )


def bootstrap_cmd(
    ctx: typer.Context,
    data: str = typer.Option(..., "--data", "-d", help="CSV data file with header"),
    treatment: str = typer.Option(..., "--treatment", help="Binary treatment variable"),
    outcome: str = typer.Option(..., "--outcome", help="Binary outcome variable"),
    order: Optional[str] = typer.Option(None, "--order", help="Comma-separated causal order"),
    schema: Optional[str] = typer.Option(None, "--schema", help="JSON schema with variables and levels"),
    learner: Optional[str] = typer.Option(None, "--learner", help="bhc or hclust (default from config)"),
    estimator: str = typer.Option("randomized", "--estimator", help="randomized or ps-stratified"),
    replicates: Optional[int] = typer.Option(
        None, "--bootstrap", "--replicates", "-B", min=2, help="Replicates (default from config)"
    ),
    seed: Optional[int] = typer.Option(None, "--seed", help="Random seed (default from config)"),
    alpha: Optional[float] = typer.Option(None, "--alpha", help="Additive smoothing"),
    positivity: Optional[str] = typer.Option(None, "--positivity", help="exclude or impute violating strata"),
    ci_level: Optional[float] = typer.Option(None, "--ci-level", help="Interval level"),
    threads: Optional[int] = typer.Option(None, "--threads", min=1, help="Worker threads"),
    treated: Optional[str] = typer.Option(None, "--treated", help="Level label of the treated arm"),
    positive: Optional[str] = typer.Option(None, "--positive-outcome", help="Level label counted as Y=1"),
    merge_strata: Optional[str] = typer.Option(
        None, "--merge-violating-strata", help="Model JSON whose treatment staging replaces the learned one"
    ),
    out: Optional[str] = typer.Option(None, "--out", "-o", help="JSON report"),
    replicates_out: Optional[str] = typer.Option(None, "--replicates-out", help="CSV of replicate ATEs"),
):
    """Bootstrap the learn-fit-estimate pipeline for a mean ATE and percentile CI."""
    if estimator not in TREE_ESTIMATORS:
        console.print(f"[red]bootstrap supports {', '.join(TREE_ESTIMATORS)}[/]")
        raise typer.Exit(1)
    count = replicates or settings_from(ctx).bootstrap.replicates
    run_ate(
        ctx, data, treatment, outcome, order, schema, learner, estimator, count, seed, alpha,
        positivity, ci_level, threads, treated, positive, merge_strata, out, replicates_out,
    )


def cate_cmd(
    model_path: str = typer.Option(..., "--model", help="Fitted model JSON"),
    treatment: str = typer.Option(..., "--treatment", help="Binary treatment variable"),
    outcome: str = typer.Option(..., "--outcome", help="Binary outcome variable"),
    z: List[str] = typer.Option(..., "--z", help="Covariate assignment NAME=LEVEL (repeatable or comma-separated)"),
    treated: Optional[str] = typer.Option(None, "--treated", help="Level label of the treated arm"),
    positive: Optional[str] = typer.Option(None, "--positive-outcome", help="Level label counted as Y=1"),
    out: Optional[str] = typer.Option(None, "--out", "-o", help="JSON with the CATE"),
):
    """Conditional treatment effect for one covariate assignment."""
    with guarded():
        model = read_model(model_path)
        frame = frame_for(model.tree, treatment, outcome, treated, positive)
        assignment = parse_assignment(z)
        value = cate(model, frame, assignment)
        if out:
            with open(out, "w") as f:
                json.dump({"covariates": assignment, "cate": value}, f, indent=2)
                f.write("\n")
    label = ", ".join(f"{k}={v}" for k, v in assignment.items())
    console.print(f"CATE at {label}: [bold magenta]{value:.4f}[/]")


def positivity_cmd(
    data: str = typer.Option(..., "--data", "-d", help="CSV data file with header"),
    treatment: str = typer.Option(..., "--treatment", help="Binary treatment variable"),
    outcome: str = typer.Option(..., "--outcome", help="Binary outcome variable"),
    order: Optional[str] = typer.Option(None, "--order", help="Comma-separated causal order"),
    schema: Optional[str] = typer.Option(None, "--schema", help="JSON schema with variables and levels"),
    model_path: Optional[str] = typer.Option(None, "--model", help="Model JSON for per-stage counts"),
    treated: Optional[str] = typer.Option(None, "--treated", help="Level label of the treated arm"),
    show_all: bool = typer.Option(False, "--all", help="List every cell, not only flagged ones"),
    out: Optional[str] = typer.Option(None, "--out", "-o", help="JSON report"),
):
    """Treated/untreated counts per covariate context and treatment stage."""
    with guarded():
        model = read_model(model_path) if model_path else None
        dataset = load_dataset(
            data, order, schema, treatment=treatment, outcome=outcome, tree=model.tree if model else None
        )
        tree = model.tree if model else build_event_tree(dataset.variables)
        frame = frame_for(tree, treatment, outcome, treated)
        report = positivity_report(
            dataset,
            frame,
            staging=model.staging if model else None,
            tree=model.tree if model else None,
        )
        if out:
            with open(out, "w") as f:
                json.dump(report.model_dump(mode="json"), f, indent=2)
                f.write("\n")
    cells = report.cells if show_all else report.flagged
    table = Table(title=f"Positivity of {report.treatment}")
    table.add_column("Kind")
    table.add_column("Cell", style="cyan")
    table.add_column("Treated", justify="right")
    table.add_column("Untreated", justify="right")
    table.add_column("Status", style="magenta")
    for c in cells:
        status = c.status if c.missing_arm is None else f"{c.status} (no {c.missing_arm})"
        table.add_row(c.kind, c.label, str(c.n_treated), str(c.n_untreated), status)
    console.print(table)
    if report.has_violations:
        console.print(f"[yellow]{sum(1 for c in report.cells if c.status == 'one_sided')} one-sided cell(s)[/]")
    else:
        console.print("[green]No positivity violations[/]")
