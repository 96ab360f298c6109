"""
Estimator comparison on simulated data.

For every repetition a random generator model is drawn; for every sample
size a dataset is sampled from it and each estimator's absolute error
against the exact ATE of the generator is recorded. Seeds for generators
and datasets are spawned from ``SimConfig.seed`` per repetition, so any
repetition can be reproduced on its own and threads do not change results.
"""

import time
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
import structlog
from pydantic import BaseModel, ConfigDict, Field, field_validator

from ..causal.baselines import baseline_aipw, baseline_ipw, baseline_outcome_regression
from ..causal.bootstrap import EstimatorKind, Learner, estimate_pipeline
from ..causal.estimators import ate_randomized, baseline_full_stratification
from ..causal.models import CausalFrame
from ..core.workers import RECOVERABLE, failure_reason, map_ordered
from ..trees.build import build_event_tree, prune_unobserved
from ..trees.fitting import fit_mle
from ..trees.inference import sample
from ..trees.models import Dataset, StagedTreeModel, Staging
from .generators import ParamDist, random_dag_model, random_staged_tree

log = structlog.get_logger()

RESULT_COLUMNS = [
    "generator",
    "pi",
    "dist",
    "n",
    "rep",
    "estimator",
    "abs_error",
    "runtime_ms",
    "estimate",
    "true_ate",
    "error",
]

ALL_ESTIMATORS = ("bhc", "hclust", "bhc-ps", "hclust-ps", "full", "oracle", "q.model", "ipw", "aipw")
DEFAULT_ESTIMATORS = ("bhc", "hclust", "full", "oracle", "q.model", "ipw", "aipw")


class Generator(str, Enum):
    SEVT = "sevt"
    DAG = "dag"


class SimConfig(BaseModel):
    p: int = Field(default=8, ge=3, description="Total binary variables (covariates = p - 2)")
    generator: Generator = Generator.SEVT
    join_prob: float = Field(default=0.0, ge=0.0, le=1.0)
    param_dist: ParamDist = ParamDist.EXP
    sample_sizes: List[int] = Field(default_factory=lambda: [100, 500, 1000, 10000])
    repetitions: int = Field(default=20, ge=1)
    seed: int = 0
    estimators: List[str] = Field(default_factory=lambda: list(DEFAULT_ESTIMATORS))
    dag_edge_prob: float = Field(default=0.3, ge=0.0, le=1.0)
    alpha: float = Field(default=0.0, ge=0.0)
    threads: int = Field(default=1, ge=1)
    timings: bool = False

    @field_validator("estimators")
    @classmethod
    def known_estimators(cls, v: List[str]) -> List[str]:
        unknown = [e for e in v if e not in ALL_ESTIMATORS]
        if unknown:
            raise ValueError(f"unknown estimator(s) {unknown}; choose from {list(ALL_ESTIMATORS)}")
        if not v:
            raise ValueError("at least one estimator is required")
        return v

    @field_validator("sample_sizes")
    @classmethod
    def positive_sizes(cls, v: List[int]) -> List[int]:
        if not v or any(n < 1 for n in v):
            raise ValueError("sample sizes must be >= 1")
        return v


class ExperimentResult(BaseModel):
    records: pd.DataFrame
    summary: pd.DataFrame

    model_config = ConfigDict(arbitrary_types_allowed=True)


def simulation_frame(p: int) -> CausalFrame:
    return CausalFrame(treatment=p - 2, outcome=p - 1)


def true_ate(model: StagedTreeModel, frame: CausalFrame) -> float:
    """Exact ATE of a generator model (randomized tree, no data involved)."""
    return ate_randomized(model, frame).ate


def _oracle(truth: Staging, data: Dataset, frame: CausalFrame, alpha: float) -> float:
    """Refit the true staging on data, restricted to observed contexts."""
    tree = prune_unobserved(build_event_tree(data.variables), data)
    restricted = Staging(
        tuple({c: truth.stages[i][c] for c in tree.contexts(i)} for i in range(tree.p))
    )
    return ate_randomized(fit_mle(tree, restricted, data, alpha=alpha), frame).ate


def make_estimators(
    truth: StagedTreeModel, frame: CausalFrame, alpha: float
) -> Dict[str, Callable[[Dataset], float]]:
    def tree_based(learner: Learner, kind: EstimatorKind) -> Callable[[Dataset], float]:
        return lambda d: estimate_pipeline(d, frame, learner, kind, alpha).ate

    return {
        "bhc": tree_based(Learner.BHC, EstimatorKind.RANDOMIZED),
        "hclust": tree_based(Learner.HCLUST, EstimatorKind.RANDOMIZED),
        "bhc-ps": tree_based(Learner.BHC, EstimatorKind.PS_STRATIFIED),
        "hclust-ps": tree_based(Learner.HCLUST, EstimatorKind.PS_STRATIFIED),
        "full": lambda d: baseline_full_stratification(d, frame).ate,
        "oracle": lambda d: _oracle(truth.staging, d, frame, alpha),
        "q.model": lambda d: baseline_outcome_regression(d, frame).ate,
        "ipw": lambda d: baseline_ipw(d, frame).ate,
        "aipw": lambda d: baseline_aipw(d, frame).ate,
    }


def generate(config: SimConfig, seed: np.random.SeedSequence) -> StagedTreeModel:
    if config.generator == Generator.DAG:
        return random_dag_model(
            config.p, config.dag_edge_prob, config.param_dist, seed, join_prob=config.join_prob
        )
    return random_staged_tree(config.p, config.join_prob, config.param_dist, seed)


def run_repetition(config: SimConfig, rep: int, seq: np.random.SeedSequence) -> List[Dict[str, object]]:
    """All sample sizes and estimators for one repetition."""
    gen_seq, *data_seqs = seq.spawn(1 + len(config.sample_sizes))
    truth = generate(config, gen_seq)
    frame = simulation_frame(config.p)
    target = true_ate(truth, frame)
    estimators = make_estimators(truth, frame, config.alpha)
    base = {
        "generator": config.generator.value,
        "pi": config.join_prob,
        "dist": config.param_dist.value,
        "rep": rep,
        "true_ate": target,
    }
    records: List[Dict[str, object]] = []
    for n, data_seq in zip(config.sample_sizes, data_seqs):
        data = sample(truth, n, seed=data_seq)
        for name in config.estimators:
            start = time.perf_counter()
            estimate: Optional[float] = None
            reason = ""
            try:
                estimate = float(estimators[name](data))
            except RECOVERABLE as e:
                reason = failure_reason(e)
                log.warning("experiment.estimator_failed", estimator=name, n=n, rep=rep, error=reason)
            elapsed = (time.perf_counter() - start) * 1000.0
            records.append(
                {
                    **base,
                    "n": n,
                    "estimator": name,
                    "abs_error": abs(estimate - target) if estimate is not None else None,
                    "runtime_ms": elapsed if config.timings else None,
                    "estimate": estimate,
                    "error": reason,
                }
            )
    return records


def summarize(records: pd.DataFrame) -> pd.DataFrame:
    """Median absolute error and failure count per setting, size and estimator."""
    keys = ["generator", "pi", "dist", "n", "estimator"]
    grouped = records.groupby(keys, sort=True)
    summary = grouped["abs_error"].median().rename("median_abs_error").to_frame()
    summary["failures"] = grouped["abs_error"].apply(lambda s: int(s.isna().sum()))
    summary["repetitions"] = grouped["rep"].nunique()
    return summary.reset_index()


def run_experiment(
    config: SimConfig,
    on_progress: Optional[Callable[[int, int], None]] = None,
) -> ExperimentResult:
    seqs = np.random.SeedSequence(config.seed).spawn(config.repetitions)
    outcomes = map_ordered(
        lambda item: run_repetition(config, item[0], item[1]),
        list(enumerate(seqs)),
        max_workers=config.threads,
        on_done=on_progress,
        task="experiment.repetition",
    )
    rows: List[Dict[str, object]] = []
    for rep, (recs, err) in enumerate(outcomes):
        if err is not None or recs is None:
            for n in config.sample_sizes:
                for name in config.estimators:
                    rows.append(
                        {
                            "generator": config.generator.value,
                            "pi": config.join_prob,
                            "dist": config.param_dist.value,
                            "n": n,
                            "rep": rep,
                            "estimator": name,
                            "error": err or "repetition failed",
                        }
                    )
            continue
        rows.extend(recs)
    records = pd.DataFrame(rows, columns=RESULT_COLUMNS)
    records["abs_error"] = pd.to_numeric(records["abs_error"], errors="coerce").astype(float)
    log.info("experiment.done", rows=len(records), repetitions=config.repetitions)
    return ExperimentResult(records=records, summary=summarize(records))


def run_grid(
    base: SimConfig,
    join_probs: Sequence[float],
    dists: Sequence[ParamDist],
    on_progress: Optional[Callable[[int, int], None]] = None,
) -> ExperimentResult:
    """``run_experiment`` over every (join probability, distribution) pair."""
    parts = [
        run_experiment(
            base.model_copy(update={"join_prob": float(pi), "param_dist": ParamDist(dist)}), on_progress
        )
        for pi in join_probs
        for dist in dists
    ]
    records = pd.concat([r.records for r in parts], ignore_index=True)
    return ExperimentResult(records=records, summary=summarize(records))
