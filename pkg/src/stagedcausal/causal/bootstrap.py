from enum import Enum
from typing import Callable, Mapping, Optional

import numpy as np
import structlog
from pydantic import BaseModel, Field, field_validator

from ..core.errors import StagedCausalError
from ..core.workers import map_ordered
from ..learning.bhc import learn_bhc
from ..learning.hclust import learn_hclust
from ..learning.scores import ScoredStaging
from ..trees.build import build_event_tree, prune_unobserved
from ..trees.fitting import fit_mle
from ..trees.models import Dataset, EventTree, Prefix, StagingError
from .estimators import ate_ps_stratified, ate_randomized
from .models import AteEstimate, CausalFrame, ConfidenceInterval, EstimationError, PositivityPolicy
from .transforms import ps_stratify

log = structlog.get_logger()


class Learner(str, Enum):
    BHC = "bhc"
    HCLUST = "hclust"


class EstimatorKind(str, Enum):
    RANDOMIZED = "randomized"
    PS_STRATIFIED = "ps-stratified"


LEARNERS: dict[Learner, Callable[[EventTree, Dataset], ScoredStaging]] = {
    Learner.BHC: learn_bhc,
    Learner.HCLUST: learn_hclust,
}


class BootstrapConfig(BaseModel):
    learner: Learner = Learner.HCLUST
    estimator: EstimatorKind = EstimatorKind.RANDOMIZED
    replicates: int = Field(default=200, ge=2)
    seed: int = 0
    ci_level: float = Field(default=0.95, gt=0.0, lt=1.0)
    alpha: float = Field(default=0.0, ge=0.0)
    positivity: PositivityPolicy = PositivityPolicy.EXCLUDE
    prune: bool = True
    max_failure_rate: float = Field(default=0.2, ge=0.0, le=1.0)
    threads: int = Field(default=1, ge=1)

    @field_validator("estimator", mode="before")
    @classmethod
    def accept_underscore(cls, v: object) -> object:
        if isinstance(v, str):
            return v.replace("_", "-")
        return v


def estimate_pipeline(
    data: Dataset,
    frame: CausalFrame,
    learner: Learner = Learner.HCLUST,
    estimator: EstimatorKind = EstimatorKind.RANDOMIZED,
    alpha: float = 0.0,
    positivity: PositivityPolicy = PositivityPolicy.EXCLUDE,
    prune: bool = True,
    treatment_stages: Optional[Mapping[Prefix, str]] = None,
) -> AteEstimate:
    """prune -> learn staging -> fit -> transform -> estimate, on one dataset.

    ``treatment_stages`` replaces the learned staging of the treatment
    variable, e.g. to merge strata that violate positivity.
    """
    tree = build_event_tree(data.variables)
    if prune:
        tree = prune_unobserved(tree, data)
    staging = LEARNERS[learner](tree, data).staging
    if treatment_stages is not None:
        r = frame.treatment
        missing = [c for c in tree.contexts(r) if c not in treatment_stages]
        if missing:
            raise StagingError(f"treatment staging has no stage for {tree.describe(missing[0])}")
        staging = staging.with_variable(r, {c: treatment_stages[c] for c in tree.contexts(r)})
    model = fit_mle(tree, staging, data, alpha=alpha)
    if estimator == EstimatorKind.PS_STRATIFIED:
        est = ate_ps_stratified(ps_stratify(model, frame, data), data, frame, positivity=positivity)
    else:
        est = ate_randomized(model, frame, positivity=positivity)
    return est.model_copy(update={"estimator": f"{learner.value}+{estimator.value}"})


def percentile_interval(values: np.ndarray, level: float) -> ConfidenceInterval:
    tail = (1.0 - level) / 2
    lo, hi = np.quantile(values, [tail, 1.0 - tail])
    return ConfidenceInterval(lower=float(lo), upper=float(hi), level=level, n_bootstrap=int(values.size))


def bootstrap_ate(
    data: Dataset,
    frame: CausalFrame,
    config: BootstrapConfig,
    on_progress: Optional[Callable[[int, int], None]] = None,
    treatment_stages: Optional[Mapping[Prefix, str]] = None,
) -> AteEstimate:
    """Nonparametric bootstrap of the learn-fit-estimate pipeline.

    Replicate ``b`` resamples rows with its own seed spawned from
    ``config.seed``, so results do not depend on the number of threads.
    The reported ATE is the mean of the successful replicates and the
    interval is the percentile interval at ``config.ci_level``.
    """
    if data.n == 0:
        raise EstimationError("cannot bootstrap an empty dataset")
    children = np.random.SeedSequence(config.seed).spawn(config.replicates)

    def replicate(seq: np.random.SeedSequence) -> float:
        rng = np.random.default_rng(seq)
        rows = rng.integers(0, data.n, size=data.n)
        est = estimate_pipeline(
            data.take(rows),
            frame,
            config.learner,
            config.estimator,
            config.alpha,
            config.positivity,
            config.prune,
            treatment_stages,
        )
        return est.ate

    outcomes = map_ordered(
        replicate, children, max_workers=config.threads, on_done=on_progress, task="bootstrap.replicate"
    )
    values = np.array([v for v, err in outcomes if err is None and v is not None], dtype=float)
    failed = len(outcomes) - values.size
    if values.size == 0 or failed / config.replicates > config.max_failure_rate:
        reasons = sorted({err for _, err in outcomes if err})
        raise EstimationError(
            f"{failed} of {config.replicates} bootstrap replicates failed: {'; '.join(reasons[:3])}"
        )
    try:
        point = estimate_pipeline(
            data, frame, config.learner, config.estimator, config.alpha, config.positivity, config.prune,
            treatment_stages,
        )
    except StagedCausalError as e:
        log.warning("bootstrap.point_estimate_failed", error=str(e))
        point = AteEstimate(estimator="", ate=0.0)
        point.diagnostics.messages.append(f"full-data estimate failed: {e}")
    point.diagnostics.failed_replicates = failed
    if failed:
        log.warning("bootstrap.replicates_failed", failed=failed, total=config.replicates)
    log.info("bootstrap.done", replicates=int(values.size), mean=float(values.mean()))
    return point.model_copy(
        update={
            "estimator": f"{config.learner.value}+{config.estimator.value}",
            "ate": float(values.mean()),
            "ci": percentile_interval(values, config.ci_level),
            "replicates": values.tolist(),
        }
    )
