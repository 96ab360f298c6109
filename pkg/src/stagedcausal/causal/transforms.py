from typing import Optional, Sequence

import numpy as np
import structlog

from ..trees.fitting import context_counts, fit_variable
from ..trees.models import Dataset, StagedTreeModel, check_data_matches
from .models import CausalFrame, UnsupportedConfigurationError

log = structlog.get_logger()

RANDOMIZED_STAGE = "randomized"


def randomize_treatment(
    model: StagedTreeModel,
    frame: CausalFrame,
    assignment: Optional[Sequence[float]] = None,
) -> StagedTreeModel:
    """Put every treatment context in one stage with an exogenous
    assignment distribution (Bernoulli(0.5) by default)."""
    tree = model.tree
    frame.check(tree)
    r = frame.treatment
    vec = np.full(tree.arities[r], 1.0 / tree.arities[r]) if assignment is None else np.asarray(assignment, dtype=float)
    if vec.shape != (tree.arities[r],) or np.any(vec < 0) or abs(vec.sum() - 1.0) > 1e-9:
        raise UnsupportedConfigurationError(
            f"treatment assignment must be a probability vector of length {tree.arities[r]}"
        )
    pooled = np.zeros(tree.arities[r])
    for counts in model.counts[r].values():
        pooled = pooled + counts
    return model.with_variable(
        r,
        {c: RANDOMIZED_STAGE for c in tree.contexts(r)},
        {RANDOMIZED_STAGE: vec},
        counts={RANDOMIZED_STAGE: pooled},
    )


def ps_stage_id(treatment_stage: str, treatment_code: int) -> str:
    return f"{treatment_stage}.{treatment_code}"


def ps_stratify(model: StagedTreeModel, frame: CausalFrame, data: Dataset) -> StagedTreeModel:
    """Restage the outcome by (treatment stage of the parent, treatment value).

    Two outcome contexts share a stage iff their treatment contexts share a
    treatment stage and the treatment took the same value. Outcome
    parameters are refitted from ``data``; everything else is kept.
    """
    tree = model.tree
    frame.check(tree)
    if not frame.adjacent:
        raise UnsupportedConfigurationError(
            f"ps-stratification needs the outcome '{tree.names[frame.outcome]}' to follow "
            f"the treatment '{tree.names[frame.treatment]}' directly"
        )
    check_data_matches(tree, data)
    r, y = frame.treatment, frame.outcome
    stages = {
        ctx: ps_stage_id(model.staging.stage_of(r, ctx[:-1]), ctx[-1]) for ctx in tree.contexts(y)
    }
    restaged = model.staging.with_variable(y, stages)
    params, pooled, undefined = fit_variable(
        tree, restaged, y, context_counts(tree, data, y), model.alpha
    )
    log.debug("ps_stratify.done", outcome_stages=len(params))
    return model.with_variable(y, stages, params, counts=pooled, undefined=undefined)
