from typing import Dict, List, Set, Tuple

import numpy as np
import structlog

from ..core.validator import validate_staging
from .models import (
    Dataset,
    EventTree,
    Prefix,
    SchemaError,
    StagedTreeModel,
    Staging,
    StagingError,
    check_data_matches,
)

log = structlog.get_logger()

ContextCounts = Dict[Prefix, np.ndarray]


def context_counts(tree: EventTree, data: Dataset, i: int) -> ContextCounts:
    """Level counts of variable ``i`` for every context that has rows.

    Rows passing through a pruned context are a schema error: the tree was
    pruned on other data.
    """
    arity = tree.arities[i]
    if data.n == 0:
        return {}
    if i == 0:
        return {(): np.bincount(data.codes[:, 0], minlength=arity).astype(float)}
    cells, freq = np.unique(data.codes[:, : i + 1], axis=0, return_counts=True)
    out: ContextCounts = {}
    for cell, k in zip(cells, freq):
        prefix = tuple(int(c) for c in cell[:-1])
        vec = out.get(prefix)
        if vec is None:
            if not tree.is_retained(i, prefix):
                raise SchemaError(
                    f"data reaches pruned context {tree.describe(prefix)} of '{tree.names[i]}'"
                )
            vec = out[prefix] = np.zeros(arity)
        vec[int(cell[-1])] += k
    return out


def all_context_counts(tree: EventTree, data: Dataset) -> List[ContextCounts]:
    check_data_matches(tree, data)
    return [context_counts(tree, data, i) for i in range(tree.p)]


def pool_counts(staging: Staging, i: int, counts: ContextCounts, arity: int) -> Dict[str, np.ndarray]:
    """Sum context counts per stage of variable ``i``."""
    pooled = {sid: np.zeros(arity) for sid in staging.stage_ids(i)}
    for prefix, sid in staging.stages[i].items():
        vec = counts.get(prefix)
        if vec is not None:
            pooled[sid] += vec
    return pooled


def estimate_vector(n: np.ndarray, alpha: float) -> Tuple[np.ndarray, bool]:
    """Smoothed MLE ``(n + alpha) / (sum(n) + alpha * arity)``.

    Returns the uniform vector and ``True`` when the stage is undefined
    (no counts and no smoothing).
    """
    total = float(n.sum()) + alpha * n.size
    if total <= 0:
        return np.full(n.size, 1.0 / n.size), True
    return (n + alpha) / total, False


def fit_variable(
    tree: EventTree,
    staging: Staging,
    i: int,
    counts: ContextCounts,
    alpha: float = 0.0,
) -> Tuple[Dict[str, np.ndarray], Dict[str, np.ndarray], List[str]]:
    """Parameters, pooled counts and undefined stages for one variable."""
    pooled = pool_counts(staging, i, counts, tree.arities[i])
    params: Dict[str, np.ndarray] = {}
    undefined: List[str] = []
    for sid, n in pooled.items():
        params[sid], flagged = estimate_vector(n, alpha)
        if flagged:
            undefined.append(sid)
            log.warning("fit.undefined_stage", variable=tree.names[i], stage=sid)
    return params, pooled, undefined


def fit_mle(
    tree: EventTree, staging: Staging, data: Dataset, alpha: float = 0.0
) -> StagedTreeModel:
    """Fit one probability vector per stage from pooled stage counts."""
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    check_data_matches(tree, data)
    issues = validate_staging(tree, staging, strict_ids=False)
    if issues:
        raise StagingError("; ".join(i.message for i in issues[:5]))
    parameters = []
    pooled_counts = []
    undefined: Set[Tuple[int, str]] = set()
    for i in range(tree.p):
        params, pooled, flagged = fit_variable(
            tree, staging, i, context_counts(tree, data, i), alpha
        )
        parameters.append(params)
        pooled_counts.append(pooled)
        undefined.update((i, sid) for sid in flagged)
    log.debug("fit.done", n=data.n, alpha=alpha, stages=staging.total_stages)
    return StagedTreeModel(
        tree=tree,
        staging=staging,
        parameters=tuple(parameters),
        counts=tuple(pooled_counts),
        undefined=frozenset(undefined),
        n=data.n,
        alpha=alpha,
    )
