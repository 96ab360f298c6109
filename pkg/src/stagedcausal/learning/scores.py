"""
BIC scoring of stagings.

The score is maximized: ``bic = log_likelihood - d/2 * log(N)`` with
``d = sum over stages of (arity - 1)``. Counts are pooled per stage and the
likelihood uses the unsmoothed MLE, with ``0 * log 0 = 0``.
"""

from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from ..core.errors import StagedCausalError
from ..trees.fitting import ContextCounts, all_context_counts, pool_counts
from ..trees.models import Dataset, EventTree, Prefix, Staging


class ScoreError(StagedCausalError):
    """Scores that cannot be computed (no data, mismatched vectors)."""


@dataclass(frozen=True)
class ScoredStaging:
    staging: Staging
    log_likelihood: float
    n_free_params: int
    bic: float
    n: int
    # BIC after the initial staging and after each accepted step
    trace: Tuple[float, ...] = ()
    # (variable, context) pairs clustered with a placeholder distribution
    flagged_contexts: Tuple[Tuple[int, Prefix], ...] = ()


def tv_distance(p: Sequence[float], q: Sequence[float]) -> float:
    """Total variation distance ``0.5 * sum |p - q|``."""
    a = np.asarray(p, dtype=float)
    b = np.asarray(q, dtype=float)
    if a.shape != b.shape:
        raise ScoreError(f"vectors of different lengths: {a.size} and {b.size}")
    return float(0.5 * np.abs(a - b).sum())


def multinomial_ll(counts: np.ndarray) -> np.ndarray:
    """Maximized multinomial log-likelihood along the last axis."""
    counts = np.asarray(counts, dtype=float)
    totals = counts.sum(axis=-1, keepdims=True)
    ratio = np.divide(counts, totals, out=np.zeros_like(counts), where=totals > 0)
    logs = np.log(ratio, out=np.zeros_like(counts), where=counts > 0)
    return (counts * logs).sum(axis=-1)


def penalty(arity: int, n: int) -> float:
    """BIC cost of one stage of a variable with ``arity`` levels."""
    return 0.5 * (arity - 1) * float(np.log(n))


def variable_score(
    staging: Staging, i: int, counts: ContextCounts, arity: int, n: int
) -> Tuple[float, int]:
    """Log-likelihood and free parameters contributed by variable ``i``."""
    pooled = pool_counts(staging, i, counts, arity)
    ll = float(multinomial_ll(np.array(list(pooled.values()))).sum()) if pooled else 0.0
    return ll, len(pooled) * (arity - 1)


def n_free_parameters(tree: EventTree, staging: Staging) -> int:
    return sum(staging.n_stages(i) * (tree.arities[i] - 1) for i in range(tree.p))


def score_counts(
    tree: EventTree,
    staging: Staging,
    counts: List[ContextCounts],
    n: int,
    trace: Tuple[float, ...] = (),
    flagged: Tuple[Tuple[int, Prefix], ...] = (),
) -> ScoredStaging:
    if n <= 0:
        raise ScoreError("BIC needs at least one observation")
    ll = 0.0
    d = 0
    for i in range(tree.p):
        v_ll, v_d = variable_score(staging, i, counts[i], tree.arities[i], n)
        ll += v_ll
        d += v_d
    return ScoredStaging(
        staging=staging,
        log_likelihood=ll,
        n_free_params=d,
        bic=ll - 0.5 * d * float(np.log(n)),
        n=n,
        trace=trace,
        flagged_contexts=flagged,
    )


def log_likelihood(tree: EventTree, staging: Staging, data: Dataset) -> float:
    counts = all_context_counts(tree, data)
    return sum(
        variable_score(staging, i, counts[i], tree.arities[i], max(data.n, 1))[0]
        for i in range(tree.p)
    )


def bic(tree: EventTree, staging: Staging, data: Dataset) -> ScoredStaging:
    return score_counts(tree, staging, all_context_counts(tree, data), data.n)


def stage_count_matrix(
    staging: Staging, i: int, counts: ContextCounts, arity: int
) -> Tuple[List[str], np.ndarray]:
    pooled: Dict[str, np.ndarray] = pool_counts(staging, i, counts, arity)
    ids = list(pooled)
    return ids, (np.array([pooled[s] for s in ids]) if ids else np.zeros((0, arity)))
