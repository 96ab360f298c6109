"""
Backward hill-climbing over stage merges.

Starting from an initial staging (saturated by default), every step scores
all merges of two stages of the same variable and applies the one with the
largest BIC gain; the search stops when no merge increases the BIC. Since
the BIC decomposes over variables, the gain of a merge only depends on the
two stages involved, so each variable keeps its own gain matrix and only
the variable that changed is rescored.
"""

from typing import List, Optional, Tuple

import numpy as np
import structlog

from ..trees.build import saturated_staging
from ..trees.fitting import all_context_counts
from ..trees.models import Dataset, EventTree, Staging
from .scores import ScoreError, ScoredStaging, multinomial_ll, penalty, score_counts, stage_count_matrix

log = structlog.get_logger()


class _VariableState:
    """Stage ids, pooled counts and pairwise merge gains of one variable."""

    def __init__(self, ids: List[str], counts: np.ndarray, arity: int, n: int):
        self.ids = ids
        self.counts = counts
        self.cost = penalty(arity, n)
        self.best: Tuple[float, int, int] = (-np.inf, -1, -1)
        self.rescore()

    def rescore(self) -> None:
        k = len(self.ids)
        if k < 2:
            self.best = (-np.inf, -1, -1)
            return
        alone = multinomial_ll(self.counts)
        merged = multinomial_ll(self.counts[:, None, :] + self.counts[None, :, :])
        gain = merged - alone[:, None] - alone[None, :] + self.cost
        gain[np.tril_indices(k)] = -np.inf
        # first maximum in row-major order: smallest (a, b) position pair
        flat = int(np.argmax(gain))
        a, b = divmod(flat, k)
        self.best = (float(gain[a, b]), a, b)

    def merge(self, a: int, b: int) -> Tuple[str, str]:
        keep, drop = self.ids[a], self.ids[b]
        self.counts[a] += self.counts[b]
        self.counts = np.delete(self.counts, b, axis=0)
        del self.ids[b]
        self.rescore()
        return keep, drop


def learn_bhc(
    tree: EventTree,
    data: Dataset,
    init: Optional[Staging] = None,
    max_steps: Optional[int] = None,
) -> ScoredStaging:
    """Greedy BIC-improving stage merges; ties go to the lowest variable,
    then to the pair of stages that comes first in context order."""
    if data.n == 0:
        raise ScoreError("cannot learn a staging from an empty dataset")
    staging = init if init is not None else saturated_staging(tree)
    counts = all_context_counts(tree, data)
    states = []
    for i in range(tree.p):
        ids, matrix = stage_count_matrix(staging, i, counts[i], tree.arities[i])
        states.append(_VariableState(ids, matrix.astype(float), tree.arities[i], data.n))

    current = score_counts(tree, staging, counts, data.n).bic
    trace = [current]
    steps = 0
    while max_steps is None or steps < max_steps:
        gain, var = max((s.best[0], -i) for i, s in enumerate(states))
        var = -var
        if not gain > 0:
            break
        _, a, b = states[var].best
        keep, drop = states[var].merge(a, b)
        staging = staging.merged(var, keep, drop)
        current += gain
        trace.append(current)
        steps += 1
        log.debug("bhc.merge", variable=tree.names[var], keep=keep, drop=drop, gain=gain)

    final = score_counts(tree, staging.canonical(), counts, data.n, trace=tuple(trace))
    log.info("bhc.done", merges=steps, bic=final.bic, stages=final.staging.total_stages)
    return final
