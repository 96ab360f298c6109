from typing import Dict, List, Tuple

import numpy as np
import structlog
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial.distance import pdist

from ..trees.fitting import all_context_counts
from ..trees.models import Dataset, EventTree, Prefix, Staging
from .scores import ScoreError, ScoredStaging, multinomial_ll, penalty, score_counts

log = structlog.get_logger()


def empirical_conditionals(
    contexts: List[Prefix], counts: Dict[Prefix, np.ndarray], arity: int
) -> Tuple[np.ndarray, np.ndarray, List[int]]:
    """Count and frequency matrices per context; empty contexts get the
    uniform vector and are returned as flagged row numbers."""
    raw = np.array([counts.get(c, np.zeros(arity)) for c in contexts], dtype=float)
    totals = raw.sum(axis=1)
    freq = np.full_like(raw, 1.0 / arity)
    seen = totals > 0
    freq[seen] = raw[seen] / totals[seen, None]
    return raw, freq, [int(r) for r in np.flatnonzero(~seen)]


def _cut_score(raw: np.ndarray, labels: np.ndarray, cost: float) -> float:
    clusters, inverse = np.unique(labels, return_inverse=True)
    pooled = np.zeros((len(clusters), raw.shape[1]))
    np.add.at(pooled, inverse.reshape(-1), raw)
    return float(multinomial_ll(pooled).sum()) - cost * len(clusters)


def best_cut(raw: np.ndarray, freq: np.ndarray, arity: int, n: int) -> np.ndarray:
    """Cluster labels of the BIC-best dendrogram cut; ties keep fewer clusters."""
    m = raw.shape[0]
    if m == 1:
        return np.ones(1, dtype=int)
    tv = 0.5 * pdist(freq, metric="cityblock")
    tree = linkage(tv, method="average")
    cost = penalty(arity, n)
    best_labels = np.ones(m, dtype=int)
    best_score = _cut_score(raw, best_labels, cost)
    seen = {1}
    for k in range(2, m + 1):
        labels = fcluster(tree, t=k, criterion="maxclust")
        found = len(np.unique(labels))
        if found in seen:
            continue
        seen.add(found)
        score = _cut_score(raw, labels, cost)
        if score > best_score:
            best_score, best_labels = score, labels
    return best_labels


def learn_hclust(tree: EventTree, data: Dataset) -> ScoredStaging:
    """Average-linkage clustering of per-context conditionals under TV
    distance, cut per variable at the BIC-best number of stages."""
    if data.n == 0:
        raise ScoreError("cannot learn a staging from an empty dataset")
    counts = all_context_counts(tree, data)
    stages = []
    flagged: List[Tuple[int, Prefix]] = []
    for i in range(tree.p):
        contexts = tree.contexts(i)
        raw, freq, empty = empirical_conditionals(contexts, counts[i], tree.arities[i])
        flagged.extend((i, contexts[r]) for r in empty)
        if empty:
            log.debug("hclust.empty_contexts", variable=tree.names[i], count=len(empty))
        labels = best_cut(raw, freq, tree.arities[i], data.n)
        stages.append({c: str(int(lab)) for c, lab in zip(contexts, labels)})
        log.debug("hclust.cut", variable=tree.names[i], contexts=len(contexts), stages=len(set(labels)))
    staging = Staging(tuple(stages)).canonical()
    result = score_counts(tree, staging, counts, data.n, flagged=tuple(flagged))
    log.info("hclust.done", bic=result.bic, stages=staging.total_stages)
    return result
