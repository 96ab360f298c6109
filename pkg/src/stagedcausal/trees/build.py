from typing import List, Sequence

import structlog

from .models import Dataset, EventTree, Prefix, SchemaError, Staging, Variable, check_data_matches

log = structlog.get_logger()


def build_event_tree(variables: Sequence[Variable]) -> EventTree:
    """Full symmetric event tree over ``variables`` in the given order."""
    return EventTree(variables=tuple(variables))


def saturated_staging(tree: EventTree) -> Staging:
    """Every retained context in its own stage, ids ``"1".."m"`` per variable."""
    stages = []
    for i in range(tree.p):
        stages.append({c: str(k + 1) for k, c in enumerate(tree.contexts(i))})
    return Staging(tuple(stages))


def independence_staging(tree: EventTree) -> Staging:
    """One stage per variable: full mutual independence."""
    return Staging(tuple({c: "1" for c in tree.contexts(i)} for i in range(tree.p)))


def prune_unobserved(tree: EventTree, data: Dataset) -> EventTree:
    """Drop every context (and leaf) that no row of ``data`` passes through."""
    check_data_matches(tree, data)
    if data.n == 0:
        raise SchemaError("cannot prune an event tree with an empty dataset")
    rows = set(data.rows())
    observed: List[frozenset[Prefix]] = []
    for depth in range(tree.p + 1):
        kept = {r[:depth] for r in rows}
        if tree.observed is not None:
            kept &= tree.observed[depth]
        observed.append(frozenset(kept))
    before = sum(tree.n_contexts(i) for i in range(tree.p))
    pruned = EventTree(variables=tree.variables, observed=tuple(observed))
    after = sum(pruned.n_contexts(i) for i in range(tree.p))
    if after < before:
        log.debug("tree.pruned", contexts_before=before, contexts_after=after)
    return pruned
