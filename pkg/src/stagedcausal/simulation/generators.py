"""
Random data-generating staged trees.

- random_staged_tree: stages formed by random joining on the full tree
- random_dag_model: staging induced by a random DAG over the fixed order,
  optionally followed by random joining of the DAG stages
"""

from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..trees.build import build_event_tree
from ..trees.inference import Seed
from ..trees.models import EventTree, Prefix, StagedTreeModel, Staging, Variable


class ParamDist(str, Enum):
    """Distribution of the unnormalized stage probabilities."""

    EXP = "exp"
    UNIF = "unif"


def simulation_schema(p: int) -> List[Variable]:
    """Binary variables ``Z1..Z{p-2}, R, Y`` (``X1..Xp`` when p < 3)."""
    if p < 1:
        raise ValueError("p must be >= 1")
    names = [f"Z{k + 1}" for k in range(p - 2)] + ["R", "Y"] if p >= 3 else [f"X{k + 1}" for k in range(p)]
    return [Variable(name=n, levels=("0", "1")) for n in names]


def draw_vector(rng: np.random.Generator, arity: int, dist: ParamDist) -> np.ndarray:
    if dist == ParamDist.EXP:
        raw = rng.exponential(1.0, size=arity)
    else:
        raw = rng.uniform(0.0, 1.0, size=arity)
    return raw / raw.sum()


def join_stages(
    rng: np.random.Generator, keys: Sequence[object], join_prob: float
) -> Dict[object, str]:
    """Visit ``keys`` in order; each joins a uniformly chosen existing stage
    with probability ``join_prob``, otherwise it opens a new one."""
    assigned: Dict[object, str] = {}
    opened = 0
    for key in keys:
        if opened and rng.random() < join_prob:
            assigned[key] = str(int(rng.integers(opened)) + 1)
        else:
            opened += 1
            assigned[key] = str(opened)
    return assigned


def _parameterize(
    rng: np.random.Generator, tree: EventTree, staging: Staging, dist: ParamDist
) -> StagedTreeModel:
    params = tuple(
        {sid: draw_vector(rng, tree.arities[i], dist) for sid in staging.stage_ids(i)}
        for i in range(tree.p)
    )
    return StagedTreeModel(
        tree=tree,
        staging=staging,
        parameters=params,
        counts=tuple({} for _ in range(tree.p)),
    )


def random_staged_tree(
    p: int,
    join_prob: float,
    param_dist: ParamDist = ParamDist.EXP,
    seed: Seed = None,
    variables: Optional[Sequence[Variable]] = None,
) -> StagedTreeModel:
    """Random staging of the full tree by sequential random joining."""
    if not 0.0 <= join_prob <= 1.0:
        raise ValueError("join_prob must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    tree = build_event_tree(variables or simulation_schema(p))
    stages = []
    for i in range(tree.p):
        contexts = tree.contexts(i)
        assigned = join_stages(rng, contexts, join_prob)
        stages.append({c: assigned[c] for c in contexts})
    return _parameterize(rng, tree, Staging(tuple(stages)), ParamDist(param_dist))


def random_dag_parents(p: int, edge_prob: float, rng: np.random.Generator) -> List[Tuple[int, ...]]:
    """Parent sets of a random DAG consistent with the order 0..p-1."""
    parents = []
    for i in range(p):
        draws = rng.random(i)
        parents.append(tuple(j for j in range(i) if draws[j] < edge_prob))
    return parents


def dag_staging(tree: EventTree, parents: Sequence[Tuple[int, ...]]) -> Staging:
    """Contexts of a variable share a stage iff they agree on its parents."""
    stages = []
    for i in range(tree.p):
        keys: Dict[Prefix, str] = {}
        mapping = {}
        for c in tree.contexts(i):
            key = tuple(c[j] for j in parents[i])
            mapping[c] = keys.setdefault(key, str(len(keys) + 1))
        stages.append(mapping)
    return Staging(tuple(stages))


def random_dag_model(
    p: int,
    edge_prob: float,
    param_dist: ParamDist = ParamDist.EXP,
    seed: Seed = None,
    join_prob: float = 0.0,
) -> StagedTreeModel:
    """Staged tree of a random DAG; ``join_prob`` adds random joins of its stages."""
    if not 0.0 <= edge_prob <= 1.0:
        raise ValueError("edge_prob must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    tree = build_event_tree(simulation_schema(p))
    staging = dag_staging(tree, random_dag_parents(tree.p, edge_prob, rng))
    if join_prob > 0:
        joined = []
        for i in range(tree.p):
            assigned = join_stages(rng, staging.stage_ids(i), join_prob)
            joined.append({c: assigned[s] for c, s in staging.stages[i].items()})
        staging = Staging(tuple(joined))
    return _parameterize(rng, tree, staging, ParamDist(param_dist))
