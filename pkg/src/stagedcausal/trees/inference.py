"""
Exact queries on staged tree models.

Joint, marginal and conditional probabilities are computed by enumerating
the product space of the queried variables; interventions are applied
structurally, by replacing the stages of the intervened variables with a
single point-mass stage, so the result is again a StagedTreeModel.

Every query is conditional on the retained tree: paths through pruned
contexts carry probability zero, and a stage vector pooled across contexts
is rescaled over the retained children of the context it is read at.
"""

from dataclasses import dataclass, field
from itertools import product
from typing import Dict, List, Mapping, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import structlog
from pydantic import BaseModel, Field

from ..core.errors import StagedCausalError
from .models import Dataset, EventTree, Prefix, StagedTreeModel

log = structlog.get_logger()

# largest product space enumerated exactly
ENUMERATION_LIMIT = 2**24

Seed = Union[int, np.random.SeedSequence, None]


class InferenceError(StagedCausalError):
    """Impossible query: zero-probability evidence, empty support, too large."""


class InterventionSpec(BaseModel):
    """Targets of ``do(X_I = z_I)``: variable index -> forced level code."""

    values: Dict[int, int] = Field(default_factory=dict)

    @property
    def targets(self) -> Tuple[int, ...]:
        return tuple(sorted(self.values))

    @classmethod
    def from_labels(cls, tree: EventTree, assignment: Mapping[str, str]) -> "InterventionSpec":
        return cls(
            values={
                tree.index_of(name): tree.variables[tree.index_of(name)].code_of(label)
                for name, label in assignment.items()
            }
        )


@dataclass(frozen=True, eq=False)
class DistributionTable:
    """Dense probability table over an ordered subset of variables."""

    scope: Tuple[str, ...]
    levels: Tuple[Tuple[str, ...], ...]
    probabilities: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        arr = np.asarray(self.probabilities, dtype=float)
        if arr.shape != tuple(len(lv) for lv in self.levels):
            raise InferenceError("probability table shape does not match its scope")
        if np.any(arr < 0) or abs(float(arr.sum()) - 1.0) > 1e-10:
            raise InferenceError("probability table does not sum to 1")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "probabilities", arr)

    def prob(self, *codes: int) -> float:
        return float(self.probabilities[tuple(codes)])

    def to_frame(self) -> pd.DataFrame:
        """Long format: one column per scope variable plus ``probability``."""
        rows = []
        for cell in product(*[range(len(lv)) for lv in self.levels]):
            row = {name: self.levels[k][c] for k, (name, c) in enumerate(zip(self.scope, cell))}
            row["probability"] = float(self.probabilities[cell])
            rows.append(row)
        return pd.DataFrame(rows, columns=[*self.scope, "probability"])


def _guard(tree: EventTree, arities: Sequence[int]) -> None:
    cells = int(np.prod(arities, dtype=np.int64))
    if cells > ENUMERATION_LIMIT:
        raise InferenceError(
            f"exact enumeration over {cells} cells exceeds the limit of {ENUMERATION_LIMIT}"
        )


def retained_vector(model: StagedTreeModel, i: int, prefix: Prefix) -> np.ndarray:
    """Stage vector of ``prefix`` restricted to its retained children.

    Mass on children pruned under ``prefix`` is dropped and the rest
    rescaled to sum to 1; all zeros when no retained child has mass.
    Leaves are never masked.
    """
    tree = model.tree
    vec = np.asarray(model.vector(i, prefix), dtype=float)
    if not tree.is_pruned or i + 1 >= tree.p:
        return vec
    keep = np.array([tree.is_retained(i + 1, prefix + (c,)) for c in range(tree.arities[i])])
    if keep.all():
        return vec
    kept = np.where(keep, vec, 0.0)
    total = float(kept.sum())
    if total <= 0:
        return kept
    return kept / total


def joint_table(model: StagedTreeModel) -> np.ndarray:
    """Joint probability of every full outcome, shape ``tree.arities``."""
    tree = model.tree
    _guard(tree, tree.arities)
    table = np.ones(())
    for i in range(tree.p):
        full, cond = model.conditional_table(i)
        if tree.is_pruned and i + 1 < tree.p:
            for row, prefix in enumerate(full):
                if tree.is_retained(i, prefix):
                    cond[row] = retained_vector(model, i, prefix)
        cond = cond.reshape(tree.arities[: i + 1])
        table = table[..., None] * cond
    return table


def joint_prob(model: StagedTreeModel, x: Sequence[int]) -> float:
    """Probability of the full outcome ``x`` by the chain factorization."""
    tree = model.tree
    if len(x) != tree.p:
        raise InferenceError(f"outcome has {len(x)} values, the tree has {tree.p} variables")
    prob = 1.0
    for i, code in enumerate(x):
        prefix = tuple(int(c) for c in x[:i])
        if not tree.is_retained(i, prefix):
            log.debug("joint.pruned_path", variable=tree.names[i], context=prefix)
            return 0.0
        if not 0 <= code < tree.arities[i]:
            raise InferenceError(f"code {code} is not a level of '{tree.names[i]}'")
        prob *= float(retained_vector(model, i, prefix)[code])
    return prob


def _scope_indices(tree: EventTree, scope: Sequence["int | str"]) -> List[int]:
    idx = [tree.resolve(v) for v in scope]
    if not idx:
        raise InferenceError("marginal scope is empty")
    if len(set(idx)) != len(idx):
        raise InferenceError("marginal scope lists a variable twice")
    return idx


def _normalized(model: StagedTreeModel, table: np.ndarray) -> np.ndarray:
    total = float(table.sum())
    if total <= 0:
        raise InferenceError("the model assigns no probability to any retained path")
    if abs(total - 1.0) > 1e-9:
        log.warning("marginal.leaked_mass", leaked=1.0 - total)
    return table / total


def marginal(model: StagedTreeModel, scope: Sequence["int | str"]) -> DistributionTable:
    """Exact marginal over ``scope`` (in the order given) by enumeration."""
    tree = model.tree
    idx = _scope_indices(tree, scope)
    joint = _normalized(model, joint_table(model))
    rest = tuple(j for j in range(tree.p) if j not in idx)
    summed = joint.sum(axis=rest) if rest else joint
    # remaining axes are in ascending variable order
    kept = sorted(idx)
    table = np.transpose(summed, [kept.index(j) for j in idx])
    return DistributionTable(
        scope=tuple(tree.names[j] for j in idx),
        levels=tuple(tree.variables[j].levels for j in idx),
        probabilities=table,
    )


def _event_label(tree: EventTree, given: Mapping[int, int]) -> str:
    return ", ".join(
        f"{tree.names[j]}={tree.variables[j].levels[c]}" for j, c in sorted(given.items())
    )


def path_probability(model: StagedTreeModel, prefix: Prefix) -> float:
    """``P(X_[k] = prefix)`` for a prefix of length ``k``."""
    prob = 1.0
    for i, code in enumerate(prefix):
        ctx = prefix[:i]
        if not model.tree.is_retained(i, ctx):
            return 0.0
        prob *= float(retained_vector(model, i, ctx)[code])
    return prob


def context_probabilities(model: StagedTreeModel, i: int) -> Dict[Prefix, float]:
    """Probability of reaching each retained context of variable ``i``."""
    tree = model.tree
    frontier: Dict[Prefix, float] = {(): 1.0}
    for j in range(i):
        nxt: Dict[Prefix, float] = {}
        for prefix, mass in frontier.items():
            if not tree.is_retained(j, prefix):
                continue
            vec = retained_vector(model, j, prefix)
            for code in range(tree.arities[j]):
                nxt[prefix + (code,)] = mass * float(vec[code])
        frontier = nxt
    return {c: frontier[c] for c in tree.contexts(i) if c in frontier}


def conditional(
    model: StagedTreeModel,
    target: "int | str",
    given: Mapping["int | str", int],
) -> DistributionTable:
    """``P(target | given)``.

    When ``given`` is exactly the full prefix of ``target`` the stage
    vector of that context is returned, restricted to its retained
    children; otherwise the Bayes ratio of enumerated marginals is used.
    """
    tree = model.tree
    t = tree.resolve(target)
    ev = {tree.resolve(k): int(v) for k, v in given.items()}
    if t in ev:
        raise InferenceError(f"'{tree.names[t]}' is both target and evidence")
    for j, c in ev.items():
        if not 0 <= c < tree.arities[j]:
            raise InferenceError(f"code {c} is not a level of '{tree.names[j]}'")
    var = tree.variables[t]
    if set(ev) == set(range(t)):
        prefix = tuple(ev[j] for j in range(t))
        if not tree.is_retained(t, prefix) or path_probability(model, prefix) <= 0:
            raise InferenceError(f"conditioning event has probability 0: {_event_label(tree, ev)}")
        vec = retained_vector(model, t, prefix)
        if vec.sum() <= 0:
            raise InferenceError(f"no retained child of {tree.describe(prefix)} has positive probability")
        return DistributionTable(scope=(var.name,), levels=(var.levels,), probabilities=vec)
    joint = _normalized(model, joint_table(model))
    index: List[object] = [slice(None)] * tree.p
    for j, c in ev.items():
        index[j] = slice(c, c + 1)
    sub = joint[tuple(index)]
    rest = tuple(j for j in range(tree.p) if j != t)
    num = sub.sum(axis=rest)
    denom = float(num.sum())
    if denom <= 0:
        raise InferenceError(f"conditioning event has probability 0: {_event_label(tree, ev)}")
    return DistributionTable(scope=(var.name,), levels=(var.levels,), probabilities=num / denom)


def _has_support(tree: EventTree, spec: InterventionSpec) -> bool:
    if tree.observed is None:
        return True
    last = tree.p - 1
    checks = [(j, c) for j, c in spec.values.items() if j < last]
    return any(all(ctx[j] == c for j, c in checks) for ctx in tree.observed[last])


def intervene(model: StagedTreeModel, spec: InterventionSpec) -> StagedTreeModel:
    """Model of ``P(. | do(X_I = z_I))`` by truncated factorization.

    Each intervened variable gets one stage ``"do"`` whose vector is the
    point mass at the forced level; every other stage is unchanged.
    """
    tree = model.tree
    for j, c in spec.values.items():
        if not 0 <= j < tree.p:
            raise InferenceError(f"intervention target {j} is not a variable index")
        if not 0 <= c < tree.arities[j]:
            raise InferenceError(f"code {c} is not a level of '{tree.names[j]}'")
    if not _has_support(tree, spec):
        raise InferenceError(
            f"intervention do({_event_label(tree, spec.values)}) has empty support in the pruned tree"
        )
    out = model
    for j, c in sorted(spec.values.items()):
        vec = np.zeros(tree.arities[j])
        vec[c] = 1.0
        out = out.with_variable(
            j,
            {ctx: "do" for ctx in tree.contexts(j)},
            {"do": vec},
            counts={"do": np.zeros(tree.arities[j])},
        )
    log.debug("intervene.done", targets=[tree.names[j] for j in spec.targets])
    return out


def sample(
    model: StagedTreeModel,
    n: int,
    seed: Seed = None,
    allow_undefined: bool = False,
) -> Dataset:
    """Draw ``n`` i.i.d. rows by sequential categorical draws along the
    retained tree."""
    if n < 1:
        raise InferenceError("sample size must be >= 1")
    if model.undefined and not allow_undefined:
        flagged = sorted(f"{model.tree.names[i]}:{s}" for i, s in model.undefined)
        raise InferenceError(f"model has undefined stages {flagged}; pass allow_undefined to sample anyway")
    tree = model.tree
    rng = np.random.default_rng(seed)
    uniforms = rng.random((n, tree.p))
    codes = np.zeros((n, tree.p), dtype=np.int64)
    for i in range(tree.p):
        if i == 0:
            groups = [((), np.arange(n))]
        else:
            cells, inverse = np.unique(codes[:, :i], axis=0, return_inverse=True)
            inverse = inverse.reshape(-1)
            groups = [(tuple(int(c) for c in cell), np.flatnonzero(inverse == k)) for k, cell in enumerate(cells)]
        for prefix, rows in groups:
            vec = retained_vector(model, i, prefix)
            if vec.sum() <= 0:
                raise InferenceError(f"no retained child of {tree.describe(prefix)} has positive probability")
            cdf = np.cumsum(vec)
            cdf[np.flatnonzero(vec)[-1]:] = 1.0
            codes[rows, i] = np.searchsorted(cdf, uniforms[rows, i], side="right")
    return Dataset(tree.variables, codes)
