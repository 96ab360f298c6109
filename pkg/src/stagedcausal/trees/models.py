"""
Data models for staged event trees.

Provides:
- Variable: a named categorical variable with ordered level labels
- EventTree: ordered variables plus the (optionally pruned) set of contexts
- Staging: per-variable partition of contexts into stages
- StagedTreeModel: tree + staging + one probability vector per stage
- Dataset: integer-coded categorical rows aligned to a variable order

A context of variable ``i`` (0-based) is the tuple of level codes of the
variables before it; the root context is ``()``. Contexts are always
enumerated in lexicographic order of their codes.
"""

from dataclasses import dataclass, field
from itertools import product
from typing import Dict, FrozenSet, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from ..core.errors import StagedCausalError

Prefix = Tuple[int, ...]

# parameter vectors must sum to one within this tolerance
SUM_TOLERANCE = 1e-9


class SchemaError(StagedCausalError):
    """Invalid variables or levels, or data that does not match a tree."""


class StagingError(StagedCausalError):
    """A staging that does not partition the contexts of its tree."""


class Variable(BaseModel):
    """A categorical variable and its ordered sample space."""

    name: str = Field(..., description="Variable (column) name")
    levels: Tuple[str, ...] = Field(..., description="Ordered level labels")

    model_config = ConfigDict(frozen=True)

    @property
    def arity(self) -> int:
        return len(self.levels)

    def code_of(self, label: str) -> int:
        try:
            return self.levels.index(label)
        except ValueError:
            raise SchemaError(
                f"level '{label}' is not a level of '{self.name}' {list(self.levels)}"
            ) from None


def _check_variables(variables: Sequence[Variable]) -> None:
    if not variables:
        raise SchemaError("an event tree needs at least one variable")
    seen = set()
    for v in variables:
        if not v.name:
            raise SchemaError("variable names must be non-empty")
        if v.name in seen:
            raise SchemaError(f"duplicate variable name '{v.name}'")
        seen.add(v.name)
        if v.arity < 2:
            raise SchemaError(
                f"variable '{v.name}' has {v.arity} level(s); at least 2 are required"
            )
        if len(set(v.levels)) != v.arity:
            raise SchemaError(f"variable '{v.name}' has duplicate level labels")


@dataclass(frozen=True)
class EventTree:
    """Ordered variables and the contexts (internal nodes) that are kept.

    ``observed`` is ``None`` for the full symmetric tree. After pruning it
    holds, for every depth ``0..p``, the set of retained prefixes; depth
    ``p`` lists the retained leaves and is used for display only.
    """

    variables: Tuple[Variable, ...]
    observed: Optional[Tuple[FrozenSet[Prefix], ...]] = None

    def __post_init__(self) -> None:
        _check_variables(self.variables)
        if self.observed is None:
            return
        if len(self.observed) != self.p + 1:
            raise SchemaError("observed contexts must cover every depth 0..p")
        if () not in self.observed[0]:
            raise SchemaError("the root context cannot be pruned")
        for depth in range(1, self.p + 1):
            for prefix in self.observed[depth]:
                if len(prefix) != depth:
                    raise SchemaError(f"context {prefix} has the wrong length for depth {depth}")
                if prefix[:-1] not in self.observed[depth - 1]:
                    raise SchemaError(f"context {prefix} is kept but its parent is pruned")

    @property
    def p(self) -> int:
        return len(self.variables)

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    @property
    def arities(self) -> Tuple[int, ...]:
        return tuple(v.arity for v in self.variables)

    @property
    def is_pruned(self) -> bool:
        return self.observed is not None

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise SchemaError(f"unknown variable '{name}'") from None

    def resolve(self, variable: "int | str") -> int:
        if isinstance(variable, str):
            return self.index_of(variable)
        if not 0 <= variable < self.p:
            raise SchemaError(f"variable index {variable} out of range 0..{self.p - 1}")
        return variable

    def full_context_count(self, i: int) -> int:
        return int(np.prod(self.arities[:i], dtype=np.int64)) if i else 1

    def contexts(self, i: int) -> List[Prefix]:
        """Retained contexts of variable ``i`` in lexicographic order."""
        if self.observed is not None:
            return sorted(self.observed[i])
        return list(product(*[range(a) for a in self.arities[:i]]))

    def n_contexts(self, i: int) -> int:
        if self.observed is not None:
            return len(self.observed[i])
        return self.full_context_count(i)

    def is_retained(self, i: int, prefix: Prefix) -> bool:
        if len(prefix) != i:
            return False
        if any(not 0 <= c < a for c, a in zip(prefix, self.arities)):
            return False
        return self.observed is None or prefix in self.observed[i]

    def leaves(self) -> List[Prefix]:
        if self.observed is not None:
            return sorted(self.observed[self.p])
        return list(product(*[range(a) for a in self.arities]))

    @property
    def n_leaves(self) -> int:
        if self.observed is not None:
            return len(self.observed[self.p])
        return self.full_context_count(self.p)

    def describe(self, prefix: Prefix) -> str:
        """Human label of a context, e.g. ``ENSO=Nino, IOD=neg``."""
        if not prefix:
            return "(root)"
        return ", ".join(
            f"{self.variables[j].name}={self.variables[j].levels[c]}"
            for j, c in enumerate(prefix)
        )


@dataclass(frozen=True)
class Staging:
    """Per-variable map from context to stage id.

    Stage ids are scoped per variable: stage ``"1"`` of one variable has
    nothing to do with stage ``"1"`` of another.
    """

    stages: Tuple[Dict[Prefix, str], ...]

    @property
    def p(self) -> int:
        return len(self.stages)

    def stage_of(self, i: int, prefix: Prefix) -> str:
        try:
            return self.stages[i][prefix]
        except KeyError:
            raise StagingError(f"context {prefix} of variable {i} has no stage") from None

    def stage_ids(self, i: int) -> List[str]:
        """Stage ids of variable ``i`` ordered by their first member context."""
        seen: Dict[str, None] = {}
        for prefix in sorted(self.stages[i]):
            seen.setdefault(self.stages[i][prefix], None)
        return list(seen)

    def members(self, i: int, stage: str) -> List[Prefix]:
        return sorted(c for c, s in self.stages[i].items() if s == stage)

    def partition(self, i: int) -> List[List[Prefix]]:
        groups: Dict[str, List[Prefix]] = {}
        for prefix in sorted(self.stages[i]):
            groups.setdefault(self.stages[i][prefix], []).append(prefix)
        return list(groups.values())

    def n_stages(self, i: int) -> int:
        return len(set(self.stages[i].values()))

    @property
    def total_stages(self) -> int:
        return sum(self.n_stages(i) for i in range(self.p))

    def with_variable(self, i: int, mapping: Mapping[Prefix, str]) -> "Staging":
        stages = list(self.stages)
        stages[i] = dict(mapping)
        return Staging(tuple(stages))

    def merged(self, i: int, keep: str, drop: str) -> "Staging":
        """Move every context of stage ``drop`` into stage ``keep``."""
        return self.with_variable(
            i, {c: (keep if s == drop else s) for c, s in self.stages[i].items()}
        )

    def canonical(self) -> "Staging":
        """Relabel stages ``"1".."k"`` per variable in first-member order."""
        stages = []
        for i in range(self.p):
            relabel = {sid: str(k + 1) for k, sid in enumerate(self.stage_ids(i))}
            stages.append({c: relabel[s] for c, s in self.stages[i].items()})
        return Staging(tuple(stages))

    def same_partition(self, other: "Staging", i: Optional[int] = None) -> bool:
        targets = range(self.p) if i is None else [i]
        if other.p != self.p:
            return False
        for j in targets:
            mine = sorted(tuple(g) for g in self.partition(j))
            theirs = sorted(tuple(g) for g in other.partition(j))
            if mine != theirs:
                return False
        return True


def _frozen(vec: np.ndarray) -> np.ndarray:
    arr = np.array(vec, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class StagedTreeModel:
    """A staged event tree with one conditional probability vector per stage.

    ``counts`` holds the pooled level counts each vector was fitted from;
    ``undefined`` lists ``(variable, stage)`` pairs whose vector is a uniform
    placeholder because the stage had no data and no smoothing.
    """

    tree: EventTree
    staging: Staging
    parameters: Tuple[Dict[str, np.ndarray], ...]
    counts: Tuple[Dict[str, np.ndarray], ...]
    undefined: FrozenSet[Tuple[int, str]] = frozenset()
    n: int = 0
    alpha: float = 0.0

    def __post_init__(self) -> None:
        tree = self.tree
        if self.staging.p != tree.p or len(self.parameters) != tree.p:
            raise StagingError("staging and parameters must cover every variable")
        params = []
        counts = []
        for i, var in enumerate(tree.variables):
            fixed: Dict[str, np.ndarray] = {}
            for sid in self.staging.stage_ids(i):
                if sid not in self.parameters[i]:
                    raise StagingError(f"stage '{sid}' of '{var.name}' has no parameters")
                vec = _frozen(self.parameters[i][sid])
                if vec.shape != (var.arity,):
                    raise StagingError(
                        f"stage '{sid}' of '{var.name}' has {vec.size} probabilities, expected {var.arity}"
                    )
                if np.any(vec < 0) or abs(float(vec.sum()) - 1.0) > SUM_TOLERANCE:
                    raise StagingError(
                        f"stage '{sid}' of '{var.name}' is not a probability vector: {vec.tolist()}"
                    )
                fixed[sid] = vec
            params.append(fixed)
            given = self.counts[i] if i < len(self.counts) else {}
            counts.append(
                {sid: _frozen(given.get(sid, np.zeros(var.arity))) for sid in fixed}
            )
        object.__setattr__(self, "parameters", tuple(params))
        object.__setattr__(self, "counts", tuple(counts))

    def vector(self, i: int, prefix: Prefix) -> np.ndarray:
        return self.parameters[i][self.staging.stage_of(i, prefix)]

    def conditional_table(self, i: int) -> Tuple[List[Prefix], np.ndarray]:
        """All contexts of ``i`` in lexicographic order with their vectors.

        Pruned contexts get an all-zero row.
        """
        full = list(product(*[range(a) for a in self.tree.arities[:i]]))
        table = np.zeros((len(full), self.tree.arities[i]))
        for row, prefix in enumerate(full):
            if self.tree.is_retained(i, prefix):
                table[row] = self.vector(i, prefix)
        return full, table

    def is_undefined(self, i: int, stage: str) -> bool:
        return (i, stage) in self.undefined

    def with_variable(
        self,
        i: int,
        stages: Mapping[Prefix, str],
        parameters: Mapping[str, np.ndarray],
        counts: Optional[Mapping[str, np.ndarray]] = None,
        undefined: Sequence[str] = (),
    ) -> "StagedTreeModel":
        """Copy of the model with variable ``i`` restaged and reparameterized."""
        params = list(self.parameters)
        params[i] = dict(parameters)
        cnts = list(self.counts)
        cnts[i] = dict(counts or {})
        flags = {(j, s) for j, s in self.undefined if j != i}
        flags.update((i, s) for s in undefined)
        return StagedTreeModel(
            tree=self.tree,
            staging=self.staging.with_variable(i, stages),
            parameters=tuple(params),
            counts=tuple(cnts),
            undefined=frozenset(flags),
            n=self.n,
            alpha=self.alpha,
        )


@dataclass(frozen=True, eq=False)
class Dataset:
    """Complete categorical rows coded as level indices."""

    variables: Tuple[Variable, ...]
    codes: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        _check_variables(self.variables)
        arr = np.asarray(self.codes, dtype=np.int64)
        if arr.ndim != 2 or arr.shape[1] != len(self.variables):
            raise SchemaError(
                f"data must have shape (N, {len(self.variables)}), got {arr.shape}"
            )
        for j, v in enumerate(self.variables):
            col = arr[:, j]
            if col.size and (col.min() < 0 or col.max() >= v.arity):
                raise SchemaError(f"column '{v.name}' has codes outside 0..{v.arity - 1}")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "codes", arr)

    @property
    def n(self) -> int:
        return int(self.codes.shape[0])

    @property
    def p(self) -> int:
        return len(self.variables)

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    def column(self, name: str) -> np.ndarray:
        return self.codes[:, self.names.index(name)]

    def take(self, rows: np.ndarray) -> "Dataset":
        return Dataset(self.variables, self.codes[np.asarray(rows, dtype=np.int64)])

    def reorder(self, order: Sequence[str]) -> "Dataset":
        """Select and reorder columns by name."""
        missing = [n for n in order if n not in self.names]
        if missing:
            raise SchemaError(f"unknown column(s) {missing}; available {list(self.names)}")
        if len(set(order)) != len(order):
            raise SchemaError("variable order lists a column twice")
        idx = [self.names.index(n) for n in order]
        return Dataset(tuple(self.variables[j] for j in idx), self.codes[:, idx])

    def labels(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                v.name: np.asarray(v.levels, dtype=object)[self.codes[:, j]]
                for j, v in enumerate(self.variables)
            },
            columns=list(self.names),
        )

    def rows(self) -> Iterator[Prefix]:
        for row in self.codes:
            yield tuple(int(c) for c in row)


def check_data_matches(tree: EventTree, data: Dataset) -> None:
    """Raise SchemaError unless the data uses exactly the tree's variables."""
    if tuple(tree.variables) != tuple(data.variables):
        raise SchemaError(
            f"data variables {list(data.names)} do not match tree variables {list(tree.names)}"
        )
