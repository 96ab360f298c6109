"""
Model JSON persistence.

Layout::

    {"variables": [{"name": ..., "levels": [...]}, ...],
     "staging": {"<var>": {"<labels joined by |>": "<stage>"}},
     "parameters": {"<var>": {"<stage>": [floats]}},
     "counts": {"<var>": {"<stage>": [floats]}},
     "observed": {"<depth>": ["<labels joined by |>", ...]},   # pruned trees only
     "meta": {"n": ..., "alpha": ..., "schema_version": 1, "undefined": [...]}}

Contexts are written with level labels, the root context as ``""``. Floats
are written with Python's shortest round-trip repr, so loading reproduces
every probability exactly. Loading re-validates all model invariants.
"""

import json
from pathlib import Path
from typing import Dict, FrozenSet, List, Optional, Tuple, Union

import numpy as np
import structlog
from pydantic import BaseModel, Field, ValidationError

from ..core.errors import StagedCausalError
from ..core.validator import validate_staging
from ..trees.models import (
    EventTree,
    Prefix,
    StagedTreeModel,
    Staging,
    Variable,
)

log = structlog.get_logger()

SCHEMA_VERSION = 1
SEPARATOR = "|"

PathLike = Union[str, Path]


class ModelFormatError(StagedCausalError):
    """Model file that is unreadable or violates model invariants."""


class VariableDoc(BaseModel):
    name: str
    levels: List[str]


class MetaDoc(BaseModel):
    n: int = 0
    alpha: float = 0.0
    schema_version: int = SCHEMA_VERSION
    undefined: List[List[str]] = Field(default_factory=list)


class ModelDocument(BaseModel):
    variables: List[VariableDoc]
    staging: Dict[str, Dict[str, str]]
    parameters: Dict[str, Dict[str, List[float]]]
    counts: Dict[str, Dict[str, List[float]]] = Field(default_factory=dict)
    observed: Optional[Dict[str, List[str]]] = None
    meta: MetaDoc = Field(default_factory=MetaDoc)


def _encode(tree: EventTree, prefix: Prefix) -> str:
    return SEPARATOR.join(tree.variables[j].levels[c] for j, c in enumerate(prefix))


def _decode(tree: EventTree, key: str, depth: int, where: str) -> Prefix:
    labels = key.split(SEPARATOR) if key else []
    if len(labels) != depth:
        raise ModelFormatError(f"{where}: context '{key}' should have {depth} labels")
    try:
        return tuple(tree.variables[j].code_of(lab) for j, lab in enumerate(labels))
    except StagedCausalError as e:
        raise ModelFormatError(f"{where}: {e}") from e


def model_to_document(model: StagedTreeModel) -> ModelDocument:
    tree = model.tree
    for v in tree.variables:
        if any(SEPARATOR in lv for lv in v.levels):
            raise ModelFormatError(f"level labels of '{v.name}' contain '{SEPARATOR}'")
    observed = None
    if tree.observed is not None:
        observed = {
            str(depth): [_encode(tree, c) for c in sorted(tree.observed[depth])]
            for depth in range(tree.p + 1)
        }
    return ModelDocument(
        variables=[VariableDoc(name=v.name, levels=list(v.levels)) for v in tree.variables],
        staging={
            v.name: {_encode(tree, c): model.staging.stage_of(i, c) for c in tree.contexts(i)}
            for i, v in enumerate(tree.variables)
        },
        parameters={
            v.name: {s: [float(x) for x in vec] for s, vec in model.parameters[i].items()}
            for i, v in enumerate(tree.variables)
        },
        counts={
            v.name: {s: [float(x) for x in vec] for s, vec in model.counts[i].items()}
            for i, v in enumerate(tree.variables)
        },
        observed=observed,
        meta=MetaDoc(
            n=model.n,
            alpha=model.alpha,
            undefined=sorted([tree.names[i], s] for i, s in model.undefined),
        ),
    )


def document_to_model(doc: ModelDocument) -> StagedTreeModel:
    if doc.meta.schema_version != SCHEMA_VERSION:
        raise ModelFormatError(
            f"unsupported schema_version {doc.meta.schema_version}; expected {SCHEMA_VERSION}"
        )
    try:
        variables = tuple(Variable(name=v.name, levels=tuple(v.levels)) for v in doc.variables)
        tree = EventTree(variables=variables)
        if doc.observed is not None:
            observed: List[FrozenSet[Prefix]] = []
            for depth in range(tree.p + 1):
                keys = doc.observed.get(str(depth), [])
                observed.append(frozenset(_decode(tree, k, depth, "observed") for k in keys))
            tree = EventTree(variables=variables, observed=tuple(observed))
    except ModelFormatError:
        raise
    except StagedCausalError as e:
        raise ModelFormatError(str(e)) from e

    stages = []
    params = []
    counts = []
    for i, var in enumerate(tree.variables):
        raw = doc.staging.get(var.name)
        if raw is None:
            raise ModelFormatError(f"staging has no entry for variable '{var.name}'")
        stages.append({_decode(tree, k, i, f"staging of '{var.name}'"): s for k, s in raw.items()})
        params.append({s: np.array(v, dtype=float) for s, v in doc.parameters.get(var.name, {}).items()})
        counts.append({s: np.array(v, dtype=float) for s, v in doc.counts.get(var.name, {}).items()})
    staging = Staging(tuple(stages))
    issues = validate_staging(tree, staging, strict_ids=False)
    if issues:
        first = issues[0]
        raise ModelFormatError(f"invalid staging: {first.message}" + (f" (+{len(issues) - 1} more)" if len(issues) > 1 else ""))
    undefined = set()
    for entry in doc.meta.undefined:
        if len(entry) != 2 or entry[0] not in tree.names:
            raise ModelFormatError(f"meta.undefined entry {entry} is not [variable, stage]")
        undefined.add((tree.index_of(entry[0]), entry[1]))
    try:
        return StagedTreeModel(
            tree=tree,
            staging=staging,
            parameters=tuple(params),
            counts=tuple(counts),
            undefined=frozenset(undefined),
            n=doc.meta.n,
            alpha=doc.meta.alpha,
        )
    except StagedCausalError as e:
        raise ModelFormatError(str(e)) from e


def write_model(model: StagedTreeModel, path: PathLike) -> None:
    doc = model_to_document(model)
    with open(path, "w") as f:
        json.dump(doc.model_dump(exclude_none=True), f, indent=2)
        f.write("\n")
    log.debug("model.written", path=str(path))


def read_model(path: PathLike) -> StagedTreeModel:
    try:
        with open(path, "r") as f:
            raw = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ModelFormatError(f"cannot read model {path}: {e}") from e
    try:
        doc = ModelDocument.model_validate(raw)
    except ValidationError as e:
        raise ModelFormatError(f"model {path} does not match the model schema: {e}") from e
    return document_to_model(doc)


def staging_from_model_file(path: PathLike, tree: EventTree) -> Tuple[Staging, StagedTreeModel]:
    """Staging of a saved model, checked against ``tree``'s variables."""
    model = read_model(path)
    if model.tree.variables != tree.variables:
        raise ModelFormatError(f"model {path} was built for variables {list(model.tree.names)}")
    return model.staging, model
