from typing import Dict, List, Literal, Optional

import numpy as np
import structlog
from pydantic import BaseModel, Field

from ..trees.build import build_event_tree
from ..trees.models import Dataset, EventTree, Prefix, Staging
from .models import CausalFrame

log = structlog.get_logger()

# unobserved contexts are listed only for covariate spaces up to this size
LISTING_LIMIT = 4096

CellStatus = Literal["ok", "one_sided", "unobserved"]


class PositivityCell(BaseModel):
    kind: Literal["context", "stage"]
    label: str
    n_treated: int
    n_untreated: int
    status: CellStatus
    missing_arm: Optional[Literal["treated", "untreated"]] = None


class PositivityReport(BaseModel):
    treatment: str
    cells: List[PositivityCell] = Field(default_factory=list)

    @property
    def flagged(self) -> List[PositivityCell]:
        return [c for c in self.cells if c.status != "ok"]

    @property
    def has_violations(self) -> bool:
        return any(c.status == "one_sided" for c in self.cells)


def _cell(kind: Literal["context", "stage"], label: str, n1: int, n0: int) -> PositivityCell:
    if n1 and n0:
        return PositivityCell(kind=kind, label=label, n_treated=n1, n_untreated=n0, status="ok")
    if not n1 and not n0:
        return PositivityCell(kind=kind, label=label, n_treated=0, n_untreated=0, status="unobserved")
    return PositivityCell(
        kind=kind,
        label=label,
        n_treated=n1,
        n_untreated=n0,
        status="one_sided",
        missing_arm="treated" if not n1 else "untreated",
    )


def positivity_report(
    data: Dataset,
    frame: CausalFrame,
    staging: Optional[Staging] = None,
    tree: Optional[EventTree] = None,
) -> PositivityReport:
    """Treated/untreated row counts per covariate context and per treatment stage.

    Contexts with no rows at all are ``unobserved``; contexts where only one
    arm occurs are ``one_sided`` (a positivity violation). Without a tree the
    full covariate product is listed when it is small enough, otherwise only
    observed contexts.
    """
    tree = tree or build_event_tree(data.variables)
    r = frame.treatment
    treated = data.codes[:, r] == frame.treated_level
    counts: Dict[Prefix, List[int]] = {}
    for row, t in zip(data.codes[:, :r], treated):
        key = tuple(int(c) for c in row)
        cell = counts.setdefault(key, [0, 0])
        cell[0 if t else 1] += 1

    if tree.observed is None and tree.full_context_count(r) > LISTING_LIMIT:
        log.info("positivity.observed_only", contexts=tree.full_context_count(r))
        contexts = sorted(counts)
    else:
        contexts = tree.contexts(r)
    report = PositivityReport(treatment=tree.names[r])
    for z in contexts:
        n1, n0 = counts.get(z, [0, 0])
        report.cells.append(_cell("context", tree.describe(z), n1, n0))

    if staging is not None:
        for sid in staging.stage_ids(r):
            members = staging.members(r, sid)
            n1 = int(np.sum([counts.get(z, [0, 0])[0] for z in members]))
            n0 = int(np.sum([counts.get(z, [0, 0])[1] for z in members]))
            report.cells.append(_cell("stage", sid, n1, n0))

    for c in report.flagged:
        if c.status == "one_sided":
            log.warning("positivity.one_sided", kind=c.kind, cell=c.label, missing=c.missing_arm)
    return report


def one_sided_contexts(data: Dataset, frame: CausalFrame, tree: Optional[EventTree] = None) -> List[Prefix]:
    """Treatment contexts observed with only one treatment arm."""
    tree = tree or build_event_tree(data.variables)
    r = frame.treatment
    arms: Dict[Prefix, set] = {}
    for row in data.codes[:, : r + 1]:
        arms.setdefault(tuple(int(c) for c in row[:r]), set()).add(int(row[r]) == frame.treated_level)
    return sorted(z for z, seen in arms.items() if len(seen) == 1 and tree.is_retained(r, z))
