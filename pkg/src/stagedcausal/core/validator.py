from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel

from ..trees.models import EventTree, Staging

IssueKind = Literal["missing_context", "unknown_context", "cross_variable_stage", "wrong_variable_count"]


class StagingIssue(BaseModel):
    kind: IssueKind
    variable: Optional[str] = None
    context: Optional[Tuple[int, ...]] = None
    stage: Optional[str] = None
    message: str = ""


def validate_staging(
    tree: EventTree, staging: Staging, *, strict_ids: bool = False
) -> List[StagingIssue]:
    """Check that ``staging`` partitions exactly the retained contexts of ``tree``.

    Stage ids are scoped per variable, so by default reusing an id on
    another variable is legal and NOT reported; ``saturated_staging`` and
    ``independence_staging`` both reuse ``"1"`` on every variable.

    Pass ``strict_ids=True`` to report every id shared by two variables as
    ``cross_variable_stage``. Callers reading a flat, unscoped stage
    labelling need this; ``fit_mle`` and ``read_model`` check the scoped
    form and say so explicitly.
    """
    issues: List[StagingIssue] = []
    if staging.p != tree.p:
        issues.append(
            StagingIssue(
                kind="wrong_variable_count",
                message=f"staging covers {staging.p} variables, tree has {tree.p}",
            )
        )
        return issues
    owner: dict[str, str] = {}
    for i, var in enumerate(tree.variables):
        mapping = staging.stages[i]
        for prefix in tree.contexts(i):
            if prefix not in mapping:
                issues.append(
                    StagingIssue(
                        kind="missing_context",
                        variable=var.name,
                        context=prefix,
                        message=f"{tree.describe(prefix)} of '{var.name}' has no stage",
                    )
                )
        for prefix in sorted(mapping):
            if not tree.is_retained(i, prefix):
                issues.append(
                    StagingIssue(
                        kind="unknown_context",
                        variable=var.name,
                        context=prefix,
                        stage=mapping[prefix],
                        message=f"context {prefix} is not a context of '{var.name}'",
                    )
                )
        if strict_ids:
            for sid in staging.stage_ids(i):
                first = owner.setdefault(sid, var.name)
                if first != var.name:
                    issues.append(
                        StagingIssue(
                            kind="cross_variable_stage",
                            variable=var.name,
                            stage=sid,
                            message=f"stage '{sid}' is used by '{first}' and '{var.name}'",
                        )
                    )
    return issues
