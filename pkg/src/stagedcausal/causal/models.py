"""
Pydantic models for causal estimation.

Provides:
- CausalFrame: which variables are treatment R and outcome Y
- StratumEffect / AteEstimate: point estimates, CATE per stratum, intervals
- EstimateDiagnostics: positivity and fitting problems found on the way
"""

from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field

from ..core.errors import StagedCausalError
from ..trees.models import EventTree

POSITIVE_LABELS = ("1", "yes", "true", "treated")
NEGATIVE_LABELS = ("0", "no", "false", "untreated", "control", "none")


class UnsupportedConfigurationError(StagedCausalError):
    """Causal setups this package does not define (non-binary R or Y, R after Y...)."""


class PositivityPolicy(str, Enum):
    """What to do with a stratum that lacks treated or untreated data."""

    EXCLUDE = "exclude"
    IMPUTE = "impute"


class CausalFrame(BaseModel):
    """Roles of the variables in the causal order ``(Z, R, Y)``."""

    treatment: int = Field(..., ge=0, description="Index of the treatment variable R")
    outcome: int = Field(..., ge=0, description="Index of the outcome variable Y")
    positive_outcome_level: int = Field(default=1, ge=0, le=1)
    treated_level: int = Field(default=1, ge=0, le=1)

    model_config = ConfigDict(frozen=True)

    @property
    def untreated_level(self) -> int:
        return 1 - self.treated_level

    @property
    def covariates(self) -> tuple[int, ...]:
        return tuple(range(self.treatment))

    def check(self, tree: EventTree) -> None:
        if self.outcome >= tree.p or self.treatment >= tree.p:
            raise UnsupportedConfigurationError("treatment or outcome index outside the tree")
        if self.outcome != tree.p - 1:
            raise UnsupportedConfigurationError(
                f"the outcome '{tree.names[self.outcome]}' must be the last variable"
            )
        if self.treatment >= self.outcome:
            raise UnsupportedConfigurationError("the treatment must precede the outcome")
        for role, idx in (("treatment", self.treatment), ("outcome", self.outcome)):
            if tree.arities[idx] != 2:
                raise UnsupportedConfigurationError(
                    f"{role} '{tree.names[idx]}' has {tree.arities[idx]} levels; only binary {role}s are supported"
                )

    @property
    def adjacent(self) -> bool:
        return self.outcome == self.treatment + 1

    @classmethod
    def from_names(
        cls,
        tree: EventTree,
        treatment: str,
        outcome: str,
        positive_outcome: Optional[str] = None,
        treated: Optional[str] = None,
    ) -> "CausalFrame":
        """Frame from variable names and level labels.

        Without explicit labels, a level spelled like ``1``/``yes``/``true``
        is the positive one, a level spelled like ``0``/``no ...`` the
        negative one; otherwise the second level is positive.
        """
        r = tree.index_of(treatment)
        y = tree.index_of(outcome)

        def pick(idx: int, label: Optional[str]) -> int:
            var = tree.variables[idx]
            if label is not None:
                return var.code_of(label)
            lowered = [lv.strip().lower() for lv in var.levels]
            for code, lv in enumerate(lowered):
                if lv in POSITIVE_LABELS:
                    return code
            for code, lv in enumerate(lowered):
                if lv in NEGATIVE_LABELS or lv.split(" ")[0] in ("no", "not", "non"):
                    return 1 - code
            return 1

        frame = cls(
            treatment=r,
            outcome=y,
            positive_outcome_level=pick(y, positive_outcome),
            treated_level=pick(r, treated),
        )
        frame.check(tree)
        return frame


class ConfidenceInterval(BaseModel):
    lower: float
    upper: float
    level: float = Field(..., gt=0.0, lt=1.0)
    n_bootstrap: Optional[int] = None


class StratumEffect(BaseModel):
    """Treatment contrast within one stratum (a CATE)."""

    stratum: str
    weight: float = Field(..., ge=0.0, le=1.0)
    effect: Optional[float] = None
    p_treated: Optional[float] = None
    p_untreated: Optional[float] = None
    n_treated: Optional[int] = None
    n_untreated: Optional[int] = None
    excluded: bool = False
    imputed: bool = False
    reason: Optional[str] = None
    ci: Optional[ConfidenceInterval] = None


class EstimateDiagnostics(BaseModel):
    positivity_violations: List[str] = Field(default_factory=list)
    undefined_stages: List[str] = Field(default_factory=list)
    excluded_strata: List[str] = Field(default_factory=list)
    imputed_strata: List[str] = Field(default_factory=list)
    clipped_propensities: int = 0
    separation: bool = False
    degenerate: bool = False
    failed_replicates: int = 0
    messages: List[str] = Field(default_factory=list)

    @property
    def clean(self) -> bool:
        return not (
            self.positivity_violations
            or self.undefined_stages
            or self.clipped_propensities
            or self.separation
            or self.degenerate
            or self.failed_replicates
        )


class AteEstimate(BaseModel):
    estimator: str
    ate: float
    per_stratum: List[StratumEffect] = Field(default_factory=list)
    ci: Optional[ConfidenceInterval] = None
    diagnostics: EstimateDiagnostics = Field(default_factory=EstimateDiagnostics)
    replicates: List[float] = Field(default_factory=list)

    def report(self, include_replicates: bool = False) -> dict:
        """JSON-ready dict; replicates are left out unless asked for."""
        exclude = None if include_replicates else {"replicates"}
        return self.model_dump(mode="json", exclude=exclude)


class EstimationError(StagedCausalError):
    """An estimate that cannot be produced (no usable strata, failed fits)."""
