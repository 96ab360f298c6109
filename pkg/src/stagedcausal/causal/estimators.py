"""
Treatment-effect estimators on staged tree models.

- ate_randomized: randomize the treatment stage and contrast the outcome,
  i.e. standardization over the retained covariate contexts
- ate_ps_stratified: weighted average over the treatment stages of a
  ps-stratified model (propensity-score stratification)
- cate: contrast for one covariate assignment
- baseline_full_stratification: ate_randomized on a saturated fit
"""

from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import structlog
from scipy.stats import norm

from ..trees.build import prune_unobserved, saturated_staging, build_event_tree
from ..trees.fitting import fit_mle
from ..trees.inference import conditional, context_probabilities, marginal
from ..trees.models import Dataset, Prefix, SchemaError, StagedTreeModel, check_data_matches
from .models import (
    AteEstimate,
    CausalFrame,
    ConfidenceInterval,
    EstimateDiagnostics,
    EstimationError,
    PositivityPolicy,
    StratumEffect,
    UnsupportedConfigurationError,
)
from .transforms import ps_stage_id, randomize_treatment

log = structlog.get_logger()

ARMS = ("treated", "untreated")


def undefined_labels(model: StagedTreeModel) -> List[str]:
    return sorted(f"{model.tree.names[i]}:{s}" for i, s in model.undefined)


def _wald(p1: float, n1: float, p0: float, n0: float, level: float) -> Optional[ConfidenceInterval]:
    if n1 <= 0 or n0 <= 0:
        return None
    z = float(norm.ppf(0.5 + level / 2))
    half = z * float(np.sqrt(p1 * (1 - p1) / n1 + p0 * (1 - p0) / n0))
    diff = p1 - p0
    return ConfidenceInterval(lower=max(-1.0, diff - half), upper=min(1.0, diff + half), level=level)


def _resolve(
    label: str,
    weight: float,
    probs: Dict[str, Optional[float]],
    problems: List[str],
    policy: PositivityPolicy,
    diag: EstimateDiagnostics,
    arity: int,
    **extra: object,
) -> StratumEffect:
    """Apply the positivity policy to one stratum with possibly missing arms."""
    weight = float(min(max(weight, 0.0), 1.0))
    if problems:
        diag.positivity_violations.append(label)
        if policy == PositivityPolicy.EXCLUDE:
            diag.excluded_strata.append(label)
            log.warning("positivity.stratum_excluded", stratum=label, reason="; ".join(problems))
            return StratumEffect(
                stratum=label, weight=weight, excluded=True, reason="; ".join(problems), **extra
            )
        diag.imputed_strata.append(label)
        log.warning("positivity.stratum_imputed", stratum=label, reason="; ".join(problems))
        probs = {arm: (1.0 / arity if p is None else p) for arm, p in probs.items()}
    p1, p0 = probs["treated"], probs["untreated"]
    assert p1 is not None and p0 is not None
    return StratumEffect(
        stratum=label,
        weight=weight,
        effect=p1 - p0,
        p_treated=p1,
        p_untreated=p0,
        imputed=bool(problems),
        reason="; ".join(problems) or None,
        **extra,
    )


def _combine(estimator: str, strata: List[StratumEffect], diag: EstimateDiagnostics) -> AteEstimate:
    """Renormalize weights over the usable strata and average their effects."""
    usable = [s for s in strata if not s.excluded]
    total = sum(s.weight for s in usable)
    if not usable or total <= 0:
        raise EstimationError(
            f"no stratum has both treated and untreated outcomes ({len(strata)} excluded)"
        )
    out: List[StratumEffect] = []
    ate = 0.0
    for s in strata:
        if s.excluded:
            out.append(s)
            continue
        w = float(min(s.weight / total, 1.0))
        assert s.effect is not None
        ate += w * s.effect
        out.append(s.model_copy(update={"weight": w}))
    return AteEstimate(
        estimator=estimator,
        ate=float(np.clip(ate, -1.0, 1.0)),
        per_stratum=out,
        diagnostics=diag,
    )


def ate_randomized(
    model: StagedTreeModel,
    frame: CausalFrame,
    assignment: Optional[Sequence[float]] = None,
    positivity: PositivityPolicy = PositivityPolicy.EXCLUDE,
) -> AteEstimate:
    """ATE of the randomized tree.

    With the outcome right after the treatment this is the standardization
    sum over retained covariate contexts ``z``, weighted by ``P(z)``;
    otherwise the randomized joint of ``(R, Y)`` is enumerated.
    """
    tree = model.tree
    frame.check(tree)
    r, y, pos = frame.treatment, frame.outcome, frame.positive_outcome_level
    randomized = randomize_treatment(model, frame, assignment)
    diag = EstimateDiagnostics(undefined_stages=undefined_labels(model))

    if not frame.adjacent:
        table = marginal(randomized, [r, y]).probabilities
        cond = table[:, pos] / table.sum(axis=1)
        ate = float(cond[frame.treated_level] - cond[frame.untreated_level])
        return AteEstimate(estimator="randomized", ate=ate, diagnostics=diag)

    reach = context_probabilities(randomized, r)
    total = sum(reach.values())
    if total <= 0:
        raise EstimationError("no covariate context has positive probability")
    strata: List[StratumEffect] = []
    for z in tree.contexts(r):
        probs: Dict[str, Optional[float]] = {}
        problems: List[str] = []
        for arm, code in zip(ARMS, (frame.treated_level, frame.untreated_level)):
            ctx: Prefix = z + (code,)
            probs[arm] = None
            if not tree.is_retained(y, ctx):
                problems.append(f"no {arm} observations")
                continue
            sid = model.staging.stage_of(y, ctx)
            if model.is_undefined(y, sid):
                problems.append(f"{arm} outcome stage '{sid}' is undefined")
                continue
            probs[arm] = float(randomized.vector(y, ctx)[pos])
        strata.append(
            _resolve(tree.describe(z), reach.get(z, 0.0) / total, probs, problems, positivity, diag, tree.arities[y])
        )
    return _combine("randomized", strata, diag)


def _row_treatment_stages(model: StagedTreeModel, data: Dataset, r: int) -> np.ndarray:
    staging = model.staging
    if r == 0:
        return np.full(data.n, staging.stage_of(0, ()), dtype=object)
    cells, inverse = np.unique(data.codes[:, :r], axis=0, return_inverse=True)
    labels = np.array([staging.stage_of(r, tuple(int(c) for c in cell)) for cell in cells], dtype=object)
    return labels[inverse.reshape(-1)]


def ate_ps_stratified(
    model: StagedTreeModel,
    data: Dataset,
    frame: CausalFrame,
    positivity: PositivityPolicy = PositivityPolicy.EXCLUDE,
    ci_level: float = 0.95,
) -> AteEstimate:
    """Weighted average of per-treatment-stage contrasts.

    Weights are the fractions of rows whose treatment context lies in each
    stage; each stratum also carries a Wald interval for its contrast.
    """
    tree = model.tree
    frame.check(tree)
    if not frame.adjacent:
        raise UnsupportedConfigurationError("ps-stratified estimation needs the outcome right after the treatment")
    check_data_matches(tree, data)
    if data.n == 0:
        raise EstimationError("no rows to weight the strata with")
    r, y, pos = frame.treatment, frame.outcome, frame.positive_outcome_level
    tstages = model.staging.stage_ids(r)
    expected = {ps_stage_id(s, c) for s in tstages for c in range(tree.arities[r])}
    if not set(model.staging.stage_ids(y)) <= expected:
        raise EstimationError("the outcome is not staged by treatment stage; apply ps_stratify first")

    diag = EstimateDiagnostics(undefined_stages=undefined_labels(model))
    row_stage = _row_treatment_stages(model, data, r)
    treated = data.codes[:, r] == frame.treated_level
    strata: List[StratumEffect] = []
    for s in tstages:
        in_s = row_stage == s
        n_arm = {"treated": int(np.sum(in_s & treated)), "untreated": int(np.sum(in_s & ~treated))}
        probs: Dict[str, Optional[float]] = {}
        sizes: Dict[str, float] = {}
        problems: List[str] = []
        for arm, code in zip(ARMS, (frame.treated_level, frame.untreated_level)):
            sid = ps_stage_id(s, code)
            probs[arm] = None
            if n_arm[arm] == 0 or sid not in model.parameters[y]:
                problems.append(f"no {arm} observations")
                continue
            if model.is_undefined(y, sid):
                problems.append(f"{arm} outcome stage '{sid}' is undefined")
                continue
            probs[arm] = float(model.parameters[y][sid][pos])
            sizes[arm] = float(model.counts[y][sid].sum())
        ci = None
        if not problems:
            ci = _wald(probs["treated"], sizes["treated"], probs["untreated"], sizes["untreated"], ci_level)  # type: ignore[arg-type]
        strata.append(
            _resolve(
                s,
                float(in_s.mean()),
                probs,
                problems,
                positivity,
                diag,
                tree.arities[y],
                n_treated=n_arm["treated"],
                n_untreated=n_arm["untreated"],
                ci=ci,
            )
        )
    return _combine("ps-stratified", strata, diag)


Covariates = Union[Mapping[str, Union[str, int]], Sequence[int]]


def _covariate_codes(model: StagedTreeModel, frame: CausalFrame, z: Covariates) -> Tuple[int, ...]:
    tree = model.tree
    names = [tree.names[j] for j in frame.covariates]
    if isinstance(z, Mapping):
        unknown = set(z) - set(names)
        missing = [n for n in names if n not in z]
        if unknown or missing:
            raise SchemaError(f"covariate assignment must name exactly {names}")
        codes = []
        for j, name in zip(frame.covariates, names):
            value = z[name]
            codes.append(tree.variables[j].code_of(value) if isinstance(value, str) else int(value))
        return tuple(codes)
    codes = tuple(int(c) for c in z)
    if len(codes) != len(names):
        raise SchemaError(f"covariate assignment needs {len(names)} values for {names}")
    return codes


def cate(model: StagedTreeModel, frame: CausalFrame, z: Covariates) -> float:
    """``P(Y=y+ | R=treated, z) - P(Y=y+ | R=untreated, z)``."""
    tree = model.tree
    frame.check(tree)
    codes = _covariate_codes(model, frame, z)
    for j, c in zip(frame.covariates, codes):
        if not 0 <= c < tree.arities[j]:
            raise SchemaError(f"code {c} is not a level of '{tree.names[j]}'")
    given = dict(zip(frame.covariates, codes))
    contrast = []
    for code in (frame.treated_level, frame.untreated_level):
        dist = conditional(model, frame.outcome, {**given, frame.treatment: code})
        contrast.append(float(dist.probabilities[frame.positive_outcome_level]))
    return contrast[0] - contrast[1]


def stage_probability_ci(
    model: StagedTreeModel,
    variable: "int | str",
    stage: str,
    level: int,
    ci_level: float = 0.95,
) -> ConfidenceInterval:
    """Wald interval for one stage probability from its pooled counts."""
    i = model.tree.resolve(variable)
    if stage not in model.parameters[i]:
        raise EstimationError(f"'{model.tree.names[i]}' has no stage '{stage}'")
    n = float(model.counts[i][stage].sum())
    if n <= 0:
        raise EstimationError(f"stage '{stage}' of '{model.tree.names[i]}' has no observations")
    p = float(model.parameters[i][stage][level])
    half = float(norm.ppf(0.5 + ci_level / 2)) * float(np.sqrt(p * (1 - p) / n))
    return ConfidenceInterval(lower=max(0.0, p - half), upper=min(1.0, p + half), level=ci_level)


def baseline_full_stratification(
    data: Dataset,
    frame: CausalFrame,
    positivity: PositivityPolicy = PositivityPolicy.EXCLUDE,
) -> AteEstimate:
    """Complete stratification: saturated, unsmoothed fit, then randomize."""
    tree = prune_unobserved(build_event_tree(data.variables), data)
    model = fit_mle(tree, saturated_staging(tree), data, alpha=0.0)
    est = ate_randomized(model, frame, positivity=positivity)
    return est.model_copy(update={"estimator": "full"})
