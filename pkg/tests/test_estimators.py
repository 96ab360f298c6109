from itertools import product

import numpy as np
import pytest

from conftest import FALL_VARIABLES, binary_variables, model_from
from stagedcausal.causal.bootstrap import EstimatorKind, Learner, estimate_pipeline
from stagedcausal.causal.estimators import (
    ate_ps_stratified,
    ate_randomized,
    baseline_full_stratification,
    cate,
    stage_probability_ci,
)
from stagedcausal.causal.models import (
    CausalFrame,
    EstimationError,
    PositivityPolicy,
    UnsupportedConfigurationError,
)
from stagedcausal.causal.transforms import ps_stratify, randomize_treatment
from stagedcausal.core.errors import StagedCausalError
from stagedcausal.simulation.generators import ParamDist, random_staged_tree
from stagedcausal.trees.build import build_event_tree, independence_staging, prune_unobserved, saturated_staging
from stagedcausal.trees.fitting import fit_mle
from stagedcausal.trees.inference import InterventionSpec, intervene, marginal, sample
from stagedcausal.trees.models import Dataset

FRAME = CausalFrame(treatment=1, outcome=2)


def constant_effect_model(tree, y_stages=None):
    """P(Z=1)=0.5, P(Y=1|R=1,z)=0.7 and P(Y=1|R=0,z)=0.3 for both z."""
    stages = y_stages or {(0, 0): "1", (1, 0): "1", (0, 1): "2", (1, 1): "2"}
    return model_from(
        tree,
        [{(): "1"}, {(0,): "1", (1,): "2"}, stages],
        [
            {"1": [0.5, 0.5]},
            {"1": [0.8, 0.2], "2": [0.25, 0.75]},
            {"1": [0.7, 0.3], "2": [0.3, 0.7]},
        ],
    )


def random_model(rng, p):
    tree = build_event_tree(binary_variables(*[f"X{k}" for k in range(p)]))
    staging = saturated_staging(tree)
    return model_from(
        tree,
        staging.stages,
        [{sid: rng.dirichlet([1.0, 1.0]) for sid in staging.stage_ids(i)} for i in range(p)],
    )


def standardization(model, r, y):
    total = 0.0
    for z in product(range(2), repeat=r):
        pz = float(np.prod([model.vector(j, z[:j])[z[j]] for j in range(r)]))
        total += pz * (model.vector(y, z + (1,))[1] - model.vector(y, z + (0,))[1])
    return total


def fall_frame(tree):
    return CausalFrame.from_names(tree, "Treatment", "Fall")


def test_constant_effect(zry_tree):
    est = ate_randomized(constant_effect_model(zry_tree), FRAME)
    assert est.ate == pytest.approx(0.4)
    assert est.estimator == "randomized"
    assert [s.effect for s in est.per_stratum] == pytest.approx([0.4, 0.4])
    assert sum(s.weight for s in est.per_stratum) == pytest.approx(1.0)


def test_outcome_staging_blind_to_treatment_gives_zero(zry_tree):
    model = constant_effect_model(zry_tree, {(0, 0): "1", (0, 1): "1", (1, 0): "2", (1, 1): "2"})
    assert ate_randomized(model, FRAME).ate == 0.0


@pytest.mark.parametrize("p", [3, 4])
def test_randomized_matches_standardization(p):
    rng = np.random.default_rng(p)
    for _ in range(5):
        model = random_model(rng, p)
        frame = CausalFrame(treatment=p - 2, outcome=p - 1)
        est = ate_randomized(model, frame)
        assert est.ate == pytest.approx(standardization(model, p - 2, p - 1), abs=1e-12)


def test_randomization_marginal_does_not_matter():
    model = random_model(np.random.default_rng(11), 4)
    frame = CausalFrame(treatment=2, outcome=3)
    default = ate_randomized(model, frame).ate
    assert ate_randomized(model, frame, assignment=[0.3, 0.7]).ate == pytest.approx(default, abs=1e-12)


def test_non_adjacent_outcome_is_an_interventional_contrast():
    model = random_model(np.random.default_rng(5), 4)
    frame = CausalFrame(treatment=1, outcome=3)
    est = ate_randomized(model, frame)
    treated = marginal(intervene(model, InterventionSpec(values={1: 1})), [3]).prob(1)
    untreated = marginal(intervene(model, InterventionSpec(values={1: 0})), [3]).prob(1)
    assert est.ate == pytest.approx(treated - untreated, abs=1e-12)
    with pytest.raises(UnsupportedConfigurationError):
        ate_ps_stratified(model, sample(model, 20, seed=0), frame)


def test_full_stratification_on_four_rows(four_rows):
    assert baseline_full_stratification(four_rows, FRAME).ate == pytest.approx(1.0)


def test_full_stratification_matches_raw_counts():
    rng = np.random.default_rng(8)
    codes = rng.integers(0, 2, size=(600, 4))
    data = Dataset(binary_variables("A", "B", "R", "Y"), codes)
    frame = CausalFrame(treatment=2, outcome=3)
    expected = 0.0
    for z in product(range(2), repeat=2):
        in_z = np.all(codes[:, :2] == z, axis=1)
        y1 = codes[in_z & (codes[:, 2] == 1), 3].mean()
        y0 = codes[in_z & (codes[:, 2] == 0), 3].mean()
        expected += in_z.mean() * (y1 - y0)
    est = baseline_full_stratification(data, frame)
    assert est.estimator == "full"
    assert est.ate == pytest.approx(expected, abs=1e-12)


def test_fall_study_excludes_referred_strata(fall_data):
    est = baseline_full_stratification(fall_data, fall_frame(build_event_tree(FALL_VARIABLES)))
    assert est.ate == pytest.approx(-0.2)
    excluded = [s for s in est.per_stratum if s.excluded]
    assert len(excluded) == 2
    assert all("Referral=referred" in s.stratum for s in excluded)
    assert all(s.reason == "no untreated observations" for s in excluded)
    assert est.diagnostics.excluded_strata == [s.stratum for s in excluded]
    assert sum(s.weight for s in est.per_stratum if not s.excluded) == pytest.approx(1.0)
    assert not est.diagnostics.clean


def test_fall_study_imputation(fall_data):
    frame = fall_frame(build_event_tree(FALL_VARIABLES))
    est = baseline_full_stratification(fall_data, frame, positivity=PositivityPolicy.IMPUTE)
    # referred strata carry 20% of the rows and a 0.2 - 0.5 contrast
    assert est.ate == pytest.approx(0.8 * -0.2 + 0.2 * -0.3)
    assert len(est.diagnostics.imputed_strata) == 2
    assert all(not s.excluded for s in est.per_stratum)


def test_fall_study_ps_stratified(fall_data):
    tree = prune_unobserved(build_event_tree(FALL_VARIABLES), fall_data)
    frame = fall_frame(tree)
    model = fit_mle(tree, saturated_staging(tree), fall_data)
    est = ate_ps_stratified(ps_stratify(model, frame, fall_data), fall_data, frame)
    assert est.ate == pytest.approx(-0.2)
    assert len(est.diagnostics.positivity_violations) == 2
    usable = [s for s in est.per_stratum if not s.excluded]
    assert est.ate == pytest.approx(sum(s.weight * s.effect for s in usable), abs=1e-10)
    assert all(s.ci is not None and s.ci.lower <= s.effect <= s.ci.upper for s in usable)


def test_merging_referred_strata_resolves_positivity(fall_data):
    tree = prune_unobserved(build_event_tree(FALL_VARIABLES), fall_data)
    frame = fall_frame(tree)
    stages = {z: f"{z[0]}{z[1]}" for z in tree.contexts(frame.treatment)}
    est = estimate_pipeline(
        fall_data,
        frame,
        learner=Learner.HCLUST,
        estimator=EstimatorKind.PS_STRATIFIED,
        treatment_stages=stages,
    )
    assert est.ate == pytest.approx(-0.2)
    assert not est.diagnostics.excluded_strata
    assert len(est.per_stratum) == 4


def test_single_treatment_stage_is_the_naive_difference():
    rng = np.random.default_rng(21)
    z = rng.integers(0, 2, size=800)
    r = (rng.random(800) < np.where(z == 1, 0.7, 0.3)).astype(int)
    y = (rng.random(800) < 0.2 + 0.3 * r + 0.3 * z).astype(int)
    data = Dataset(binary_variables("Z", "R", "Y"), np.column_stack([z, r, y]))
    tree = build_event_tree(data.variables)
    model = fit_mle(tree, independence_staging(tree), data)
    est = ate_ps_stratified(ps_stratify(model, FRAME, data), data, FRAME)
    assert est.ate == pytest.approx(y[r == 1].mean() - y[r == 0].mean(), abs=1e-12)
    assert len(est.per_stratum) == 1


def test_ps_stratified_needs_the_stratified_model(zry_tree, four_rows):
    model = fit_mle(zry_tree, saturated_staging(zry_tree), four_rows)
    with pytest.raises(EstimationError):
        ate_ps_stratified(model, four_rows, FRAME)


def test_cate(zry_tree):
    model = constant_effect_model(zry_tree)
    assert cate(model, FRAME, {"Z": "0"}) == pytest.approx(0.4)
    assert cate(model, FRAME, [1]) == pytest.approx(0.4)
    with pytest.raises(StagedCausalError):
        cate(model, FRAME, {"Q": "1"})
    with pytest.raises(StagedCausalError):
        cate(model, FRAME, [0, 1])


def test_cate_on_impossible_covariates(zry_tree):
    model = model_from(
        zry_tree,
        [{(): "1"}, {(0,): "1", (1,): "1"}, {c: "1" for c in zry_tree.contexts(2)}],
        [{"1": [1.0, 0.0]}, {"1": [0.5, 0.5]}, {"1": [0.5, 0.5]}],
    )
    with pytest.raises(StagedCausalError):
        cate(model, FRAME, [1])


def test_stage_probability_interval(zry_tree, four_rows):
    model = fit_mle(zry_tree, independence_staging(zry_tree), four_rows)
    ci = stage_probability_ci(model, "Y", "1", 1)
    assert ci.lower < 0.5 < ci.upper
    with pytest.raises(EstimationError):
        stage_probability_ci(model, "Y", "7", 1)


def test_randomized_matches_standardization_on_fitted_models():
    worst = 0.0
    for k in range(200):
        p = 3 + k % 2
        truth = random_staged_tree(p, (0.0, 0.5, 1.0)[k % 3], ParamDist.UNIF if k % 4 else ParamDist.EXP, seed=k)
        model = fit_mle(truth.tree, truth.staging, sample(truth, 400, seed=1000 + k), alpha=1.0)
        frame = CausalFrame(treatment=p - 2, outcome=p - 1)
        worst = max(worst, abs(ate_randomized(model, frame).ate - standardization(model, p - 2, p - 1)))
        randomized = randomize_treatment(model, frame)
        for i in range(p):
            if i == frame.treatment:
                continue
            for ctx in model.tree.contexts(i):
                np.testing.assert_array_equal(randomized.vector(i, ctx), model.vector(i, ctx))
    assert worst < 1e-12


def test_saturated_randomized_fit_is_full_stratification():
    variables = binary_variables("A", "B", "R", "Y")
    for seed in range(100):
        rng = np.random.default_rng(seed)
        p = 3 + seed % 2
        cells = np.array(list(product(range(2), repeat=p)))
        # every cell twice, then random rows
        codes = np.vstack([cells, cells, rng.integers(0, 2, size=(300, p))])
        data = Dataset(variables[4 - p:], codes)
        frame = CausalFrame(treatment=p - 2, outcome=p - 1)
        tree = build_event_tree(data.variables)
        fitted = fit_mle(tree, saturated_staging(tree), data)
        expected = 0.0
        for z in product(range(2), repeat=p - 2):
            in_z = np.all(codes[:, : p - 2] == z, axis=1)
            y1 = codes[in_z & (codes[:, p - 2] == 1), p - 1].mean()
            y0 = codes[in_z & (codes[:, p - 2] == 0), p - 1].mean()
            expected += in_z.mean() * (y1 - y0)
        randomized = ate_randomized(fitted, frame).ate
        assert randomized == pytest.approx(baseline_full_stratification(data, frame).ate, abs=1e-12)
        assert randomized == pytest.approx(expected, abs=1e-12)
