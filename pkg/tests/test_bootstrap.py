import numpy as np
import pytest
from pydantic import ValidationError

from conftest import binary_variables
from stagedcausal.causal.bootstrap import (
    BootstrapConfig,
    EstimatorKind,
    Learner,
    bootstrap_ate,
    estimate_pipeline,
    percentile_interval,
)
from stagedcausal.causal.models import CausalFrame, EstimationError
from stagedcausal.trees.models import Dataset

FRAME = CausalFrame(treatment=2, outcome=3)


@pytest.fixture(scope="module")
def observational():
    rng = np.random.default_rng(42)
    n = 400
    z1 = rng.integers(0, 2, size=n)
    z2 = rng.integers(0, 2, size=n)
    r = (rng.random(n) < 0.3 + 0.4 * z1).astype(int)
    y = (rng.random(n) < 0.2 + 0.3 * r + 0.2 * z2).astype(int)
    return Dataset(binary_variables("Z1", "Z2", "R", "Y"), np.column_stack([z1, z2, r, y]))


def test_config_defaults_and_validation():
    config = BootstrapConfig()
    assert config.replicates == 200
    assert config.learner == Learner.HCLUST
    assert BootstrapConfig(estimator="ps_stratified").estimator == EstimatorKind.PS_STRATIFIED
    with pytest.raises(ValidationError):
        BootstrapConfig(replicates=1)


@pytest.mark.parametrize("estimator", list(EstimatorKind))
@pytest.mark.parametrize("learner", list(Learner))
def test_pipeline_combinations(observational, learner, estimator):
    est = estimate_pipeline(observational, FRAME, learner=learner, estimator=estimator)
    assert -1.0 <= est.ate <= 1.0
    assert est.ate == pytest.approx(0.3, abs=0.15)


def test_bootstrap_is_deterministic(observational):
    config = BootstrapConfig(replicates=6, seed=3)
    first = bootstrap_ate(observational, FRAME, config)
    second = bootstrap_ate(observational, FRAME, config)
    assert first.replicates == second.replicates
    assert first.ate == second.ate
    other = bootstrap_ate(observational, FRAME, config.model_copy(update={"seed": 4}))
    assert other.replicates != first.replicates


def test_bootstrap_does_not_depend_on_threads(observational):
    config = BootstrapConfig(replicates=6, seed=9, estimator=EstimatorKind.PS_STRATIFIED)
    serial = bootstrap_ate(observational, FRAME, config)
    parallel = bootstrap_ate(observational, FRAME, config.model_copy(update={"threads": 3}))
    assert serial.replicates == parallel.replicates


def test_bootstrap_summary(observational):
    seen = []
    est = bootstrap_ate(
        observational,
        FRAME,
        BootstrapConfig(replicates=8, learner=Learner.BHC),
        on_progress=lambda done, total: seen.append((done, total)),
    )
    assert est.estimator == "bhc+randomized"
    assert len(est.replicates) == 8
    assert est.ate == pytest.approx(np.mean(est.replicates))
    assert est.ci.lower <= est.ate <= est.ci.upper
    assert est.ci.n_bootstrap == 8
    assert est.diagnostics.failed_replicates == 0
    assert seen[-1] == (8, 8)
    assert "replicates" not in est.report()
    assert len(est.report(include_replicates=True)["replicates"]) == 8


def test_bootstrap_fails_when_every_replicate_fails(observational):
    codes = np.array(observational.codes)
    codes[:, 2] = 1
    data = Dataset(observational.variables, codes)
    with pytest.raises(EstimationError):
        bootstrap_ate(data, FRAME, BootstrapConfig(replicates=3))


def test_percentile_interval():
    ci = percentile_interval(np.arange(101, dtype=float), 0.9)
    assert (ci.lower, ci.upper) == pytest.approx((5.0, 95.0))
    assert ci.level == 0.9
