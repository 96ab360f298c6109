"""Bootstrap replication on the right heart catheterization data.

The CSV is not shipped; point STAGEDCAUSAL_RHC_CSV at a local copy with the
covariates in causal order followed by ``swang1`` and ``death``.
"""

import os

import pytest

from stagedcausal.causal.bootstrap import BootstrapConfig, EstimatorKind, Learner, bootstrap_ate
from stagedcausal.causal.models import CausalFrame
from stagedcausal.formats.csv_data import read_csv
from stagedcausal.trees.build import build_event_tree

RHC_CSV = os.environ.get("STAGEDCAUSAL_RHC_CSV")

pytestmark = [
    pytest.mark.slow,
    pytest.mark.skipif(not RHC_CSV or not os.path.exists(RHC_CSV), reason="STAGEDCAUSAL_RHC_CSV not set"),
]


@pytest.fixture(scope="module")
def rhc():
    data = read_csv(RHC_CSV)
    covariates = [n for n in data.names if n not in ("swang1", "death")]
    data = data.reorder([*covariates, "swang1", "death"])
    frame = CausalFrame.from_names(build_event_tree(data.variables), "swang1", "death")
    return data, frame


def run(rhc, estimator):
    data, frame = rhc
    config = BootstrapConfig(
        learner=Learner.HCLUST,
        estimator=estimator,
        replicates=200,
        seed=7,
        threads=os.cpu_count() or 1,
    )
    return bootstrap_ate(data, frame, config)


def test_ps_stratified(rhc):
    est = run(rhc, EstimatorKind.PS_STRATIFIED)
    assert est.ate == pytest.approx(-0.0722, abs=0.02)
    assert est.ci.lower == pytest.approx(-0.107, abs=0.03)
    assert est.ci.upper == pytest.approx(-0.029, abs=0.03)


def test_randomized(rhc):
    est = run(rhc, EstimatorKind.RANDOMIZED)
    assert est.ate == pytest.approx(-0.0248, abs=0.02)
