import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from stagedcausal.trees.build import build_event_tree  # noqa: E402
from stagedcausal.trees.models import Dataset, EventTree, StagedTreeModel, Staging, Variable  # noqa: E402

BINARY = ("0", "1")


def binary_variables(*names):
    return tuple(Variable(name=n, levels=BINARY) for n in names)


def model_from(tree, stages, params):
    """Model with the given stages and parameters and no counts."""
    return StagedTreeModel(
        tree=tree,
        staging=Staging(tuple(stages)),
        parameters=tuple({k: np.asarray(v, dtype=float) for k, v in p.items()} for p in params),
        counts=tuple({} for _ in stages),
    )


@pytest.fixture
def zry_tree():
    return build_event_tree(binary_variables("Z", "R", "Y"))


@pytest.fixture
def four_rows():
    """Y copies R; Z and R are balanced."""
    return Dataset(
        binary_variables("Z", "R", "Y"),
        np.array([[0, 0, 0], [0, 1, 1], [1, 0, 0], [1, 1, 1]]),
    )


ENSO_VARIABLES = (
    Variable(name="ENSO", levels=("Nina", "neut", "Nino")),
    Variable(name="IOD", levels=("neg", "zero", "pos")),
    Variable(name="AU", levels=("low", "high")),
)


@pytest.fixture
def enso_model():
    """ENSO -> IOD -> AU rainfall tree with the (Nino, neg) branch pruned.

    IOD shares one stage under neut and Nino; AU has three stages.
    """
    contexts2 = [(e, i) for e in range(3) for i in range(3) if (e, i) != (2, 0)]
    observed = (
        frozenset({()}),
        frozenset({(0,), (1,), (2,)}),
        frozenset(contexts2),
        frozenset(c + (a,) for c in contexts2 for a in range(2)),
    )
    tree = EventTree(variables=ENSO_VARIABLES, observed=observed)
    au = {
        (0, 0): "1",
        (1, 0): "1",
        (0, 1): "2",
        (0, 2): "2",
        (1, 1): "2",
        (1, 2): "3",
        (2, 1): "3",
        (2, 2): "3",
    }
    return model_from(
        tree,
        [{(): "1"}, {(0,): "1", (1,): "2", (2,): "2"}, au],
        [
            {"1": [0.3, 0.4, 0.3]},
            {"1": [0.5, 0.3, 0.2], "2": [0.2, 0.5, 0.3]},
            {"1": [0.2, 0.8], "2": [0.5, 0.5], "3": [0.7, 0.3]},
        ],
    )


FALL_VARIABLES = (
    Variable(name="Living", levels=("communal", "community")),
    Variable(name="Risk", levels=("low", "high")),
    Variable(name="Referral", levels=("not", "referred")),
    Variable(name="Treatment", levels=("no", "yes")),
    Variable(name="Fall", levels=("no", "yes")),
)


def fall_rows():
    """Fall-prevention study: 10% of low risk, 50% of non-referred high risk
    and every referred patient treated; falls in 20% of treated and 40% of
    untreated patients in every group."""
    rows = []

    def arm(living, risk, referral, treated, size):
        falls = int(round(size * (0.2 if treated else 0.4)))
        for k in range(size):
            rows.append((living, risk, referral, int(treated), int(k < falls)))

    for living in (0, 1):
        arm(living, 0, 0, True, 10)
        arm(living, 0, 0, False, 90)
        arm(living, 1, 0, True, 50)
        arm(living, 1, 0, False, 50)
        arm(living, 1, 1, True, 50)
    return np.array(rows)


@pytest.fixture
def fall_data():
    return Dataset(FALL_VARIABLES, fall_rows())


def write_fall_csv(path):
    data = Dataset(FALL_VARIABLES, fall_rows())
    data.labels().to_csv(path, index=False, lineterminator="\n")
    return path
