import json

import numpy as np
import pytest

from conftest import binary_variables, model_from
from stagedcausal.formats.model_json import (
    ModelFormatError,
    read_model,
    staging_from_model_file,
    write_model,
)
from stagedcausal.trees.build import build_event_tree, prune_unobserved, saturated_staging
from stagedcausal.trees.fitting import fit_mle
from stagedcausal.trees.inference import joint_prob, sample
from stagedcausal.trees.models import Variable


@pytest.fixture
def saved(tmp_path, enso_model):
    path = tmp_path / "model.json"
    write_model(enso_model, path)
    return path


def test_round_trip_is_exact(tmp_path, fall_data):
    tree = prune_unobserved(build_event_tree(fall_data.variables), fall_data)
    model = fit_mle(tree, saturated_staging(tree), fall_data, alpha=0.5)
    path = tmp_path / "fall.json"
    write_model(model, path)
    back = read_model(path)
    assert back.tree == model.tree
    assert back.staging.stages == model.staging.stages
    assert (back.n, back.alpha) == (model.n, model.alpha)
    for i in range(tree.p):
        for sid, vec in model.parameters[i].items():
            np.testing.assert_array_equal(back.parameters[i][sid], vec)
            np.testing.assert_array_equal(back.counts[i][sid], model.counts[i][sid])
    for x in sample(model, 100, seed=0).rows():
        assert joint_prob(back, x) == joint_prob(model, x)


def test_pruned_tree_and_labels_are_kept(saved, enso_model):
    raw = json.loads(saved.read_text())
    assert raw["meta"]["schema_version"] == 1
    assert raw["staging"]["AU"]["Nino|pos"] == "3"
    assert "Nino|neg" not in raw["staging"]["AU"]
    assert raw["staging"]["ENSO"] == {"": "1"}
    back = read_model(saved)
    assert back.tree.observed == enso_model.tree.observed


def test_undefined_flags_survive(tmp_path, zry_tree):
    data = sample(
        model_from(
            zry_tree,
            saturated_staging(zry_tree).stages,
            [{"1": [1.0, 0.0]}, {"1": [0.5, 0.5], "2": [0.5, 0.5]}, {s: [0.5, 0.5] for s in "1234"}],
        ),
        30,
        seed=1,
    )
    model = fit_mle(zry_tree, saturated_staging(zry_tree), data)
    path = tmp_path / "m.json"
    write_model(model, path)
    assert read_model(path).undefined == model.undefined


def edit(path, change):
    raw = json.loads(path.read_text())
    change(raw)
    path.write_text(json.dumps(raw))
    return path


def test_probability_vector_must_sum_to_one(saved):
    edit(saved, lambda raw: raw["parameters"]["AU"].__setitem__("1", [0.2, 0.7]))
    with pytest.raises(ModelFormatError, match="not a probability vector"):
        read_model(saved)


def test_missing_staging_entry_is_reported(saved):
    edit(saved, lambda raw: raw["staging"]["AU"].pop("neut|zero"))
    with pytest.raises(ModelFormatError, match="ENSO=neut, IOD=zero"):
        read_model(saved)


def test_schema_version_mismatch(saved):
    edit(saved, lambda raw: raw["meta"].__setitem__("schema_version", 2))
    with pytest.raises(ModelFormatError, match="schema_version"):
        read_model(saved)


@pytest.mark.parametrize(
    "change",
    [
        lambda raw: raw["staging"]["AU"].__setitem__("Nina|huge", "1"),
        lambda raw: raw["meta"].__setitem__("undefined", [["Rain", "1"]]),
        lambda raw: raw.pop("parameters"),
    ],
)
def test_malformed_documents(saved, change):
    edit(saved, change)
    with pytest.raises(ModelFormatError):
        read_model(saved)


def test_unreadable_file(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ModelFormatError):
        read_model(path)


def test_separator_in_labels_is_refused(tmp_path):
    tree = build_event_tree(binary_variables("A") + (Variable(name="B", levels=("x|y", "z")),))
    model = model_from(tree, saturated_staging(tree).stages, [{"1": [0.5, 0.5]}, {"1": [0.5, 0.5], "2": [0.5, 0.5]}])
    with pytest.raises(ModelFormatError):
        write_model(model, tmp_path / "m.json")


def test_staging_from_model_file(saved, enso_model, zry_tree):
    staging, _ = staging_from_model_file(saved, enso_model.tree)
    assert staging.stages == enso_model.staging.stages
    with pytest.raises(ModelFormatError):
        staging_from_model_file(saved, zry_tree)
