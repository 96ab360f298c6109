import json

import pandas as pd
import pydot
import pytest
from typer.testing import CliRunner

from conftest import write_fall_csv
from stagedcausal.cli import app, main
from stagedcausal.formats.csv_data import read_csv
from stagedcausal.formats.model_json import read_model

ORDER = "Living,Risk,Referral,Treatment,Fall"
EFFECT = ["--treatment", "Treatment", "--outcome", "Fall"]

runner = CliRunner()


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    write_fall_csv(tmp_path / "fall.csv")
    return tmp_path


@pytest.fixture
def fitted(workdir):
    result = runner.invoke(app, ["fit", "--data", "fall.csv", "--order", ORDER, "--out", "model.json"])
    assert result.exit_code == 0, result.output
    return workdir / "model.json"


def test_help():
    result = runner.invoke(app, ["--help"])
    assert result.exit_code == 0
    assert "bootstrap" in result.output


def test_version():
    result = runner.invoke(app, ["version"])
    assert result.exit_code == 0
    assert "stagedcausal version" in result.output


def test_fit_writes_a_model(fitted):
    model = read_model(fitted)
    assert model.n == 500
    assert model.tree.names == tuple(ORDER.split(","))
    assert model.tree.is_pruned


def test_fit_with_staging_from_a_model(fitted, workdir):
    result = runner.invoke(
        app,
        ["fit", "--data", "fall.csv", "--order", ORDER, "--staging", str(fitted), "--alpha", "1", "--out", "again.json"],
    )
    assert result.exit_code == 0, result.output
    again = read_model(workdir / "again.json")
    assert again.staging.same_partition(read_model(fitted).staging)
    assert again.alpha == 1.0


def test_learn(workdir):
    result = runner.invoke(
        app, ["learn", "--data", "fall.csv", "--order", ORDER, "--method", "bhc", "--trace", "--out", "learned.json"]
    )
    assert result.exit_code == 0, result.output
    assert "BIC:" in result.output
    assert "step 0" in result.output
    assert read_model(workdir / "learned.json").staging.total_stages < 1 + 2 + 4 + 6 + 10
    bad = runner.invoke(app, ["learn", "--data", "fall.csv", "--order", ORDER, "--method", "greedy", "--out", "x.json"])
    assert bad.exit_code == 1


def test_ate_full_stratification(workdir):
    result = runner.invoke(app, ["ate", "--data", "fall.csv", *EFFECT, "--estimator", "full", "--out", "ate.json"])
    assert result.exit_code == 0, result.output
    report = json.loads((workdir / "ate.json").read_text())
    assert report["ate"] == pytest.approx(-0.2)
    assert len(report["diagnostics"]["excluded_strata"]) == 2
    assert "ATE: -0.2000" in result.output
    # no --order: covariates in file order, then treatment and outcome
    assert "No --order given" in result.output


def test_ate_bootstrap_is_reproducible(workdir):
    args = [
        "ate", "--data", "fall.csv", "--order", ORDER, *EFFECT,
        "--learner", "hclust", "--estimator", "ps-stratified",
        "--bootstrap", "5", "--seed", "7", "--out", "ate.json", "--replicates-out", "reps.csv",
    ]
    first = runner.invoke(app, args)
    assert first.exit_code == 0, first.output
    report = (workdir / "ate.json").read_bytes()
    replicates = pd.read_csv(workdir / "reps.csv")
    assert list(replicates.columns) == ["ate"]
    assert len(replicates) == 5
    assert runner.invoke(app, args).exit_code == 0
    assert (workdir / "ate.json").read_bytes() == report
    assert json.loads(report)["ci"]["n_bootstrap"] == 5


def test_merge_violating_strata(workdir):
    # a model whose treatment staging depends on living and risk only
    coarse = runner.invoke(
        app, ["fit", "--data", "fall.csv", "--order", ORDER, "--staging", "independence", "--out", "coarse.json"]
    )
    assert coarse.exit_code == 0, coarse.output
    result = runner.invoke(
        app,
        [
            "ate", "--data", "fall.csv", "--order", ORDER, *EFFECT, "--estimator", "ps-stratified",
            "--merge-violating-strata", "coarse.json", "--out", "ate.json",
        ],
    )
    assert result.exit_code == 0, result.output
    report = json.loads((workdir / "ate.json").read_text())
    assert report["ate"] == pytest.approx(-0.2)
    assert report["diagnostics"]["excluded_strata"] == []


def test_bootstrap_command(workdir):
    result = runner.invoke(
        app, ["bootstrap", "--data", "fall.csv", "--order", ORDER, *EFFECT, "-B", "3", "--out", "boot.json"]
    )
    assert result.exit_code == 0, result.output
    report = json.loads((workdir / "boot.json").read_text())
    assert report["estimator"] == "hclust+randomized"
    assert report["ci"]["n_bootstrap"] == 3
    refused = runner.invoke(app, ["bootstrap", "--data", "fall.csv", *EFFECT, "--estimator", "ipw"])
    assert refused.exit_code == 1


def test_positivity(workdir):
    result = runner.invoke(app, ["positivity", "--data", "fall.csv", "--order", ORDER, *EFFECT, "--out", "pos.json"])
    assert result.exit_code == 0, result.output
    assert "2 one-sided cell(s)" in result.output
    report = json.loads((workdir / "pos.json").read_text())
    assert len(report["cells"]) == 8


def test_export_dot_highlights_one_sided_contexts(fitted, workdir):
    result = runner.invoke(
        app, ["export-dot", "--model", str(fitted), "--out", "tree.dot", "--data", "fall.csv", *EFFECT, "--show-probs"]
    )
    assert result.exit_code == 0, result.output
    assert "2 treatment context(s)" in result.output
    text = (workdir / "tree.dot").read_text()
    assert pydot.graph_from_dot_data(text)
    assert "penwidth=3" in text


def test_intervene_reports_the_marginal(fitted, workdir):
    result = runner.invoke(
        app,
        ["intervene", "--model", str(fitted), "--do", "Treatment=yes", "--marginal", "Fall", "--table-out", "do.csv", "--out", "do.json"],
    )
    assert result.exit_code == 0, result.output
    table = pd.read_csv(workdir / "do.csv")
    assert list(table.columns) == ["Fall", "probability"]
    assert table.loc[table["Fall"] == "yes", "probability"].item() == pytest.approx(0.2)
    assert read_model(workdir / "do.json").staging.stage_ids(3) == ["do"]
    unknown = runner.invoke(app, ["intervene", "--model", str(fitted), "--do", "Treatment=maybe"])
    assert unknown.exit_code == 1


def test_sample_is_reproducible(fitted, workdir):
    args = ["sample", "--model", str(fitted), "-n", "50", "--seed", "3", "--out", "s.csv"]
    assert runner.invoke(app, args).exit_code == 0
    first = (workdir / "s.csv").read_bytes()
    assert runner.invoke(app, args).exit_code == 0
    assert (workdir / "s.csv").read_bytes() == first
    assert read_csv(workdir / "s.csv").n == 50
    assert (workdir / "s.csv.schema.json").exists()


def test_learn_then_sample_then_fit(workdir):
    # B=1 never occurs with A=1, so the learned B stage pools a pruned child
    rows = [("0", "0", "0")] * 50 + [("0", "1", "1")] * 50 + [("1", "0", "0")] * 3
    pd.DataFrame(rows, columns=["A", "B", "C"]).to_csv(workdir / "abc.csv", index=False)
    for method in ("bhc", "hclust"):
        learned = runner.invoke(
            app, ["learn", "--data", "abc.csv", "--order", "A,B,C", "--method", method, "--out", "abc.json"]
        )
        assert learned.exit_code == 0, learned.output
        assert read_model(workdir / "abc.json").tree.is_pruned
        drawn = runner.invoke(app, ["sample", "--model", "abc.json", "-n", "300", "--seed", "0", "--out", "s.csv"])
        assert drawn.exit_code == 0, drawn.output
        data = read_csv(workdir / "s.csv")
        assert not ((data.column("A") == 1) & (data.column("B") == 1)).any()
    one = runner.invoke(app, ["sample", "--model", "abc.json", "-n", "1", "--seed", "0", "--out", "one.csv"])
    assert one.exit_code == 0, one.output
    refit = runner.invoke(app, ["fit", "--data", "one.csv", "--order", "A,B,C", "--out", "refit.json"])
    assert refit.exit_code == 0, refit.output
    assert read_model(workdir / "refit.json").tree.variables == read_model(workdir / "abc.json").tree.variables


def test_cate(fitted):
    result = runner.invoke(
        app,
        ["cate", "--model", str(fitted), *EFFECT, "--z", "Living=communal,Risk=low", "--z", "Referral=not"],
    )
    assert result.exit_code == 0, result.output
    assert "-0.2000" in result.output


def test_simulate(workdir):
    args = [
        "simulate", "--p", "4", "--reps", "2", "--sizes", "200", "--estimators", "full,oracle",
        "--join", "0", "--join", "0.8", "--seed", "1", "--out", "sim.csv", "--summary-out", "summary.csv",
    ]
    result = runner.invoke(app, args)
    assert result.exit_code == 0, result.output
    records = pd.read_csv(workdir / "sim.csv")
    assert len(records) == 2 * 2 * 2
    assert set(records["pi"]) == {0.0, 0.8}
    first = (workdir / "sim.csv").read_bytes()
    assert runner.invoke(app, args).exit_code == 0
    assert (workdir / "sim.csv").read_bytes() == first
    assert len(pd.read_csv(workdir / "summary.csv")) == 2 * 2


@pytest.mark.parametrize(
    "args",
    [
        ["fit", "--data", "missing.csv", "--order", "A", "--out", "m.json"],
        ["fit", "--data", "fall.csv", "--out", "m.json"],
        ["ate", "--data", "fall.csv", "--treatment", "Treatment", "--outcome", "Fall", "--estimator", "matching"],
        ["ate", "--data", "fall.csv", "--treatment", "Treatment", "--outcome", "Fall", "--positivity", "maybe"],
        ["ate", "--data", "fall.csv", "--treatment", "Fall", "--outcome", "Treatment", "--order", ORDER],
        ["simulate", "--generator", "forest", "--out", "x.csv"],
        ["simulate", "--estimators", "matching", "--out", "x.csv"],
    ],
)
def test_user_errors_exit_with_one(workdir, args):
    result = runner.invoke(app, args)
    assert result.exit_code == 1, result.output


def test_main_returns_exit_codes(workdir):
    assert main(["version"]) == 0
    assert main(["fit", "--data", "missing.csv", "--order", "A", "--out", "m.json"]) == 1
    assert main(["fit"]) == 1
