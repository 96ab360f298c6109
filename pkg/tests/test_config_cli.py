from typer.testing import CliRunner

from stagedcausal.cli import app


def test_config_init_show(tmp_path):
    runner = CliRunner()
    cfg = tmp_path / "stagedcausal.toml"
    r1 = runner.invoke(app, ["config", "init", "--config", str(cfg)])
    assert r1.exit_code == 0
    assert cfg.exists()
    r2 = runner.invoke(app, ["config", "show", "--config", str(cfg)])
    assert r2.exit_code == 0
    assert "bootstrap.replicates" in r2.output
    r3 = runner.invoke(app, ["config", "init", "--config", str(cfg)])
    assert r3.exit_code == 1


def test_global_config_sets_defaults(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    (tmp_path / "custom.toml").write_text('[learning]\ndefault_learner = "bhc"\n')
    (tmp_path / "d.csv").write_text("Z,R,Y\n0,0,0\n0,1,1\n1,0,0\n1,1,1\n0,1,0\n1,0,1\n")
    result = CliRunner().invoke(
        app,
        ["--config", "custom.toml", "ate", "--data", "d.csv", "--order", "Z,R,Y", "--treatment", "R", "--outcome", "Y", "--out", "ate.json"],
    )
    assert result.exit_code == 0, result.output
    assert "bhc+randomized" in (tmp_path / "ate.json").read_text()
