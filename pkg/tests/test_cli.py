import re

import numpy as np
import pytest

from fppshape.cli import main
from fppshape.dataset import HEADER
from oracle_models import l1_model


def run(capsys, *argv):
    code = main(list(map(str, argv)))
    out, err = capsys.readouterr()
    return code, out, err


def test_featurize_stdout(capsys):
    code, out, _ = run(capsys, "featurize", "--spec", "beta:1,1,1")
    assert code == 0
    header, row = out.splitlines()
    assert header.split(",")[:4] == ["family", "params", "mu", "sigma"]
    assert row.startswith('beta,"1,1,1",0.5,')


def test_simulate_outputs(tmp_path, capsys):
    code, out, err = run(capsys, "simulate", "--spec", "gamma:3,1", "--budget", 3000, "--seed", 4,
                         "--cloud", tmp_path / "c.csv", "--hull", tmp_path / "h.csv",
                         "--svg", tmp_path / "s.svg")
    assert code == 0 and out.startswith("x,y\n0.0,") and "3000 events" in err
    assert (tmp_path / "c.csv").read_text().startswith("x,y,time\n0,0,0.0\n")
    assert (tmp_path / "s.svg").read_text().startswith("<svg")


def test_simulate_constant_weight_gives_l1_arc(capsys):
    code, out, _ = run(capsys, "simulate", "--spec", "gamma:1,1", "--budget", 20000,
                       "--constant-weight", 1, "-q")
    assert out.splitlines()[1:] == ["0.0,1.0", "0.5,0.5"]


def test_predict_l1_oracle_emits_diamond(tmp_path, capsys):
    model = tmp_path / "l1.json"
    l1_model().save(model)
    svg = tmp_path / "p.svg"
    code, out, _ = run(capsys, "predict", "--model", model, "--spec", "gamma:10,1",
                       "--step", 0.01, "--svg", svg, "--hull", "-q")
    assert code == 0
    assert out.splitlines()[-1] == "0.5,0.5"
    pts = re.search(r'<polygon id="prediction" points="([^"]+)"', svg.read_text()).group(1)
    corners = {tuple(map(float, p.split(","))) for p in pts.split()}
    assert corners == {(-1.0, 0.0), (0.0, -1.0), (1.0, 0.0), (0.0, 1.0)}


def test_build_dataset_twice_identical(tmp_path, capsys):
    for name in ("a.csv", "b.csv"):
        code, _, _ = run(capsys, "build-dataset", "--n", 2, "--seed", 7, "--budget", 3000,
                         "--out", tmp_path / name, "--jobs", 1)
        assert code == 0
    a = (tmp_path / "a.csv").read_bytes()
    assert a == (tmp_path / "b.csv").read_bytes()
    assert a.decode().splitlines()[0] == ",".join(HEADER)


@pytest.mark.parametrize("argv, code", [
    (["featurize", "--spec", "gamma:0,1"], 1),
    (["featurize"], 1),
    (["nonsense"], 1),
    (["simulate", "--spec", "gamma:2,1", "--budget", "-3"], 1),
    (["evaluate", "--model", "missing.json", "--data", "missing.csv"], 1),
    (["build-dataset", "--n", "1", "--out", "/no/such/dir/x.csv"], 1),
])
def test_usage_errors(capsys, argv, code):
    got, _, err = run(capsys, *argv)
    assert got == code and err.startswith("fppshape: error:")


def test_format_errors(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("x,y\n1,2\n")
    model = tmp_path / "m.json"
    l1_model().save(model)
    code, _, err = run(capsys, "evaluate", "--model", model, "--data", bad)
    assert code == 2 and "bad.csv:1" in err
    model.write_text("not json")
    code, _, _ = run(capsys, "predict", "--model", model, "--spec", "gamma:2,1")
    assert code == 2


def test_diagnostic_exit_code(tmp_path, capsys):
    model = tmp_path / "m.json"
    m = l1_model()
    m.params.layers[1][0][0, 0] = 1.0  # y = 1 + x never crosses
    m.save(model)
    code, _, err = run(capsys, "predict", "--model", model, "--spec", "gamma:2,1")
    assert code == 3 and "never crossed" in err


@pytest.mark.parametrize("command", ["simulate", "build-dataset", "featurize", "train", "grid",
                                     "cv", "evaluate", "predict"])
def test_help_documents_flags(capsys, command):
    with pytest.raises(SystemExit) as exc:
        main([command, "--help"])
    assert exc.value.code == 0
    text = capsys.readouterr().out
    assert "--seed" in text and "--config" in text
    if command in ("build-dataset", "train", "grid", "cv", "evaluate"):
        assert "q01,...,q99,x,y" in text


def test_config_file_and_flag_precedence(tmp_path, capsys):
    data = tmp_path / "d.csv"
    run(capsys, "build-dataset", "--n", 6, "--budget", 2000, "--out", data, "--jobs", 1, "-q")
    cfg = tmp_path / "c.toml"
    cfg.write_text(f'layers = 2\n[train]\nunits = 4\ndata = "{data}"\nmodel = "{tmp_path / "m.json"}"\n')
    code, _, _ = run(capsys, "train", "--config", cfg, "--units", 5, "-q")
    assert code == 0
    import json
    assert json.loads((tmp_path / "m.json").read_text())["dims"] == [102, 5, 5, 1]
    cfg.write_text("bogus = 1\n")
    code, _, err = run(capsys, "train", "--config", cfg)
    assert code == 1 and "bogus" in err


def test_train_evaluate_cv_grid(tmp_path, capsys):
    data = tmp_path / "d.csv"
    run(capsys, "build-dataset", "--n", 12, "--budget", 3000, "--out", data, "--jobs", 1, "-q")
    code, out, _ = run(capsys, "train", "--data", data, "--model", tmp_path / "m.json",
                       "--history", tmp_path / "h.csv", "--layers", 2, "--units", 6, "-q")
    assert code == 0 and out.startswith("mae_train,mape_train\n")
    assert (tmp_path / "h.csv").read_text().splitlines()[0] == "epoch,train_loss,val_loss"
    code, out, _ = run(capsys, "evaluate", "--model", tmp_path / "m.json", "--data", data)
    assert code == 0 and out.startswith("rows,mae,mape\n")
    code, out, _ = run(capsys, "cv", "--data", data, "--k", 3, "--formula", "simple")
    assert code == 0 and float(out.splitlines()[1]) >= 0
    code, out, _ = run(capsys, "grid", "--train", data, "--test", data, "--grid-layers", 2,
                       "--grid-units", "3,4", "--k", 2, "--jobs", 1, "-q",
                       "--finalize", tmp_path / "f.json")
    rows = out.splitlines()
    assert code == 0 and rows[0].startswith("data_source,model,layers,units") and len(rows) == 3
    assert (tmp_path / "f.json").exists()
