import json
import shutil
import subprocess

import numpy as np
import pytest

from hyparc.cli import main


@pytest.fixture
def clouds(tmp_path):
    path = tmp_path / "d.csv"
    assert main(["generate", "--classes", "2", "--clouds", "2", "--n", "8", "--dim", "2", "--seed", "1",
                 "--out", str(path)]) == 0
    return path


def train(args, data, out):
    return main(["train", "--data", str(data), "--model-out", str(out)] + args)


def test_generate_writes_csv(clouds):
    lines = clouds.read_text().splitlines()
    assert lines[0].split(",")[-1] == "label" and len(lines) == 9


def test_train_predict_evaluate(clouds, tmp_path, capsys):
    model = tmp_path / "m.json"
    assert train(["--m", "1", "--norm", "l2"], clouds, model) == 0
    out = capsys.readouterr().out
    assert "C2 = m*C1 = 1" in out and "objective" in out and "status" in out
    preds = tmp_path / "p.csv"
    assert main(["predict", "--model", str(model), "--data", str(clouds), "--label-col", "-1",
                 "--out", str(preds)]) == 0
    assert preds.read_text().splitlines()[0] == "prediction"
    capsys.readouterr()
    assert main(["evaluate", "--model", str(model), "--data", str(clouds)]) == 0
    assert capsys.readouterr().out.strip() == "ACC 100.00"


def test_verify_duality_exit_codes(clouds, tmp_path, capsys):
    l2 = tmp_path / "l2.json"
    l1 = tmp_path / "l1.json"
    assert train(["--m", "1", "--norm", "l2"], clouds, l2) == 0
    assert train(["--m", "1", "--norm", "l1"], clouds, l1) == 0
    capsys.readouterr()
    assert main(["verify-duality", "--data", str(clouds), "--model", str(l2)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["passed"] and report["gap"] <= 1e-6
    assert main(["verify-duality", "--data", str(clouds), "--model", str(l1)]) == 4


def test_export_mps(clouds, tmp_path, capsys):
    mps = tmp_path / "m.mps"
    assert main(["train", "--data", str(clouds), "--m", "1", "--norm", "l1", "--export-mps", str(mps)]) == 0
    text = mps.read_text()
    assert text.startswith("NAME") and text.rstrip().endswith("ENDATA")
    js = tmp_path / "m2.json"
    assert main(["train", "--data", str(clouds), "--m", "1", "--norm", "l2", "--export-mps", str(js)]) == 0
    assert "quadratic terms exported only in JSON form" in capsys.readouterr().err
    assert json.loads(js.read_text())["schema"] == "hyparc-model/1"


def test_usage_errors(clouds, tmp_path, capsys):
    assert main(["train", "--data", str(tmp_path / "missing.csv")]) == 2
    assert main(["train", "--data", str(clouds), "--m", "0"]) == 2
    assert main(["train"]) == 2
    three = tmp_path / "d3.csv"
    main(["generate", "--classes", "2", "--clouds", "2", "--n", "6", "--dim", "3", "--out", str(three)])
    assert main(["plot-data", "--data", str(three)]) == 2
    assert "2-D only" in capsys.readouterr().err


def test_plot_data(clouds, tmp_path):
    model = tmp_path / "m.json"
    train(["--m", "1", "--norm", "l1"], clouds, model)
    out = tmp_path / "plot.json"
    assert main(["plot-data", "--data", str(clouds), "--model", str(model), "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert len(doc["points"]) == 8 and len(doc["boundaries"]) == 1
    seg = np.array(doc["boundaries"][0]["polyline"])
    xmin, xmax, ymin, ymax = doc["box"]
    assert seg.shape == (2, 2)
    assert np.all(seg[:, 0] >= xmin - 1e-9) and np.all(seg[:, 0] <= xmax + 1e-9)


def test_cv_metadata(clouds, tmp_path, capsys):
    meta = tmp_path / "meta.json"
    assert main(["cv", "--data", str(clouds), "--m-grid", "1", "--c-grid", "1", "--outer-folds", "2",
                 "--inner-folds", "2", "--norm", "l1", "--metadata-out", str(meta)]) == 0
    assert "outer ACC" in capsys.readouterr().out
    doc = json.loads(meta.read_text())
    assert doc["stratified"] and doc["best"]["m"] == 1


def test_train_is_deterministic(tmp_path):
    clouds = tmp_path / "d12.csv"
    main(["generate", "--classes", "2", "--clouds", "4", "--n", "12", "--dim", "2", "--seed", "3",
          "--out", str(clouds)])
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    args = ["--m", "2", "--norm", "l2", "--heuristic", "on", "--seed", "5"]
    assert train(args, clouds, a) == 0 and train(args, clouds, b) == 0
    assert a.read_bytes() == b.read_bytes()


@pytest.mark.skipif(shutil.which("hyparc") is None, reason="console script not installed")
def test_console_script(clouds):
    res = subprocess.run(["hyparc", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "hyparc" in res.stdout
