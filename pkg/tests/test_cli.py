import json
import subprocess
import sys

import pytest

from conftest import PANEL_FIXTURE
from trendcast.cli import main


@pytest.fixture(scope="module")
def dataset_json(tmp_path_factory):
    out = tmp_path_factory.mktemp("ingest")
    assert main(["ingest", str(PANEL_FIXTURE), "--targets", "Die,Death", "--out", str(out)]) == 0
    return out / "dataset.json"


def test_ingest_reports_counts(tmp_path, capsys):
    assert main(["ingest", str(PANEL_FIXTURE), "--targets", "die,death", "--out", str(tmp_path)]) == 0
    assert capsys.readouterr().out.startswith("19 predictors, 2 variables;")
    data = json.loads((tmp_path / "dataset.json").read_text())
    assert set(data) >= {"start_week", "names", "roles", "values"}


def test_ingest_gap_is_a_validation_error(tmp_path, capsys):
    bad = tmp_path / "gap.csv"
    bad.write_text("date,flu\n2014-01-06,10\n2014-01-20,12\n")
    assert main(["ingest", str(bad), "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert err.count("\n") == 1 and "gap in weekly sampling" in err
    assert err.startswith("trendcast: error: validation:")


def test_scalogram_and_periodicity(dataset_json, tmp_path):
    assert main(["scalogram", str(dataset_json), "--series", "Respiratory Infection", "--out", str(tmp_path)]) == 0
    meta = json.loads((tmp_path / "scalogram_Respiratory_Infection.meta.json").read_text())
    assert abs(meta["peak_frequency"] - 1.0) < 0.05 and len(meta["grid"]) == 48
    assert main(["periodicity", str(dataset_json), "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "periodicity.csv").read_text().splitlines()
    assert lines[0] == "rank,name,annual_ratio,semiannual_ratio,score,label" and len(lines) == 20


def test_evaluate_and_importance(dataset_json, tmp_path, capsys):
    args = ["evaluate", str(dataset_json), "--target", "Die", "--features", "periodic:10",
            "--lambda", "10", "--out", str(tmp_path)]
    assert main(args) == 0
    report = json.loads((tmp_path / "report_Die_periodic10.json").read_text())
    assert report["scenario"] == "periodic:10" and report["pooled"]["n"] == 209
    assert len(report["fold_metrics"]) == 5
    capsys.readouterr()
    assert main(["importance", str(tmp_path / "model_Die_periodic10.json")]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 11


def test_evaluate_is_deterministic(dataset_json, tmp_path):
    outs = []
    for run in ("a", "b"):
        d = tmp_path / run
        assert main(["evaluate", str(dataset_json), "--target", "Death", "--lambda", "1", "--lags", "8",
                     "--pvalue", "permutation", "--seed", "3", "--out", str(d)]) == 0
        outs.append({p.name: p.read_bytes() for p in d.iterdir()})
    assert outs[0] == outs[1]


@pytest.mark.parametrize(
    "argv, code, kind",
    [
        (["evaluate", "{ds}", "--target", "Nope"], 2, "validation"),
        (["evaluate", "{ds}", "--target", "Die", "--lambda", "big"], 2, "usage"),
        (["evaluate", "{ds}", "--target", "Die", "--features", "periodic:99"], 2, "validation"),
        (["evaluate", "{ds}"], 2, "usage"),
        (["frobnicate"], 2, "usage"),
        (["scalogram", "{ds}", "--series", "Flu", "--omega0", "2"], 2, "validation"),
        (["importance", "/nonexistent/model.json"], 2, "usage"),
        (["evaluate", "{ds}", "--target", "Die", "--lambda", "0", "--lags", "52"], 3, "numerical"),
    ],
)
def test_error_exit_codes(dataset_json, tmp_path, capsys, argv, code, kind):
    argv = [a.replace("{ds}", str(dataset_json)) for a in argv]
    if argv[0] in ("evaluate", "scalogram"):
        argv += ["--out", str(tmp_path)]
    assert main(argv) == code
    err = capsys.readouterr().err
    assert err.startswith(f"trendcast: error: {kind}:") and err.count("\n") == 1


def test_synth_command(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"T": 120, "seed": 1, "series": [{"name": "a", "components": [[1, 5, 0]], "offset": 20}]}))
    assert main(["synth", "--spec", str(spec), "--out", str(tmp_path / "p.csv")]) == 0
    assert (tmp_path / "p.csv").read_text().startswith("date,a\n2013-12-30,20")


def test_help_via_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "trendcast", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for cmd in ("ingest", "scalogram", "periodicity", "evaluate", "importance", "synth"):
        assert cmd in res.stdout
