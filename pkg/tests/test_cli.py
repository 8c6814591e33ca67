import csv
import filecmp
import json

import numpy as np
import pytest

from segunc.cli import main
from segunc.formats import save_volume
from segunc.grid import LabelGrid, ScalarGrid

SMALL = {"dims": [32, 32, 32], "semi_axes": [7.0, 10.0], "amplitude": 3.0}


@pytest.fixture(scope="module")
def suite(tmp_path_factory):
    root = tmp_path_factory.mktemp("suite")
    cfg = root / "cfg.json"
    cfg.write_text(json.dumps(SMALL))
    assert main(["synth", "--config", str(cfg), "--n", "4", "--out", str(root / "s")]) == 0
    return root / "s"


def case_args(suite, i=0, unc="clean"):
    return ["--gt", str(suite / f"case_{i:03d}_gt.nii.gz"),
            "--pred", str(suite / f"case_{i:03d}_pred.nii.gz"),
            "--unc", str(suite / f"case_{i:03d}_{unc}.nii.gz")]


def test_synth_writes_manifest(suite):
    m = json.loads((suite / "manifest.json").read_text())
    assert m["schema"] == "segunc.manifest/1"
    assert [c["id"] for c in m["cases"]] == ["case_000", "case_001", "case_002", "case_003"]
    assert m["config"]["dims"] == [32, 32, 32]
    assert all((suite / c["maps"]["noisy"]).is_file() for c in m["cases"])


def test_synth_is_reproducible(suite, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(SMALL))
    assert main(["synth", "--config", str(cfg), "--n", "4", "--out", str(tmp_path / "again")]) == 0
    cmp = filecmp.dircmp(suite, tmp_path / "again")
    assert not cmp.left_only and not cmp.right_only
    _, mismatch, errors = filecmp.cmpfiles(suite, tmp_path / "again", cmp.common_files, shallow=False)
    assert not mismatch and not errors


def test_synth_rejects_zero_cases(tmp_path):
    assert main(["synth", "--n", "0", "--out", str(tmp_path / "z")]) == 2


def test_compute_emits_every_metric(suite, tmp_path):
    out = tmp_path / "r.json"
    assert main(["compute", *case_args(suite), "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["schema"] == "segunc.case/1"
    entries = doc["maps"]["unc"]["metrics"]
    names = [e["name"] for e in entries]
    assert len(names) >= 13
    assert {"SPACE", "BUC", "BA-ECE", "PAvPU_5", "PAvPU_11"} <= set(names)
    assert all(e["status"] == "ok" for e in entries)
    baece = next(e for e in entries if e["name"] == "BA-ECE")
    assert len(baece["details"]["bands"]) == 5


def test_compute_metric_subset(suite, tmp_path):
    out = tmp_path / "r.json"
    assert main(["compute", *case_args(suite), "--metrics", "space,buc", "--out", str(out)]) == 0
    names = [e["name"] for e in json.loads(out.read_text())["maps"]["unc"]["metrics"]]
    assert names == ["SPACE", "BUC"]


def test_compute_fixed_radius_is_recorded(suite, tmp_path):
    out = tmp_path / "r.json"
    assert main(["compute", *case_args(suite), "--metrics", "buc", "--radius-mm", "2.5", "--out", str(out)]) == 0
    buc = json.loads(out.read_text())["maps"]["unc"]["metrics"][0]
    assert buc["params"]["radius_mm"] == 2.5


def test_compute_missing_gt(suite, tmp_path):
    args = case_args(suite)
    args[1] = str(tmp_path / "nope.nii.gz")
    assert main(["compute", *args]) == 2


def test_compute_unknown_metric(suite):
    assert main(["compute", *case_args(suite), "--metrics", "dice"]) == 2


def test_compute_geometry_mismatch(suite, tmp_path):
    other = tmp_path / "small.nii.gz"
    save_volume(other, ScalarGrid(np.zeros((8, 8, 8))))
    args = case_args(suite)
    args[5] = str(other)
    assert main(["compute", *args]) == 3


def test_compute_degenerate_input_reports_status(tmp_path):
    lab = np.zeros((12, 12, 12), dtype=np.uint8)
    lab[3:9, 3:9, 3:9] = 1
    for name, grid in (("gt", LabelGrid(lab)), ("pred", LabelGrid(lab)),
                       ("u", ScalarGrid(np.random.default_rng(0).random((12, 12, 12))))):
        save_volume(tmp_path / f"{name}.npy", grid)
    out = tmp_path / "r.json"
    code = main(["compute", "--gt", str(tmp_path / "gt.npy"), "--pred", str(tmp_path / "pred.npy"),
                 "--unc", str(tmp_path / "u.npy"), "--out", str(out)])
    assert code == 4
    status = {e["name"]: e["status"] for e in json.loads(out.read_text())["maps"]["unc"]["metrics"]}
    assert status["AUC-ROC"] == "degenerate"
    assert status["SPACE"] == "ok"


def test_compare_pipeline(suite, tmp_path):
    out = tmp_path / "t.csv"
    assert main(["compare", "--manifest", str(suite / "manifest.json"), "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    doc = json.loads(out.with_suffix(".json").read_text())
    assert len(rows) == len(doc["metrics"]) == 16
    assert doc["seed"] == 20240501
    # accuracy column recomputed from the per-case values
    for row in rows:
        name = row["metric"]
        higher = row["orientation"] == "higher_better"
        wins = 0
        for cid, maps in doc["case_values"].items():
            c, n = maps["clean"][name], maps["noisy"][name]
            wins += (c > n) if higher else (c < n)
        assert float(row["accuracy_pct"]) == pytest.approx(100 * wins / len(doc["case_values"]), abs=1e-7)


def test_report_rerenders_csv(suite, tmp_path):
    out = tmp_path / "t.csv"
    assert main(["compare", "--manifest", str(suite / "manifest.json"), "--out", str(out), "--metrics", "space,ece"]) == 0
    again = tmp_path / "again.csv"
    assert main(["report", "--json", str(out.with_suffix(".json")), "--out", str(again)]) == 0
    assert again.read_bytes() == out.read_bytes()


def test_compare_tags_failing_case(suite, tmp_path, capsys):
    m = json.loads((suite / "manifest.json").read_text())
    m["cases"][2]["maps"]["noisy"] = "missing.nii.gz"
    bad = suite / "bad_manifest.json"
    bad.write_text(json.dumps(m))
    try:
        assert main(["compare", "--manifest", str(bad), "--out", str(tmp_path / "t.csv")]) == 2
    finally:
        bad.unlink()
    assert "case_002" in capsys.readouterr().err


def test_compare_needs_two_cases(suite, tmp_path):
    m = json.loads((suite / "manifest.json").read_text())
    m["cases"] = m["cases"][:1]
    one = suite / "one.json"
    one.write_text(json.dumps(m))
    try:
        assert main(["compare", "--manifest", str(one), "--out", str(tmp_path / "t.csv")]) == 2
    finally:
        one.unlink()
