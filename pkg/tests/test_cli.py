import json

import pytest
from hypothesis import given, strategies as st

from emdsketch import GridMeasure, write_measure
from emdsketch.calibration import calibrate
from emdsketch.cli import main
from emdsketch.report import ExperimentConfig, csv_text, write_report


@pytest.fixture
def files(tmp_path):
    a = GridMeasure.point_mass(8, (0, 0))
    b = GridMeasure.point_mass(8, (3, 4))
    write_measure(tmp_path / "a.measure", a)
    write_measure(tmp_path / "b.measure", b)
    return tmp_path


def test_emd_prints_exact_cost(files, capsys):
    assert main(["emd", str(files / "a.measure"), str(files / "b.measure")]) == 0
    assert json.loads(capsys.readouterr().out)["emd"] == 7.0


def test_unknown_flag_is_usage_error(files, capsys):
    assert main(["emd", "--bogus", str(files / "a.measure"), str(files / "b.measure")]) == 1
    assert "usage" in capsys.readouterr().err


def test_unknown_command_is_usage_error(capsys):
    assert main(["frobnicate"]) == 1


def test_missing_file_is_io_error(files):
    assert main(["emd", str(files / "a.measure"), str(files / "nope.measure")]) == 2


def test_contract_violation_exit_code(files):
    write_measure(files / "far.measure", GridMeasure.point_mass(16, (0, 0)))
    assert main(["emd", str(files / "a.measure"), str(files / "far.measure")]) == 1


def test_recover_is_deterministic(tmp_path, capsys):
    x = GridMeasure.from_atoms(16, 2, {(2, 2): 0.45, (3, 2): 0.05, (12, 11): 0.5})
    write_measure(tmp_path / "x.measure", x)
    argv = ["recover", "--delta", "16", "--k", "2", "--epsilon", "0.25", "--seed", "7", "--mode", "oracle",
            str(tmp_path / "x.measure")]
    assert main(argv) == 0
    first = capsys.readouterr().out
    assert main(argv) == 0
    assert capsys.readouterr().out == first
    assert "estimate" in json.loads(first)


def test_sketch_then_estimate(files, tmp_path, capsys):
    out = tmp_path / "sk"
    assert main(["sketch", "--delta", "8", "--m", "64", "--reps", "5", "--out", str(out),
                 str(files / "a.measure")]) == 0
    capsys.readouterr()
    assert main(["estimate", str(out / "sketch.json"), str(files / "b.measure")]) == 0
    assert json.loads(capsys.readouterr().out)["estimate"] > 0


def test_packing_and_embed_reports(tmp_path, files):
    assert main(["packing", "--k", "4", "--delta", "64", "--trials", "5", "--out", str(tmp_path / "p")]) == 0
    lines = (tmp_path / "p" / "packing.csv").read_text().splitlines()
    assert lines[0] == "I,emd" and len(lines) == 6
    assert (tmp_path / "p" / "family" / "A.measure").exists()
    assert main(["embed", "--out", str(tmp_path / "e"), str(files / "a.measure"),
                 "--minus", str(files / "b.measure")]) == 0
    assert (tmp_path / "e" / "embed.csv").read_text().startswith("level,cx,cy,value")


def test_median_commands(tmp_path, capsys):
    write_measure(tmp_path / "x1.measure", GridMeasure.from_atoms(16, 1, {2: 0.6, 3: 0.2, 9: 0.2}))
    assert main(["median1", str(tmp_path / "x1.measure")]) == 0
    assert json.loads(capsys.readouterr().out)["j_hat"] == 2
    write_measure(tmp_path / "x2.measure", GridMeasure.point_mass(8, (5, 2)))
    assert main(["mediand", "--m", "500", str(tmp_path / "x2.measure")]) == 0
    assert json.loads(capsys.readouterr().out)["p_hat"] == [5, 2]


def test_net_command(tmp_path):
    assert main(["net", "--delta", "8", "--levels", "2", "--out", str(tmp_path / "n")]) == 0
    idx = json.loads((tmp_path / "n" / "net" / "index.json").read_text())
    assert idx[0]["level"] == 0 and len(idx[0]["points"]) == 1


def test_calibrate_and_env_override(tmp_path, monkeypatch, capsys):
    path = tmp_path / "cal.json"
    assert main(["calibrate", "--delta", "16", "--trials", "60", "--out", str(path)]) == 0
    first = path.read_bytes()
    assert main(["calibrate", "--delta", "16", "--trials", "60", "--out", str(path)]) == 0
    assert path.read_bytes() == first
    doc = json.loads(first)
    assert doc["entries"][0]["c_L"] > 0
    monkeypatch.setenv("EMD_SKETCH_CALIBRATION", str(tmp_path / "missing.json"))
    write_measure(tmp_path / "x.measure", GridMeasure.point_mass(16, (1, 1)))
    assert main(["recover", "--k", "1", str(tmp_path / "x.measure")]) == 2


def test_c_L_stable_across_seed_batches():
    a = [calibrate((16,), samples=500, seed=s)["entries"][0]["c_L"] for s in (1, 2)]
    assert abs(a[0] - a[1]) <= 0.1 * max(a)


def test_empty_report_is_header_only(tmp_path):
    cfg = ExperimentConfig("bench")
    write_report(tmp_path, "r", cfg, ["delta", "quantile", "ratio"], [])
    assert (tmp_path / "r.csv").read_text() == "delta,quantile,ratio\n"
    doc = json.loads((tmp_path / "r.json").read_text())
    assert doc["config_hash"] == cfg.digest() and doc["seed"] == 7 and doc["version"]


@given(st.integers(1, 1024), st.floats(0.01, 0.3), st.integers(0, 2 ** 63), st.lists(st.integers(1, 12)))
def test_config_round_trip(delta, eps, seed, crit):
    cfg = ExperimentConfig("recover", delta=delta, epsilon=eps, seed=seed, criteria=crit, out="x")
    back = ExperimentConfig.from_json(cfg.to_json())
    assert back == cfg and back.digest() == cfg.digest()


def test_csv_text_formats_floats_exactly():
    assert csv_text(["a", "b"], [(0.1, True)]) == "a,b\n0.1,1\n"
