"""End-to-end CLI runs in temporary directories: exit codes, file layout,
the frozen CSV contract, determinism, probes, and data generation."""

import json

import numpy as np
import pytest

from rbmm import datafiles
from rbmm.cli import ConfigError, load_config, main, trace_csv_text
from rbmm.driver import IterationRecord


def write_config(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_load_config_accepts_headerless_text(tmp_path):
    path = write_config(tmp_path, "application = quadratic-demo\nlam = 2.0\n")
    cfg = load_config(path)
    assert cfg["application"] == "quadratic-demo"
    assert cfg["lam"] == "2.0"


def test_load_config_accepts_ini_sections(tmp_path):
    path = write_config(tmp_path, "[run]\napplication = rpca\nrows = 6\n")
    cfg = load_config(path)
    assert cfg["application"] == "rpca"
    assert cfg["rows"] == "6"


def test_load_config_requires_application(tmp_path):
    path = write_config(tmp_path, "lam = 1.0\n")
    with pytest.raises(ConfigError):
        load_config(path)


def test_load_config_rejects_unknown_application(tmp_path):
    path = write_config(tmp_path, "application = nonsense\n")
    with pytest.raises(ConfigError):
        load_config(path)


def test_trace_csv_header_is_frozen():
    rec = IterationRecord(
        cycle=0,
        objective=1.0,
        gaps=(0.0, 0.0),
        deltas=(0.0, 0.0),
        certified=(True, True),
        steps=(0.0, 0.0),
        stationarity=None,
        wall_time=0.0,
    )
    text = trace_csv_text([rec])
    lines = text.splitlines()
    assert lines[0] == "cycle,objective,stationarity,delta_n,gap_1,step_1,gap_2,step_2"
    # unmeasured stationarity stays an empty field
    assert lines[1].split(",")[2] == ""


def test_run_quadratic_demo_end_to_end(tmp_path, capsys):
    cfg = write_config(
        tmp_path, "application = quadratic-demo\nmax_cycles = 100\ntrials = 1\n"
    )
    out = tmp_path / "out"
    code = main(["run", "--config", cfg, "--out", str(out)])
    capsys.readouterr()
    assert code == 0
    trace_path = out / "trace_trial0.csv"
    summary_path = out / "summary.json"
    assert trace_path.exists() and summary_path.exists()

    summary = json.loads(summary_path.read_text())
    trial = summary["trials"][0]
    assert trial["final_objective"] == pytest.approx(1.0, abs=1e-8)
    assert trial["descent_ok"] is True
    assert summary["config"]["application"] == "quadratic-demo"
    assert summary["config"]["max_cycles"] == 100

    lines = trace_path.read_text().splitlines()
    assert lines[0] == "cycle,objective,stationarity,delta_n,gap_1,step_1,gap_2,step_2"
    assert len(lines) == 102  # header + cycles 0..100
    first = lines[1].split(",")
    assert float(first[1]) == pytest.approx(5.0)  # f(0,0)


def test_run_is_deterministic_apart_from_wall_time(tmp_path, capsys):
    cfg = write_config(
        tmp_path,
        "application = quadratic-demo\nmax_cycles = 50\ntrials = 2\nseed = 3\n",
    )
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", cfg, "--out", str(out_a)]) == 0
    assert main(["run", "--config", cfg, "--out", str(out_b)]) == 0
    capsys.readouterr()
    for t in range(2):
        name = f"trace_trial{t}.csv"
        ta = (out_a / name).read_text()
        tb = (out_b / name).read_text()
        # wall_time is not a trace column, so traces match exactly
        assert ta == tb
    sa = json.loads((out_a / "summary.json").read_text())
    sb = json.loads((out_b / "summary.json").read_text())
    for trial_a, trial_b in zip(sa["trials"], sb["trials"]):
        trial_a.pop("wall_time")
        trial_b.pop("wall_time")
        assert trial_a == trial_b
    assert sa["config"] == sb["config"]


def test_trials_use_distinct_seeds(tmp_path, capsys):
    cfg = write_config(
        tmp_path,
        "application = rpca\nrows = 10\ncols = 8\nmax_cycles = 20\ntrials = 2\n",
    )
    out = tmp_path / "out"
    assert main(["run", "--config", cfg, "--out", str(out)]) == 0
    capsys.readouterr()
    t0 = (out / "trace_trial0.csv").read_text()
    t1 = (out / "trace_trial1.csv").read_text()
    assert t0 != t1
    summary = json.loads((out / "summary.json").read_text())
    assert summary["trials"][0]["seed"] + 1 == summary["trials"][1]["seed"]


def test_missing_required_key_exits_2_without_files(tmp_path, capsys):
    cfg = write_config(tmp_path, "max_cycles = 10\n")
    out = tmp_path / "out"
    code = main(["run", "--config", cfg, "--out", str(out)])
    capsys.readouterr()
    assert code == 2
    assert not out.exists()


def test_bad_parameter_value_exits_2_without_files(tmp_path, capsys):
    cfg = write_config(
        tmp_path, "application = quadratic-demo\nmax_cycles = banana\n"
    )
    out = tmp_path / "out"
    code = main(["run", "--config", cfg, "--out", str(out)])
    capsys.readouterr()
    assert code == 2
    assert not out.exists()


def test_missing_config_file_exits_2(tmp_path, capsys):
    code = main(
        ["run", "--config", str(tmp_path / "nope.cfg"), "--out", str(tmp_path / "o")]
    )
    capsys.readouterr()
    assert code == 2


def test_seed_flag_overrides_config(tmp_path, capsys):
    cfg = write_config(
        tmp_path, "application = quadratic-demo\nmax_cycles = 10\nseed = 1\n"
    )
    out = tmp_path / "out"
    assert main(["run", "--config", cfg, "--out", str(out), "--seed", "9"]) == 0
    capsys.readouterr()
    summary = json.loads((out / "summary.json").read_text())
    assert summary["config"]["seed"] == 9
    assert summary["trials"][0]["seed"] == 9


def test_probe_without_config_runs_geometry_suite(tmp_path, capsys):
    out = tmp_path / "probes"
    code = main(["probe", "--out", str(out)])
    captured = capsys.readouterr()
    assert code == 0
    reports = json.loads((out / "probes.json").read_text())
    names = {r["name"] for r in reports}
    assert "gsmooth_circle" in names
    assert "gsmooth_euclidean" in names
    assert "distance_equivalence:sphere" in names
    assert "distance_equivalence:spd" in names
    assert all(r["passed"] for r in reports)
    assert "PASS" in captured.out
    circle = next(r for r in reports if r["name"] == "gsmooth_circle")
    assert circle["stats"]["max"] >= 2.0 - 1e-3


def test_probe_with_application_adds_fd_reports(tmp_path, capsys):
    cfg = write_config(
        tmp_path,
        "application = subspace-tracking\nd = 8\nk = 2\nsnapshots = 4\nsamples = 3\n",
    )
    out = tmp_path / "probes"
    code = main(["probe", "--config", cfg, "--out", str(out)])
    capsys.readouterr()
    assert code == 0
    reports = json.loads((out / "probes.json").read_text())
    fd_names = [r["name"] for r in reports if ":fd" in r["name"]]
    assert fd_names == [
        "subspace-tracking:block0:fd",
        "subspace-tracking:block1:fd",
    ]


def test_probe_wrong_gradient_fixture_fails(tmp_path, capsys):
    cfg = write_config(
        tmp_path,
        "application = quadratic-demo\nprobe_fixture = wrong_gradient\n",
    )
    out = tmp_path / "probes"
    code = main(["probe", "--config", cfg, "--out", str(out)])
    captured = capsys.readouterr()
    assert code == 1
    assert "FAIL" in captured.out
    reports = json.loads((out / "probes.json").read_text())
    fd = [r for r in reports if ":fd" in r["name"]]
    assert fd and not any(r["passed"] for r in fd)


def test_gen_data_binary_roundtrip(tmp_path, capsys):
    cfg = write_config(
        tmp_path,
        "application = rpca\nrows = 9\ncols = 7\nrank = 2\nseed = 4\n",
    )
    out = tmp_path / "data"
    code = main(["gen-data", "--config", cfg, "--out", str(out)])
    capsys.readouterr()
    assert code == 0
    meta = json.loads((out / "meta.json").read_text())
    assert meta["application"] == "rpca"
    assert meta["format"] == "binary"
    observed = datafiles.read_array(out / "observed.bin")
    low = datafiles.read_array(out / "low_rank.bin")
    spikes = datafiles.read_array(out / "spikes.bin")
    assert observed.shape == (9, 7)
    np.testing.assert_array_equal(observed, low + spikes)
    assert meta["arrays"]["observed"] == [9, 7]


def test_gen_data_csv_format(tmp_path, capsys):
    cfg = write_config(
        tmp_path,
        "application = rpca\nrows = 6\ncols = 5\nformat = csv\n",
    )
    out = tmp_path / "data"
    code = main(["gen-data", "--config", cfg, "--out", str(out)])
    capsys.readouterr()
    assert code == 0
    observed = datafiles.read_csv(out / "observed.csv")
    assert observed.shape == (6, 5)


def test_gen_data_csv_rejects_tensors(tmp_path, capsys):
    cfg = write_config(
        tmp_path,
        "application = cp-dictionary\nshape = 4,3,2\nformat = csv\n",
    )
    out = tmp_path / "data"
    code = main(["gen-data", "--config", cfg, "--out", str(out)])
    captured = capsys.readouterr()
    assert code == 2
    assert "tensor" in captured.err.lower() or "tensor" in captured.out.lower()


def test_gen_data_quadratic_has_no_dataset(tmp_path, capsys):
    cfg = write_config(tmp_path, "application = quadratic-demo\n")
    code = main(["gen-data", "--config", cfg, "--out", str(tmp_path / "d")])
    capsys.readouterr()
    assert code == 2


def test_gen_data_matches_application_run_data(tmp_path, capsys):
    # the dumped dataset is the same one a run with that config would solve
    cfg_text = "application = cp-dictionary\nshape = 5,4,3\nrank = 2\nseed = 6\n"
    cfg = write_config(tmp_path, cfg_text)
    out = tmp_path / "data"
    assert main(["gen-data", "--config", cfg, "--out", str(out)]) == 0
    capsys.readouterr()
    tensor = datafiles.read_array(out / "tensor.bin")
    from rbmm.applications import cp

    expected, _ = cp.generate((5, 4, 3), rank=2, seed=6)
    np.testing.assert_array_equal(tensor, expected)
