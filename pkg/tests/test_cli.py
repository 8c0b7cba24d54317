import json

import pytest

from wsnpriv.cli import _parse_b_grid, _parse_dist, _parse_sizes, main


def run(tmp_path, *argv):
    return main(["--out", str(tmp_path), *argv])


# --- argument parsing helpers ---

def test_parse_b_grid():
    assert _parse_b_grid("0:1:0.25") == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert _parse_b_grid("0.1,0.9") == [0.1, 0.9]
    with pytest.raises(SystemExit):
        _parse_b_grid("0:1:0")
    with pytest.raises(SystemExit):
        _parse_b_grid("a:b:c")


def test_parse_sizes():
    assert _parse_sizes("3..6") == [3, 4, 5, 6]
    assert _parse_sizes("3,8,12") == [3, 8, 12]


def test_parse_dist():
    assert _parse_dist("uniform:3..5").probs == pytest.approx((1 / 3,) * 3)
    custom = _parse_dist("3=0.5,5=0.5")
    assert custom.min_size == 3 and custom.max_size == 5
    assert custom.probs == (0.5, 0.0, 0.5)


# --- subcommands ---

def test_plan_zone(tmp_path, capsys):
    assert run(tmp_path, "plan-zone", "--pr", "0.01", "--hops", "3") == 0
    assert "N_min=10" in capsys.readouterr().out
    csv_text = (tmp_path / "plan_zone.csv").read_text()
    assert csv_text.splitlines()[1] == "0.01,3,10,120"
    summary = json.loads((tmp_path / "plan-zone.summary.json").read_text())
    assert summary["results"]["n_min"] == 10
    assert "plan_zone.csv" in summary["file_digests"]


def test_aggregate(tmp_path, capsys):
    assert run(tmp_path, "aggregate", "--x", "5", "--y", "7", "--z", "3") == 0
    assert "pair_sum = 12" in capsys.readouterr().out
    summary = json.loads((tmp_path / "aggregate.summary.json").read_text())
    assert summary["results"] == {"total": 15, "pair_sum": 12}


def test_simulate_hunt(tmp_path, capsys):
    assert run(
        tmp_path, "simulate-hunt", "--grid", "6x6", "--strategy", "flood",
        "--strategy", "phantom:3", "--trials", "5", "--budget", "40",
        "--seed", "7",
    ) == 0
    out = capsys.readouterr().out
    assert "flood:" in out and "phantom:3:" in out
    lines = (tmp_path / "hunt_trials.csv").read_text().splitlines()
    assert len(lines) == 1 + 2 * 5
    summary = json.loads((tmp_path / "simulate-hunt.summary.json").read_text())
    assert len(summary["results"]["cells"]) == 2


def test_bench(tmp_path):
    assert run(tmp_path, "bench", "--sizes", "3,4", "--reps", "30") == 0
    lines = (tmp_path / "bench.csv").read_text().splitlines()
    assert lines[0] == "scheme,cluster_size,median_ns,repetitions"
    assert len(lines) == 4  # sppda + cpda(3) + cpda(4)


def test_disclosure_curve(tmp_path):
    assert run(
        tmp_path, "disclosure-curve", "--b-grid", "0:1:0.5",
        "--dist", "uniform:3..5",
    ) == 0
    lines = (tmp_path / "disclosure_curve.csv").read_text().splitlines()
    # sppda curve always emitted, plus the requested comparison curve.
    assert lines[1] == "sppda,all-links,0.0,0.0"
    assert len(lines) == 1 + 2 * 3


def test_run_pipeline(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "level": "full", "width": 5, "height": 5, "sources": [22, 24],
        "readings": {"22": 5, "24": 7}, "aggregator_dummy": 3,
        "master_seed": 42,
    }))
    assert run(tmp_path, "run-pipeline", str(cfg)) == 0
    assert "gateway recorded 12" in capsys.readouterr().out
    doc = json.loads((tmp_path / "pipeline_report.json").read_text())
    assert doc["flows"][0]["delivered_value"] == 12


def test_run_pipeline_bad_config(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"level": "nope"}))
    assert run(tmp_path, "run-pipeline", str(cfg)) == 1
    assert "level" in capsys.readouterr().out


def test_run_scenarios_cli(tmp_path):
    assert run(tmp_path, "run-scenarios", "scenarios/reference_sppda.json") == 0
    assert (tmp_path / "reference-sppda.json").exists()


def test_unknown_command_exits():
    with pytest.raises(SystemExit):
        main(["no-such-command"])


# --- determinism across runs ---

def test_outputs_byte_identical_across_runs(tmp_path):
    digests = []
    for name in ("a", "b"):
        d = tmp_path / name
        run(d, "simulate-hunt", "--grid", "5x5", "--strategy", "phantom:4",
            "--trials", "10", "--budget", "30", "--seed", "3")
        run(d, "disclosure-curve", "--b-grid", "0:1:0.1", "--dist", "sppda")
        run(d, "plan-zone", "--pr", "0.01", "--hops", "4")
        digests.append({
            f.name: f.read_bytes()
            for f in sorted(d.iterdir())
            if f.suffix == ".csv" or f.name.endswith("summary.json")
        })
    assert digests[0] == digests[1]
    assert len(digests[0]) == 6
