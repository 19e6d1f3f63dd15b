"""End-to-end command-line behavior: artifacts, output, and exit codes."""

import json

import pytest

from vtspot.cli import main
from vtspot.formats import load_detections

SPEC_YAML = (
    "n_streams: 2\n"
    "frames_per_stream: [3, 3]\n"
    "seed: 4\n"
    "embedding_dim: 8\n"
    "velocity_range: [0, 1]\n"
    "render_grids: true\n"
    "grid_height: 16\n"
    "grid_width: 20\n"
)


@pytest.fixture
def scenario_dir(tmp_path):
    spec = tmp_path / "spec.yaml"
    spec.write_text(SPEC_YAML)
    out = tmp_path / "scn"
    assert main(["sim", "--spec", str(spec), "--out", str(out)]) == 0
    return out


def test_sim_writes_scenario_directory(tmp_path, capsys):
    spec = tmp_path / "spec.yaml"
    spec.write_text(SPEC_YAML)
    out = tmp_path / "scn"
    assert main(["sim", "--spec", str(spec), "--out", str(out)]) == 0
    for name in ("manifest.json", "gt.tsv", "observations.tsv", "labels.tsv",
                 "embeddings.tg", "charfeat.tg"):
        assert (out / name).exists()
    assert (out / "frames").is_dir()
    assert (out / "flows").is_dir()
    assert "2 streams" in capsys.readouterr().out


def test_sim_seed_override_is_deterministic(tmp_path):
    spec = tmp_path / "spec.yaml"
    spec.write_text(SPEC_YAML)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["sim", "--spec", str(spec), "--out", str(a), "--seed", "5"]) == 0
    assert main(["sim", "--spec", str(spec), "--out", str(b), "--seed", "5"]) == 0
    assert (a / "gt.tsv").read_bytes() == (b / "gt.tsv").read_bytes()
    assert (a / "embeddings.tg").read_bytes() == (b / "embeddings.tg").read_bytes()


def test_spot_writes_streams_decisions_manifest(scenario_dir, tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["spot", "--scenario", str(scenario_dir), "--out", str(out)]) == 0
    assert (out / "streams.tsv").exists()
    assert (out / "decisions.tsv").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["policy"] == "tr"
    assert manifest["n_streams"] == 2
    assert manifest["recognitions_consumed"] == 2
    assert manifest["regions_total"] == 6
    assert manifest["speedup_ratio"] == 3.0
    assert "recognitions consumed" in capsys.readouterr().out


def test_spot_policy_override(scenario_dir, tmp_path):
    out = tmp_path / "run"
    assert main(["spot", "--scenario", str(scenario_dir), "--out", str(out),
                 "--policy", "hfp"]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["policy"] == "hfp"


def test_detect_writes_detections(scenario_dir, tmp_path, capsys):
    out = tmp_path / "detections.tsv"
    assert main(["detect", "--scenario", str(scenario_dir), "--out", str(out)]) == 0
    captured = capsys.readouterr().out
    detections = load_detections(out)
    assert set(detections) == {0, 1, 2}
    for t in detections:
        assert len(detections[t]) == 2
        assert f"frame {t}: 2 regions" in captured


def test_eval_prints_and_writes_report(scenario_dir, tmp_path, capsys):
    run = tmp_path / "run"
    main(["spot", "--scenario", str(scenario_dir), "--out", str(run)])
    capsys.readouterr()
    report_path = tmp_path / "report.txt"
    code = main([
        "eval", "--scenario", str(scenario_dir),
        "--streams", str(run / "streams.tsv"),
        "--decisions", str(run / "decisions.tsv"),
        "--manifest", str(run / "manifest.json"),
        "--out", str(report_path),
    ])
    assert code == 0
    out = capsys.readouterr().out
    assert "det_precision=" in out
    assert "speedup_ratio=" in out
    assert report_path.read_text() == out


def test_paths_come_from_config_file(scenario_dir, tmp_path):
    out = tmp_path / "run"
    cfg = tmp_path / "run.yaml"
    cfg.write_text(f"paths:\n  scenario: {scenario_dir}\n  out: {out}\n")
    assert main(["spot", "--config", str(cfg)]) == 0
    assert (out / "manifest.json").exists()


def test_missing_scenario_exits_2(tmp_path, capsys):
    code = main(["spot", "--scenario", str(tmp_path / "nope"), "--out", str(tmp_path / "o")])
    assert code == 2
    assert "missing input" in capsys.readouterr().err


def test_missing_required_flag_exits_2(scenario_dir, capsys):
    code = main(["spot", "--scenario", str(scenario_dir)])
    assert code == 2
    assert "missing input" in capsys.readouterr().err


def test_detect_on_unrendered_scenario_exits_2(tmp_path, capsys):
    spec = tmp_path / "spec.yaml"
    spec.write_text("n_streams: 1\nframes_per_stream: [2, 2]\nseed: 0\nembedding_dim: 8\n")
    scn = tmp_path / "scn"
    main(["sim", "--spec", str(spec), "--out", str(scn)])
    capsys.readouterr()
    code = main(["detect", "--scenario", str(scn), "--out", str(tmp_path / "d.tsv")])
    assert code == 2
    assert "missing input" in capsys.readouterr().err


def test_malformed_manifest_exits_3(scenario_dir, tmp_path, capsys):
    (scenario_dir / "manifest.json").write_text("{not json")
    code = main(["spot", "--scenario", str(scenario_dir), "--out", str(tmp_path / "o")])
    assert code == 3
    assert "error:" in capsys.readouterr().err


def test_unknown_config_key_exits_3(scenario_dir, tmp_path, capsys):
    cfg = tmp_path / "run.yaml"
    cfg.write_text("frames: 3\n")
    code = main(["spot", "--config", str(cfg), "--scenario", str(scenario_dir),
                 "--out", str(tmp_path / "o")])
    assert code == 3
    assert "error:" in capsys.readouterr().err


def test_bad_thread_env_exits_3(scenario_dir, tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("VTSPOT_THREADS", "lots")
    code = main(["detect", "--scenario", str(scenario_dir), "--out", str(tmp_path / "d.tsv")])
    assert code == 3
    assert "VTSPOT_THREADS" in capsys.readouterr().err


def test_negative_window_exits_3(scenario_dir, tmp_path, capsys):
    code = main(["detect", "--scenario", str(scenario_dir), "--out", str(tmp_path / "d.tsv"),
                 "--window-n", "-1"])
    assert code == 3
    assert "window-n" in capsys.readouterr().err
