import hashlib
import json
import math
import subprocess
import sys

import pytest

from mottbox.cli import main

GOLDEN_FREE_RENDER_SHA256 = "881d49d7ab127aad7154bc702a48d7a1f8cfb44acd32b42ac3bead5c2ed34666"


def write_config(tmp_path, name, payload):
    path = tmp_path / name
    path.write_text(json.dumps(payload), encoding="utf-8")
    return str(path)


def bell_config(tmp_path, **overrides):
    payload = {
        "experiment": "bell",
        "a": [1.0, 0.0, 0.0],
        "b": [1.0, 1.0, 0.0],
        "n_trials": 1_000_000,
        "seed": 42,
    }
    payload.update(overrides)
    return write_config(tmp_path, "bell.json", payload)


def track_config(tmp_path, **overrides):
    payload = {
        "experiment": "track",
        "k": 10.0,
        "delta_e": 0.01,
        "density": 3e-4,
        "inner_radius": 12.0,
        "chamber_radius": 40.0,
        "width": 1.0,
        "g0": 0.5,
        "g1": 0.5,
        "seed": 7,
    }
    payload.update(overrides)
    return write_config(tmp_path, "track.json", payload)


def test_unknown_experiment_lists_names(tmp_path, capsys):
    config = write_config(tmp_path, "bad.json", {"experiment": "frobnicate"})
    assert main([config, "--out-dir", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    for name in ("bell", "scatter", "track", "isotropy", "render"):
        assert name in err


def test_missing_key_names_it(tmp_path, capsys):
    config = write_config(
        tmp_path,
        "scatter.json",
        {"experiment": "scatter", "s": 1.0, "g0": 0.5, "g1": 0.5, "distance": 10.0},
    )
    assert main([config, "--out-dir", str(tmp_path)]) == 2
    assert "'k'" in capsys.readouterr().err


def test_invalid_json_is_config_error(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text("{not json", encoding="utf-8")
    assert main([str(path), "--out-dir", str(tmp_path)]) == 2
    assert "not valid JSON" in capsys.readouterr().err


def test_missing_config_file(tmp_path, capsys):
    assert main([str(tmp_path / "absent.json"), "--out-dir", str(tmp_path)]) == 2
    assert "cannot read" in capsys.readouterr().err


def test_threads_validation(tmp_path, capsys):
    config = bell_config(tmp_path, n_trials=100)
    assert main([config, "--out-dir", str(tmp_path), "--threads", "0"]) == 2
    assert "--threads" in capsys.readouterr().err


def test_bell_run_summary_and_csv(tmp_path, capsys):
    config = bell_config(tmp_path)
    out = tmp_path / "out"
    assert main([config, "--out-dir", str(out)]) == 0
    summary = capsys.readouterr().out.strip()
    assert summary.startswith("E=-0.7")
    lines = (out / "bell.csv").read_text().splitlines()
    assert lines[0] == "ax,ay,az,bx,by,bz,mean,std_error,n"
    fields = lines[1].split(",")
    mean, std_error, n = float(fields[6]), float(fields[7]), int(fields[8])
    assert n == 1_000_000
    assert abs(mean - (-math.sqrt(2) / 2)) < 4 * std_error
    # directions are stored normalized
    assert float(fields[3]) == pytest.approx(math.sqrt(2) / 2, rel=1e-12)


def test_bell_run_with_three_directions(tmp_path, capsys):
    config = bell_config(tmp_path, c=[0.0, 1.0, 0.0])
    out = tmp_path / "out"
    assert main([config, "--out-dir", str(out)]) == 0
    summary = capsys.readouterr().out.strip()
    assert summary.startswith("bell lhs=")
    assert "violated=true" in summary
    lines = (out / "bell.csv").read_text().splitlines()
    assert len(lines) == 4  # header + (a,b), (a,c), (b,c)


def test_bell_run_byte_identical_outputs(tmp_path, capsys):
    config = bell_config(tmp_path)
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    assert main([config, "--out-dir", str(out1)]) == 0
    assert main([config, "--out-dir", str(out2)]) == 0
    capsys.readouterr()
    assert (out1 / "bell.csv").read_bytes() == (out2 / "bell.csv").read_bytes()


def test_seed_override_changes_results(tmp_path, capsys):
    config = bell_config(tmp_path, n_trials=10_000)
    out1, out2, out3 = tmp_path / "s1", tmp_path / "s2", tmp_path / "s3"
    assert main([config, "--out-dir", str(out1)]) == 0
    assert main([config, "--out-dir", str(out2), "--seed", "43"]) == 0
    assert main([config, "--out-dir", str(out3), "--seed", "42"]) == 0
    capsys.readouterr()
    assert (out1 / "bell.csv").read_bytes() != (out2 / "bell.csv").read_bytes()
    assert (out1 / "bell.csv").read_bytes() == (out3 / "bell.csv").read_bytes()


def test_scatter_run(tmp_path, capsys):
    config = write_config(
        tmp_path,
        "scatter.json",
        {
            "experiment": "scatter",
            "k": 10.0,
            "delta_e": 0.01,
            "s": 1.0,
            "g0": 0.5,
            "g1": 0.5,
            "distance": 10.0,
            "n_theta": 61,
        },
    )
    out = tmp_path / "out"
    assert main([config, "--out-dir", str(out)]) == 0
    summary = capsys.readouterr().out.strip()
    assert summary.startswith("|C|^2=0.9999")
    assert "flux_total=" in summary and "flux_free=" in summary
    lines = (out / "angular.csv").read_text().splitlines()
    assert lines[0] == "theta,re_I0,im_I0,re_I1,im_I1,q"
    assert len(lines) == 62
    first = [float(x) for x in lines[1].split(",")]
    assert first[0] == 0.0 and first[5] == 0.0  # forward row: theta = q = 0
    assert math.hypot(first[1], first[2]) == pytest.approx(0.12533141373155, rel=1e-10)


def test_track_run_and_replay(tmp_path, capsys):
    config = track_config(tmp_path)
    out = tmp_path / "out"
    assert main([config, "--out-dir", str(out)]) == 0
    summary = capsys.readouterr().out.strip()
    assert summary.startswith("track N=")
    track_lines = (out / "track.csv").read_text().splitlines()
    assert track_lines[0] == "dx,dy,dz,N,flux_ratio"
    assert len(track_lines) == 2
    gas = json.loads((out / "gas.json").read_text())
    assert gas["seed"] == 7 and len(gas["atoms"]) > 0

    replay = write_config(
        tmp_path,
        "replay.json",
        {"experiment": "track", "k": 10.0, "delta_e": 0.01, "gas_file": str(out / "gas.json")},
    )
    out2 = tmp_path / "replay_out"
    assert main([replay, "--out-dir", str(out2)]) == 0
    capsys.readouterr()
    assert (out2 / "track.csv").read_bytes() == (out / "track.csv").read_bytes()
    assert (out2 / "gas.json").read_bytes() == (out / "gas.json").read_bytes()


def test_isotropy_run(tmp_path, capsys):
    config = write_config(
        tmp_path,
        "iso.json",
        {
            "experiment": "isotropy",
            "k": 10.0,
            "delta_e": 0.01,
            "n_configs": 120,
            "density": 1e-4,
            "inner_radius": 12.0,
            "chamber_radius": 40.0,
            "width": 1.0,
            "g0": 0.5,
            "g1": 0.5,
            "seed": 11,
        },
    )
    out = tmp_path / "out"
    assert main([config, "--out-dir", str(out)]) == 0
    summary = capsys.readouterr().out.strip()
    assert summary.startswith("isotropy n=120 chi2=")
    iso_lines = (out / "isotropy.csv").read_text().splitlines()
    assert iso_lines[0] == "bin,count"
    assert len(iso_lines) == 33
    counts = [int(line.split(",")[1]) for line in iso_lines[1:]]
    track_lines = (out / "tracks.csv").read_text().splitlines()
    assert len(track_lines) - 1 == sum(counts)


def test_render_run_matches_golden(tmp_path, capsys):
    config = write_config(
        tmp_path,
        "render.json",
        {
            "experiment": "render",
            "k": 2.0,
            "plane": {
                "origin": [0.0, 0.0, 0.0],
                "u_axis": [1.0, 0.0, 0.0],
                "v_axis": [0.0, 1.0, 0.0],
                "half_extent": 10.0,
                "resolution": 64,
            },
            "modulus_scale": 0.5,
        },
    )
    out = tmp_path / "out"
    assert main([config, "--out-dir", str(out)]) == 0
    assert capsys.readouterr().out.strip() == "render wrote field.ppm 64x64"
    data = (out / "field.ppm").read_bytes()
    assert data.startswith(b"P6\n64 64\n255\n")
    assert hashlib.sha256(data).hexdigest() == GOLDEN_FREE_RENDER_SHA256


def test_render_run_with_obstacle(tmp_path, capsys):
    config = write_config(
        tmp_path,
        "render_atom.json",
        {
            "experiment": "render",
            "k": 10.0,
            "delta_e": 0.01,
            "obstacle": {"position": [12.0, 0.0, 0.0], "width": 1.0, "g0": 20.0, "g1": 0.0},
            "plane": {
                "u_axis": [1.0, 0.0, 0.0],
                "v_axis": [0.0, 1.0, 0.0],
                "half_extent": 20.0,
                "resolution": 32,
            },
            "modulus_scale": 0.1,
            "grid_csv": "grid.csv",
        },
    )
    out = tmp_path / "out"
    assert main([config, "--out-dir", str(out)]) == 0
    capsys.readouterr()
    assert (out / "field.ppm").exists()
    assert (out / "grid.csv").exists()


def test_module_entry_point(tmp_path):
    config = bell_config(tmp_path, n_trials=1000)
    result = subprocess.run(
        [sys.executable, "-m", "mottbox", config, "--out-dir", str(tmp_path / "sub")],
        capture_output=True,
        text=True,
    )
    assert result.returncode == 0
    assert result.stdout.strip().startswith("E=")
