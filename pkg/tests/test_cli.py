import csv
import json
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from cavity_hom import __version__
from cavity_hom.cli import main
from cavity_hom.config import ConfigError, apply_overrides, load_config, parse_config

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
FAST = ["--set", "grid.n_steps=400"]


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def run(args):
    return main([str(a) for a in args])


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def write(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8")
    return path


# --- config ----------------------------------------------------------------------

def test_example_configs_parse():
    for path in sorted(CONFIGS.glob("*.toml")):
        load_config(path)


def test_unknown_keys_are_named():
    with pytest.raises(ConfigError, match="unknown key 'system.bogus'"):
        parse_config({"system": {"type": "two_level", "bogus": 1}})
    with pytest.raises(ConfigError, match="unknown key 'colour'"):
        parse_config({"system": {"type": "two_level"}, "colour": 1})
    with pytest.raises(ConfigError, match="unknown key 'optimizer.speed'"):
        parse_config({"system": {"type": "two_level"}, "optimizer": {"speed": 1}})


def test_invalid_values_rejected():
    for raw in (
        {"system": {"type": "two_level", "g": -1}},
        {"system": {"type": "lambda"}, "drive": {"type": "gaussian", "amplitude": 1, "center": 0, "width": 0}},
        {"system": {"type": "lambda"}, "grid": {"n_steps": 1}},
        {"system": {"type": "lambda"}, "gamma32_target": "g7"},
        {"system": {"type": "spin"}},
        {},
        {"system": {"type": "two_level"}, "drive": {"type": "gaussian", "amplitude": 1, "center": 0, "width": 1}},
    ):
        with pytest.raises(ConfigError):
            parse_config(raw)


def test_overrides():
    raw = apply_overrides({"system": {"type": "lambda"}}, ["system.g=2.5", "grid.n_steps=400", "output.prefix=x/y"])
    cfg = parse_config(raw)
    assert cfg.source.params.g == 2.5 and cfg.grid.n_steps == 400 and cfg.prefix == "x/y"
    with pytest.raises(ConfigError):
        apply_overrides({}, ["novalue"])


# --- commands ----------------------------------------------------------------------

def test_version(capsys):
    assert run(["version"]) == 0
    assert capsys.readouterr().out.strip() == __version__


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "cavity_hom", "version"], capture_output=True, text=True, check=True)
    assert out.stdout.strip() == __version__


def test_simulate_reference(workdir):
    assert run(["simulate", CONFIGS / "reference_lambda.toml", "--out", "ref"]) == 0
    header, data = read_csv("ref_phi.csv")
    assert header == ["t", "phi_out"] and data.shape == (801, 2)
    summary = json.loads(Path("ref_summary.json").read_text())
    assert 0 < summary["efficiency"] <= 1
    t_peak = data[np.argmax(data[:, 1]), 0]
    assert 5 < t_peak < 30
    assert summary["source"]["params"]["g"] == 5.0 and summary["grid"]["n_steps"] == 800


def test_simulate_zero_drive_and_two_level(workdir):
    cfg = write(workdir / "zero.toml", '[system]\ntype = "lambda"\n[drive]\ntype = "zero"\n')
    assert run(["simulate", cfg, "--out", "zero"]) == 0
    _, data = read_csv("zero_phi.csv")
    assert not np.any(data[:, 1])
    assert run(["simulate", CONFIGS / "two_level.toml", "--out", "tl"]) == 0
    assert json.loads(Path("tl_summary.json").read_text())["efficiency"] == pytest.approx(1.0, abs=1e-3)


def test_csv_number_format(workdir):
    run(["simulate", CONFIGS / "reference_lambda.toml", "--out", "ref"])
    raw = Path("ref_phi.csv").read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")
    for line in raw.decode().splitlines()[1:50]:
        for field in line.split(","):
            mantissa = field.lstrip("-").split("e")[0].replace(".", "").lstrip("0")
            assert len(mantissa) <= 12


def test_hom_identical_sources(workdir):
    for name in ("two_level.toml", "reference_lambda.toml"):
        assert run(["hom", CONFIGS / name, CONFIGS / name, "--out", name]) == 0
        header, data = read_csv(f"{name}_g2.csv")
        assert header == ["tau", "g2"] and data[0, 0] == -40.0 and data[-1, 0] == 40.0
        out = json.loads(Path(f"{name}_hom.json").read_text())
        assert out["g2_limit_numeric"] == pytest.approx(0.5, abs=1e-3)
        assert {"g2_zero", "g2_limit_numeric", "visibility", "raw_overlap"} <= out.keys()
    pure = json.loads(Path("two_level.toml_hom.json").read_text())
    assert pure["visibility"] == pytest.approx(1.0, abs=1e-3) and pure["g2_zero"] < 1e-3
    cfg = write(workdir / "pure_lambda.toml", '[system]\ntype = "lambda"\n[drive]\namplitude = 6.0\ncenter = 15.0\nwidth = 5.0\n')
    assert run(["hom", cfg, cfg, "--out", "pl"]) == 0
    assert json.loads(Path("pl_hom.json").read_text())["visibility"] == pytest.approx(1.0, abs=1e-3)


def test_hom_argument_order(workdir):
    a = shutil.copy(CONFIGS / "reference_lambda.toml", workdir / "a.toml")
    b = shutil.copy(CONFIGS / "reference_lambda.toml", workdir / "b.toml")
    run(["hom", a, b, "--out", "ab"])
    run(["hom", b, a, "--out", "ba"])
    assert Path("ab_g2.csv").read_bytes() == Path("ba_g2.csv").read_bytes()
    assert Path("ab_hom.json").read_bytes() == Path("ba_hom.json").read_bytes()
    run(["hom", CONFIGS / "reference_lambda.toml", CONFIGS / "interfered_lambda.toml", "--out", "ri"])
    run(["hom", CONFIGS / "interfered_lambda.toml", CONFIGS / "reference_lambda.toml", "--out", "ir"])
    v1 = json.loads(Path("ri_hom.json").read_text())["visibility"]
    v2 = json.loads(Path("ir_hom.json").read_text())["visibility"]
    assert abs(v1 - v2) <= 1e-9 and 0.35 <= v1 <= 0.65


def test_hom_grid_mismatch(workdir, capsys):
    code = run(["hom", CONFIGS / "two_level.toml", CONFIGS / "reference_lambda.toml", "--set", "grid.n_steps=400"])
    assert code == 0  # overrides apply to both files
    two = write(workdir / "short.toml", '[system]\ntype = "two_level"\n[grid]\nn_steps = 400\n')
    assert run(["hom", two, CONFIGS / "two_level.toml", "--out", "mm"]) == 2
    assert "grid mismatch" in capsys.readouterr().err


def test_error_exit_codes(workdir, capsys):
    assert run(["simulate", workdir / "missing.toml"]) == 2
    assert run(["simulate", CONFIGS / "two_level.toml", "--set", "system.bogus=1"]) == 2
    assert "unknown key 'system.bogus'" in capsys.readouterr().err
    bad = write(workdir / "bad.toml", "[system\n")
    assert run(["simulate", bad]) == 2
    assert run(["sweep", CONFIGS / "two_level.toml"]) == 2
    assert run(["optimize", CONFIGS / "two_level.toml"]) == 2
    assert not list(workdir.glob("*.csv"))


def test_sweep_outputs_and_determinism(workdir):
    args = ["sweep", CONFIGS / "sweep_g_kappa.toml", *FAST, "--set", "sweep.axis1.count=3",
            "--set", "sweep.axis2.count=3"]
    assert run(args + ["--out", "one", "--threads", "1"]) == 0
    assert run(args + ["--out", "two", "--threads", "2"]) == 0
    header, data = read_csv("one_map.csv")
    assert header == ["g", "kappa", "V"] and data.shape == (9, 3)
    assert np.all((data[:, 2] >= -1e-6) & (data[:, 2] <= 1 + 1e-6))
    meta = json.loads(Path("one_map.json").read_text())
    assert meta["mode"] == "identical" and len(meta["optimal_kappa_curve"]) == 3
    assert Path("one_map.csv").read_bytes() == Path("two_map.csv").read_bytes()
    assert Path("one_map.json").read_bytes() == Path("two_map.json").read_bytes()


def test_sweep_detuning_axis(workdir):
    cfg = write(workdir / "dc.toml", """
[system]
type = "two_level"
[sweep]
mode = "identical"
[sweep.axis1]
name = "delta_c"
start = -2.0
stop = 2.0
count = 5
[sweep.axis2]
name = "kappa"
start = 0.5
stop = 1.0
count = 2
""")
    assert run(["sweep", cfg, *FAST, "--out", "dc"]) == 0
    header, data = read_csv("dc_map.csv")
    assert header == ["delta_c", "kappa", "V"]
    v = data[:, 2].reshape(5, 2)
    assert np.all(v <= v[2] + 1e-9)


def test_optimized_sweep_outputs(workdir):
    args = ["sweep", CONFIGS / "sweep_optimized.toml", *FAST, "--set", "sweep.axis1.count=2",
            "--set", "sweep.axis2.count=2", "--set", "optimizer.max_iterations=1",
            "--set", "optimizer.passes=1", "--set", "optimizer.n_segments=20", "--out", "opt"]
    assert run(args) == 0
    _, before = read_csv("opt_map_before.csv")
    _, after = read_csv("opt_map_after.csv")
    assert np.all(after[:, 2] >= before[:, 2] - 1e-3)
    meta = json.loads(Path("opt_map.json").read_text())
    assert set(meta["high_area"]) == {"before", "after"}


def test_optimize_outputs_and_determinism(workdir):
    args = ["optimize", CONFIGS / "optimize.toml", *FAST, "--set", "optimizer.max_iterations=2",
            "--set", "optimizer.passes=1", "--set", "optimizer.n_segments=20"]
    assert run(args + ["--out", "r1"]) == 0
    assert run(args + ["--out", "r2"]) == 0
    suffixes = ["_drive.csv", "_history.csv", "_phi_reference.csv", "_phi_before.csv", "_phi_after.csv", "_optimize.json"]
    for s in suffixes:
        assert Path("r1" + s).read_bytes() == Path("r2" + s).read_bytes()
    header, drive = read_csv("r1_drive.csv")
    assert header == ["t", "omega_d"] and drive.shape == (21, 2) and np.all(drive[:, 1] >= 0)
    header, hist = read_csv("r1_history.csv")
    assert header == ["iteration", "V"]
    meta = json.loads(Path("r1_optimize.json").read_text())
    assert meta["visibility_after"] == pytest.approx(hist[-1, 1], abs=1e-11)
    assert meta["status"] in {"converged", "max_iterations", "visibility_decreased"}
    assert 0.35 <= meta["visibility_before"] <= 0.65


def test_optimize_identical_source_converges(workdir):
    knots = ", ".join(f"{6 * np.exp(-(((t - 15) / 5) ** 2)):.12g}" for t in np.arange(41.0))
    drive = f'type = "piecewise_linear"\nknots = [{knots}]\ndt = 1.0\n'
    cfg = write(workdir / "same.toml", f"""
[system]
type = "lambda"
g = 5.0
kappa = 1.25
gamma = 1.0
[drive]
{drive}
[reference]
type = "lambda"
g = 5.0
kappa = 1.25
gamma = 1.0
[reference.drive]
{drive}
""")
    assert run(["optimize", cfg, "--out", "same"]) == 0
    meta = json.loads(Path("same_optimize.json").read_text())
    assert meta["status"] == "converged" and meta["iterations"] == 0
    # gamma > 0 leaves the photon mixed: self-visibility is its purity, below 1
    assert meta["visibility_after"] == pytest.approx(meta["visibility_before"], abs=1e-12)
    assert 0.99 < meta["visibility_after"] < 1
