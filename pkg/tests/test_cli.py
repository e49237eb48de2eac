"""CLI surface: exit codes, output formats, config-file defaults, reports."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from catchkit.cli import main
from catchkit.images import ImageBuffer, load_png, save_png

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


# ---------------------------------------------------------------------------
# ems
# ---------------------------------------------------------------------------

def test_ems_calc_prints_436(capsys):
    code, out, _ = run_cli(capsys, "ems", "calc", "--current", "0.020",
                           "--resistance", "21800")
    assert code == 0
    assert out.strip() == "436 V"


def test_ems_tension_default_cal(capsys):
    code, out, _ = run_cli(capsys, "ems", "tension", "--current", "0.090",
                           "--mass-g", "200")
    assert code == 0
    assert out.strip() == "2 N"


def test_ems_tension_cal_file(capsys):
    code, out, _ = run_cli(capsys, "ems", "tension", "--current", "0.045",
                           "--mass-g", "200", "--cal",
                           str(FIXTURES / "tension_cal.json"))
    assert code == 0
    # between the 0.030 -> 0.6 and 0.060 -> 1.3 fixture points
    assert out.strip() == "0.95 N"


def test_ems_waveform_writes_csv_and_plot(capsys, tmp_path):
    csv_path = tmp_path / "wave.csv"
    png_path = tmp_path / "wave.png"
    code, out, _ = run_cli(capsys, "ems", "waveform", "--duration", "0.005",
                           "--rate", "50000", "--csv", str(csv_path),
                           "--plot", str(png_path))
    assert code == 0
    lines = csv_path.read_text().strip().splitlines()
    assert lines[0] == "t_s,voltage_v"
    assert len(lines) == 1 + 250
    assert png_path.stat().st_size > 0


def test_ems_calc_bad_resistance_exits_1(capsys):
    code, _, err = run_cli(capsys, "ems", "calc", "--current", "0.1",
                           "--resistance", "0")
    assert code == 1
    assert "error" in err


# ---------------------------------------------------------------------------
# regs
# ---------------------------------------------------------------------------

REGS_FILE = str(FIXTURES / "regs" / "sample_lake_north.json")


def test_regs_keep_exit_0(capsys):
    code, out, _ = run_cli(capsys, "regs", "check", "--file", REGS_FILE,
                           "--species", "striped_bass", "--length-cm", "80",
                           "--date", "2023-07-04", "--bag", "0")
    assert code == 0
    assert out.strip() == "KEEP_ALLOWED"


def test_regs_release_exit_1_with_reasons(capsys):
    code, out, _ = run_cli(capsys, "regs", "check", "--file", REGS_FILE,
                           "--species", "striped_bass", "--length-cm", "40",
                           "--date", "2023-12-25", "--bag", "1")
    assert code == 1
    assert out.strip() == "MUST_RELEASE UNDERSIZE,OUT_OF_SEASON,BAG_LIMIT_REACHED"


def test_regs_no_rule_exit_2(capsys):
    code, out, _ = run_cli(capsys, "regs", "check", "--file", REGS_FILE,
                           "--species", "kraken", "--length-cm", "400",
                           "--date", "2023-07-04")
    assert code == 2
    assert out.strip() == "NO_RULE"


def test_regs_invalid_input_exit_3(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    code, _, err = run_cli(capsys, "regs", "check", "--file", str(bad),
                           "--species", "x", "--date", "2023-07-04")
    assert code == 3
    assert "error" in err


# ---------------------------------------------------------------------------
# augment
# ---------------------------------------------------------------------------

def write_test_images(directory: Path, n: int = 4, size: int = 32) -> list[Path]:
    rng = np.random.default_rng(0)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i in range(n):
        img = ImageBuffer(rng.integers(0, 256, size=(size, size, 1), dtype=np.uint8))
        path = directory / f"img_{i:03d}.png"
        save_png(img, path)
        paths.append(path)
    return paths


def test_augment_run_deterministic_per_seed(capsys, tmp_path):
    src = tmp_path / "src"
    write_test_images(src)
    out1, out2, out3 = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    args = ["augment", "run", "--in", str(src), "--fisheye", "40",
            "--contrast", "0.6:1.4", "--noise", "4", "--blur", "3:30"]
    assert main(args + ["--out", str(out1), "--seed", "7"]) == 0
    assert main(args + ["--out", str(out2), "--seed", "7"]) == 0
    assert main(args + ["--out", str(out3), "--seed", "8"]) == 0
    capsys.readouterr()
    for name in ("img_000.png", "img_003.png"):
        a = load_png(out1 / name)
        b = load_png(out2 / name)
        c = load_png(out3 / name)
        assert a == b
        assert a != c  # different seed, different contrast/noise draw


def test_augment_dedup_manifest(capsys, tmp_path):
    src = tmp_path / "src"
    src.mkdir()
    rng = np.random.default_rng(1)
    base = rng.integers(0, 256, size=(32, 32, 1), dtype=np.uint8)
    save_png(ImageBuffer(base), src / "a_base.png")
    noisy = np.clip(base.astype(float) + rng.normal(0, 3, base.shape), 0, 255)
    save_png(ImageBuffer(noisy.astype(np.uint8)), src / "b_copy.png")
    other = rng.integers(0, 256, size=(32, 32, 1), dtype=np.uint8)
    save_png(ImageBuffer(other), src / "c_other.png")

    manifest_path = tmp_path / "manifest.json"
    code, out, _ = run_cli(capsys, "augment", "dedup", "--in", str(src),
                           "--patch", "16", "--manifest", str(manifest_path))
    assert code == 0
    manifest = json.loads(manifest_path.read_text())
    assert manifest["kept"] == ["a_base.png", "c_other.png"]
    assert manifest["dropped"][0]["file"] == "b_copy.png"
    assert manifest["dropped"][0]["duplicate_of"] == "a_base.png"
    assert "patch_mse" in manifest["dropped"][0]
    assert "ssim" in manifest["dropped"][0]


def test_augment_run_empty_dir_fails(capsys, tmp_path):
    empty = tmp_path / "none"
    empty.mkdir()
    code, _, err = run_cli(capsys, "augment", "run", "--in", str(empty),
                           "--out", str(tmp_path / "out"))
    assert code == 1
    assert "no PNG" in err


# ---------------------------------------------------------------------------
# replay + report
# ---------------------------------------------------------------------------

def test_replay_golden_via_cli(capsys, tmp_path):
    log = tmp_path / "out.log"
    report_dir = tmp_path / "report"
    code, out, _ = run_cli(capsys, "replay",
                           "--trace", str(FIXTURES / "happy_path.trace"),
                           "--log", str(log), "--report", str(report_dir))
    assert code == 0
    assert log.read_bytes() == (FIXTURES / "happy_path.log").read_bytes()
    summary = (report_dir / "summary.csv").read_text().strip().splitlines()
    assert summary[0] == "species,kept,released,lost"
    assert summary[1] == "striped_bass,1,1,0"
    assert (report_dir / "catches.png").stat().st_size > 0


def test_replay_bad_trace_exit_1(capsys, tmp_path):
    bad = tmp_path / "bad.trace"
    bad.write_text("garbage\n")
    code, _, err = run_cli(capsys, "replay", "--trace", str(bad),
                           "--log", str(tmp_path / "x.log"))
    assert code == 1


# ---------------------------------------------------------------------------
# config file + help
# ---------------------------------------------------------------------------

def test_config_file_supplies_defaults(capsys, tmp_path):
    config = tmp_path / "conf.json"
    config.write_text(json.dumps({"current": 0.020, "resistance": 21800.0}))
    code, out, _ = run_cli(capsys, "--config", str(config), "ems", "calc")
    assert code == 0
    assert out.strip() == "436 V"


def test_explicit_flag_beats_config(capsys, tmp_path):
    config = tmp_path / "conf.json"
    config.write_text(json.dumps({"current": 0.020, "resistance": 21800.0}))
    code, out, _ = run_cli(capsys, "--config", str(config), "ems", "calc",
                           "--current", "0.040")
    assert code == 0
    assert out.strip() == "872 V"


def test_help_exits_zero():
    with pytest.raises(SystemExit) as exc:
        main(["--help"])
    assert exc.value.code == 0
    for sub in (["augment", "--help"], ["regs", "check", "--help"],
                ["ems", "--help"], ["bob", "--help"], ["engine", "--help"],
                ["replay", "--help"]):
        with pytest.raises(SystemExit) as exc:
            main(sub)
        assert exc.value.code == 0
