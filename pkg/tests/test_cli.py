import json
import subprocess
import sys

import pytest

from boundsafe.cli import main
from boundsafe.io import directory_checksum


@pytest.fixture
def cfg_file(tmp_path):
    p = tmp_path / "small.yaml"
    p.write_text("domain_shape: [32, 32, 32]\nsize_range: [6, 14]\n")
    return p


def test_generate_twice_identical(tmp_path, cfg_file, capsys):
    for name in ("a", "b"):
        assert main(["generate", "--config", str(cfg_file), "--count", "4", "--seed", "7",
                     "--out", str(tmp_path / name)]) == 0
    assert directory_checksum(tmp_path / "a") == directory_checksum(tmp_path / "b")
    assert len(list((tmp_path / "a").iterdir())) == 12
    assert "wrote 4 volume(s)" in capsys.readouterr().out


def test_generate_independent_of_parallelism(tmp_path, cfg_file):
    for name, par in (("p1", "1"), ("p3", "3")):
        assert main(["generate", "--config", str(cfg_file), "--count", "4", "--seed", "1",
                     "--parallelism", par, "--out", str(tmp_path / name)]) == 0
    assert directory_checksum(tmp_path / "p1") == directory_checksum(tmp_path / "p3")


def test_generate_nifti(tmp_path, cfg_file):
    assert main(["generate", "--config", str(cfg_file), "--count", "1", "--format", "nifti",
                 "--out", str(tmp_path)]) == 0
    assert sorted(p.name for p in tmp_path.glob("0*")) == ["000000_img.nii", "000000_lbl.nii", "000000_meta.json"]


def test_rerender_exit_status(tmp_path, cfg_file, capsys):
    main(["generate", "--config", str(cfg_file), "--count", "2", "--out", str(tmp_path / "g")])
    meta = tmp_path / "g" / "000001_meta.json"
    assert main(["rerender", str(meta), "--out", str(tmp_path / "r")]) == 0
    assert "checksums match" in capsys.readouterr().out
    assert (tmp_path / "r" / "000001_img.f32").read_bytes() == (tmp_path / "g" / "000001_img.f32").read_bytes()
    m = json.loads(meta.read_text())
    m["checksums"]["000001_img.f32"] = "0" * 64
    meta.write_text(json.dumps(m))
    assert main(["rerender", str(meta)]) == 1


def test_analyze_generated_and_stored(tmp_path, cfg_file, capsys):
    assert main(["analyze", "--config", str(cfg_file), "--count", "2", "--mode", "naive", "--mc", "2",
                 "--out", str(tmp_path / "rep")]) == 0
    summary = json.loads((tmp_path / "rep" / "report_summary.json").read_text())
    assert summary["mc_realizations"] == 2 and summary["pooled"]["count"] > 0
    assert set(summary["decomposition"]) == {"0", "1"}
    main(["generate", "--config", str(cfg_file), "--count", "2", "--out", str(tmp_path / "g")])
    assert main(["analyze", "--input", str(tmp_path / "g"), "--mc", "2", "--out", str(tmp_path / "rep2")]) == 0
    s2 = json.loads((tmp_path / "rep2" / "report_summary.json").read_text())
    assert s2["pooled"]["frac_aliased"] == 0.0


def test_narrow_gap_needs_override(tmp_path, cfg_file, capsys):
    assert main(["generate", "--config", str(cfg_file), "--count", "1", "--tau-gap", "1",
                 "--out", str(tmp_path)]) == 2
    assert "kernel_size - 1" in capsys.readouterr().err
    with pytest.warns(UserWarning, match="kernel_size - 1"):
        assert main(["generate", "--config", str(cfg_file), "--count", "1", "--tau-gap", "0",
                     "--allow-unsafe-gap", "--out", str(tmp_path)]) == 0


def test_bad_config_exits_nonzero(tmp_path, capsys):
    p = tmp_path / "bad.yaml"
    p.write_text("count: -5\n")
    assert main(["generate", "--config", str(p)]) == 2
    assert "count" in capsys.readouterr().err


def test_missing_input_dir(tmp_path, capsys):
    assert main(["analyze", "--input", str(tmp_path / "none")]) == 2


def test_console_entry_point(tmp_path, cfg_file):
    out = subprocess.run([sys.executable, "-m", "boundsafe.cli", "generate", "--config", str(cfg_file),
                          "--count", "1", "--out", str(tmp_path)], capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
