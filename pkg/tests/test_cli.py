import subprocess
import sys

import pytest

from scidma.harness.cli import main


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_threshold_c1(capsys):
    code, out, _ = run(["threshold", "--code", "c1", "--users", "8", "--dr", "4"], capsys)
    assert code == 0
    th = float(out.split()[1])
    assert th == pytest.approx(1.55, abs=0.1)
    assert "gap" in out


def test_threshold_unbounded(capsys):
    code, out, _ = run(["threshold", "--dv", "9", "--dc", "12", "--dr", "2", "--uncoupled"], capsys)
    assert code == 0 and "none below 20 dB" in out


def test_construct_full_scale_rows(tmp_path, capsys):
    path = tmp_path / "h.alist"
    code, _, _ = run(["construct", "--code", "c1", "--L", "50", "--Z", "1000", "--out", str(path)], capsys)
    assert code == 0
    n, m = map(int, path.read_text().split("\n", 1)[0].split())
    assert (m, n) == (52_000, 100_000)


def test_ber_requires_gammas(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["ber", "--code", "c1"])
    assert exc.value.code == 2
    assert "--gammas" in capsys.readouterr().err


def test_ber_invalid_config_exit_code(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["ber", "--gammas", "1", "--interleaver", "full"])
    assert exc.value.code == 2
    assert "sub-block" in capsys.readouterr().err


def test_ber_from_config_file(tmp_path, capsys):
    cfg = tmp_path / "toy.cfg"
    cfg.write_text("code = c1\nL = 5\nZ = 10\nusers = 2\ndr = 2\nWd = 3\nImax = 4\ngammas = 6\n"
                   "max_frames = 2\n")
    out = tmp_path / "ber.csv"
    code, _, err = run(["ber", "--config", str(cfg), "--seed", "4", "--csv", str(out)], capsys)
    assert code == 0
    text = out.read_text()
    assert "# seed = 4" in text and "# L = 5" in text
    assert text.strip().splitlines()[-1].startswith("6.0000,2,")
    assert "gamma 6.00 dB" in err


def test_ber_compare_interleavers(tmp_path, capsys):
    code, out, _ = run(["ber", "--code", "c1", "--L", "5", "--Z", "10", "--users", "2", "--dr", "2",
                        "--Wd", "3", "--Imax", "3", "--gammas", "8", "--max-frames", "1",
                        "--compare-interleavers"], capsys)
    assert code == 0
    for label in ("subblock+windowed", "full+windowed", "full+fullbp"):
        assert f"# run = {label}" in out


def test_config_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("flavour = vanilla\n")
    assert main(["threshold", "--config", str(cfg)]) == 2
    assert "unknown key" in capsys.readouterr().err


def test_exit_and_sweep(capsys):
    code, out, _ = run(["exit", "--gamma", "2.3", "--points", "5", "--L", "10", "--iters", "5"], capsys)
    assert code == 0 and out.startswith("curve,I_A,I_E")
    code, out, _ = run(["sweep-users", "--dr", "10", "--users", "8", "--L", "20"], capsys)
    assert code == 0
    row = out.strip().splitlines()[1].split(",")
    assert row[:2] == ["10", "8"] and float(row[4]) < 2.0


def test_exit_requires_gamma(capsys):
    with pytest.raises(SystemExit):
        main(["exit"])


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "scidma", "construct", "--code", "c2", "--L", "2", "--Z", "2"],
                         capture_output=True, text=True, check=True)
    assert res.stdout.split("\n", 1)[0] == "16 18"
