import json
import math
import subprocess
import sys

import numpy as np
import pytest

from xrdisk import basis, io
from xrdisk.cli import main


def run(argv):
    return main([str(a) for a in argv])


@pytest.fixture
def const_sino(tmp_path):
    out = tmp_path / "s.txt"
    assert run(["sinogram", "--phantom", "constant", "--grid-beta", 8, "--grid-alpha", 6, "--out", out]) == 0
    return out


def test_sinogram_constant(const_sino):
    s = io.read_sinogram(const_sino)
    _, a = s.grid.mesh()
    assert np.max(np.abs(s.values - 2 * np.cos(a))) < 1e-14
    meta = json.loads(open(str(const_sino) + ".json").read())
    assert meta["config"]["grid_beta"] == 8 and "timings" not in meta


def test_sinogram_zernike(tmp_path):
    out = tmp_path / "z.txt"
    assert run(["sinogram", "--phantom", "zernike:5,2", "--grid-beta", 16, "--grid-alpha", 8, "--out", out]) == 0
    s = io.read_sinogram(out)
    b, a = s.grid.mesh()
    ref = (4 * math.pi / 6) * basis.psi_eval(0.0, 5, 2, b, a)
    assert np.max(np.abs(s.values - ref)) < 1e-12


def test_reconstruct_raw_normalization(tmp_path):
    sin = tmp_path / "z.txt"
    run(["sinogram", "--phantom", "zernike:5,2", "--grid-beta", 16, "--grid-alpha", 8, "--out", sin])
    out = tmp_path / "c.txt"
    assert run(["reconstruct", "--input", sin, "--degree", 5, "--normalization", "raw",
                "--out", out]) == 0
    e = io.read_coefficients(out)
    assert e.get(5, 2) == pytest.approx(1.0, abs=1e-12)
    assert np.max(np.abs(np.delete(e.coeffs, basis.triangle_index(5, 2)))) < 1e-12


def test_reruns_are_byte_identical(tmp_path):
    sin = tmp_path / "g.txt"
    run(["sinogram", "--phantom", "gaussian", "--grid-beta", 22, "--grid-alpha", 12, "--out", sin])
    texts = []
    for i in range(2):
        out = tmp_path / f"r{i}.txt"
        assert run(["reconstruct", "--input", sin, "--noise", 0.01, "--seed", 3, "--out", out]) == 0
        texts.append(out.read_bytes())
    assert texts[0] == texts[1]
    out = tmp_path / "r2.txt"
    run(["reconstruct", "--input", sin, "--noise", 0.01, "--seed", 4, "--out", out])
    assert out.read_bytes() != texts[0]


def test_lam_sweep(tmp_path, capsys):
    sin = tmp_path / "g.txt"
    run(["sinogram", "--phantom", "gaussian", "--grid-beta", 22, "--grid-alpha", 12, "--out", sin])
    out = tmp_path / "r.txt"
    lams = [1e-6, 1e-4, 1e-2, 1e-1, 1, 10]
    assert run(["reconstruct", "--input", sin, "--noise", 0.05, "--truth", "gaussian",
                "--out", out, "--lam-sweep", *lams]) == 0
    _, _, data = io._read(str(out) + ".sweep", "xrdisk tikhonov sweep")
    err = data[:, 1]
    i = int(np.argmin(err))
    assert 0 < i < len(err) - 1
    assert run(["reconstruct", "--input", sin, "--lam-sweep", 1.0]) == 2


def test_range_command(tmp_path, capsys, const_sino):
    sin = tmp_path / "z.txt"
    run(["sinogram", "--phantom", "zernike:3,1", "--grid-beta", 64, "--grid-alpha", 32, "--out", sin])
    assert run(["range", "--input", sin, "--out", tmp_path / "p.txt"]) == 0
    dist = float(capsys.readouterr().out.split()[-1])
    assert dist < 1e-8
    # add a unit co-kernel mode: the distance is its norm
    s = io.read_sinogram(sin)
    b, a = s.grid.mesh()
    mode = basis.psi_eval(0.0, 2, 5, b, a, hat=True)
    mode /= s.with_values(mode).norm(0.0)
    io.write_sinogram(tmp_path / "m.txt", s.with_values(s.values + mode))
    assert run(["range", "--input", tmp_path / "m.txt", "--out", tmp_path / "q.txt"]) == 0
    assert float(capsys.readouterr().out.split()[-1]) == pytest.approx(1.0, abs=1e-8)


def test_backproject_command(tmp_path):
    sin = tmp_path / "c.txt"
    run(["sinogram", "--phantom", "zernike:0,0", "--grid-beta", 8, "--grid-alpha", 6, "--out", sin])
    out = tmp_path / "f.txt"
    assert run(["backproject", "--input", sin, "--degree", 4, "--out", out]) == 0
    z, v = io.read_field(out)
    # I0 of the unit constant has weighted backprojection 4 pi
    assert np.max(np.abs(v - 4 * math.pi)) < 1e-10


def test_attenuate_command(tmp_path, capsys):
    spec = tmp_path / "a.json"
    spec.write_text(json.dumps({"kind": "bump", "amplitude": [0, 1],
                                "generator": [[[0, 0.5], [0.3, 0.1]], [[-0.3, 0.1], [0, -0.2]]]}))
    out = tmp_path / "u.txt"
    assert run(["attenuate", "--attenuation", spec, "--degree", 3, "--grid-beta", 8,
                "--grid-alpha", 5, "--steps", 32, "--out", out]) == 0
    assert (tmp_path / "u.txt.c1").exists()
    assert run(["attenuate", "--degree", 4, "--grid-beta", 10, "--grid-alpha", 6, "--probe"]) == 0
    text = capsys.readouterr().out
    assert "sigma_min" in text


def test_asymptotics_command(capsys):
    assert run(["asymptotics", "--check", "i0", "--gamma", 0.7]) == 0
    assert "pass" in capsys.readouterr().out
    assert run(["asymptotics", "--check", "normal", "--input-class", "inv_sqrt"]) == 0
    assert run(["asymptotics", "--check", "normal", "--kappa", 0.2]) == 2


def test_verify_command(tmp_path):
    out = tmp_path / "v.txt"
    assert run(["verify", "--suite", "range", "--out", out, "--timings"]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "id\tmeasured\texpected\ttol\tpass"
    assert all(l.endswith("PASS") for l in lines[1:])
    meta = json.loads((tmp_path / "v.txt.json").read_text())
    assert "verify" in meta["timings"]


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"grid_beta": 10, "grid_alpha": 4}))
    out = tmp_path / "s.txt"
    assert run(["sinogram", "--config", cfg, "--grid-alpha", 7, "--out", out]) == 0
    s = io.read_sinogram(out)
    assert (s.grid.n_beta, s.grid.n_alpha) == (10, 7)


@pytest.mark.parametrize("argv", [
    ["sinogram", "--grid-beta", 0],
    ["sinogram", "--kappa", 1.5],
    ["sinogram", "--gamma", -1],
    ["sinogram", "--phantom", "nope"],
    ["sinogram", "--out", "/nonexistent/dir/x.txt"],
    ["reconstruct"],
    ["reconstruct", "--input", "/nonexistent.txt"],
])
def test_config_errors_exit_2(argv, capsys):
    assert run(argv) == 2
    assert "xrdisk" in capsys.readouterr().err


def test_degree_mismatch_exit_2(const_sino):
    assert run(["reconstruct", "--input", const_sino, "--degree", 20]) == 2


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "xrdisk", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("xrdisk ")
