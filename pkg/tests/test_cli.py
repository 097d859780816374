import csv
import subprocess
import sys

import numpy as np
import pytest

from pfqm import cli, spectral

SMALL_EVOLVE = """
[grid]
dim = 2
length_x_um = 20.0
length_y_um = 20.0
points_x = 32
points_y = 32

[model]
alpha_mev_um2 = 0.005
gamma_per_ps = 0.1
eta = 0.01

[pump]
amplitude_mev = 0.5
width_um = 3.0
omega_mode = "lower_branch"
detuning_mev = -0.2

[potential]
kind = "harmonic"
strength_mev_um2 = 0.01

[run]
t_final_ps = 1.0
dt_ps = 0.05
stride = 2
snapshot_stride = 10
"""


def _run(tmp_path, *args, config_text=None, name="out"):
    argv = list(args)
    if config_text is not None:
        cfg = tmp_path / f"{name}.toml"
        cfg.write_text(config_text)
        argv += ["--config", str(cfg)]
    out = tmp_path / name
    return cli.main(argv + ["--out", str(out)]), out


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_dispersion_default(tmp_path, capsys):
    code, out = _run(tmp_path, "dispersion")
    assert code == 0
    rows = _rows(out / "dispersion.csv")
    assert len(rows) == 501
    assert set(rows[0]) >= {
        "k_per_um", "E_L_mev", "E_U_mev", "E_c_mev", "E_x_mev", "g_curvature_mev",
        "g_constmass_mev", "g_fractional_mev", "inverse_mass_mev_um2",
    }
    summary = (out / "summary.txt").read_text()
    k_inf = float(summary.split("k_inf_per_um = ")[1].split()[0])
    assert abs(k_inf - 1.3952) < 1e-3
    assert "k_inf" in capsys.readouterr().out


def test_dispersion_fractional_slope(tmp_path):
    code, out = _run(tmp_path, "dispersion")
    rows = _rows(out / "dispersion.csv")
    k = np.array([float(r["k_per_um"]) for r in rows])
    g = np.array([float(r["g_fractional_mev"]) for r in rows])
    sel = (k >= 0.1) & (k <= 3.0)
    slope = np.polyfit(np.log(k[sel]), np.log(g[sel]), 1)[0]
    assert abs(slope - 5 / 3) < 0.01


def test_dispersion_sample_count(tmp_path):
    code, out = _run(tmp_path, "dispersion", config_text="[dispersion]\nsamples = 37\n")
    assert code == 0 and len(_rows(out / "dispersion.csv")) == 37


def test_config_errors_exit_2(tmp_path, capsys):
    code, _ = _run(tmp_path, "dispersion", config_text="[dispersion]\nsample = 37\n")
    assert code == 2
    assert "dispersion.sample" in capsys.readouterr().err
    code, _ = _run(tmp_path, "evolve", config_text="[grid]\npoints_x = 7\n", name="b")
    assert code == 2
    assert cli.main(["evolve", "--config", str(tmp_path / "missing.toml"), "--out", str(tmp_path / "c")]) == 2
    assert cli.main(["evolve", "--threads", "0", "--out", str(tmp_path / "d")]) == 2


def test_evolve_outputs_and_determinism(tmp_path):
    code, a = _run(tmp_path, "evolve", config_text=SMALL_EVOLVE, name="a")
    assert code == 0
    code, b = _run(tmp_path, "evolve", config_text=SMALL_EVOLVE, name="b")
    assert code == 0
    for name in ("timeseries.csv", "final.pfqm", "density.csv", "phase.csv", "radial_profile.csv", "summary.txt"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name
    snaps = sorted(p.name for p in (a / "snapshots").iterdir())
    assert snaps == ["snap_00000000.pfqm", "snap_00000010.pfqm", "snap_00000020.pfqm"]
    field, t = spectral.read_snapshot(a / "snapshots" / "snap_00000010.pfqm")
    assert t == pytest.approx(0.5) and field.grid.shape == (32, 32)
    rows = _rows(a / "timeseries.csv")
    assert [float(r["t_ps"]) for r in rows][-1] == pytest.approx(1.0)
    summary = (a / "summary.txt").read_text()
    assert "M_final" in summary and "ring_radius_um" in summary


def test_effective_config_echo_reproduces(tmp_path):
    code, a = _run(tmp_path, "evolve", config_text=SMALL_EVOLVE, name="a")
    echo = a / "effective_config.toml"
    code = cli.main(["evolve", "--config", str(echo), "--out", str(tmp_path / "again")])
    assert code == 0
    assert (a / "final.pfqm").read_bytes() == (tmp_path / "again" / "final.pfqm").read_bytes()
    assert (a / "effective_config.toml").read_text() == (tmp_path / "again" / "effective_config.toml").read_text()


def test_seed_only_matters_with_noise(tmp_path):
    noisy = SMALL_EVOLVE + "noise_amplitude = 0.01\n"
    runs = {}
    for name, seed in (("s1", "1"), ("s1b", "1"), ("s2", "2")):
        cfg = tmp_path / f"{name}.toml"
        cfg.write_text(noisy)
        assert cli.main(["evolve", "--config", str(cfg), "--out", str(tmp_path / name), "--seed", seed]) == 0
        runs[name] = (tmp_path / name / "final.pfqm").read_bytes()
    assert runs["s1"] == runs["s1b"] and runs["s1"] != runs["s2"]


def test_sweep_writes_per_point_dirs(tmp_path):
    text = SMALL_EVOLVE + "\n[sweep]\na_values_per_um = [0.0, 2.6]\nmodels = [\"curvature\", \"constant\"]\n"
    code, out = _run(tmp_path, "evolve", config_text=text)
    assert code == 0
    for d in ("curvature_a0", "curvature_a2.6", "constant_a0", "constant_a2.6"):
        assert (out / d / "final.pfqm").is_file()
    rows = _rows(out / "sweep.csv")
    assert [(r["model"], float(r["a_per_um"])) for r in rows] == [
        ("curvature", 0.0), ("curvature", 2.6), ("constant", 0.0), ("constant", 2.6)
    ]


def test_sweep_parallel_matches_serial(tmp_path):
    text = SMALL_EVOLVE + "\n[sweep]\na_values_per_um = [0.0, 2.6]\nmodels = [\"curvature\"]\n"
    cfg = tmp_path / "s.toml"
    cfg.write_text(text)
    assert cli.main(["evolve", "--config", str(cfg), "--out", str(tmp_path / "ser")]) == 0
    assert cli.main(["evolve", "--config", str(cfg), "--out", str(tmp_path / "par"), "--threads", "2"]) == 0
    for d in ("curvature_a0", "curvature_a2.6"):
        assert (tmp_path / "ser" / d / "final.pfqm").read_bytes() == (tmp_path / "par" / d / "final.pfqm").read_bytes()


def test_watchdog_exit_3(tmp_path, capsys):
    text = SMALL_EVOLVE.replace("eta = 0.01", "eta = 5.0").replace("t_final_ps = 1.0", "t_final_ps = 50.0")
    text += "watchdog = 2.0\n"
    code, _ = _run(tmp_path, "evolve", config_text=text)
    assert code == 3
    err = capsys.readouterr().err
    assert "watchdog" in err and "max_abs" in err


def test_planewave(tmp_path):
    code, out = _run(tmp_path, "planewave")
    assert code == 0
    curv = _rows(out / "planewave_curvature.csv")
    const = _rows(out / "planewave_constant.csv")
    assert float(curv[0]["p0_mev"]) == 0.0 and float(curv[0]["rho"]) == 0.0
    rho_c = np.array([float(r["rho"]) for r in curv])
    rho_k = np.array([float(r["rho"]) for r in const])
    assert np.all(np.diff(rho_c) > 0) and np.all(np.diff(rho_k) > 0)
    assert np.max(np.abs(rho_c - rho_k)) > 1e-3


def test_planewave_needs_homogeneous_pump(tmp_path):
    code, _ = _run(tmp_path, "planewave", config_text='[pump]\nprofile = "gaussian"\n')
    assert code == 2


def test_response_maps(tmp_path):
    code, out = _run(tmp_path, "response")
    assert code == 0
    a = np.loadtxt(out / "response_curvature.csv", delimiter=",")
    b = np.loadtxt(out / "response_constant.csv", delimiter=",")
    assert a.shape == b.shape == (128, 128)
    for m in (a, b):
        m = m[:, 1:]
        assert np.max(np.abs(m - m[:, ::-1])) <= 1e-12 * np.max(m)
    assert np.linalg.norm(a - b) / np.linalg.norm(b) > 1e-3


def test_response_radial_without_flow(tmp_path):
    code, out = _run(tmp_path, "response", config_text="[response]\nv_y_um_per_ps = 0.0\npoints = 32\n")
    assert code == 0
    a = np.loadtxt(out / "response_curvature.csv", delimiter=",")[1:, 1:]
    assert np.max(np.abs(a - a.T)) <= 1e-12 * np.max(a)


def test_response_image(tmp_path):
    pytest.importorskip("matplotlib")
    code, out = _run(tmp_path, "response", config_text="[response]\npoints = 16\n[output]\nimage = true\n")
    assert code == 0 and (out / "response_curvature.png").is_file()


def test_selftest_passes(tmp_path, capsys):
    code, out = _run(tmp_path, "selftest")
    assert code == 0
    text = capsys.readouterr().out
    assert "FAIL" not in text and text.count("PASS") == 7


def test_selftest_failure_exit_1(tmp_path, monkeypatch):
    from pfqm import selftest

    bad = selftest.CheckResult("forced", 1.0, "< 0", False)
    monkeypatch.setattr(selftest, "CHECKS", (lambda: bad,))
    code, _ = _run(tmp_path, "selftest")
    assert code == 1


def test_module_entry_point(tmp_path):
    res = subprocess.run(
        [sys.executable, "-m", "pfqm", "dispersion", "--out", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert res.returncode == 0 and "k_inf" in res.stdout
