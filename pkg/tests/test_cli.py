import subprocess
import sys

import numpy as np
import pytest

from besselholo import Field2D, GridGeometry, __version__
from besselholo.cli import main
from besselholo.io import export_field, import_field, read_pnm

SMALL = """
[electron]
energy_kev = 200

[hologram]
n = 1
alpha_urad = 6
grating_pitch_nm = 100
aperture_radius_um = 2
profile = "blazed"

[grid]
nx = 256
ny = 256
pitch_nm = 25
"""

TRANSFER = """
[electron]
energy_kev = 200

[transfer]
nx = 256
pitch_angstrom = 0.2
probes = [
  {kind = "bessel_ring", convergence_mrad = 15},
  {kind = "aperture_limited", convergence_mrad = 15, cs_mm = 0.5, defocus_nm = 40},
]
"""


def _write(tmp_path, text, name="run.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def _files(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir()) if p.is_file()}


def test_version(capsys):
    assert main(["version"]) == 0
    assert capsys.readouterr().out.strip() == __version__


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "besselholo.cli", "version"], capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.strip() == __version__


def test_synth_outputs(tmp_path):
    cfg = _write(tmp_path, SMALL + "\n[fib]\ndwell_per_nm_us = 0.5\n")
    out = tmp_path / "o"
    assert main(["synth", str(cfg), "--out", str(out)]) == 0
    names = set(_files(out))
    assert names == {
        "transmittance_intensity.pgm",
        "transmittance_phase.ppm",
        "transmittance.efld",
        "thickness.pgm",
        "thickness_summary.csv",
        "pattern.fib",
        "config.resolved.toml",
    }
    f = import_field(out / "transmittance.efld")
    assert f.grid.nx == 256 and f.z_m == 0.0
    np.testing.assert_allclose(np.abs(f.values).max(), 1.0)
    assert read_pnm(out / "thickness.pgm").shape == (256, 256)


def test_output_directory_from_config(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    cfg = _write(tmp_path, SMALL + '\n[output]\ndirectory = "cfgdir"\nformats = ["field"]\n')
    assert main(["synth", str(cfg)]) == 0
    assert (tmp_path / "cfgdir" / "transmittance.efld").exists()
    assert not (tmp_path / "cfgdir" / "transmittance_phase.ppm").exists()


def test_propagate_and_echo_rerun_bitwise(tmp_path):
    cfg = _write(tmp_path, SMALL)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["propagate", str(cfg), "--out", str(a), "--z", "0.01,0.02"]) == 0
    assert (a / "z001.efld").exists()
    lines = (a / "z_index.csv").read_text().splitlines()
    assert lines == ["index,z_m", "0,0.01", "1,0.02"]
    # the echoed config records the z list, so no flag is needed to rerun
    assert main(["propagate", str(a / "config.resolved.toml"), "--out", str(b)]) == 0
    assert _files(a) == _files(b)
    assert import_field(b / "z001.efld").z_m == 0.02


def test_propagate_needs_z(tmp_path):
    assert main(["propagate", str(_write(tmp_path, SMALL)), "--out", str(tmp_path / "o")]) == 1


def test_farfield(tmp_path):
    out = tmp_path / "o"
    assert main(["farfield", str(_write(tmp_path, SMALL)), "--out", str(out)]) == 0
    rows = (out / "orders.csv").read_text().splitlines()
    assert rows[0] == "m,center_k_per_m,fraction"
    frac = {int(r.split(",")[0]): float(r.split(",")[2]) for r in rows[1:]}
    assert set(frac) == {-3, -2, -1, 0, 1, 2, 3}
    assert frac[1] > 0.9


def test_efficiency_sweep(tmp_path):
    text = SMALL.replace('"blazed"', '"sinusoidal"') + "\n[efficiency_sweep]\nt0_nm = [0, 10, 20]\n"
    out = tmp_path / "o"
    assert main(["efficiency-sweep", str(_write(tmp_path, text)), "--out", str(out)]) == 0
    rows = [r.split(",") for r in (out / "efficiency.csv").read_text().splitlines()]
    assert rows[0] == ["t0_nm", "phase_param_rad", "efficiency"]
    eta = [float(r[2]) for r in rows[1:]]
    assert eta[0] < 0.01 < eta[1] < eta[2]


def test_efficiency_sweep_needs_t0(tmp_path):
    assert main(["efficiency-sweep", str(_write(tmp_path, SMALL)), "--out", str(tmp_path / "o")]) == 1


def test_onaxis(tmp_path):
    text = SMALL.replace("n = 1", "n = 0") + "\n[onaxis]\nz_m = [0.05, 0.1, 0.2]\n"
    out = tmp_path / "o"
    assert main(["onaxis", str(_write(tmp_path, text)), "--out", str(out)]) == 0
    rows = (out / "onaxis.csv").read_text().splitlines()
    assert rows[0] == "z_m,intensity_per_m2" and len(rows) == 4


def test_focal_scan(tmp_path):
    text = SMALL.replace('"blazed"', '"sinusoidal"').replace("alpha_urad = 6", "alpha_urad = 3")
    # a finer grating keeps the orders apart under converging illumination
    text = text.replace("grating_pitch_nm = 100", "grating_pitch_nm = 50").replace("pitch_nm = 25", "pitch_nm = 12.5")
    text = text.replace("aperture_radius_um = 2", "aperture_radius_um = 1")
    text += "\n[source]\nconvergence_urad = 16\n[focal_scan]\nz_m = [0.02, 0.04, 0.06]\norders = [0, 1]\n"
    out = tmp_path / "o"
    assert main(["focal-scan", str(_write(tmp_path, text)), "--out", str(out)]) == 0
    assert (out / "focal_scan.csv").read_text().splitlines()[0] == "z_m,rms_radius_m_order_0,rms_radius_m_order_1"
    assert len((out / "focal_points.csv").read_text().splitlines()) == 3


def test_focal_scan_without_convergence_fails(tmp_path):
    text = SMALL + "\n[focal_scan]\nz_m = [0.05, 0.1, 0.15]\n"
    assert main(["focal-scan", str(_write(tmp_path, text)), "--out", str(tmp_path / "o")]) == 1


def test_transfer(tmp_path):
    out = tmp_path / "o"
    assert main(["transfer", str(_write(tmp_path, TRANSFER)), "--out", str(out)]) == 0
    names = set(_files(out))
    assert {"transfer_0_bessel_n0.csv", "transfer_1_aperture_aberrated.csv", "crossovers.csv", "transfer.png"} <= names
    rows = (out / "transfer_0_bessel_n0.csv").read_text().splitlines()
    assert rows[0] == "k_per_angstrom,h_normalized"
    # rerun from the echo reproduces every file, the plot included
    b = tmp_path / "b"
    assert main(["transfer", str(out / "config.resolved.toml"), "--out", str(b)]) == 0
    assert _files(out) == _files(b)


def test_synth_echo_rerun_bitwise(tmp_path):
    text = SMALL + "\n[perturbation]\nmagnitude = 0.2\nseed = 7\n[fib]\n"
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["synth", str(_write(tmp_path, text)), "--out", str(a)]) == 0
    assert main(["synth", str(a / "config.resolved.toml"), "--out", str(b)]) == 0
    assert _files(a) == _files(b)


def test_vortices_command(tmp_path):
    from conftest import vortex_field

    g = GridGeometry(64, 64, 25e-9)
    export_field(Field2D(g, vortex_field(2), 2.5e-12, 0.0), tmp_path / "v.efld")
    export_field(Field2D(g, np.ones((64, 64), complex), 2.5e-12, 0.0), tmp_path / "plane.efld")
    out = tmp_path / "o"
    assert main(["vortices", str(tmp_path / "v.efld"), "--out", str(out)]) == 0
    rows = (out / "v_vortices.csv").read_text().splitlines()
    assert rows[0] == "x_px,y_px,charge"
    assert len(rows) == 2 and rows[1].endswith(",2")
    assert main(["vortices", str(tmp_path / "plane.efld"), "--out", str(out)]) == 0
    assert (out / "plane_vortices.csv").read_text() == "x_px,y_px,charge\n"
    assert (out / "plane_phase.ppm").exists()


def test_vortices_bad_arguments(tmp_path):
    p = tmp_path / "x.efld"
    p.write_bytes(b"junk")
    assert main(["vortices", str(p)]) == 1
    export_field(Field2D(GridGeometry(64, 64, 1e-9), np.ones((64, 64), complex), 2e-12, 0.0), p)
    assert main(["vortices", str(p), "--loop-size", "4"]) == 1


@pytest.mark.parametrize(
    "argv",
    [[], ["frobnicate"], ["synth"], ["propagate", "cfg.toml", "--z", "abc"]],
    ids=["none", "unknown", "missing_config", "bad_z"],
)
def test_usage_errors(argv, capsys):
    assert main(argv) == 1
    assert "error" in capsys.readouterr().err


def test_bad_config_exit_1(tmp_path, capsys):
    cfg = _write(tmp_path, SMALL.replace("aperture_radius_um = 2", "aperture_radius_um = -2"))
    assert main(["synth", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert "hologram.aperture_radius_um" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_numerical_error_exit_2(tmp_path, capsys):
    cfg = _write(tmp_path, SMALL.replace("grating_pitch_nm = 100", "grating_pitch_nm = 60"))
    assert main(["synth", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "numerical error" in capsys.readouterr().err


def test_infeasible_membrane_exit_2(tmp_path):
    text = SMALL.replace('profile = "blazed"', 'profile = "blazed"\nbase_thickness_nm = 10')
    assert main(["synth", str(_write(tmp_path, text)), "--out", str(tmp_path / "o")]) == 2


def test_inputs_not_mutated(tmp_path):
    cfg = _write(tmp_path, SMALL)
    before = cfg.read_bytes()
    g = GridGeometry(64, 64, 25e-9)
    export_field(Field2D(g, np.ones((64, 64), complex), 2.5e-12, 0.0), tmp_path / "f.efld")
    field_before = (tmp_path / "f.efld").read_bytes()
    assert main(["synth", str(cfg), "--out", str(tmp_path / "o")]) == 0
    assert main(["vortices", str(tmp_path / "f.efld"), "--out", str(tmp_path / "o")]) == 0
    assert cfg.read_bytes() == before
    assert (tmp_path / "f.efld").read_bytes() == field_before
