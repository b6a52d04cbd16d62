"""Command-line interface.

Physics parameters come from a TOML config file; flags only select paths, z
lists and verbosity. Exit status: 0 success, 1 usage or configuration
error, 2 numerical or validity error. Set ``BESSELHOLO_THREADS`` to limit the
FFT worker count.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, load_config
from .curves import focal_scan, onaxis_curve
from .errors import BesselHoloError, ConfigError, NumericalError, UsageError
from .grid import GridGeometry
from .hologram import (
    build_transmittance,
    perturb_hologram,
    thickness_from_phase,
    transmittance_from_thickness,
)
from .io import atomic_write, export_csv, export_field, export_fib_pattern, export_image, import_field
from .orders import efficiency_vs_thickness, measure_order_spectrum
from .propagation import Field2D, illuminate, incoherent_average, propagate_farfield, propagate_fresnel
from .stem import compare_probes
from .vortex import DEFAULT_AMPLITUDE_FLOOR, DEFAULT_LOOP_SIZE, winding_numbers

log = logging.getLogger("besselholo")

PER_ANGSTROM = 1e-10  # cycles per metre -> cycles per Angstrom


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _z_list(text: str) -> list[float]:
    try:
        values = [float(t) for t in text.replace(",", " ").split()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad z list {text!r}") from exc
    if not values:
        raise argparse.ArgumentTypeError("empty z list")
    return values


def _outdir(cfg: RunConfig, args) -> Path:
    d = Path(args.out) if args.out else Path(cfg.section("output")["directory"])
    d.mkdir(parents=True, exist_ok=True)
    return d


def _echo(cfg: RunConfig, outdir: Path):
    atomic_write(outdir / "config.resolved.toml", cfg.to_toml().encode("utf-8"))


def _transmittance(cfg: RunConfig, spec, params):
    h = cfg.section("hologram")
    tmap = build_transmittance(spec, h["amplitude"])
    pert = cfg.section("perturbation")
    if pert and pert["magnitude"] > 0:
        corr = pert.get("correlation_um")
        tmap = perturb_hologram(
            tmap,
            pert["kind"],
            pert["magnitude"],
            correlation_m=None if corr is None else corr * 1e-6,
            seed=pert["seed"],
        )
    return tmap


def _write_field_outputs(field: Field2D, stem: str, outdir: Path, formats):
    if "intensity16" in formats:
        export_image(field.intensity, "intensity16", outdir / f"{stem}_intensity.pgm")
    if "phase_hue" in formats:
        export_image(field.values, "phase_hue", outdir / f"{stem}_phase.ppm")
    if "field" in formats and not field.kspace:
        export_field(field, outdir / f"{stem}.efld")


def cmd_synth(cfg: RunConfig, args) -> None:
    params = cfg.electron_params()
    spec = cfg.hologram_spec()
    h = cfg.section("hologram")
    outdir = _outdir(cfg, args)
    tmap = thickness_from_phase(spec, params, h["inner_potential_v"], h["base_thickness_nm"] * 1e-9)
    trans = _transmittance(cfg, spec, params)
    formats = cfg.section("output")["formats"]
    field = Field2D(spec.grid, trans.values, params.wavelength_m, 0.0)
    _write_field_outputs(field, "transmittance", outdir, formats)
    export_image(tmap.values_m, "intensity16", outdir / "thickness.pgm")
    t_nm = tmap.values_m * 1e9
    export_csv(
        ["quantity", "value_nm"],
        [
            ("base_thickness", float(tmap.base_thickness_m * 1e9)),
            ("min_thickness", float(t_nm.min())),
            ("peak_to_valley", float(tmap.base_thickness_m * 1e9 - t_nm.min())),
        ],
        outdir / "thickness_summary.csv",
    )
    if cfg.has("fib"):
        fib = cfg.section("fib")
        export_fib_pattern(tmap, fib["dwell_per_nm_us"], outdir / "pattern.fib", fib.get("max_dwell_per_pass_us"))
    _echo(cfg, outdir)


def cmd_propagate(cfg: RunConfig, args) -> None:
    params = cfg.electron_params()
    spec = cfg.hologram_spec()
    source = cfg.source_model()
    z_list = args.z if args.z else cfg.section("propagate").get("z_m")
    if not z_list:
        raise ConfigError("propagate: give --z or propagate.z_m")
    # record the distances so the echoed config reruns this exact command
    cfg = RunConfig({**cfg.sections, "propagate": {**cfg.section("propagate"), "z_m": [float(z) for z in z_list]}})
    outdir = _outdir(cfg, args)
    formats = cfg.section("output")["formats"]
    trans = _transmittance(cfg, spec, params)
    coherent = source.tilt_sigma_rad == 0
    base = illuminate(trans, params, source) if coherent else None
    for i, z in enumerate(z_list):
        stem = f"z{i:03d}"
        if coherent:
            out = propagate_fresnel(base, z)
            _write_field_outputs(out, stem, outdir, formats)
        else:
            avg = incoherent_average(trans, params, source, z)
            export_image(avg.values, "intensity16", outdir / f"{stem}_intensity.pgm")
        log.info("z = %g m written as %s", z, stem)
    export_csv(["index", "z_m"], [(i, float(z)) for i, z in enumerate(z_list)], outdir / "z_index.csv")
    _echo(cfg, outdir)


def cmd_farfield(cfg: RunConfig, args) -> None:
    params = cfg.electron_params()
    spec = cfg.hologram_spec()
    outdir = _outdir(cfg, args)
    trans = _transmittance(cfg, spec, params)
    far = propagate_farfield(illuminate(trans, params, cfg.source_model()))
    export_image(far.intensity, "intensity16", outdir / "farfield_intensity.pgm")
    spectrum = measure_order_spectrum(far, spec, cfg.section("farfield").get("max_order", 3))
    rows = [(o.m, o.center_k, o.fraction) for o in spectrum.orders]
    export_csv(["m", "center_k_per_m", "fraction"], rows, outdir / "orders.csv")
    export_csv(
        ["quantity", "value"],
        [("residual_fraction", spectrum.residual), ("overlap", int(spectrum.overlap))],
        outdir / "orders_summary.csv",
    )
    if spectrum.overlap:
        log.warning("some orders overlap or lie beyond the sampled band; their fractions are unreliable")
    _echo(cfg, outdir)


def cmd_efficiency_sweep(cfg: RunConfig, args) -> None:
    params = cfg.electron_params()
    spec = cfg.hologram_spec()
    h = cfg.section("hologram")
    t0 = cfg.section("efficiency_sweep").get("t0_nm")
    if not t0:
        raise ConfigError("efficiency_sweep.t0_nm: required for this command")
    outdir = _outdir(cfg, args)
    curve = efficiency_vs_thickness(
        spec, params, h["inner_potential_v"], [t * 1e-9 for t in t0], h["base_thickness_nm"] * 1e-9
    )
    rows = zip(curve.t0_m * 1e9, curve.phase_param_rad, curve.efficiency)
    export_csv(["t0_nm", "phase_param_rad", "efficiency"], rows, outdir / "efficiency.csv")
    _echo(cfg, outdir)


def cmd_onaxis(cfg: RunConfig, args) -> None:
    params = cfg.electron_params()
    spec = cfg.hologram_spec()
    z = cfg.section("onaxis").get("z_m")
    if not z:
        raise ConfigError("onaxis.z_m: required for this command")
    outdir = _outdir(cfg, args)
    curve = onaxis_curve(spec, params, z, cfg.source_model())
    export_csv(["z_m", "intensity_per_m2"], zip(curve.z_m, curve.intensity), outdir / "onaxis.csv")
    _echo(cfg, outdir)


def cmd_focal_scan(cfg: RunConfig, args) -> None:
    params = cfg.electron_params()
    spec = cfg.hologram_spec()
    sec = cfg.section("focal_scan")
    z = sec.get("z_m")
    if not z:
        raise ConfigError("focal_scan.z_m: required for this command")
    outdir = _outdir(cfg, args)
    scan = focal_scan(spec, params, cfg.source_model(), z, sec["orders"])
    header = ["z_m"] + [f"rms_radius_m_order_{m}" for m in scan.orders]
    rows = [[float(zz)] + [float(scan.rms_radius_m[m][i]) for m in scan.orders] for i, zz in enumerate(scan.z_m)]
    export_csv(header, rows, outdir / "focal_scan.csv")
    export_csv(["m", "focus_z_m"], [(m, scan.focus_z_m[m]) for m in scan.orders], outdir / "focal_points.csv")
    _echo(cfg, outdir)


def cmd_transfer(cfg: RunConfig, args) -> None:
    params = cfg.electron_params()
    sec = cfg.section("transfer")
    specs = cfg.probe_specs()
    if len(specs) < 2:
        raise ConfigError("transfer.probes: at least two probes are required")
    grid = GridGeometry(sec["nx"], sec["nx"], sec["pitch_angstrom"] * 1e-10)
    outdir = _outdir(cfg, args)
    cmp = compare_probes(specs, params, grid)
    for i, c in enumerate(cmp.curves):
        export_csv(
            ["k_per_angstrom", "h_normalized"],
            zip(c.k_per_m * PER_ANGSTROM, c.h),
            outdir / f"transfer_{i}_{c.name}.csv",
        )
    rows = [(i, j, k * PER_ANGSTROM) for (i, j), ks in cmp.crossovers.items() for k in ks]
    export_csv(["probe_a", "probe_b", "crossover_k_per_angstrom"], rows, outdir / "crossovers.csv")
    _plot_transfer(cmp.curves, outdir / "transfer.png")
    _echo(cfg, outdir)


def _plot_transfer(curves, path: Path):
    import io

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for c in curves:
        alive = c.h > 1e-6 * c.h[0]
        ax.semilogy(c.k_per_m[alive] * PER_ANGSTROM, c.h[alive], label=c.name)
    ax.set_xlabel("spatial frequency (1/Angstrom)")
    ax.set_ylabel("H(k), scaled")
    ax.legend()
    buf = io.BytesIO()
    fig.savefig(buf, format="png", dpi=120, metadata={"Software": None})
    plt.close(fig)
    atomic_write(path, buf.getvalue())


def cmd_vortices(args) -> None:
    field = import_field(args.field_file)
    outdir = Path(args.out) if args.out else Path(args.field_file).parent
    outdir.mkdir(parents=True, exist_ok=True)
    stem = Path(args.field_file).stem
    vmap = winding_numbers(field, args.loop_size, args.floor)
    export_csv(
        ["x_px", "y_px", "charge"],
        [(v.x_px, v.y_px, v.charge) for v in vmap.vortices],
        outdir / f"{stem}_vortices.csv",
    )
    export_image(field.values, "phase_hue", outdir / f"{stem}_phase.ppm")
    log.info("%d vortices, %d loops skipped", len(vmap.vortices), vmap.skipped_loops)


CONFIG_COMMANDS = {
    "synth": cmd_synth,
    "propagate": cmd_propagate,
    "farfield": cmd_farfield,
    "efficiency-sweep": cmd_efficiency_sweep,
    "onaxis": cmd_onaxis,
    "focal-scan": cmd_focal_scan,
    "transfer": cmd_transfer,
}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="besselholo", description="Electron Bessel-beam hologram simulations.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in CONFIG_COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("config", help="TOML configuration file")
        s.add_argument("--out", help="output directory (overrides output.directory)")
        if name == "propagate":
            s.add_argument("--z", type=_z_list, help="propagation distances in metres, comma separated")
    v = sub.add_parser("vortices")
    v.add_argument("field_file", help="EFLD field dump")
    v.add_argument("--out", help="output directory (default: next to the field file)")
    v.add_argument("--loop-size", type=int, default=DEFAULT_LOOP_SIZE)
    v.add_argument("--floor", type=float, default=DEFAULT_AMPLITUDE_FLOOR)
    sub.add_parser("version")
    return p


def main(argv=None) -> int:
    logging.basicConfig(format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        args = build_parser().parse_args(argv)
        log.setLevel(logging.WARNING - 10 * min(args.verbose, 1))
        if args.command == "version":
            print(__version__)
            return 0
        if args.command == "vortices":
            cmd_vortices(args)
            return 0
        cfg = load_config(args.config)
        CONFIG_COMMANDS[args.command](cfg, args)
        return 0
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        # argument validation inside the library (e.g. loop size)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except BesselHoloError as exc:  # pragma: no cover - every subclass is handled above
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
