"""Run configuration: TOML text with physics parameters in interface units.

Interface units are keV, nm, um, urad and mrad, as named by each key's
suffix. Parsing validates every key and reports all problems at once; the
resolved configuration (defaults filled in) can be written back as TOML and
reproduces the run exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable

import tomli
import tomli_w

from .electron import ElectronParams, derive_params
from .errors import ConfigError, DomainError
from .grid import GridGeometry
from .hologram import HologramSpec, Profile
from .propagation import SourceModel
from .stem import ProbeKind, ProbeSpec

REQUIRED = object()
OPTIONAL = object()  # no default; key may be absent


@dataclass(frozen=True)
class Key:
    kind: type | tuple
    default: Any = REQUIRED
    check: Callable[[Any], str | None] | None = None


def _positive(v):
    return None if v > 0 and math.isfinite(v) else "must be > 0"


def _non_negative(v):
    return None if v >= 0 and math.isfinite(v) else "must be >= 0"


def _unit_interval(v):
    return None if 0 <= v <= 1 else "must lie in [0, 1]"


def _open_unit(v):
    return None if 0 < v < 1 else "must lie in (0, 1)"


def _finite(v):
    return None if math.isfinite(v) else "must be finite"


def _one_of(*options):
    return lambda v: None if v in options else f"must be one of {list(options)}"


def _pow2(v):
    return None if v >= 64 and (v & (v - 1)) == 0 else "must be a power of two >= 64"


def _list_of(kind, each=None, nonempty=True):
    def check(v):
        if nonempty and not v:
            return "must not be empty"
        for x in v:
            if not isinstance(x, kind) or isinstance(x, bool):
                return f"entries must be {getattr(kind, '__name__', kind)}"
            if each and (msg := each(x)):
                return "entries " + msg
        return None

    return check


NUM = (int, float)

SCHEMA: dict[str, dict[str, Key]] = {
    "electron": {"energy_kev": Key(NUM, REQUIRED, _positive)},
    "hologram": {
        "n": Key(int, REQUIRED),
        "alpha_urad": Key(NUM, OPTIONAL, _non_negative),
        "k_rho_per_um": Key(NUM, OPTIONAL, _non_negative),
        "grating_pitch_nm": Key(NUM, REQUIRED, _positive),
        "aperture_radius_um": Key(NUM, REQUIRED, _positive),
        "profile": Key(str, "blazed", _one_of(*(p.value for p in Profile))),
        "phase_depth_rad": Key(NUM, OPTIONAL, _finite),
        "amplitude": Key(NUM, 1.0, _unit_interval),
        "inner_potential_v": Key(NUM, 17.0, _positive),
        "base_thickness_nm": Key(NUM, 200.0, _positive),
    },
    "grid": {
        "nx": Key(int, 2048, _pow2),
        "ny": Key(int, 2048, _pow2),
        "pitch_nm": Key(NUM, 25.0, _positive),
    },
    "source": {
        "tilt_sigma_urad": Key(NUM, 0.0, _non_negative),
        "n_samples": Key(int, 1, lambda v: None if v >= 1 and math.isqrt(v) ** 2 == v else "must be a perfect square >= 1"),
        "convergence_urad": Key(NUM, 0.0, _non_negative),
    },
    "perturbation": {
        "kind": Key(str, "phase_ripple", _one_of("phase_ripple", "fringe_jitter")),
        "magnitude": Key(NUM, 0.0, _non_negative),
        "correlation_um": Key(NUM, OPTIONAL, _positive),
        "seed": Key(int, 0),
    },
    "output": {
        "directory": Key(str, "out"),
        "formats": Key(list, ["intensity16", "phase_hue", "field"], _list_of(str, _one_of("intensity16", "phase_hue", "field"), nonempty=False)),
    },
    "propagate": {"z_m": Key(list, OPTIONAL, _list_of(NUM, _non_negative))},
    "farfield": {"max_order": Key(int, 3, lambda v: None if v >= 0 else "must be >= 0")},
    "onaxis": {"z_m": Key(list, OPTIONAL, _list_of(NUM, _positive))},
    "efficiency_sweep": {"t0_nm": Key(list, OPTIONAL, _list_of(NUM, _non_negative))},
    "focal_scan": {
        "z_m": Key(list, OPTIONAL, _list_of(NUM, _positive)),
        "orders": Key(list, [-2, -1, 0, 1, 2], _list_of(int)),
    },
    "fib": {
        "dwell_per_nm_us": Key(NUM, 1.0, _positive),
        "max_dwell_per_pass_us": Key(NUM, OPTIONAL, _positive),
    },
    "transfer": {
        "nx": Key(int, 1024, _pow2),
        "pitch_angstrom": Key(NUM, 0.2, _positive),
        "probes": Key(list, OPTIONAL),
    },
}

PROBE_SCHEMA: dict[str, Key] = {
    "kind": Key(str, REQUIRED, _one_of(*(k.value for k in ProbeKind))),
    "convergence_mrad": Key(NUM, REQUIRED, _positive),
    "ring_fractional_width": Key(NUM, 0.06, _open_unit),
    "cs_mm": Key(NUM, 0.0, _finite),
    "defocus_nm": Key(NUM, 0.0, _finite),
    "n": Key(int, 0),
    "label": Key(str, ""),
}

# sections that may be left out entirely
OPTIONAL_SECTIONS = {
    "hologram", "grid", "source", "perturbation", "output", "propagate", "farfield",
    "onaxis", "efficiency_sweep", "focal_scan", "fib", "transfer",
}


def _type_ok(value, kind) -> bool:
    if isinstance(value, bool):
        return kind is bool
    if kind == NUM:
        return isinstance(value, (int, float))
    return isinstance(value, kind)


def _resolve_table(table: dict, schema: dict[str, Key], path: str, errors: list[str]) -> dict:
    out = {}
    for key in table:
        if key not in schema:
            errors.append(f"{path}.{key}: unknown key")
    for key, spec in schema.items():
        if key in table:
            v = table[key]
            if not _type_ok(v, spec.kind):
                errors.append(f"{path}.{key}: expected {_kind_name(spec.kind)}, got {type(v).__name__}")
                continue
            if spec.kind == NUM:
                v = float(v)
            if spec.check and (msg := spec.check(v)):
                errors.append(f"{path}.{key}: {msg} (got {v!r})")
                continue
            out[key] = v
        elif spec.default is REQUIRED:
            errors.append(f"{path}.{key}: missing required key")
        elif spec.default is not OPTIONAL:
            out[key] = list(spec.default) if isinstance(spec.default, list) else spec.default
    return out


def _kind_name(kind) -> str:
    if kind == NUM:
        return "number"
    return {int: "integer", str: "string", list: "array", float: "number"}.get(kind, str(kind))


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration. ``sections`` holds resolved values in interface units."""

    sections: dict[str, dict[str, Any]]

    def section(self, name: str) -> dict[str, Any]:
        return self.sections.get(name, {})

    def has(self, name: str) -> bool:
        return name in self.sections

    def electron_params(self) -> ElectronParams:
        return derive_params(self.sections["electron"]["energy_kev"])

    def grid(self) -> GridGeometry:
        g = self.section("grid")
        return GridGeometry(g["nx"], g["ny"], g["pitch_nm"] * 1e-9)

    def hologram_spec(self) -> HologramSpec:
        if "hologram" not in self.sections:
            raise ConfigError("hologram: section required for this command")
        h = self.sections["hologram"]
        params = self.electron_params()
        if "alpha_urad" in h:
            k_rho = params.wavenumber_per_m * h["alpha_urad"] * 1e-6
        else:
            k_rho = h["k_rho_per_um"] * 1e6
        return HologramSpec(
            n=h["n"],
            k_rho_per_m=k_rho,
            grating_pitch_m=h["grating_pitch_nm"] * 1e-9,
            aperture_radius_m=h["aperture_radius_um"] * 1e-6,
            profile=Profile(h["profile"]),
            phase_depth_rad=h.get("phase_depth_rad"),
            grid=self.grid(),
        )

    def source_model(self) -> SourceModel:
        s = self.section("source")
        return SourceModel(s["tilt_sigma_urad"] * 1e-6, s["n_samples"], s["convergence_urad"] * 1e-6)

    def probe_specs(self) -> list[ProbeSpec]:
        out = []
        for p in self.section("transfer").get("probes", []):
            out.append(
                ProbeSpec(
                    kind=ProbeKind(p["kind"]),
                    convergence_rad=p["convergence_mrad"] * 1e-3,
                    ring_fractional_width=p["ring_fractional_width"],
                    cs_m=p["cs_mm"] * 1e-3,
                    defocus_m=p["defocus_nm"] * 1e-9,
                    n=p["n"],
                    label=p["label"],
                )
            )
        return out

    def to_toml(self) -> str:
        """Fully resolved configuration in the input format."""
        return tomli_w.dumps(self.sections)


def parse_config(text: str) -> RunConfig:
    """Parse and validate configuration text.

    Raises
    ------
    ConfigError
        Listing every problem found (unknown keys, wrong types, out-of-range
        values, missing required keys, inconsistent combinations).
    """
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"config is not valid TOML: {exc}") from exc

    errors: list[str] = []
    sections: dict[str, dict] = {}
    for name in raw:
        if name not in SCHEMA:
            errors.append(f"{name}: unknown section")
        elif not isinstance(raw[name], dict):
            errors.append(f"{name}: must be a table")
    if "electron" not in raw:
        errors.append("electron: missing required section")

    for name, schema in SCHEMA.items():
        table = raw.get(name)
        if not isinstance(table, dict):
            if name in ("grid", "source", "output"):
                table = {}
            else:
                continue
        sections[name] = _resolve_table(table, schema, name, errors)

    h = sections.get("hologram")
    if h is not None and isinstance(raw.get("hologram"), dict):
        given = [k for k in ("alpha_urad", "k_rho_per_um") if k in raw["hologram"]]
        if len(given) != 1:
            errors.append("hologram: exactly one of alpha_urad or k_rho_per_um is required")

    tr = sections.get("transfer")
    if tr is not None and "probes" in tr:
        probes = []
        for i, p in enumerate(tr["probes"]):
            if not isinstance(p, dict):
                errors.append(f"transfer.probes[{i}]: must be a table")
                continue
            probes.append(_resolve_table(p, PROBE_SCHEMA, f"transfer.probes[{i}]", errors))
        tr["probes"] = probes

    if errors:
        raise ConfigError(errors)

    cfg = RunConfig(sections)
    # module preconditions, checked before any computation
    problems = []
    for build in (cfg.electron_params, cfg.grid, cfg.source_model, cfg.probe_specs):
        try:
            build()
        except DomainError as exc:
            problems.append(str(exc))
    if "hologram" in sections and not problems:
        try:
            cfg.hologram_spec()
        except DomainError as exc:
            problems.append(f"hologram: {exc}")
    if problems:
        raise ConfigError(problems)
    return cfg


def load_config(path) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ConfigError(f"config {path} is not UTF-8") from exc
    return parse_config(text)
