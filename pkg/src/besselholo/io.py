"""File formats: binary field dumps, 16-bit graymaps, phase-hue pixmaps, CSV
curves and FIB pattern files. Every writer is atomic (temporary file, then rename)."""

from __future__ import annotations

import csv
import io
import math
import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from matplotlib.colors import hsv_to_rgb

from .errors import DomainError, FormatError, InfeasibleMaskError
from .grid import GridGeometry
from .hologram import ThicknessMap
from .propagation import Field2D

FIELD_MAGIC = b"EFLD"
FIELD_VERSION = 1
# magic, version u16, nx u32, ny u32, pitch f64, wavelength f64, z f64
_HEADER = struct.Struct("<4sHIIddd")
HEADER_SIZE = _HEADER.size

# mkstemp creates 0600 files; give outputs the usual permissions instead
_UMASK = os.umask(0)
os.umask(_UMASK)


def atomic_write(path, data: bytes) -> Path:
    """Write ``data`` to ``path`` through a temporary file in the same directory."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        os.chmod(tmp, 0o666 & ~_UMASK)
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def field_to_bytes(field: Field2D) -> bytes:
    g = field.grid
    header = _HEADER.pack(FIELD_MAGIC, FIELD_VERSION, g.nx, g.ny, g.pitch_m, field.wavelength_m, field.z_m)
    body = np.ascontiguousarray(field.values, dtype="<c16").tobytes()
    return header + body


def field_from_bytes(data: bytes) -> Field2D:
    if len(data) < HEADER_SIZE:
        raise FormatError(f"field file truncated: {len(data)} bytes, header needs {HEADER_SIZE}")
    magic, version, nx, ny, pitch, wavelength, z = _HEADER.unpack_from(data)
    if magic != FIELD_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {FIELD_MAGIC!r}")
    if version != FIELD_VERSION:
        raise FormatError(f"unsupported field format version {version}")
    expected = HEADER_SIZE + 16 * nx * ny
    if len(data) != expected:
        raise FormatError(f"field file has {len(data)} bytes, expected {expected} for {nx}x{ny}")
    try:
        grid = GridGeometry(nx, ny, pitch)
    except DomainError as exc:
        raise FormatError(f"invalid grid in field header: {exc}") from exc
    values = np.frombuffer(data, dtype="<c16", offset=HEADER_SIZE).reshape(ny, nx).astype(np.complex128)
    try:
        return Field2D(grid, values, wavelength, z)
    except DomainError as exc:
        raise FormatError(f"invalid field header: {exc}") from exc


def export_field(field: Field2D, path) -> Path:
    """Write a real-space field in the EFLD binary format (little-endian).

    Layout: magic ``EFLD``, version u16, nx u32, ny u32, pitch_m f64,
    wavelength_m f64, z_m f64, then ny*nx (re f64, im f64) pairs row-major.
    """
    if field.kspace:
        raise DomainError("only real-space fields can be exported")
    return atomic_write(path, field_to_bytes(field))


def import_field(path) -> Field2D:
    """Read an EFLD file; any inconsistency raises ``FormatError``."""
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read field file {path}: {exc}") from exc
    return field_from_bytes(data)


def _check_finite(a: np.ndarray):
    if not np.all(np.isfinite(a)):
        raise DomainError("image data contains non-finite values")


def intensity16_bytes(image: np.ndarray) -> bytes:
    """Binary 16-bit PGM, linear scaling with the maximum mapped to 65535."""
    img = np.asarray(image)
    if np.iscomplexobj(img):
        img = np.abs(img) ** 2
    img = img.astype(float)
    _check_finite(img)
    if np.any(img < 0):
        raise DomainError("intensity images must be non-negative")
    peak = img.max()
    scaled = np.zeros(img.shape) if peak == 0 else img / peak * 65535.0
    pix = np.rint(scaled).astype(">u2")
    ny, nx = img.shape
    # row 0 of the array is the lowest y; images are written top row first
    return f"P5\n{nx} {ny}\n65535\n".encode("ascii") + pix[::-1].tobytes()


def phase_hue_bytes(field: np.ndarray) -> bytes:
    """Binary PPM with hue = phase / 2 pi and value = amplitude / max amplitude."""
    f = np.asarray(field, dtype=np.complex128)
    _check_finite(f.view(float))
    amp = np.abs(f)
    peak = amp.max()
    hue = np.mod(np.angle(f), 2 * math.pi) / (2 * math.pi)
    val = amp / peak if peak > 0 else np.zeros_like(amp)
    hsv = np.stack([hue, np.ones_like(hue), val], axis=-1)
    rgb = np.rint(hsv_to_rgb(hsv) * 255).astype(np.uint8)
    ny, nx = f.shape
    return f"P6\n{nx} {ny}\n255\n".encode("ascii") + rgb[::-1].tobytes()


def export_image(data: np.ndarray, mode: str, path) -> Path:
    """Write ``data`` as ``intensity16`` (PGM) or ``phase_hue`` (PPM)."""
    if mode == "intensity16":
        return atomic_write(path, intensity16_bytes(data))
    if mode == "phase_hue":
        return atomic_write(path, phase_hue_bytes(data))
    raise DomainError(f"unknown image mode {mode!r}; expected 'intensity16' or 'phase_hue'")


def read_pnm(path) -> np.ndarray:
    """Minimal reader for the binary PGM/PPM files written here (top row first)."""
    data = Path(path).read_bytes()
    parts = data.split(maxsplit=4)
    if len(parts) < 5 or parts[0] not in (b"P5", b"P6"):
        raise FormatError("not a binary PGM/PPM file")
    nx, ny, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    body = parts[4]
    if parts[0] == b"P5":
        dtype = ">u2" if maxval > 255 else "u1"
        return np.frombuffer(body, dtype=dtype).reshape(ny, nx)
    return np.frombuffer(body, dtype="u1").reshape(ny, nx, 3)


def csv_bytes(header: Sequence[str], rows: Iterable[Sequence]) -> bytes:
    """CSV text; numbers are written with ``repr`` so they round-trip exactly."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue().encode("utf-8")


def export_csv(header: Sequence[str], rows: Iterable[Sequence], path) -> Path:
    """Write a CSV whose header names every column with its unit, e.g. ``z_m``."""
    return atomic_write(path, csv_bytes(header, rows))


@dataclass(frozen=True)
class FibPattern:
    """Milling pattern: the pixel list is traversed ``repetitions`` times."""

    repetitions: int
    pixels: list[tuple[int, int, float]]


def fib_pattern(
    tmap: ThicknessMap, dwell_per_nm_us: float, max_dwell_per_pass_us: float | None = None
) -> FibPattern:
    """Dwell times proportional to the depth to be removed at every pixel.

    The total dwell on a pixel is ``dwell_per_nm_us`` times its milling depth in
    nm. When ``max_dwell_per_pass_us`` is given the pattern is split into
    equal passes so that no single dwell exceeds it. Pixels are listed in
    raster order (rows of increasing y, then increasing x); untouched pixels
    are omitted.
    """
    if not (dwell_per_nm_us > 0 and math.isfinite(dwell_per_nm_us)):
        raise DomainError(f"dwell calibration must be > 0, got {dwell_per_nm_us!r}")
    depth_nm = tmap.depth_m * 1e9
    if np.any(depth_nm < 0) or np.any(tmap.values_m < 0):
        raise InfeasibleMaskError("thickness map needs negative milling depth or negative thickness")
    total = depth_nm * dwell_per_nm_us
    peak = float(total.max())
    reps = 1
    if max_dwell_per_pass_us is not None and peak > 0:
        if not max_dwell_per_pass_us > 0:
            raise DomainError("max_dwell_per_pass_us must be > 0")
        reps = max(1, math.ceil(peak / max_dwell_per_pass_us))
    rows, cols = np.nonzero(total > 0)
    per_pass = total[rows, cols] / reps
    return FibPattern(reps, [(int(c), int(r), float(d)) for r, c, d in zip(rows, cols, per_pass)])


def fib_bytes(pattern: FibPattern) -> bytes:
    lines = [f"REPEAT {pattern.repetitions}"]
    lines += [f"{x} {y} {d!r}" for x, y, d in pattern.pixels]
    return ("\n".join(lines) + "\n").encode("ascii")


def export_fib_pattern(
    tmap: ThicknessMap, dwell_per_nm_us: float, path, max_dwell_per_pass_us: float | None = None
) -> Path:
    """Write a FIB pattern file: ``REPEAT <N>`` then one ``x y dwell_us`` line per pixel."""
    return atomic_write(path, fib_bytes(fib_pattern(tmap, dwell_per_nm_us, max_dwell_per_pass_us)))


def read_fib_pattern(path) -> FibPattern:
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("REPEAT "):
        raise FormatError("FIB pattern must start with 'REPEAT <N>'")
    reps = int(lines[0].split()[1])
    pixels = []
    for ln in lines[1:]:
        x, y, d = ln.split()
        pixels.append((int(x), int(y), float(d)))
    return FibPattern(reps, pixels)
