"""Beam-shape metrics and propagation curves: radial profiles, FWHM, far-field
ring geometry, on-axis intensity versus z and per-order focal scans."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .electron import ElectronParams
from .errors import AnalysisError, DomainError
from .grid import GridGeometry
from .hologram import HologramSpec, build_transmittance
from .orders import isolate_order, orders_overlap
from .propagation import Field2D, SourceModel, illuminate, propagate_fresnel

# background clip for second-moment sizes, relative to the peak intensity
SIZE_CLIP = 0.01


def radial_profile(image: np.ndarray, grid: GridGeometry, center: tuple[float, float] = (0.0, 0.0)):
    """Azimuthal average in annular bins one pixel wide.

    ``center`` is ``(x, y)`` in grid coordinates. Returns ``(r, profile)``
    where ``r`` are the bin centres.
    """
    x, y = grid.coords()
    r = np.hypot(x - center[0], y - center[1]) / grid.pitch_m
    idx = np.rint(r).astype(np.int64).ravel()
    sums = np.bincount(idx, weights=np.asarray(image, dtype=float).ravel())
    counts = np.bincount(idx)
    with np.errstate(invalid="ignore", divide="ignore"):
        prof = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    return np.arange(prof.size) * grid.pitch_m, prof


def _crossing(r, prof, level, start, step):
    """Linear-interpolated position where ``prof`` first drops below ``level`` walking from ``start``."""
    i = start
    while 0 <= i + step < len(prof):
        j = i + step
        if prof[j] < level:
            t = (prof[i] - level) / (prof[i] - prof[j])
            return r[i] + t * (r[j] - r[i])
        i = j
    return None


def central_lobe_fwhm(image: np.ndarray, grid: GridGeometry, center=(0.0, 0.0)) -> float:
    """Full width at half maximum of the central lobe of an azimuthally averaged profile."""
    r, prof = radial_profile(image, grid, center)
    peak = prof[0]
    if not peak > 0:
        raise AnalysisError("no central lobe: on-axis intensity vanishes")
    half = _crossing(r, prof, 0.5 * peak, 0, 1)
    if half is None:
        raise AnalysisError("central lobe does not fall to half maximum on the grid")
    return 2.0 * half


@dataclass(frozen=True)
class RingMetrics:
    """Radius and radial FWHM of an annulus, in the units of the grid (1/m for k-space)."""

    radius: float
    fwhm: float


def ring_metrics(image: np.ndarray, grid: GridGeometry, center=(0.0, 0.0), r_window=None) -> RingMetrics:
    """Locate the brightest ring of an azimuthally averaged profile.

    The peak radius is refined with a parabola through the three highest
    bins; the width is the distance between the interpolated half-maximum
    crossings on either side.
    """
    r, prof = radial_profile(image, grid, center)
    valid = np.isfinite(prof)
    if r_window is not None:
        valid &= (r >= r_window[0]) & (r <= r_window[1])
    p = np.where(valid, prof, -np.inf)
    i = int(np.argmax(p))
    if i == 0 or i == len(prof) - 1 or not np.isfinite(p[i - 1]) or not np.isfinite(p[i + 1]):
        raise AnalysisError("ring peak at the edge of the search window")
    y0, y1, y2 = prof[i - 1], prof[i], prof[i + 1]
    denom = y0 - 2 * y1 + y2
    shift = 0.5 * (y0 - y2) / denom if denom != 0 else 0.0
    dr = r[1] - r[0]
    radius = r[i] + shift * dr
    level = 0.5 * y1
    lo = _crossing(r, prof, level, i, -1)
    hi = _crossing(r, prof, level, i, 1)
    if lo is None or hi is None:
        raise AnalysisError("ring does not fall to half maximum on both sides")
    return RingMetrics(float(radius), float(hi - lo))


def rms_radius(image: np.ndarray, grid: GridGeometry, clip: float = SIZE_CLIP) -> float:
    """Second-moment radius about the intensity centroid, clipped at ``clip * peak``."""
    img = np.asarray(image, dtype=float)
    peak = img.max()
    if not peak > 0:
        raise AnalysisError("cannot size an empty intensity map")
    w = np.where(img >= clip * peak, img, 0.0)
    x, y = grid.coords()
    tot = w.sum()
    cx = float((w * x).sum() / tot)
    cy = float((w * y).sum() / tot)
    return math.sqrt(float((w * ((x - cx) ** 2 + (y - cy) ** 2)).sum() / tot))


def center_intensity(image: np.ndarray, grid: GridGeometry) -> float:
    """Maximum over the 3x3 pixel neighbourhood of the optical axis."""
    r, c = grid.center
    return float(np.max(image[r - 1 : r + 2, c - 1 : c + 2]))


@dataclass(frozen=True)
class OnAxisCurve:
    z_m: np.ndarray
    intensity: np.ndarray

    def peak(self) -> tuple[float, float]:
        """``(z, I)`` at the maximum, refined with a parabola through the neighbours."""
        i = int(np.argmax(self.intensity))
        z, y = self.z_m, self.intensity
        if 0 < i < len(z) - 1:
            # parabola through three (possibly unequally spaced) samples
            coeff = np.polyfit(z[i - 1 : i + 2], y[i - 1 : i + 2], 2)
            if coeff[0] < 0:
                zp = -coeff[1] / (2 * coeff[0])
                if z[i - 1] <= zp <= z[i + 1]:
                    return float(zp), float(np.polyval(coeff, zp))
        return float(z[i]), float(y[i])


def _order_field(spec, params, m, source=None):
    tmap = build_transmittance(spec)
    field = illuminate(tmap, params, source)
    return isolate_order(field, spec, m, demodulate=True)


def onaxis_curve(
    spec: HologramSpec,
    params: ElectronParams,
    z_samples: Sequence[float],
    source: SourceModel | None = None,
) -> OnAxisCurve:
    """Intensity at the centre of the m = 1 order as a function of z.

    The illuminated hologram is windowed down to its first order (carrier
    removed) and propagated in 2-D to every z.
    """
    if spec.n != 0:
        raise DomainError("on-axis intensity is only meaningful for n = 0")
    z = np.asarray(z_samples, dtype=float)
    if z.ndim != 1 or z.size == 0 or np.any(z <= 0):
        raise DomainError("z samples must be a non-empty list of positive distances")
    extra = 0.0
    if source is not None:
        extra = params.wavenumber_per_m * source.convergence_rad
    if orders_overlap(spec, extra):
        raise AnalysisError("first order overlaps its neighbours; cannot isolate it")
    order = _order_field(spec, params, 1, source)
    vals = []
    for zz in z:
        out = propagate_fresnel(order, float(zz))
        vals.append(center_intensity(out.intensity, out.grid))
    return OnAxisCurve(z, np.array(vals))


@dataclass(frozen=True)
class FocalScan:
    """RMS radius of each order versus z and the z of its minimum."""

    z_m: np.ndarray
    orders: tuple[int, ...]
    rms_radius_m: dict[int, np.ndarray]
    focus_z_m: dict[int, float]


def _refined_min(z, y) -> float:
    i = int(np.argmin(y))
    if 0 < i < len(z) - 1:
        coeff = np.polyfit(z[i - 1 : i + 2], y[i - 1 : i + 2], 2)
        if coeff[0] > 0:
            zp = -coeff[1] / (2 * coeff[0])
            if z[i - 1] <= zp <= z[i + 1]:
                return float(zp)
    return float(z[i])


def focal_scan(
    spec: HologramSpec,
    params: ElectronParams,
    source: SourceModel,
    z_samples: Sequence[float],
    orders: Sequence[int] = (-2, -1, 0, 1, 2),
) -> FocalScan:
    """Track the size of each diffraction order through focus.

    Each order is isolated (and demodulated) behind the hologram under
    converging illumination, propagated to every z, and sized by its clipped
    second-moment radius. The focal z of an order is the refined size minimum.
    """
    if not source.convergence_rad > 0:
        raise DomainError("focal scan needs converging illumination (convergence_rad > 0)")
    z = np.asarray(z_samples, dtype=float)
    if z.ndim != 1 or z.size < 3 or np.any(z <= 0):
        raise DomainError("need at least three positive z samples")
    extra = params.wavenumber_per_m * source.convergence_rad
    if orders_overlap(spec, extra, max(abs(int(m)) for m in orders)):
        raise AnalysisError("orders overlap under this illumination; cannot isolate them")
    field = illuminate(build_transmittance(spec), params, source)
    sizes: dict[int, np.ndarray] = {}
    foci: dict[int, float] = {}
    for m in orders:
        o = isolate_order(field, spec, int(m), demodulate=True)
        s = []
        for zz in z:
            out = propagate_fresnel(o, float(zz))
            s.append(rms_radius(out.intensity, out.grid))
        sizes[int(m)] = np.array(s)
        foci[int(m)] = _refined_min(z, sizes[int(m)])
    return FocalScan(z, tuple(int(m) for m in orders), sizes, foci)
