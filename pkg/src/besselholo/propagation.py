"""Free-space propagation of sampled electron wavefunctions.

Sign convention
---------------
Fields are envelopes with the ``exp(ikz)`` carrier removed. Free propagation uses
the paraxial real-space kernel ``exp(-i k rho^2 / (2 dz))``, i.e. the transfer
function ``exp(+i dz kappa^2 / (2k))`` for transverse angular wavenumber kappa.
With this convention a conical phase ``exp(+i k_rho rho)`` converges towards
the axis, so the first diffraction order of a hologram ``exp(i beta)`` forms
the Bessel beam; a transverse phase ramp ``exp(+i kappa x)`` walks towards -x.
A converging illumination of focal length f is ``exp(+i k rho^2 / (2 f))``.

The far-field transform is the centred forward DFT, so a ramp ``exp(+i kappa x)``
appears at +kappa in the spectrum.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, replace

import numpy as np
import scipy.fft as sfft
from numpy.polynomial.hermite_e import hermegauss
from scipy.ndimage import map_coordinates

from .electron import ElectronParams
from .errors import DomainError, PropagationRangeError, SamplingError
from .grid import GridGeometry
from .hologram import TransmittanceMap

THREADS_ENV = "BESSELHOLO_THREADS"

# guard heuristics: support threshold relative to peak intensity, spectral tail per side
_SUPPORT_REL = 1e-8
_SPECTRAL_TAIL = 5e-3


def fft_workers() -> int:
    """Worker count for FFTs; overridable through ``BESSELHOLO_THREADS``.

    pocketfft splits work over independent 1-D transforms, so results do not
    depend on the worker count.
    """
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def fft2c(a: np.ndarray) -> np.ndarray:
    """Centred unitary 2-D DFT."""
    return sfft.fftshift(sfft.fft2(sfft.ifftshift(a), norm="ortho", workers=fft_workers()))


def ifft2c(a: np.ndarray) -> np.ndarray:
    """Inverse of :func:`fft2c`."""
    return sfft.fftshift(sfft.ifft2(sfft.ifftshift(a), norm="ortho", workers=fft_workers()))


@dataclass(frozen=True)
class Field2D:
    """Sampled complex wavefunction.

    When ``kspace`` is true the grid pitch is an angular-wavenumber step (1/m)
    and ``values`` is the angular spectrum, scaled so that
    ``sum |values|^2 * pitch^2`` equals the real-space power.
    """

    grid: GridGeometry
    values: np.ndarray
    wavelength_m: float
    z_m: float = 0.0
    kspace: bool = False

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise DomainError(f"values shape {self.values.shape} does not match grid {self.grid.shape}")
        if not self.wavelength_m > 0:
            raise DomainError("wavelength must be positive")

    @property
    def k(self) -> float:
        return 2.0 * math.pi / self.wavelength_m

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    @property
    def power(self) -> float:
        return float(np.sum(self.intensity) * self.grid.pitch_m**2)

    def normalized(self) -> "Field2D":
        p = self.power
        if p <= 0:
            raise DomainError("cannot normalize a zero field")
        return replace(self, values=self.values / math.sqrt(p))


@dataclass(frozen=True)
class SourceModel:
    """Illumination: incoherent tilt spread and deterministic convergence.

    ``n_samples`` is the total number of tilt samples and must be a perfect
    square (Gauss-Hermite nodes per axis, squared).
    """

    tilt_sigma_rad: float = 0.0
    n_samples: int = 1
    convergence_rad: float = 0.0

    def __post_init__(self):
        problems = []
        if not (self.tilt_sigma_rad >= 0 and math.isfinite(self.tilt_sigma_rad)):
            problems.append(f"tilt_sigma_rad must be >= 0, got {self.tilt_sigma_rad!r}")
        if not (isinstance(self.n_samples, (int, np.integer)) and self.n_samples >= 1):
            problems.append(f"n_samples must be an integer >= 1, got {self.n_samples!r}")
        elif math.isqrt(int(self.n_samples)) ** 2 != self.n_samples:
            problems.append(f"n_samples must be a perfect square, got {self.n_samples}")
        if not (self.convergence_rad >= 0 and math.isfinite(self.convergence_rad)):
            problems.append(f"convergence_rad must be >= 0, got {self.convergence_rad!r}")
        if problems:
            raise DomainError("; ".join(problems))

    @property
    def nodes_per_axis(self) -> int:
        return math.isqrt(int(self.n_samples))


def illuminate(
    tmap: TransmittanceMap,
    params: ElectronParams,
    source: SourceModel | None = None,
    tilt: tuple[float, float] = (0.0, 0.0),
) -> Field2D:
    """Field just behind the hologram for a tilted, possibly converging plane wave.

    The converging wavefront has semi-angle ``source.convergence_rad`` at the
    aperture edge, i.e. focal length ``R / convergence_rad``.
    """
    source = source or SourceModel()
    grid = tmap.grid
    k = params.wavenumber_per_m
    tx, ty = (float(t) for t in tilt)
    edge_k = k * (math.hypot(tx, ty) + source.convergence_rad)
    if k * max(abs(tx), abs(ty)) >= grid.nyquist_k or k * source.convergence_rad >= grid.nyquist_k:
        raise SamplingError(
            f"illumination carrier {edge_k:.3e} 1/m aliases on a grid with Nyquist {grid.nyquist_k:.3e} 1/m"
        )
    values = tmap.values.copy()
    x, y = grid.coords()
    if tx or ty:
        values *= np.exp(1j * k * (tx * x + ty * y))
    if source.convergence_rad > 0:
        focal = tmap.aperture_radius_m / source.convergence_rad
        values *= np.exp(1j * k * (x * x + y * y) / (2.0 * focal))
    return Field2D(grid, values, params.wavelength_m, 0.0)


def _support_and_bandwidth(field: Field2D):
    """Bounding box of the field and its spectral extent per axis (angular wavenumber)."""
    inten = field.intensity
    peak = inten.max()
    if peak == 0:
        return None
    grid = field.grid
    mask = inten > _SUPPORT_REL * peak
    cols = np.flatnonzero(mask.any(axis=0))
    rows = np.flatnonzero(mask.any(axis=1))
    x, y = grid.x(), grid.y()
    box = (x[cols[0]], x[cols[-1]], y[rows[0]], y[rows[-1]])

    spec = np.abs(fft2c(field.values)) ** 2
    total = spec.sum()

    def bounds(marginal, kaxis):
        c = np.cumsum(marginal) / total
        lo = kaxis[np.searchsorted(c, _SPECTRAL_TAIL)]
        hi = kaxis[min(np.searchsorted(c, 1 - _SPECTRAL_TAIL), len(kaxis) - 1)]
        return lo, hi

    kx_lo, kx_hi = bounds(spec.sum(axis=0), grid.kx())
    ky_lo, ky_hi = bounds(spec.sum(axis=1), grid.ky())
    return box, (kx_lo, kx_hi, ky_lo, ky_hi)


def _max_safe_dz(box, band, k, half_x, half_y) -> float:
    # walk-off is -kappa/k per unit dz in this sign convention
    x0, x1, y0, y1 = box
    kx_lo, kx_hi, ky_lo, ky_hi = band
    limits = []
    for lo_edge, hi_edge, k_lo, k_hi, half in ((x0, x1, kx_lo, kx_hi, half_x), (y0, y1, ky_lo, ky_hi, half_y)):
        # lower edge moves with -k_hi/k, upper edge with -k_lo/k
        if k_hi > 0:
            limits.append((lo_edge + half) * k / k_hi)
        if k_lo < 0:
            limits.append((half - hi_edge) * k / -k_lo)
    return min(limits) if limits else math.inf


def padding_factor(field: Field2D, dz: float) -> int:
    """1 if ``dz`` is safe on the current grid, 2 if a 2x zero-pad is needed.

    Raises
    ------
    PropagationRangeError
        If even the padded grid would wrap.
    """
    info = _support_and_bandwidth(field)
    if info is None or dz == 0:
        return 1
    box, band = info
    g = field.grid
    safe = _max_safe_dz(box, band, field.k, g.extent_x / 2, g.extent_y / 2)
    if dz <= safe:
        return 1
    safe2 = _max_safe_dz(box, band, field.k, g.extent_x, g.extent_y)
    if dz <= safe2:
        return 2
    raise PropagationRangeError(
        f"propagation by {dz:.4g} m wraps the field around the grid even after 2x padding; "
        f"maximum safe distance is {safe2:.4g} m",
        max_safe_dz=safe2,
    )


def pad_field(field: Field2D, factor: int) -> Field2D:
    if factor == 1:
        return field
    g = field.grid.padded(factor)
    out = np.zeros(g.shape, dtype=np.complex128)
    r0 = g.ny // 2 - field.grid.ny // 2
    c0 = g.nx // 2 - field.grid.nx // 2
    out[r0 : r0 + field.grid.ny, c0 : c0 + field.grid.nx] = field.values
    return replace(field, grid=g, values=out)


def fresnel_transfer(grid: GridGeometry, wavelength_m: float, dz: float) -> np.ndarray:
    """Paraxial transfer function on the centred spectral grid."""
    k = 2.0 * math.pi / wavelength_m
    kx = grid.kx()[None, :]
    ky = grid.ky()[:, None]
    return np.exp(1j * dz * (kx * kx + ky * ky) / (2.0 * k))


def propagate_fresnel(field: Field2D, dz: float, *, guard: bool = True) -> Field2D:
    """Propagate by ``dz`` with the unitary spectral Fresnel propagator.

    Parameters
    ----------
    field : Field2D
        Real-space field.
    dz : float
        Distance in metres, ``dz >= 0``.
    guard : bool
        Check that the field does not wrap around the periodic grid. When it
        would, the grid is zero-padded by 2 once; if that is not enough a
        ``PropagationRangeError`` reports the largest safe distance.
    """
    if field.kspace:
        raise DomainError("propagate_fresnel expects a real-space field")
    if not (dz >= 0 and math.isfinite(dz)):
        raise DomainError(f"dz must be finite and >= 0, got {dz!r}")
    if dz == 0:
        return field
    if guard:
        field = pad_field(field, padding_factor(field, dz))
    spectrum = fft2c(field.values)
    spectrum *= fresnel_transfer(field.grid, field.wavelength_m, dz)
    return replace(field, values=ifft2c(spectrum), z_m=field.z_m + dz)


def propagate_farfield(field: Field2D) -> Field2D:
    """Fraunhofer pattern: centred DFT on the angular-wavenumber grid.

    The spectral pitch is ``2 pi / (nx * pitch_m)``; power is conserved.
    """
    if field.kspace:
        raise DomainError("field is already in the far field")
    g = field.grid
    if g.nx != g.ny:
        raise DomainError("far-field transform needs a square grid")
    dk = g.dk_x
    values = fft2c(field.values) * (g.pitch_m / dk)
    return Field2D(GridGeometry(g.nx, g.ny, dk), values, field.wavelength_m, field.z_m, kspace=True)


def inverse_farfield(field: Field2D) -> Field2D:
    """Back from the angular-wavenumber grid to real space."""
    if not field.kspace:
        raise DomainError("field is not a far-field spectrum")
    g = field.grid
    pitch = 2.0 * math.pi / (g.nx * g.pitch_m)
    values = ifft2c(field.values) * (g.pitch_m / pitch)
    return Field2D(GridGeometry(g.nx, g.ny, pitch), values, field.wavelength_m, field.z_m)


def apply_ideal_lens(field: Field2D, angular_magnification: float, *, pitch_m: float | None = None) -> Field2D:
    """Demagnify the field by ``M`` and magnify its angles by ``M``.

    Coordinates shrink by M and amplitudes grow by M, so power is conserved.
    With ``pitch_m`` the result is resampled onto a grid of that pitch (same
    pixel counts), which fails if the magnified spectrum exceeds its Nyquist limit.
    """
    m = float(angular_magnification)
    if not (m > 0 and math.isfinite(m)):
        raise DomainError(f"angular magnification must be positive, got {angular_magnification!r}")
    if field.kspace:
        raise DomainError("apply_ideal_lens expects a real-space field")
    if m == 1 and pitch_m is None:
        return field
    g = field.grid
    scaled = replace(field, grid=g.with_pitch(g.pitch_m / m), values=field.values * m)
    if pitch_m is None or pitch_m == scaled.grid.pitch_m:
        return scaled

    info = _support_and_bandwidth(scaled)
    if info is not None:
        _, (kx_lo, kx_hi, ky_lo, ky_hi) = info
        kmax = max(abs(kx_lo), abs(kx_hi), abs(ky_lo), abs(ky_hi))
        if kmax >= math.pi / pitch_m:
            raise SamplingError(
                f"magnified spectrum reaches {kmax:.3e} 1/m, beyond the Nyquist limit "
                f"{math.pi / pitch_m:.3e} 1/m of the requested pitch"
            )
    target = g.with_pitch(pitch_m)
    # fractional source-pixel index of every target pixel
    scale = pitch_m / scaled.grid.pitch_m
    rows = (np.arange(g.ny) - g.ny // 2) * scale + g.ny // 2
    cols = (np.arange(g.nx) - g.nx // 2) * scale + g.nx // 2
    rr, cc = np.meshgrid(rows, cols, indexing="ij")
    re = map_coordinates(scaled.values.real, [rr, cc], order=3, mode="constant")
    im = map_coordinates(scaled.values.imag, [rr, cc], order=3, mode="constant")
    values = re + 1j * im
    p_in, p_out = scaled.power, float(np.sum(np.abs(values) ** 2) * pitch_m**2)
    if p_out > 0:
        values *= math.sqrt(p_in / p_out)
    return replace(field, grid=target, values=values)


def tilt_nodes(source: SourceModel) -> list[tuple[float, float, float]]:
    """Gauss-Hermite tilt samples ``(tilt_x, tilt_y, weight)`` in row-major order."""
    q = source.nodes_per_axis
    if source.tilt_sigma_rad == 0 or q == 1:
        return [(0.0, 0.0, 1.0)]
    nodes, weights = hermegauss(q)
    weights = weights / weights.sum()
    out = []
    for iy in range(q):
        for ix in range(q):
            out.append(
                (
                    source.tilt_sigma_rad * nodes[ix],
                    source.tilt_sigma_rad * nodes[iy],
                    weights[ix] * weights[iy],
                )
            )
    return out


@dataclass(frozen=True)
class IntensityMap:
    grid: GridGeometry
    values: np.ndarray
    z_m: float


def incoherent_average(
    tmap: TransmittanceMap,
    params: ElectronParams,
    source: SourceModel,
    dz: float,
) -> IntensityMap:
    """Average the propagated intensity over mutually incoherent incidence tilts.

    Tilt samples are deterministic Gauss-Hermite nodes of the 2-D Gaussian tilt
    distribution and are summed in a fixed order, so the result is
    reproducible bit for bit.
    """
    nodes = tilt_nodes(source)
    fields = [illuminate(tmap, params, source, (tx, ty)) for tx, ty, _ in nodes]
    pad = max(padding_factor(f, dz) for f in fields) if dz > 0 else 1
    acc = None
    for f, (_, _, w) in zip(fields, nodes):
        out = propagate_fresnel(pad_field(f, pad), dz, guard=False)
        term = w * out.intensity
        acc = term if acc is None else acc + term
    grid = tmap.grid.padded(pad) if pad > 1 else tmap.grid
    return IntensityMap(grid, acc, dz)
