"""ADF-STEM transfer functions of Bessel and aperture-limited probes.

The incoherent ADF transfer function of a probe is the Fourier transform of
its intensity, equivalently the autocorrelation of its far-field amplitude
A(k). Spatial frequencies here follow the microscopy convention: k = theta /
lambda in cycles per metre (1 / Angstrom = 1e10 / m).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.signal import correlate

from .electron import ElectronParams
from .errors import DomainError, NumericalError, SamplingError
from .grid import GridGeometry
from .propagation import Field2D, fft2c, inverse_farfield, propagate_farfield

# the two transfer-function paths must agree this closely
PATH_TOLERANCE = 1e-9


class ProbeKind(str, enum.Enum):
    BESSEL_RING = "bessel_ring"
    APERTURE_LIMITED = "aperture_limited"


@dataclass(frozen=True)
class ProbeSpec:
    """Far-field description of a STEM probe.

    A ``BESSEL_RING`` probe fills an annulus of centre angle
    ``convergence_rad`` and full width ``ring_fractional_width`` times that
    angle, carrying the azimuthal phase ``exp(i n phi)``. An
    ``APERTURE_LIMITED`` probe fills a disk of semi-angle ``convergence_rad``
    and carries the aberration phase of ``defocus_m`` and ``cs_m``.
    """

    kind: ProbeKind
    convergence_rad: float
    ring_fractional_width: float = 0.06
    cs_m: float = 0.0
    defocus_m: float = 0.0
    n: int = 0
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "kind", ProbeKind(self.kind))
        problems = []
        if not (self.convergence_rad > 0 and math.isfinite(self.convergence_rad)):
            problems.append(f"convergence_rad must be > 0, got {self.convergence_rad!r}")
        if self.kind is ProbeKind.BESSEL_RING:
            if not 0 < self.ring_fractional_width < 1:
                problems.append(f"ring_fractional_width must lie in (0, 1), got {self.ring_fractional_width!r}")
            if self.cs_m or self.defocus_m:
                problems.append("aberrations apply to aperture-limited probes only")
        elif self.n:
            problems.append("topological charge applies to Bessel-ring probes only")
        if int(self.n) != self.n:
            problems.append(f"n must be an integer, got {self.n!r}")
        if not (math.isfinite(self.cs_m) and math.isfinite(self.defocus_m)):
            problems.append("aberration coefficients must be finite")
        if problems:
            raise DomainError("; ".join(problems))

    @property
    def max_angle_rad(self) -> float:
        if self.kind is ProbeKind.BESSEL_RING:
            return self.convergence_rad * (1 + self.ring_fractional_width / 2)
        return self.convergence_rad

    @property
    def name(self) -> str:
        if self.label:
            return self.label
        if self.kind is ProbeKind.BESSEL_RING:
            return f"bessel_n{self.n}"
        return "aperture_aberrated" if (self.cs_m or self.defocus_m) else "aperture"


def aberration_phase(k_cycles, wavelength_m: float, defocus_m: float, cs_m: float):
    """``chi(k) = pi lambda df k^2 + (pi / 2) Cs lambda^3 k^4`` with k in cycles per metre."""
    k2 = np.asarray(k_cycles) ** 2
    return math.pi * wavelength_m * defocus_m * k2 + 0.5 * math.pi * cs_m * wavelength_m**3 * k2 * k2


def probe_aperture(spec: ProbeSpec, params: ElectronParams, grid: GridGeometry) -> Field2D:
    """Unit-power far-field amplitude A(k) on the angular-wavenumber grid of ``grid``."""
    if grid.nx != grid.ny:
        raise DomainError("probe grids must be square")
    k = params.wavenumber_per_m
    kmax = k * spec.max_angle_rad
    # |probe|^2 has twice the bandwidth of A; keep it below Nyquist so both
    # transfer-function paths see the same, unaliased spectrum
    if 2 * kmax >= grid.nyquist_k:
        raise SamplingError(
            f"probe bandwidth {kmax:.3e} 1/m needs pixels finer than {math.pi / (2 * kmax):.3e} m"
        )
    kgrid = GridGeometry(grid.nx, grid.ny, grid.dk_x)
    kx, ky = kgrid.coords()
    kr = np.hypot(kx, ky)
    if spec.kind is ProbeKind.BESSEL_RING:
        center = k * spec.convergence_rad
        half = 0.5 * spec.ring_fractional_width * center
        support = np.abs(kr - center) <= half
        amp = support * np.exp(1j * spec.n * np.arctan2(ky, kx))
    else:
        support = kr <= k * spec.convergence_rad
        chi = aberration_phase(kr / (2 * math.pi), params.wavelength_m, spec.defocus_m, spec.cs_m)
        amp = support * np.exp(-1j * chi)
    if not support.any():
        raise SamplingError("probe aperture is narrower than one spectral pixel")
    amp = amp.astype(np.complex128)
    amp /= math.sqrt(float(np.sum(np.abs(amp) ** 2)) * kgrid.pitch_m**2)
    return Field2D(kgrid, amp, params.wavelength_m, 0.0, kspace=True)


def build_probe(spec: ProbeSpec, params: ElectronParams, grid: GridGeometry) -> Field2D:
    """Real-space probe with unit power, centred on the grid origin."""
    return inverse_farfield(probe_aperture(spec, params, grid))


@dataclass(frozen=True)
class TransferCurve:
    """Radially averaged ADF transfer function.

    ``k_per_m`` are bin centres in cycles per metre; bins are one spectral
    pixel wide. ``scale`` records any normalisation applied afterwards.
    """

    k_per_m: np.ndarray
    h: np.ndarray
    normalization_k: float
    name: str = ""
    scale: float = 1.0

    def at(self, k_per_m: float) -> float:
        return float(np.interp(k_per_m, self.k_per_m, self.h))


def _radial_average(image: np.ndarray, dk: float):
    n = image.shape[0]
    idx = np.arange(n) - n // 2
    r = np.rint(np.hypot(idx[None, :], idx[:, None])).astype(np.int64)
    nbins = n // 2  # stay inside the inscribed circle
    keep = r < nbins
    sums = np.bincount(r[keep], weights=image[keep], minlength=nbins)
    counts = np.bincount(r[keep], minlength=nbins)
    return np.arange(nbins) * dk, sums / np.maximum(counts, 1)


def transfer_2d(probe: Field2D) -> np.ndarray:
    """|FT(|probe|^2)| on the centred frequency grid, scaled so H(0) is the probe power."""
    g = probe.grid
    return np.abs(fft2c(probe.intensity) * math.sqrt(g.nx * g.ny) * g.pitch_m**2)


def transfer_2d_autocorrelation(probe: Field2D) -> np.ndarray:
    """|autocorrelation of A(k)| on the same grid as :func:`transfer_2d`."""
    far = propagate_farfield(probe)
    a = far.values
    full = correlate(a, a, mode="full", method="fft")
    n = a.shape[0]
    # lag 0 sits at index n - 1 of the full correlation; the centred grid puts it at n // 2
    lo = n - 1 - n // 2
    return np.abs(full[lo : lo + n, lo : lo + n]) * far.grid.pitch_m**2


def adf_transfer(probe: Field2D, check_paths: bool = True) -> TransferCurve:
    """ADF transfer function of a probe.

    Computed as the transform of the probe intensity and, when
    ``check_paths`` is set, also as the autocorrelation of its far-field
    amplitude; the two must agree to ``PATH_TOLERANCE`` of H(0).
    """
    if probe.kspace:
        raise DomainError("adf_transfer expects a real-space probe")
    power = probe.power
    if not power > 0:
        raise DomainError("probe carries no power")
    h2 = transfer_2d(probe)
    if check_paths:
        h_alt = transfer_2d_autocorrelation(probe)
        diff = float(np.max(np.abs(h2 - h_alt)))
        if diff > PATH_TOLERANCE * h2.max():
            raise NumericalError(f"transfer paths disagree by {diff / h2.max():.2e} of H(0)")
    dk_cycles = 1.0 / (probe.grid.nx * probe.grid.pitch_m)
    k, h = _radial_average(h2, dk_cycles)
    return TransferCurve(k, h, float(k[1]))


def radial_asymmetry(h2: np.ndarray) -> float:
    """RMS deviation of a 2-D transfer function from its own radial average, over its peak."""
    n = h2.shape[0]
    idx = np.arange(n) - n // 2
    r = np.rint(np.hypot(idx[None, :], idx[:, None])).astype(np.int64)
    keep = r < n // 2
    sums = np.bincount(r[keep], weights=h2[keep])
    counts = np.bincount(r[keep])
    mean = sums / np.maximum(counts, 1)
    dev = h2[keep] - mean[r[keep]]
    return float(np.sqrt(np.mean(dev**2)) / h2.max())


@dataclass(frozen=True)
class ProbeComparison:
    curves: list[TransferCurve]
    crossovers: dict[tuple[int, int], list[float]]


def crossovers(a: TransferCurve, b: TransferCurve, k_max: float | None = None) -> list[float]:
    """Frequencies where ``a - b`` changes sign, linearly interpolated.

    The zero and first bins are skipped: that is where compared curves are
    forced to agree.
    """
    d = a.h - b.h
    k = a.k_per_m
    out = []
    for i in range(2, len(d) - 1):
        if k_max is not None and k[i + 1] > k_max:
            break
        if d[i] == 0 and d[i - 1] * d[i + 1] < 0:
            out.append(float(k[i]))
        elif d[i] * d[i + 1] < 0:
            out.append(float(k[i] + (k[i + 1] - k[i]) * d[i] / (d[i] - d[i + 1])))
    return out


def compare_probes(
    specs: Sequence[ProbeSpec], params: ElectronParams, grid: GridGeometry, check_paths: bool = True
) -> ProbeComparison:
    """Transfer curves of several probes, scaled to agree at the first nonzero frequency bin.

    Crossovers are listed for every pair ``(i, j)`` with ``i < j``, restricted
    to frequencies where both curves are above 1e-6 of their zero-frequency value.
    """
    if len(specs) < 2:
        raise DomainError("compare_probes needs at least two probe specs")
    curves = []
    for s in specs:
        c = adf_transfer(build_probe(s, params, grid), check_paths=check_paths)
        curves.append(c)
    ref = curves[0].h[1]
    scaled = []
    for s, c in zip(specs, curves):
        f = ref / c.h[1]
        scaled.append(TransferCurve(c.k_per_m, c.h * f, c.normalization_k, s.name, f))
    cross = {}
    for i in range(len(scaled)):
        for j in range(i + 1, len(scaled)):
            a, b = scaled[i], scaled[j]
            alive = (a.h > 1e-6 * a.h[0]) & (b.h > 1e-6 * b.h[0])
            k_lim = float(a.k_per_m[alive][-1]) if alive.any() else 0.0
            cross[(i, j)] = crossovers(a, b, k_lim)
    return ProbeComparison(scaled, cross)
