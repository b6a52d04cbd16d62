"""Phase-hologram synthesis: composite phase, mask profiles, thickness and transmittance maps.

The composite hologram phase is

    beta(x, y) = k_rho * rho + n * phi + k_x * x,   k_x = 2 pi / grating_pitch

and the imprinted phase is either a blazed sawtooth ``depth/(2 pi) * Mod(beta, 2 pi)``
or a sinusoid ``phi0 * cos(beta)``. Outside the aperture disk the mask is opaque.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.ndimage import gaussian_filter

from .electron import ElectronParams
from .errors import ConfigError, DomainError, InfeasibleMaskError, SamplingError
from .grid import GridGeometry

SINUSOIDAL_OPTIMUM = 1.8412  # first maximum of J1
DEFAULT_INNER_POTENTIAL_V = 17.0  # silicon nitride; an assumption, not a measured value
DEFAULT_BASE_THICKNESS_M = 200e-9


class Profile(str, enum.Enum):
    BLAZED = "blazed"
    SINUSOIDAL = "sinusoidal"


@dataclass(frozen=True)
class HologramSpec:
    """Parameters of one phase mask.

    ``phase_depth_rad`` is the full modulation depth for a blazed profile and the
    cosine amplitude phi0 for a sinusoidal one. ``None`` picks the
    efficiency-optimal default (2 pi, resp. 1.8412). Use ``math.inf`` for
    ``grating_pitch_m`` to get an on-axis hologram without carrier.
    """

    n: int
    k_rho_per_m: float
    grating_pitch_m: float
    aperture_radius_m: float
    profile: Profile = Profile.BLAZED
    phase_depth_rad: float | None = None
    grid: GridGeometry = field(default_factory=lambda: GridGeometry(2048, 2048, 25e-9))

    def __post_init__(self):
        object.__setattr__(self, "profile", Profile(self.profile))
        if self.phase_depth_rad is None:
            default = 2 * math.pi if self.profile is Profile.BLAZED else SINUSOIDAL_OPTIMUM
            object.__setattr__(self, "phase_depth_rad", default)
        problems = []
        if int(self.n) != self.n:
            problems.append(f"n must be an integer, got {self.n!r}")
        if not (self.k_rho_per_m >= 0 and math.isfinite(self.k_rho_per_m)):
            problems.append(f"k_rho_per_m must be >= 0, got {self.k_rho_per_m!r}")
        if not self.grating_pitch_m > 0:
            problems.append(f"grating_pitch_m must be > 0, got {self.grating_pitch_m!r}")
        if not (self.aperture_radius_m > 0 and math.isfinite(self.aperture_radius_m)):
            problems.append(f"aperture_radius_m must be > 0, got {self.aperture_radius_m!r}")
        if not math.isfinite(self.phase_depth_rad):
            problems.append("phase_depth_rad must be finite")
        if problems:
            raise DomainError("; ".join(problems))

        g = self.grid
        if g.pitch_m > self.grating_pitch_m / 4:
            raise SamplingError(
                f"pixel pitch {g.pitch_m:.3e} m exceeds a quarter of the grating pitch "
                f"{self.grating_pitch_m:.3e} m (need >= 4 samples per period)"
            )
        half = 0.5 * min(g.extent_x, g.extent_y)
        if 1.25 * self.aperture_radius_m > half:
            raise SamplingError(
                f"aperture radius {self.aperture_radius_m:.3e} m plus R/4 guard does not fit "
                f"in a grid of half-width {half:.3e} m"
            )

    @property
    def k_x_per_m(self) -> float:
        return 2.0 * math.pi / self.grating_pitch_m

    def with_phase_depth(self, depth: float) -> "HologramSpec":
        return replace(self, phase_depth_rad=float(depth))

    def aperture_mask(self) -> np.ndarray:
        return self.grid.radius() <= self.aperture_radius_m


def phase_beta(spec: HologramSpec, x, y):
    """Composite hologram phase, not reduced modulo 2 pi.

    The azimuth at the exact origin is taken as 0.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    rho = np.hypot(x, y)
    azimuth = np.arctan2(y, x)  # arctan2(0, 0) == 0
    return spec.k_rho_per_m * rho + spec.n * azimuth + spec.k_x_per_m * x


def phase_profile(spec: HologramSpec, x, y):
    """Imprinted phase shift for the mask profile of ``spec``."""
    beta = phase_beta(spec, x, y)
    if spec.profile is Profile.BLAZED:
        return (spec.phase_depth_rad / (2 * math.pi)) * np.mod(beta, 2 * math.pi)
    return spec.phase_depth_rad * np.cos(beta)


def phase_depth_for_thickness(profile: Profile, t0_m: float, params: ElectronParams, v0: float) -> float:
    """Phase modulation parameter produced by a peak-to-valley thickness ``t0_m``.

    A sinusoid of peak-to-valley t0 has amplitude t0/2, so phi0 = C_E V0 t0 / 2;
    a sawtooth of peak-to-valley t0 has full depth C_E V0 t0.
    """
    full = params.interaction_const * v0 * t0_m
    return full / 2.0 if Profile(profile) is Profile.SINUSOIDAL else full


@dataclass(frozen=True)
class ThicknessMap:
    """Membrane thickness after milling.

    ``phase_offset_rad`` is the constant removed so that no pixel is thicker than
    the membrane; it is a global phase and has no observable effect.
    """

    grid: GridGeometry
    base_thickness_m: float
    values_m: np.ndarray
    inner_potential_v: float
    interaction_const: float
    phase_offset_rad: float
    aperture_radius_m: float

    @property
    def depth_m(self) -> np.ndarray:
        """Material removed at every pixel."""
        return self.base_thickness_m - self.values_m

    def phase(self) -> np.ndarray:
        """Imprinted phase recovered from thickness (inverse of ``thickness_from_phase``)."""
        cv = self.interaction_const * self.inner_potential_v
        return cv * (self.values_m - self.base_thickness_m) + self.phase_offset_rad


def thickness_from_phase(
    spec: HologramSpec,
    params: ElectronParams,
    v0: float = DEFAULT_INNER_POTENTIAL_V,
    base_thickness_m: float = DEFAULT_BASE_THICKNESS_M,
) -> ThicknessMap:
    """Convert the mask phase into a milled thickness profile.

    Inside the aperture ``t = base + (dphi - max dphi) / (C_E V0)``; outside, the
    membrane is left at ``base``.

    Raises
    ------
    InfeasibleMaskError
        If the required peak-to-valley exceeds the membrane thickness.
    """
    if not (v0 > 0 and math.isfinite(v0)):
        raise DomainError(f"inner potential must be positive, got {v0!r}")
    if not base_thickness_m > 0:
        raise DomainError(f"base thickness must be positive, got {base_thickness_m!r}")
    x, y = spec.grid.coords()
    dphi = phase_profile(spec, x, y)
    inside = spec.aperture_mask()
    offset = float(dphi[inside].max())
    cv = params.interaction_const * v0
    t = np.full(spec.grid.shape, float(base_thickness_m))
    t[inside] = base_thickness_m + (dphi[inside] - offset) / cv
    ptv = base_thickness_m - float(t[inside].min())
    if t.min() < 0:
        raise InfeasibleMaskError(
            f"mask needs {ptv * 1e9:.1f} nm peak-to-valley but the membrane is only "
            f"{base_thickness_m * 1e9:.1f} nm thick"
        )
    return ThicknessMap(
        grid=spec.grid,
        base_thickness_m=float(base_thickness_m),
        values_m=t,
        inner_potential_v=float(v0),
        interaction_const=params.interaction_const,
        phase_offset_rad=offset,
        aperture_radius_m=spec.aperture_radius_m,
    )


@dataclass(frozen=True)
class TransmittanceMap:
    """Complex transmittance ``values`` of a phase hologram.

    ``phase_rad`` keeps the imprinted phase on the full grid (also outside the
    aperture, where it is masked away) so perturbations can act on it.
    """

    grid: GridGeometry
    values: np.ndarray
    amplitude: float
    aperture_radius_m: float
    phase_rad: np.ndarray

    def aperture_mask(self) -> np.ndarray:
        return self.grid.radius() <= self.aperture_radius_m

    @property
    def power(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2) * self.grid.pitch_m**2)


def _assemble(grid, phase, amplitude, radius) -> TransmittanceMap:
    if not (0.0 <= amplitude <= 1.0):
        raise DomainError(f"amplitude must lie in [0, 1], got {amplitude!r}")
    inside = grid.radius() <= radius
    values = np.zeros(grid.shape, dtype=np.complex128)
    values[inside] = amplitude * np.exp(1j * phase[inside])
    return TransmittanceMap(grid, values, float(amplitude), float(radius), phase)


def build_transmittance(spec: HologramSpec, amplitude_a0: float = 1.0) -> TransmittanceMap:
    """Transmittance ``A0 exp(i dphi)`` inside the aperture, zero outside."""
    x, y = spec.grid.coords()
    phase = np.broadcast_to(phase_profile(spec, x, y), spec.grid.shape).copy()
    return _assemble(spec.grid, phase, amplitude_a0, spec.aperture_radius_m)


def transmittance_from_thickness(tmap: ThicknessMap, amplitude_a0: float = 1.0) -> TransmittanceMap:
    """Transmittance of a milled membrane, using ``dphi = C_E V0 t``."""
    phase = tmap.interaction_const * tmap.inner_potential_v * tmap.values_m
    return _assemble(tmap.grid, phase, amplitude_a0, tmap.aperture_radius_m)


PERTURBATION_KINDS = ("phase_ripple", "fringe_jitter")


def perturb_hologram(
    tmap: TransmittanceMap,
    kind: str,
    magnitude: float,
    *,
    correlation_m: float | None = None,
    seed: int = 0,
) -> TransmittanceMap:
    """Inject a controlled fabrication imperfection.

    Parameters
    ----------
    kind : {"phase_ripple", "fringe_jitter"}
        ``phase_ripple`` adds a smooth Gaussian-correlated random phase whose RMS
        over the aperture equals ``magnitude`` (rad). ``fringe_jitter`` displaces
        each raster row of the pattern along x by a random whole number of pixels
        with RMS ``magnitude`` (m), mimicking line-placement errors.
    correlation_m : float, optional
        Correlation length of the ripple; defaults to a quarter of the aperture radius.
    seed : int
        Seed of the random generator; equal seeds give identical masks.
    """
    if kind not in PERTURBATION_KINDS:
        raise ConfigError(f"unknown perturbation kind {kind!r}; expected one of {PERTURBATION_KINDS}")
    if not (magnitude >= 0 and math.isfinite(magnitude)):
        raise DomainError(f"perturbation magnitude must be >= 0, got {magnitude!r}")
    if magnitude == 0:
        return tmap

    rng = np.random.default_rng(seed)
    grid = tmap.grid
    inside = tmap.aperture_mask()
    if kind == "phase_ripple":
        corr = correlation_m if correlation_m is not None else tmap.aperture_radius_m / 4
        ripple = gaussian_filter(rng.standard_normal(grid.shape), corr / grid.pitch_m, mode="wrap")
        ripple -= ripple[inside].mean()
        ripple *= magnitude / np.sqrt(np.mean(ripple[inside] ** 2))
        phase = tmap.phase_rad + ripple
    else:
        shifts = np.rint(rng.normal(0.0, magnitude / grid.pitch_m, size=grid.ny)).astype(int)
        phase = np.empty_like(tmap.phase_rad)
        for row, s in enumerate(shifts):
            phase[row] = np.roll(tmap.phase_rad[row], s)
    return _assemble(grid, phase, tmap.amplitude, tmap.aperture_radius_m)
