"""Relativistic electron-wave constants.

All values are SI. Physical constants are the exact CODATA 2018 values
(h, c and e are exact by definition of the SI; m0 is the 2018 recommended
value). The rest energy is pinned to 511.0 keV so that tabulated
wavelengths are reproducible to the last printed digit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError

PLANCK_H = 6.62607015e-34  # J s
SPEED_OF_LIGHT = 299792458.0  # m / s
ELEMENTARY_CHARGE = 1.602176634e-19  # C
ELECTRON_MASS = 9.1093837015e-31  # kg
REST_ENERGY_KEV = 511.0

# h*c expressed in eV*m
HC_EV_M = PLANCK_H * SPEED_OF_LIGHT / ELEMENTARY_CHARGE


@dataclass(frozen=True)
class ElectronParams:
    """Electron-wave constants for one accelerating energy."""

    energy_kev: float
    rest_energy_kev: float
    wavelength_m: float
    wavenumber_per_m: float
    interaction_const: float
    """Phase shift per volt per metre of material, rad V^-1 m^-1."""

    def with_wavelength(self, wavelength_m: float) -> "ElectronParams":
        """Return params at the energy that produces ``wavelength_m``."""
        if not (wavelength_m > 0 and math.isfinite(wavelength_m)):
            raise DomainError(f"wavelength must be positive, got {wavelength_m!r}")
        e0 = self.rest_energy_kev * 1e3
        pc = HC_EV_M / wavelength_m
        energy_ev = math.sqrt(pc * pc + e0 * e0) - e0
        return derive_params(energy_ev * 1e-3)


def relativistic_wavelength(energy_kev: float, rest_energy_kev: float = REST_ENERGY_KEV) -> float:
    e = energy_kev * 1e3
    e0 = rest_energy_kev * 1e3
    return HC_EV_M / math.sqrt(e * (e + 2.0 * e0))


def derive_params(energy_kev: float) -> ElectronParams:
    """Derive wavelength, wavenumber and interaction constant from kinetic energy.

    Parameters
    ----------
    energy_kev : float
        Kinetic energy in keV. Must be positive and finite.

    Returns
    -------
    ElectronParams
    """
    try:
        energy_kev = float(energy_kev)
    except (TypeError, ValueError) as exc:
        raise DomainError(f"energy must be a number, got {energy_kev!r}") from exc
    if not (math.isfinite(energy_kev) and energy_kev > 0):
        raise DomainError(f"energy must be positive and finite, got {energy_kev!r} keV")

    wavelength = relativistic_wavelength(energy_kev)
    e = energy_kev * 1e3
    e0 = REST_ENERGY_KEV * 1e3
    # energies in eV, so the charge cancels against the volt
    c_e = (2.0 * math.pi / wavelength) * (e + e0) / (e * (e + 2.0 * e0))
    return ElectronParams(
        energy_kev=energy_kev,
        rest_energy_kev=REST_ENERGY_KEV,
        wavelength_m=wavelength,
        wavenumber_per_m=2.0 * math.pi / wavelength,
        interaction_const=c_e,
    )
