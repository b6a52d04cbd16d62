"""Simulation toolkit for electron Bessel beams produced by phase holograms."""

from .electron import ElectronParams, derive_params, relativistic_wavelength
from .errors import (
    AnalysisError,
    BesselHoloError,
    ConfigError,
    DomainError,
    FormatError,
    InfeasibleMaskError,
    NumericalError,
    OracleError,
    PropagationRangeError,
    SamplingError,
    UsageError,
    ValidityRangeError,
)
from .grid import GridGeometry
from .hologram import (
    HologramSpec,
    Profile,
    ThicknessMap,
    TransmittanceMap,
    build_transmittance,
    perturb_hologram,
    phase_beta,
    phase_profile,
    thickness_from_phase,
    transmittance_from_thickness,
)
from .propagation import (
    Field2D,
    SourceModel,
    apply_ideal_lens,
    illuminate,
    incoherent_average,
    propagate_farfield,
    propagate_fresnel,
)

__version__ = "0.1.0"
