"""Near-field references for a single diffraction order.

The m-th order of a hologram with aperture radius R carries the aperture
function ``exp(i m (k_rho rho + n phi))`` (carrier removed). Its Fresnel
field at distance z, in the sign convention of :mod:`besselholo.propagation`, is

    psi(rho, phi, z) = 2 pi i^(mn+1) / (lambda z) * exp(-i k rho^2 / 2z) * exp(i mn phi)
                       * int_0^R r exp(i (m k_rho r - k r^2 / 2z)) J_mn(k rho r / z) dr

after the azimuthal integral is done with the Jacobi-Anger identity.
:func:`quadrature_oracle` evaluates the radial integral numerically and
:func:`spa_reference` gives its stationary-phase approximation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import fresnel, jn_zeros, jv

from .electron import ElectronParams
from .errors import DomainError, OracleError, ValidityRangeError
from .hologram import HologramSpec

# rho must stay well below z for the paraxial kernel; "much less" is taken as a factor 10
PARAXIAL_RATIO = 0.1

_GL_LOW = np.polynomial.legendre.leggauss(16)
_GL_HIGH = np.polynomial.legendre.leggauss(32)


@dataclass(frozen=True)
class ValidityRange:
    """Propagation range over which order m keeps its Bessel character."""

    z_max_m: float
    aperture_radius_m: float
    m: int
    k_rho_per_m: float
    wavenumber_per_m: float

    def rho_max_m(self, z_m):
        """Largest radius reached by stationary points at distance ``z_m``."""
        return self.aperture_radius_m - self.m * self.k_rho_per_m * np.asarray(z_m) / self.wavenumber_per_m


def validity_range(spec: HologramSpec, params: ElectronParams, m: int) -> ValidityRange:
    """``z_max = k R / (m k_rho)`` and ``rho_max(z) = R - m k_rho z / k``."""
    if m == 0 or spec.k_rho_per_m == 0:
        raise ValidityRangeError("validity range undefined for m = 0 or k_rho = 0", bound="undefined")
    if m < 0:
        raise ValidityRangeError(
            f"order m = {m} diverges from the axis and never forms a Bessel region", bound="z_max"
        )
    k = params.wavenumber_per_m
    z_max = k * spec.aperture_radius_m / (m * spec.k_rho_per_m)
    return ValidityRange(z_max, spec.aperture_radius_m, int(m), spec.k_rho_per_m, k)


def _prefactor(params: ElectronParams, m: int, n: int, z: float) -> complex:
    return 2.0 * math.pi * (1j ** ((m * n + 1) % 4)) / (params.wavelength_m * z)


def spa_reference(
    spec: HologramSpec,
    params: ElectronParams,
    m: int,
    z: float,
    rho: float,
    phi: float = 0.0,
    *,
    strict: bool = True,
) -> complex:
    """Stationary-phase estimate of the order-m near field at ``(rho, phi, z)``.

    The stationary point of the radial integrand sits at ``r_c = m k_rho z / k``;
    the Bessel factor is evaluated there and the remaining Gaussian integral is
    taken over the aperture with Fresnel integrals, which fixes the
    normalisation. The result is proportional to ``J_mn(m k_rho rho)``.

    Parameters
    ----------
    strict : bool
        Check ``z <= z_max``, ``rho <= rho_max(z)`` and ``rho << z`` and raise
        ``ValidityRangeError`` naming the violated bound. Disable only to
        demonstrate the breakdown of the approximation.
    """
    if not (z > 0 and math.isfinite(z)):
        raise DomainError(f"z must be positive, got {z!r}")
    if rho < 0:
        raise DomainError(f"rho must be >= 0, got {rho!r}")
    vr = validity_range(spec, params, m)
    if strict:
        if z > vr.z_max_m:
            raise ValidityRangeError(f"z = {z:.4g} m exceeds z_max = {vr.z_max_m:.4g} m", bound="z_max")
        rmax = float(vr.rho_max_m(z))
        if rho > rmax:
            raise ValidityRangeError(f"rho = {rho:.4g} m exceeds rho_max(z) = {rmax:.4g} m", bound="rho_max")
        if rho > PARAXIAL_RATIO * z:
            raise ValidityRangeError(f"rho = {rho:.4g} m is not small compared with z", bound="paraxial")

    k = params.wavenumber_per_m
    n = spec.n
    kr = spec.k_rho_per_m
    r_c = m * kr * z / k
    scale = math.sqrt(k / (math.pi * z))
    s_lo, c_lo = fresnel(-r_c * scale)
    s_hi, c_hi = fresnel((spec.aperture_radius_m - r_c) * scale)
    gauss = math.sqrt(math.pi * z / k) * complex(c_hi - c_lo, -(s_hi - s_lo))
    phase = -k * rho * rho / (2 * z) + m * n * phi + m * m * kr * kr * z / (2 * k)
    return complex(
        _prefactor(params, m, n, z) * r_c * jv(m * n, m * kr * rho) * np.exp(1j * phase) * gauss
    )


def _panel_edges(rate_fn, length: float, min_panels: int = 8) -> np.ndarray:
    """Panel edges such that each panel spans at most a quarter period of ``rate_fn``."""
    fine = np.linspace(0.0, length, 4097)
    rate = rate_fn(fine)
    phase = np.concatenate(([0.0], np.cumsum(0.5 * (rate[1:] + rate[:-1]) * np.diff(fine))))
    quarter = 0.5 * math.pi
    n_panels = max(min_panels, int(math.ceil(phase[-1] / quarter)))
    levels = np.linspace(0.0, phase[-1], n_panels + 1)
    edges = np.interp(levels, phase, fine)
    edges[0], edges[-1] = 0.0, length
    return np.unique(edges)


def _gauss_legendre(f, a, b, rule):
    nodes, weights = rule
    mid = 0.5 * (a + b)[:, None]
    half = 0.5 * (b - a)[:, None]
    x = mid + half * nodes[None, :]
    fx = f(x)
    return np.sum(fx * weights[None, :], axis=1) * half[:, 0], np.sum(np.abs(fx) * weights[None, :], axis=1) * half[:, 0]


MAX_PANELS = 1 << 16


def radial_integral(f, rate_fn, length: float, rtol: float = 1e-6, max_iter: int = 30) -> complex:
    """Adaptive Gauss-Legendre quadrature of an oscillatory integrand on [0, length].

    Panels start at a quarter period of the local phase rate; panels whose 16-
    and 32-point rules disagree are bisected until the summed disagreement is
    below ``rtol`` times the integral of |f|.
    """
    edges = _panel_edges(rate_fn, length)
    a, b = edges[:-1], edges[1:]
    done_val = 0j
    done_err = 0.0
    scale = None
    for _ in range(max_iter):
        lo, _ = _gauss_legendre(f, a, b, _GL_LOW)
        hi, mag = _gauss_legendre(f, a, b, _GL_HIGH)
        err = np.abs(hi - lo)
        if scale is None:
            scale = float(mag.sum())
            if scale == 0:
                return 0j
        budget = rtol * scale
        total_err = done_err + err.sum()
        if total_err <= budget:
            return complex(done_val + hi.sum())
        # accept panels that are individually within their share of the budget
        ok = err <= budget * (b - a) / length
        done_val += hi[ok].sum()
        done_err += err[ok].sum()
        bad_a, bad_b = a[~ok], b[~ok]
        if 2 * bad_a.size > MAX_PANELS:
            break
        mid = 0.5 * (bad_a + bad_b)
        a = np.concatenate((bad_a, mid))
        b = np.concatenate((mid, bad_b))
    raise OracleError(
        f"radial quadrature did not converge: estimated relative error {total_err / scale:.2e} > {rtol:.0e}"
    )


def quadrature_oracle(
    spec: HologramSpec,
    params: ElectronParams,
    m: int,
    z: float,
    rho_samples: Sequence[float],
    phi: float = 0.0,
    *,
    rtol: float = 1e-6,
) -> np.ndarray:
    """Order-m Fresnel field at radii ``rho_samples`` by direct radial quadrature.

    Returns complex amplitudes in the same normalisation as a unit-amplitude
    order function propagated with :func:`besselholo.propagation.propagate_fresnel`.

    Raises
    ------
    OracleError
        If the estimated relative quadrature error exceeds ``rtol``.
    """
    if not (z > 0 and math.isfinite(z)):
        raise DomainError(f"z must be positive, got {z!r}")
    rhos = np.atleast_1d(np.asarray(rho_samples, dtype=float))
    if np.any(rhos < 0):
        raise DomainError("rho samples must be >= 0")
    k = params.wavenumber_per_m
    n = spec.n
    kr = spec.k_rho_per_m
    big_r = spec.aperture_radius_m
    order = m * n
    pref = _prefactor(params, m, n, z)
    out = np.empty(rhos.shape, dtype=np.complex128)
    for i, rho in enumerate(rhos):
        bessel_rate = k * rho / z

        def f(r):
            return r * np.exp(1j * (m * kr * r - k * r * r / (2 * z))) * jv(order, bessel_rate * r)

        def rate(r, bessel_rate=bessel_rate):
            return np.abs(m * kr - k * r / z) + bessel_rate + 1.0 / big_r

        integral = radial_integral(f, rate, big_r, rtol=rtol)
        out[i] = pref * np.exp(-1j * k * rho * rho / (2 * z)) * np.exp(1j * order * phi) * integral
    return out


def ring_radii(spec: HologramSpec, m: int, n_rings: int = 5) -> np.ndarray:
    """Radii of the first ``n_rings`` intensity zeros of ``J_mn(m k_rho rho)``."""
    if m * spec.k_rho_per_m <= 0:
        raise DomainError("ring radii need m * k_rho > 0")
    return jn_zeros(abs(m * spec.n), n_rings) / (m * spec.k_rho_per_m)


def intensity_rms_error(reference, test) -> float:
    """RMS of the intensity difference relative to the RMS reference intensity."""
    ref = np.abs(np.asarray(reference)) ** 2
    tst = np.abs(np.asarray(test)) ** 2
    denom = math.sqrt(float(np.mean(ref**2)))
    if denom == 0:
        raise DomainError("reference intensity vanishes")
    return math.sqrt(float(np.mean((tst - ref) ** 2))) / denom
