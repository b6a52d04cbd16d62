"""Diffraction-order bookkeeping: analytic order law, measured order spectra,
order isolation and the efficiency-versus-thickness sweep."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import jv

from .electron import ElectronParams
from .errors import AnalysisError, DomainError
from .hologram import (
    DEFAULT_BASE_THICKNESS_M,
    HologramSpec,
    phase_depth_for_thickness,
    thickness_from_phase,
    transmittance_from_thickness,
)
from .propagation import Field2D, fft2c, ifft2c, illuminate, propagate_farfield


@dataclass(frozen=True)
class OrderEntry:
    m: int
    center_k: float
    fraction: float


@dataclass(frozen=True)
class OrderSpectrum:
    """Intensity fraction carried by each diffraction order.

    ``residual`` is the fraction of power that falls outside the windows of
    the listed orders. ``overlap`` is set when neighbouring orders are not
    separable (ring radius reaches half the carrier spacing, or the windows
    alias on the grid); fractions are then unreliable.
    """

    orders: list[OrderEntry]
    partition_width_k: float
    residual: float = 0.0
    overlap: bool = False

    def fraction(self, m: int) -> float:
        for o in self.orders:
            if o.m == m:
                return o.fraction
        raise KeyError(f"order {m} not in spectrum")

    @property
    def exit_efficiency(self) -> float:
        """Fraction of the transmitted power in the m = 1 order."""
        return self.fraction(1)

    def as_dict(self) -> dict[int, float]:
        return {o.m: o.fraction for o in self.orders}


def _orders(m_range) -> list[int]:
    if isinstance(m_range, int):
        return list(range(-m_range, m_range + 1))
    return sorted({int(m) for m in m_range})


def analytic_order_fractions(phi0: float, m_range: Iterable[int] | int = 3) -> OrderSpectrum:
    """Order fractions ``J_m(phi0)^2`` of a sinusoidal phase grating.

    ``m_range`` is either an iterable of orders or a maximum |m|.
    """
    if not math.isfinite(phi0):
        raise DomainError("phi0 must be finite")
    ms = _orders(m_range)
    fr = jv(np.array(ms), phi0) ** 2
    residual = max(0.0, 1.0 - float(np.sum(fr)))
    return OrderSpectrum([OrderEntry(m, math.nan, float(f)) for m, f in zip(ms, fr)], math.nan, residual)


def orders_overlap(spec: HologramSpec, extra_k: float = 0.0, m_max: int = 1) -> bool:
    """True if the order windows of ``spec`` cannot separate orders up to ``|m_max|``.

    Order m is a ring of radius ``|m| k_rho`` around ``m K``; ``extra_k`` widens
    it (e.g. by the illumination convergence).
    """
    kx = spec.k_x_per_m
    if kx == 0:
        return True
    return max(1, abs(m_max)) * spec.k_rho_per_m + extra_k >= kx / 2


def measure_order_spectrum(
    farfield: Field2D, spec: HologramSpec, m_range: Iterable[int] | int = 3
) -> OrderSpectrum:
    """Integrate far-field power in rectangular order windows.

    Window m spans ``|k_x - m K| < K/2`` over the full k_y height, with
    ``K = 2 pi / grating_pitch``. The k_x axis is tiled with windows of every
    order that fits on the grid; fractions are relative to the power in all
    tiled windows, so orders outside ``m_range`` show up in ``residual``.
    """
    if not farfield.kspace:
        raise DomainError("measure_order_spectrum expects a far-field (k-space) field")
    big_k = spec.k_x_per_m
    if big_k == 0:
        raise AnalysisError("hologram without carrier: orders are concentric and cannot be windowed")
    ms = _orders(m_range)
    g = farfield.grid
    kx = g.x()  # k-space grid: coordinates are angular wavenumbers
    col_power = np.sum(farfield.intensity, axis=0)

    # orders whose window lies entirely on the grid tile the k_x axis without aliasing
    m_fit = int(math.floor((abs(kx[0]) - big_k / 2) / big_k + 1e-9))
    order_idx = np.floor((kx + big_k / 2) / big_k).astype(int)
    tiled = np.abs(order_idx) <= m_fit
    window_total = float(col_power[tiled].sum())
    if window_total <= 0:
        raise AnalysisError("far field carries no power inside the order windows")

    aliased = any(abs(m) > m_fit for m in ms)
    entries = []
    for m in ms:
        p = float(col_power[tiled & (order_idx == m)].sum()) if abs(m) <= m_fit else 0.0
        entries.append(OrderEntry(m, m * big_k, p / window_total))
    residual = max(0.0, 1.0 - sum(e.fraction for e in entries))
    return OrderSpectrum(entries, big_k, residual, overlap=orders_overlap(spec) or aliased)


def isolate_order(field: Field2D, spec: HologramSpec, m: int, *, demodulate: bool = True) -> Field2D:
    """Keep only order ``m`` of a real-space field.

    A square angular window of side K around ``m K`` is applied. With
    ``demodulate`` the carrier ``exp(i m K x)`` is removed so the order travels
    along the optical axis.
    """
    if field.kspace:
        raise DomainError("isolate_order expects a real-space field")
    big_k = spec.k_x_per_m
    if big_k == 0:
        raise AnalysisError("hologram without carrier: orders are concentric and cannot be isolated")
    g = field.grid
    kx = g.kx()[None, :]
    ky = g.ky()[:, None]
    window = (np.abs(kx - m * big_k) < big_k / 2) & (np.abs(ky) < big_k / 2)
    values = ifft2c(fft2c(field.values) * window)
    if demodulate and m:
        x, _ = g.coords()
        values *= np.exp(-1j * m * big_k * x)
    return Field2D(g, values, field.wavelength_m, field.z_m)


@dataclass(frozen=True)
class EfficiencyCurve:
    """Exit efficiency versus peak-to-valley thickness."""

    t0_m: np.ndarray
    efficiency: np.ndarray
    phase_param_rad: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def peak_index(self) -> int:
        return int(np.argmax(self.efficiency))


def exit_efficiency_at(
    spec: HologramSpec,
    params: ElectronParams,
    v0: float,
    t0_m: float,
    base_thickness_m: float = DEFAULT_BASE_THICKNESS_M,
) -> float:
    """Exit efficiency of the mask with peak-to-valley thickness ``t0_m``."""
    if not (t0_m >= 0 and math.isfinite(t0_m)):
        raise DomainError(f"t0 must be >= 0, got {t0_m!r}")
    depth = phase_depth_for_thickness(spec.profile, t0_m, params, v0)
    s = spec.with_phase_depth(depth)
    tmap = thickness_from_phase(s, params, v0, base_thickness_m)
    trans = transmittance_from_thickness(tmap)
    far = propagate_farfield(illuminate(trans, params))
    return measure_order_spectrum(far, s, [-1, 0, 1]).exit_efficiency


def efficiency_vs_thickness(
    spec: HologramSpec,
    params: ElectronParams,
    v0: float,
    t0_range: Sequence[float],
    base_thickness_m: float = DEFAULT_BASE_THICKNESS_M,
) -> EfficiencyCurve:
    """Exit efficiency for each thickness scaling ``t0`` of the mask profile."""
    t0 = np.asarray(t0_range, dtype=float)
    if t0.ndim != 1 or t0.size == 0:
        raise DomainError("t0_range must be a non-empty 1-D list")
    eta = np.array([exit_efficiency_at(spec, params, v0, t, base_thickness_m) for t in t0])
    phase = np.array([phase_depth_for_thickness(spec.profile, t, params, v0) for t in t0])
    return EfficiencyCurve(t0, eta, phase)


def refine_efficiency_peak(
    spec: HologramSpec,
    params: ElectronParams,
    v0: float,
    bracket: tuple[float, float],
    base_thickness_m: float = DEFAULT_BASE_THICKNESS_M,
    xatol_m: float = 1e-12,
) -> tuple[float, float]:
    """Maximise the exit efficiency over ``t0`` within ``bracket``.

    Returns ``(t0_m, efficiency)``.
    """
    lo, hi = bracket
    res = minimize_scalar(
        lambda t: -exit_efficiency_at(spec, params, v0, t, base_thickness_m),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": xatol_m},
    )
    return float(res.x), float(-res.fun)
