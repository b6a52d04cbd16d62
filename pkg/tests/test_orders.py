import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import jv

from besselholo import AnalysisError, DomainError, GridGeometry, HologramSpec, build_transmittance, illuminate, propagate_farfield
from besselholo.orders import (
    analytic_order_fractions,
    efficiency_vs_thickness,
    exit_efficiency_at,
    isolate_order,
    measure_order_spectrum,
    orders_overlap,
    refine_efficiency_peak,
)

# argmax and max of J1(x)^2, from a 25-digit root of d/dx J1^2
J1_ARGMAX = 1.8411837813406593
J1_SQ_MAX = 0.33856713922827246


def sinusoid(params, n_px=512, radius=5e-6, phi0=1.0, pitch=400e-9, k_rho=None):
    return HologramSpec(
        n=0,
        k_rho_per_m=params.wavenumber_per_m * 1e-6 if k_rho is None else k_rho,
        grating_pitch_m=pitch,
        aperture_radius_m=radius,
        profile="sinusoidal",
        phase_depth_rad=phi0,
        grid=GridGeometry(n_px, n_px, 25e-9),
    )


def measured(spec, params, m_range=3):
    far = propagate_farfield(illuminate(build_transmittance(spec), params))
    return measure_order_spectrum(far, spec, m_range)


def test_analytic_zero_depth():
    s = analytic_order_fractions(0.0, 3)
    assert s.fraction(0) == 1.0
    assert all(s.fraction(m) == 0.0 for m in (-3, -2, -1, 1, 2, 3))


def test_analytic_optimum():
    s = analytic_order_fractions(1.8412, [1])
    assert s.fraction(1) == pytest.approx(0.3386, abs=5e-5)
    assert analytic_order_fractions(J1_ARGMAX, [1]).fraction(1) == pytest.approx(J1_SQ_MAX, rel=1e-12)


def test_analytic_order_list_and_missing_order():
    s = analytic_order_fractions(1.0, [2, -1, 2])
    assert [o.m for o in s.orders] == [-1, 2]
    with pytest.raises(KeyError):
        s.fraction(0)
    with pytest.raises(DomainError):
        analytic_order_fractions(math.nan)


@given(st.floats(0.0, 5.0))
def test_bessel_sum_identity(phi0):
    s = analytic_order_fractions(phi0, 40)
    assert sum(o.fraction for o in s.orders) == pytest.approx(1.0, abs=1e-12)


@given(st.floats(-10.0, 10.0), st.integers(1, 10))
def test_analytic_symmetric(phi0, m):
    s = analytic_order_fractions(phi0, m)
    assert s.fraction(m) == pytest.approx(s.fraction(-m), rel=1e-12, abs=1e-300)


def test_measured_fractions_match_bessel_law(params200):
    s = measured(sinusoid(params200), params200)
    assert not s.overlap
    for m in range(-3, 4):
        assert s.fraction(m) == pytest.approx(jv(m, 1.0) ** 2, abs=0.01)
    assert sum(o.fraction for o in s.orders) <= 1.0
    assert s.residual >= 0


def test_centers_at_multiples_of_carrier(params200):
    spec = sinusoid(params200)
    s = measured(spec, params200)
    for o in s.orders:
        assert o.center_k == o.m * spec.k_x_per_m
    assert s.partition_width_k == spec.k_x_per_m


def test_error_halves_as_spectral_resolution_doubles(params200):
    errors = []
    for n_px, radius in ((256, 2.5e-6), (512, 5e-6), (1024, 10e-6)):
        s = measured(sinusoid(params200, n_px, radius), params200)
        errors.append(max(abs(s.fraction(m) - jv(m, 1.0) ** 2) for m in range(-3, 4)))
    assert errors[1] <= 0.5 * errors[0] * 1.05
    assert errors[2] <= 0.5 * errors[1] * 1.05


def test_blazed_mask_efficiency(params200):
    spec = HologramSpec(0, params200.wavenumber_per_m * 1e-6, 400e-9, 5e-6, grid=GridGeometry(512, 512, 25e-9))
    s = measured(spec, params200)
    assert s.exit_efficiency >= 0.95


def test_overlap_flag(params200):
    spec = sinusoid(params200, k_rho=0.6 * 2 * math.pi / 400e-9)
    assert orders_overlap(spec)
    assert measured(spec, params200).overlap


def test_orders_beyond_grid_are_flagged(params200):
    s = measured(sinusoid(params200, pitch=100e-9), params200)
    # only |m| <= 1 windows fit on a grid with four pixels per grating period
    assert s.overlap
    assert s.fraction(2) == 0.0


def test_measure_needs_kspace_and_carrier(params200):
    spec = sinusoid(params200)
    near = illuminate(build_transmittance(spec), params200)
    with pytest.raises(DomainError):
        measure_order_spectrum(near, spec)
    axial = HologramSpec(0, 1e6, math.inf, 5e-6, grid=spec.grid)
    with pytest.raises(AnalysisError):
        measure_order_spectrum(propagate_farfield(near), axial)
    with pytest.raises(AnalysisError):
        isolate_order(near, axial, 1)


def test_isolate_order(params200):
    spec = sinusoid(params200)
    near = illuminate(build_transmittance(spec), params200)
    first = isolate_order(near, spec, 1)
    assert first.power / near.power == pytest.approx(jv(1, 1.0) ** 2, abs=0.01)
    far = propagate_farfield(first)
    _, c = np.unravel_index(np.argmax(far.intensity), far.grid.shape)
    # demodulated: the order sits on the axis
    assert abs(far.grid.x()[c]) < spec.k_x_per_m / 4


def test_efficiency_zero_thickness(params200):
    spec = sinusoid(params200, 256, 2.5e-6)
    # only the Airy tails of the zero order leak into the m = 1 window
    assert exit_efficiency_at(spec, params200, 17.0, 0.0) == pytest.approx(0.0, abs=0.01)
    with pytest.raises(DomainError):
        efficiency_vs_thickness(spec, params200, 17.0, [])


def test_sinusoidal_efficiency_peak(params200):
    spec = sinusoid(params200, 256, 2.5e-6)
    cv = params200.interaction_const * 17.0
    t_opt = 2 * J1_ARGMAX / cv
    curve = efficiency_vs_thickness(spec, params200, 17.0, np.linspace(0.2, 1.8, 9) * t_opt)
    assert curve.peak_index() == 4
    assert curve.phase_param_rad[4] == pytest.approx(J1_ARGMAX)
    t_best, eta = refine_efficiency_peak(spec, params200, 17.0, (0.7 * t_opt, 1.3 * t_opt))
    assert eta == pytest.approx(J1_SQ_MAX, abs=0.01)
    assert cv * t_best / 2 == pytest.approx(J1_ARGMAX, abs=0.05)
