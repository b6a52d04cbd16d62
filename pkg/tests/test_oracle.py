import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import jv

from besselholo import DomainError, GridGeometry, HologramSpec, OracleError, ValidityRangeError
from besselholo.oracle import (
    intensity_rms_error,
    quadrature_oracle,
    radial_integral,
    ring_radii,
    spa_reference,
    validity_range,
)

J0_ZERO = 2.404825557695773

# order-1 field of the n = 0, R = 5 um, alpha = 6 urad mask at 200 keV, from a
# 30-digit quadrature on 400 fixed sub-intervals
QUAD_REFERENCE = [
    (0.25, 0.0, 9.0009319537505 - 6.05224989800169j),
    (0.25, 0.0993e-6, 5.7415104193498 - 2.79157200451665j),
    (0.5, 0.2e-6, 1.61864597066961 + 4.26322556674986j),
    (0.7, 0.0, 7.8996456634781 + 19.8944929218035j),
]


def reference_mask(params, n=0):
    return HologramSpec(
        n=n,
        k_rho_per_m=params.wavenumber_per_m * 6e-6,
        grating_pitch_m=100e-9,
        aperture_radius_m=5e-6,
        grid=GridGeometry(1024, 1024, 25e-9),
    )


def test_validity_range_values(params200):
    spec = reference_mask(params200)
    vr = validity_range(spec, params200, 1)
    assert vr.z_max_m == pytest.approx(5e-6 / 6e-6, rel=1e-12)
    assert validity_range(spec, params200, 2).z_max_m == pytest.approx(vr.z_max_m / 2, rel=1e-12)
    assert vr.rho_max_m(vr.z_max_m) == pytest.approx(0.0, abs=1e-18)
    z = np.linspace(0, vr.z_max_m, 50)
    assert np.all(np.diff(vr.rho_max_m(z)) < 0)


def test_validity_range_undefined(params200):
    spec = reference_mask(params200)
    with pytest.raises(ValidityRangeError) as info:
        validity_range(spec, params200, 0)
    assert info.value.bound == "undefined"
    flat = HologramSpec(0, 0.0, 100e-9, 5e-6, grid=spec.grid)
    with pytest.raises(ValidityRangeError):
        validity_range(flat, params200, 1)
    with pytest.raises(ValidityRangeError):
        validity_range(spec, params200, -1)


def test_spa_center_is_maximum(params200):
    spec = reference_mask(params200)
    rho = np.linspace(0, 1e-6, 101)
    inten = [abs(spa_reference(spec, params200, 1, 0.3, r)) ** 2 for r in rho]
    assert int(np.argmax(inten)) == 0


def test_spa_first_zero(params200):
    spec = reference_mask(params200)
    r0 = J0_ZERO / spec.k_rho_per_m
    assert abs(spa_reference(spec, params200, 1, 0.3, r0)) < 1e-12 * abs(spa_reference(spec, params200, 1, 0.3, 0.0))
    assert ring_radii(spec, 1, 1)[0] == pytest.approx(r0, rel=1e-12)


def test_spa_doughnut(params200):
    spec = reference_mask(params200, n=2)
    assert spa_reference(spec, params200, 1, 0.3, 0.0) == 0
    assert abs(spa_reference(spec, params200, 1, 0.3, 0.2e-6)) > 0


def test_spa_profile_is_bessel(params200):
    spec = reference_mask(params200, n=1)
    rho = np.linspace(0, 1e-6, 7)
    vals = np.array([spa_reference(spec, params200, 1, 0.4, r) for r in rho])
    ratio = np.abs(vals[1:]) / np.abs(jv(1, spec.k_rho_per_m * rho[1:]))
    assert np.allclose(ratio, ratio[0], rtol=1e-12)


@pytest.mark.parametrize(
    "z,rho,bound",
    [(1.0, 0.0, "z_max"), (0.8, 0.3e-6, "rho_max"), (1e-6, 0.5e-6, "paraxial")],
)
def test_spa_bounds_named(params200, z, rho, bound):
    spec = reference_mask(params200)
    with pytest.raises(ValidityRangeError) as info:
        spa_reference(spec, params200, 1, z, rho)
    assert info.value.bound == bound


def test_spa_non_strict_evaluates_beyond_range(params200):
    spec = reference_mask(params200)
    assert abs(spa_reference(spec, params200, 1, 1.2, 0.0, strict=False)) > 0


def test_spa_domain(params200):
    spec = reference_mask(params200)
    with pytest.raises(DomainError):
        spa_reference(spec, params200, 1, 0.0, 0.0)
    with pytest.raises(DomainError):
        spa_reference(spec, params200, 1, 0.1, -1e-9)


@pytest.mark.parametrize("z,rho,want", QUAD_REFERENCE)
def test_quadrature_matches_high_precision(params200, z, rho, want):
    got = quadrature_oracle(reference_mask(params200), params200, 1, z, [rho])[0]
    assert abs(got - want) <= 1e-6 * abs(want)


def test_quadrature_n_phase_factor(params200):
    spec = reference_mask(params200, n=1)
    a = quadrature_oracle(spec, params200, 1, 0.3, [0.2e-6], phi=0.0)[0]
    b = quadrature_oracle(spec, params200, 1, 0.3, [0.2e-6], phi=0.7)[0]
    assert b / a == pytest.approx(np.exp(0.7j), rel=1e-12)


def test_quadrature_decays_far_beyond_zmax(params200):
    spec = reference_mask(params200)
    peak = abs(quadrature_oracle(spec, params200, 1, 0.7, [0.0])[0]) ** 2
    far = abs(quadrature_oracle(spec, params200, 1, 5.0, [0.0])[0]) ** 2
    assert far < 0.05 * peak


def test_quadrature_domain(params200):
    spec = reference_mask(params200)
    with pytest.raises(DomainError):
        quadrature_oracle(spec, params200, 1, -0.1, [0.0])
    with pytest.raises(DomainError):
        quadrature_oracle(spec, params200, 1, 0.1, [-1e-9])


def test_quadrature_reports_non_convergence(params200):
    with pytest.raises(OracleError):
        quadrature_oracle(reference_mask(params200), params200, 1, 0.3, [0.1e-6], rtol=1e-18)


@settings(max_examples=25, deadline=None)
@given(st.floats(1.0, 5e3), st.floats(1e-3, 2.0))
def test_radial_integral_exponential(a, length):
    got = radial_integral(lambda r: np.exp(1j * a * r), lambda r: np.full_like(r, a), length, rtol=1e-10)
    want = (np.exp(1j * a * length) - 1) / (1j * a)
    assert abs(got - want) <= 1e-8 * length


def test_ring_radii_order():
    spec = HologramSpec(2, 1e7, 100e-9, 5e-6, grid=GridGeometry(1024, 1024, 25e-9))
    r = ring_radii(spec, 1, 5)
    assert len(r) == 5 and np.all(np.diff(r) > 0)
    assert np.allclose(jv(2, 1e7 * r), 0, atol=1e-12)
    with pytest.raises(DomainError):
        ring_radii(spec, 0)


def test_intensity_rms_error():
    a = np.array([1.0, 2.0, 3.0])
    assert intensity_rms_error(a, a) == 0.0
    assert intensity_rms_error(a, a * np.exp(1j)) == pytest.approx(0.0, abs=1e-15)
    assert intensity_rms_error(a, np.sqrt(1.1) * a) == pytest.approx(0.1)
    with pytest.raises(DomainError):
        intensity_rms_error(np.zeros(3), a)
