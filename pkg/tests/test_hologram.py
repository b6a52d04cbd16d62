import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from besselholo import (
    ConfigError,
    DomainError,
    GridGeometry,
    HologramSpec,
    InfeasibleMaskError,
    Profile,
    SamplingError,
    build_transmittance,
    perturb_hologram,
    phase_beta,
    phase_profile,
    thickness_from_phase,
    transmittance_from_thickness,
)
from besselholo.hologram import phase_depth_for_thickness


def fork_spec(n=1, profile="blazed", depth=None, pitch=100e-9, grid=None):
    return HologramSpec(
        n=n,
        k_rho_per_m=2e6,
        grating_pitch_m=pitch,
        aperture_radius_m=2e-6,
        profile=profile,
        phase_depth_rad=depth,
        grid=grid or GridGeometry(256, 256, 25e-9),
    )


def test_defaults_are_efficiency_optimal():
    assert fork_spec(profile="blazed").phase_depth_rad == pytest.approx(2 * math.pi)
    assert fork_spec(profile="sinusoidal").phase_depth_rad == pytest.approx(1.8412)


def test_beta_at_origin_uses_zero_azimuth():
    spec = fork_spec(n=3)
    assert phase_beta(spec, 0.0, 0.0) == 0.0


@pytest.mark.parametrize("n", [-3, -1, 0, 1, 2, 5])
def test_beta_winding_equals_n(n):
    spec = fork_spec(n=n)
    t = np.linspace(0, 2 * math.pi, 40001)
    r = 1e-6
    beta = phase_beta(spec, r * np.cos(t), r * np.sin(t))
    steps = np.angle(np.exp(1j * np.diff(beta)))
    assert steps.sum() / (2 * math.pi) == pytest.approx(n, abs=1e-9)


def test_blazed_profile_periodic_along_grating():
    spec = HologramSpec(0, 0.0, 100e-9, 2e-6, grid=GridGeometry(256, 256, 25e-9))
    x = np.linspace(-1e-6, 1e-6, 997) + 3.3e-9
    y = np.full_like(x, 0.4e-6)
    a = phase_profile(spec, x, y)
    b = phase_profile(spec, x + 100e-9, y)
    d = np.angle(np.exp(1j * (a - b)))
    assert np.max(np.abs(d)) < 1e-9
    assert a.min() >= 0 and a.max() < 2 * math.pi


@given(st.floats(0.0, 5.0), st.floats(-2e-6, 2e-6), st.floats(-2e-6, 2e-6))
def test_sinusoid_bounded(phi0, x, y):
    spec = fork_spec(profile="sinusoidal", depth=phi0)
    v = phase_profile(spec, x, y)
    assert -phi0 - 1e-15 <= v <= phi0 + 1e-15


def test_transmittance_modulus_is_aperture_indicator():
    spec = fork_spec(n=2)
    t = build_transmittance(spec, 0.7)
    inside = spec.aperture_mask()
    assert np.all(np.abs(t.values[~inside]) == 0)
    assert np.allclose(np.abs(t.values[inside]), 0.7, rtol=0, atol=1e-15)


def test_amplitude_out_of_range():
    with pytest.raises(DomainError):
        build_transmittance(fork_spec(), 1.5)


def test_spec_validation():
    with pytest.raises(DomainError):
        fork_spec(n=1.5)
    with pytest.raises(DomainError):
        HologramSpec(0, -1.0, 100e-9, 2e-6, grid=GridGeometry(256, 256, 25e-9))
    with pytest.raises(DomainError):
        HologramSpec(0, 1e6, 100e-9, -2e-6, grid=GridGeometry(256, 256, 25e-9))


def test_grating_undersampled():
    with pytest.raises(SamplingError):
        fork_spec(pitch=80e-9)


def test_aperture_does_not_fit():
    with pytest.raises(SamplingError):
        HologramSpec(0, 1e6, 100e-9, 3e-6, grid=GridGeometry(256, 256, 25e-9))


def test_phase_depth_for_thickness(params200):
    cv = params200.interaction_const * 17.0
    assert phase_depth_for_thickness(Profile.SINUSOIDAL, 40e-9, params200, 17.0) == pytest.approx(cv * 20e-9)
    assert phase_depth_for_thickness(Profile.BLAZED, 40e-9, params200, 17.0) == pytest.approx(cv * 40e-9)


@pytest.mark.parametrize("profile", ["blazed", "sinusoidal"])
def test_thickness_round_trip(params200, profile):
    spec = fork_spec(n=1, profile=profile)
    tmap = thickness_from_phase(spec, params200)
    inside = spec.aperture_mask()
    x, y = spec.grid.coords()
    want = np.broadcast_to(phase_profile(spec, x, y), spec.grid.shape)
    err = np.max(np.abs(tmap.phase()[inside] - want[inside]))
    assert err < 1e-12
    assert np.all(tmap.values_m >= 0)
    assert np.all(tmap.values_m <= tmap.base_thickness_m)
    assert np.all(tmap.values_m[~inside] == tmap.base_thickness_m)


def test_transmittance_from_thickness_matches_up_to_global_phase(params200):
    spec = fork_spec(n=1)
    direct = build_transmittance(spec)
    milled = transmittance_from_thickness(thickness_from_phase(spec, params200))
    inside = spec.aperture_mask()
    ratio = milled.values[inside] / direct.values[inside]
    assert np.allclose(ratio, ratio[0], atol=1e-9)


def test_thin_membrane_infeasible(params200):
    with pytest.raises(InfeasibleMaskError):
        thickness_from_phase(fork_spec(), params200, base_thickness_m=10e-9)


def test_bad_inner_potential(params200):
    with pytest.raises(DomainError):
        thickness_from_phase(fork_spec(), params200, v0=0.0)


def test_perturb_zero_is_identity():
    t = build_transmittance(fork_spec(n=2))
    assert perturb_hologram(t, "phase_ripple", 0.0) is t


def test_perturb_errors():
    t = build_transmittance(fork_spec(n=2))
    with pytest.raises(ConfigError):
        perturb_hologram(t, "scratches", 0.1)
    with pytest.raises(DomainError):
        perturb_hologram(t, "phase_ripple", -0.1)


@pytest.mark.parametrize("kind,mag", [("phase_ripple", 0.1), ("fringe_jitter", 30e-9)])
def test_perturbation_keeps_invariants(kind, mag):
    t = build_transmittance(fork_spec(n=2))
    p = perturb_hologram(t, kind, mag, seed=3)
    inside = t.aperture_mask()
    assert np.allclose(np.abs(p.values[inside]), t.amplitude)
    assert np.all(p.values[~inside] == 0)
    assert p.power == pytest.approx(t.power, rel=1e-12)
    again = perturb_hologram(t, kind, mag, seed=3)
    assert np.array_equal(p.values, again.values)
    other = perturb_hologram(t, kind, mag, seed=4)
    assert not np.array_equal(p.values, other.values)


def test_phase_ripple_rms():
    t = build_transmittance(fork_spec(n=2))
    p = perturb_hologram(t, "phase_ripple", 0.1, seed=0)
    inside = t.aperture_mask()
    d = (p.phase_rad - t.phase_rad)[inside]
    assert np.sqrt(np.mean(d**2)) == pytest.approx(0.1, rel=1e-9)
    assert abs(d.mean()) < 1e-12


@settings(max_examples=20, deadline=None)
@given(st.floats(0.0, 0.5), st.integers(0, 2**31))
def test_phase_ripple_preserves_power(mag, seed):
    t = build_transmittance(fork_spec(n=1))
    p = perturb_hologram(t, "phase_ripple", mag, seed=seed)
    assert p.power == pytest.approx(t.power, rel=1e-12)
