import numpy as np
import pytest

from besselholo import GridGeometry, HologramSpec, derive_params


@pytest.fixture(scope="session")
def params200():
    return derive_params(200.0)


@pytest.fixture
def small_grid():
    return GridGeometry(256, 256, 25e-9)


def vortex_field(n, size=64, offset=0.5):
    """Unit-amplitude exp(i n phi) with the core at a plaquette centre."""
    idx = np.arange(size) - size // 2 + offset
    x, y = np.meshgrid(idx, idx)
    return np.exp(1j * n * np.arctan2(y, x))


@pytest.fixture
def grating_spec():
    # on-axis-free Bessel hologram small enough for quick far-field checks
    return HologramSpec(
        n=0,
        k_rho_per_m=0.0,
        grating_pitch_m=100e-9,
        aperture_radius_m=2e-6,
        profile="sinusoidal",
        phase_depth_rad=1.0,
        grid=GridGeometry(256, 256, 25e-9),
    )
