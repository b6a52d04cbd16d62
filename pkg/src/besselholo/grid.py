"""Uniform transverse sampling grids."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DomainError


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class GridGeometry:
    """Square-pixel grid with the optical axis on pixel ``(ny // 2, nx // 2)``.

    Arrays on this grid have shape ``(ny, nx)``; rows run along y.
    """

    nx: int
    ny: int
    pitch_m: float

    def __post_init__(self):
        problems = []
        for name in ("nx", "ny"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 64 or not _is_power_of_two(int(v)):
                problems.append(f"{name} must be a power of two >= 64, got {v!r}")
        if not (np.isfinite(self.pitch_m) and self.pitch_m > 0):
            problems.append(f"pitch_m must be positive, got {self.pitch_m!r}")
        if problems:
            raise DomainError("; ".join(problems))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def extent_x(self) -> float:
        return self.nx * self.pitch_m

    @property
    def extent_y(self) -> float:
        return self.ny * self.pitch_m

    @property
    def center(self) -> tuple[int, int]:
        """(row, col) index of the origin."""
        return (self.ny // 2, self.nx // 2)

    def x(self) -> np.ndarray:
        return (np.arange(self.nx) - self.nx // 2) * self.pitch_m

    def y(self) -> np.ndarray:
        return (np.arange(self.ny) - self.ny // 2) * self.pitch_m

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Broadcastable (x, y) coordinate arrays of shapes (1, nx) and (ny, 1)."""
        return self.x()[None, :], self.y()[:, None]

    # reciprocal grid: angular wavenumbers on the centred DFT grid
    @property
    def dk_x(self) -> float:
        return 2.0 * np.pi / self.extent_x

    @property
    def dk_y(self) -> float:
        return 2.0 * np.pi / self.extent_y

    def kx(self) -> np.ndarray:
        return (np.arange(self.nx) - self.nx // 2) * self.dk_x

    def ky(self) -> np.ndarray:
        return (np.arange(self.ny) - self.ny // 2) * self.dk_y

    @property
    def nyquist_k(self) -> float:
        return np.pi / self.pitch_m

    def with_pitch(self, pitch_m: float) -> "GridGeometry":
        return GridGeometry(self.nx, self.ny, pitch_m)

    def padded(self, factor: int = 2) -> "GridGeometry":
        return GridGeometry(self.nx * factor, self.ny * factor, self.pitch_m)

    @cached_property
    def _radius(self) -> np.ndarray:
        x, y = self.coords()
        return np.hypot(x, y)

    def radius(self) -> np.ndarray:
        """Distance of every pixel from the origin (read-only array)."""
        r = self._radius
        r.setflags(write=False)
        return r
