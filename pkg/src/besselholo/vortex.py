"""Phase-singularity detection with loop winding numbers.

Phase differences between neighbouring pixels are taken as the argument of
the ratio of their unit phasors, which is insensitive to 2 pi branch cuts.
The winding number of a square loop is the sum of these differences around
its perimeter divided by 2 pi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import ndimage
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial.distance import cdist

from .propagation import Field2D

DEFAULT_LOOP_SIZE = 5
DEFAULT_AMPLITUDE_FLOOR = 1e-3


def _wrap(d: np.ndarray) -> np.ndarray:
    """Map phase differences into (-pi, pi]."""
    w = np.angle(np.exp(1j * d))
    w[w == -np.pi] = np.pi
    return w


def periodic_gradient(phase: np.ndarray, mask: np.ndarray | None = None):
    """Branch-free forward differences of a phase map.

    Returns ``(gx, gy)`` with ``gx[i, j] = arg(e^{i phase[i, j+1]} / e^{i phase[i, j]})``
    (last column zero) and likewise ``gy`` along rows, all in (-pi, pi].
    Where ``mask`` is false at either end of a step the gradient is NaN.
    """
    ph = np.asarray(phase, dtype=float)
    gx = np.zeros_like(ph)
    gy = np.zeros_like(ph)
    gx[:, :-1] = _wrap(ph[:, 1:] - ph[:, :-1])
    gy[:-1, :] = _wrap(ph[1:, :] - ph[:-1, :])
    if mask is not None:
        m = np.asarray(mask, dtype=bool)
        bad_x = np.zeros_like(m)
        bad_y = np.zeros_like(m)
        bad_x[:, :-1] = ~(m[:, 1:] & m[:, :-1])
        bad_y[:-1, :] = ~(m[1:, :] & m[:-1, :])
        gx[bad_x] = np.nan
        gy[bad_y] = np.nan
    return gx, gy


def _phasor_steps(values: np.ndarray):
    """Same as :func:`periodic_gradient` but straight from complex samples."""
    gx = np.angle(values[:, 1:] * np.conj(values[:, :-1]))
    gy = np.angle(values[1:, :] * np.conj(values[:-1, :]))
    return gx, gy


@dataclass(frozen=True)
class Vortex:
    x_px: float
    y_px: float
    charge: int


@dataclass(frozen=True)
class VortexMap:
    """Detected singularities in pixel coordinates (column ``x_px``, row ``y_px``)."""

    vortices: list[Vortex]
    loop_size_px: int
    amplitude_floor: float
    skipped_loops: int = 0
    shape: tuple[int, int] = (0, 0)

    @property
    def total(self) -> int:
        return sum(v.charge for v in self.vortices)


class _LoopCalculator:
    """Prefix sums that give the winding of any axis-aligned rectangle in O(1)."""

    def __init__(self, values: np.ndarray, amplitude_floor: float):
        a = np.abs(values)
        peak = a.max()
        self.mask = a > amplitude_floor * peak if peak > 0 else np.zeros(a.shape, bool)
        gx, gy = _phasor_steps(values)
        ny, nx = values.shape
        self.cx = np.concatenate((np.zeros((ny, 1)), np.cumsum(gx, axis=1)), axis=1)
        self.cy = np.concatenate((np.zeros((1, nx)), np.cumsum(gy, axis=0)), axis=0)
        bad = (~self.mask).astype(np.int64)
        self.bx = np.concatenate((np.zeros((ny, 1), np.int64), np.cumsum(bad, axis=1)), axis=1)
        self.by = np.concatenate((np.zeros((1, nx), np.int64), np.cumsum(bad, axis=0)), axis=0)

    def winding(self, top, bottom, left, right):
        """Loop integral / 2 pi around the rectangle with the given inclusive pixel bounds.

        Rows grow with y, so the path (+x along ``top``, +y down ``right``, -x
        along ``bottom``, -y along ``left``) is counter-clockwise in the (x, y) plane.
        """
        cx, cy = self.cx, self.cy
        total = (
            (cx[top, right] - cx[top, left])
            + (cy[bottom, right] - cy[top, right])
            - (cx[bottom, right] - cx[bottom, left])
            - (cy[bottom, left] - cy[top, left])
        )
        return total / (2 * math.pi)

    def masked_on_perimeter(self, top, bottom, left, right):
        bx, by = self.bx, self.by
        return (
            (bx[top, right + 1] - bx[top, left])
            + (bx[bottom, right + 1] - bx[bottom, left])
            + (by[bottom + 1, left] - by[top, left])
            + (by[bottom + 1, right] - by[top, right])
        )


def loop_integrals(values: np.ndarray, loop_size_px: int, amplitude_floor: float = DEFAULT_AMPLITUDE_FLOOR):
    """Winding of the square loop of side ``loop_size_px`` centred on every pixel.

    Returns ``(winding, valid)``: the loop integral divided by 2 pi (NaN at the
    border) and a flag that is false where the loop touches a masked pixel.
    """
    calc = _LoopCalculator(values, amplitude_floor)
    ny, nx = values.shape
    h = loop_size_px // 2
    r = np.arange(h, ny - h)[:, None]
    c = np.arange(h, nx - h)[None, :]
    wind = np.full((ny, nx), np.nan)
    valid = np.zeros((ny, nx), bool)
    wind[h : ny - h, h : nx - h] = calc.winding(r - h, r + h, c - h, c + h)
    valid[h : ny - h, h : nx - h] = calc.masked_on_perimeter(r - h, r + h, c - h, c + h) == 0
    return wind, valid


def winding_numbers(
    field: Field2D | np.ndarray,
    loop_size_px: int = DEFAULT_LOOP_SIZE,
    amplitude_floor: float = DEFAULT_AMPLITUDE_FLOOR,
) -> VortexMap:
    """Locate phase singularities from loop integrals of the periodic gradient.

    Every interior pixel is the centre of a square loop of side
    ``loop_size_px``. Loops whose integral rounds to a nonzero multiple of
    2 pi are grouped into connected clusters, each reported as one vortex at
    the amplitude-weighted centroid of the cluster (whole-pixel resolution is
    all that is claimed). The charge of a cluster is the winding around the
    rectangle enclosing all of its loops; close to a multiply charged core a
    small loop undersamples the phase, and the enclosing loop does not. If
    that rectangle crosses masked pixels the most common loop charge is used.
    Vortices closer than one loop diameter are not resolved by the loop; they
    are merged into one detection carrying the sum of their charges, and
    dropped if that sum is zero.
    Loops touching pixels below ``amplitude_floor`` times the peak amplitude
    are skipped and counted in ``skipped_loops``.

    A positive charge means the phase increases counter-clockwise in the
    (x, y) plane of the grid (rows run along +y), i.e. ``exp(+i n phi)`` has
    charge n.
    """
    values = field.values if isinstance(field, Field2D) else np.asarray(field)
    if not (isinstance(loop_size_px, (int, np.integer)) and loop_size_px >= 3 and loop_size_px % 2 == 1):
        raise ValueError(f"loop_size_px must be an odd integer >= 3, got {loop_size_px!r}")
    if not 0 <= amplitude_floor < 1:
        raise ValueError(f"amplitude_floor must lie in [0, 1), got {amplitude_floor!r}")
    calc = _LoopCalculator(values, amplitude_floor)
    wind, valid = loop_integrals(values, int(loop_size_px), amplitude_floor)
    charge = np.rint(np.where(valid, wind, 0.0)).astype(int)
    skipped = int(np.count_nonzero(np.isfinite(wind) & ~valid))

    h = int(loop_size_px) // 2
    labels, _ = ndimage.label(charge != 0)
    amp = np.abs(values)
    groups = []  # (rows, cols, charge)
    for lab, sl in enumerate(ndimage.find_objects(labels), start=1):
        rr, cc = np.nonzero(labels[sl] == lab)
        rr = rr + sl[0].start
        cc = cc + sl[1].start
        groups.append((rr, cc, _cluster_charge(calc, rr, cc, h, charge)))

    # merge detections closer than one loop diameter until none are left
    while len(groups) > 1:
        pos = np.array([_centroid(amp, rr, cc) for rr, cc, _ in groups])
        close = cdist(pos, pos) < loop_size_px
        n_comp, comp = connected_components(csr_matrix(close), directed=False)
        if n_comp == len(groups):
            break
        merged = []
        for k in range(n_comp):
            members = [g for g, c in zip(groups, comp) if c == k]
            if len(members) == 1:
                merged.append(members[0])
                continue
            rr = np.concatenate([g[0] for g in members])
            cc = np.concatenate([g[1] for g in members])
            merged.append((rr, cc, sum(g[2] for g in members)))
        groups = merged

    vortices = []
    for rr, cc, q in groups:
        if q == 0:
            continue
        x, y = _centroid(amp, rr, cc)
        vortices.append(Vortex(x, y, q))
    vortices.sort(key=lambda v: (v.y_px, v.x_px))
    return VortexMap(vortices, int(loop_size_px), float(amplitude_floor), skipped, values.shape)


def _centroid(amp, rr, cc):
    w = amp[rr, cc]
    if not w.sum() > 0:
        w = np.ones_like(w)
    return float(np.sum(w * cc) / w.sum()), float(np.sum(w * rr) / w.sum())


def _cluster_charge(calc, rr, cc, h, charge):
    """Winding around the rectangle enclosing every loop of a cluster.

    If that rectangle crosses masked pixels the most common loop charge of
    the cluster is used instead.
    """
    ny, nx = charge.shape
    top, bottom = max(int(rr.min()) - h, 0), min(int(rr.max()) + h, ny - 1)
    left, right = max(int(cc.min()) - h, 0), min(int(cc.max()) + h, nx - 1)
    if calc.masked_on_perimeter(top, bottom, left, right) == 0:
        return int(np.rint(calc.winding(top, bottom, left, right)))
    vals, counts = np.unique(charge[rr, cc], return_counts=True)
    return int(vals[np.argmax(counts)])


Region = Callable[[float, float], bool]


def disk_region(cx_px: float, cy_px: float, radius_px: float) -> Region:
    return lambda x, y: (x - cx_px) ** 2 + (y - cy_px) ** 2 <= radius_px**2


def box_region(x0: float, x1: float, y0: float, y1: float) -> Region:
    return lambda x, y: x0 <= x <= x1 and y0 <= y <= y1


def total_charge(vmap: VortexMap, region: Region | None = None) -> int:
    """Sum of charges of the vortices inside ``region`` (all vortices if None)."""
    return sum(v.charge for v in vmap.vortices if region is None or region(v.x_px, v.y_px))
