"""Spatial substrate: surfaces, exact Euclidean distance transform, HD95,
distance bands and separable Gaussian smoothing.

All distances are measured between voxel centres in mm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np
from scipy import ndimage

from .errors import EmptySurface, InputError, InvalidBandSpec, InvalidSigma
from .grid import BinaryGrid, ScalarGrid, check_compatible

SENTINEL = -1
DEFAULT_EDGES = (0.0, 1.0, 2.0, 4.0, 8.0, math.inf)


def surface(mask: BinaryGrid) -> BinaryGrid:
    """Inner surface under 6-connectivity.

    A foreground voxel is on the surface when any face neighbour is
    background or lies outside the volume.
    """
    m = mask.values
    padded = np.pad(m, 1, mode="constant", constant_values=False)
    interior = np.ones_like(m)
    for axis in range(3):
        for step in (-1, 1):
            interior &= np.roll(padded, step, axis=axis)[1:-1, 1:-1, 1:-1]
    return BinaryGrid(m & ~interior, meta=mask.meta)


# --- exact squared EDT (lower envelope of parabolas, one line at a time) ---

@numba.njit(cache=True, nogil=True)
def _envelope_line(f, s2, out, v, z):
    n = f.shape[0]
    k = -1
    for q in range(n):
        fq = f[q]
        if fq == np.inf:
            continue
        if k < 0:
            k = 0
            v[0] = q
            z[0] = -np.inf
            z[1] = np.inf
            continue
        while True:
            p = v[k]
            s = ((fq + s2 * q * q) - (f[p] + s2 * p * p)) / (2.0 * s2 * (q - p))
            if s <= z[k]:
                k -= 1
            else:
                break
        k += 1
        v[k] = q
        z[k] = s
        z[k + 1] = np.inf
    if k < 0:
        for x in range(n):
            out[x] = np.inf
        return
    j = 0
    for x in range(n):
        while z[j + 1] < x:
            j += 1
        d = x - v[j]
        out[x] = s2 * d * d + f[v[j]]


@numba.njit(cache=True, nogil=True)
def _envelope_rows(f, s2):
    m, n = f.shape
    out = np.empty_like(f)
    v = np.empty(n, dtype=np.int64)
    z = np.empty(n + 1, dtype=np.float64)
    for r in range(m):
        _envelope_line(f[r], s2, out[r], v, z)
    return out


def squared_edt(seeds: np.ndarray, spacing) -> np.ndarray:
    """Squared Euclidean distance (mm^2) from every voxel to the nearest seed.

    One exact 1D lower-envelope pass per axis; voxels of an empty seed set
    stay at +inf.
    """
    f = np.where(seeds, 0.0, np.inf)
    for axis, s in enumerate(spacing):
        moved = np.ascontiguousarray(np.moveaxis(f, axis, -1))
        shape = moved.shape
        rows = _envelope_rows(moved.reshape(-1, shape[-1]), float(s) ** 2)
        f = np.moveaxis(rows.reshape(shape), -1, axis)
    return np.ascontiguousarray(f)


def distance_field(surf: BinaryGrid, spacing=None) -> ScalarGrid:
    """Unsigned distance (mm) from every voxel to the nearest surface voxel."""
    if not surf.values.any():
        raise EmptySurface("distance field of an empty surface")
    spacing = surf.spacing if spacing is None else tuple(float(s) for s in spacing)
    return ScalarGrid(np.sqrt(squared_edt(surf.values, spacing)), meta=surf.meta)


def hd95(
    surface_a: BinaryGrid,
    surface_b: BinaryGrid,
    spacing=None,
    *,
    dist_a: ScalarGrid | None = None,
    dist_b: ScalarGrid | None = None,
) -> float:
    """Symmetric 95th-percentile Hausdorff distance between two surfaces.

    Each directed term is the linearly interpolated 95th percentile of the
    distances from one surface's voxels to the other surface.  Precomputed
    distance fields can be passed to avoid recomputing them.
    """
    check_compatible(surface_a, surface_b)
    if not surface_a.values.any() or not surface_b.values.any():
        raise EmptySurface("hd95 requires two non-empty surfaces")
    if dist_a is None:
        dist_a = distance_field(surface_a, spacing)
    if dist_b is None:
        dist_b = distance_field(surface_b, spacing)
    a_to_b = np.percentile(dist_b.values[surface_a.values], 95)
    b_to_a = np.percentile(dist_a.values[surface_b.values], 95)
    return float(max(a_to_b, b_to_a))


def region_within(surf: BinaryGrid, radius: float, spacing=None, *, dist: ScalarGrid | None = None) -> BinaryGrid:
    """Voxels (on either side of the boundary) within ``radius`` mm of it."""
    if radius < 0 or not np.isfinite(radius):
        raise InputError(f"radius must be finite and >= 0, got {radius}")
    if dist is None:
        dist = distance_field(surf, spacing)
    return BinaryGrid(dist.values <= radius, meta=surf.meta)


@dataclass(frozen=True)
class BandSpec:
    """Half-open distance bands ``[edges[i], edges[i+1])`` in mm."""

    edges: tuple[float, ...] = DEFAULT_EDGES

    def __post_init__(self):
        edges = tuple(float(e) for e in self.edges)
        if len(edges) < 2:
            raise InvalidBandSpec("need at least two edges (one band)")
        if edges[0] != 0.0:
            raise InvalidBandSpec(f"first edge must be 0, got {edges[0]}")
        if any(math.isnan(e) for e in edges) or any(b <= a for a, b in zip(edges, edges[1:])):
            raise InvalidBandSpec(f"edges must be strictly increasing: {edges}")
        if any(math.isinf(e) for e in edges[:-1]):
            raise InvalidBandSpec("only the last edge may be infinite")
        object.__setattr__(self, "edges", edges)

    @property
    def n_bands(self) -> int:
        return len(self.edges) - 1


@dataclass(frozen=True)
class BandField:
    band_index: np.ndarray
    counts: np.ndarray
    mean_distance: np.ndarray
    weights: np.ndarray
    spec: BandSpec
    delta: float

    @property
    def n_bands(self) -> int:
        return self.spec.n_bands


def band_partition(
    dist: ScalarGrid,
    spec: BandSpec | None = None,
    domain: BinaryGrid | None = None,
    delta: float = 1.0,
) -> BandField:
    """Assign voxels to distance bands and derive inverse-distance weights.

    ``w_i`` is proportional to ``1 / (mean_distance_i + delta)`` over the
    non-empty bands and normalized to sum to one; empty bands get zero.
    Voxels outside ``domain`` or beyond a finite last edge get ``SENTINEL``.
    """
    spec = BandSpec() if spec is None else spec
    if delta < 0:
        raise InvalidBandSpec(f"weight regularizer must be >= 0, got {delta}")
    d = dist.values
    if d.min() < 0:
        raise InputError("distances must be non-negative")
    edges = np.asarray(spec.edges)
    idx = np.searchsorted(edges, d, side="right") - 1
    idx[idx >= spec.n_bands] = SENTINEL
    if domain is not None:
        check_compatible(dist, domain)
        idx[~domain.values] = SENTINEL
    idx = idx.astype(np.int32)

    inside = idx != SENTINEL
    k = spec.n_bands
    counts = np.bincount(idx[inside], minlength=k).astype(np.int64)
    sums = np.bincount(idx[inside], weights=d[inside], minlength=k)
    mean_distance = np.zeros(k)
    nonempty = counts > 0
    mean_distance[nonempty] = sums[nonempty] / counts[nonempty]
    raw = np.zeros(k)
    with np.errstate(divide="ignore"):
        raw[nonempty] = 1.0 / (mean_distance[nonempty] + delta)
    if nonempty.any():
        if not np.all(np.isfinite(raw)):
            raise InvalidBandSpec("zero mean distance with delta = 0 gives an infinite weight")
        weights = raw / raw.sum()
    else:
        weights = raw
    idx.setflags(write=False)
    return BandField(idx, counts, mean_distance, weights, spec, float(delta))


@dataclass(frozen=True)
class SmoothingSpec:
    sigma: float = 2.0
    unit: str = "voxels"
    truncation: float = 4.0
    border: str = "reflect"

    def __post_init__(self):
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise InvalidSigma(f"sigma must be > 0, got {self.sigma}")
        if self.unit not in ("voxels", "mm"):
            raise InvalidSigma(f"unknown sigma unit {self.unit!r}")
        if not self.truncation > 0:
            raise InvalidSigma(f"truncation must be > 0, got {self.truncation}")
        if self.border != "reflect":
            raise InvalidSigma(f"unsupported border policy {self.border!r}")

    def axis_sigmas(self, spacing) -> tuple[float, float, float]:
        if self.unit == "voxels":
            return (self.sigma,) * 3
        return tuple(self.sigma / s for s in spacing)


def gaussian_kernel(sigma: float, truncation: float = 4.0) -> np.ndarray:
    """Sampled 1D Gaussian on integer offsets, radius ``ceil(truncation*sigma)``."""
    radius = int(math.ceil(truncation * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    w = np.exp(-0.5 * (x / sigma) ** 2)
    return w / w.sum()


def gaussian_smooth(grid: ScalarGrid, spec: SmoothingSpec | None = None) -> ScalarGrid:
    """Separable Gaussian smoothing with half-sample symmetric borders."""
    spec = SmoothingSpec() if spec is None else spec
    out = grid.values
    for axis, sigma in enumerate(spec.axis_sigmas(grid.spacing)):
        kernel = gaussian_kernel(sigma, spec.truncation)
        if kernel.size == 1:
            continue
        # scipy's "reflect" is the half-sample symmetric extension (d c b a | a b c d)
        out = ndimage.correlate1d(out, kernel, axis=axis, mode="reflect")
    return ScalarGrid(out, meta=grid.meta)
