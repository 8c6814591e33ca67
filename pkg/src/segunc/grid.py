"""Volumetric data model.

Grids wrap a read-only 3D numpy array indexed ``[x, y, z]`` together with the
voxel spacing in mm.  The flat linearization used by file formats and
brute-force oracles is x-fastest, i.e. ``values.ravel(order="F")``.

Arrays with fewer than three axes are accepted and padded with trailing
singleton axes, so ``ScalarGrid(np.arange(5.0))`` is a 5x1x1 volume.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    ConstantField,
    GeometryMismatch,
    InputError,
    RangeViolation,
    UnknownClass,
)

SPACING_RTOL = 1e-6


@dataclass(frozen=True)
class GridMeta:
    dims: tuple[int, int, int]
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        spacing = tuple(float(s) for s in self.spacing)
        if len(dims) != 3 or len(spacing) != 3:
            raise InputError(f"expected 3 dims and 3 spacings, got {dims} / {spacing}")
        if any(d < 1 for d in dims):
            raise InputError(f"dims must be positive, got {dims}")
        if not all(np.isfinite(s) and s > 0 for s in spacing):
            raise InputError(f"spacing must be finite and > 0, got {spacing}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "spacing", spacing)

    @property
    def size(self) -> int:
        return self.dims[0] * self.dims[1] * self.dims[2]

    def compatible(self, other: "GridMeta") -> bool:
        if self.dims != other.dims:
            return False
        return all(
            abs(a - b) <= SPACING_RTOL * max(abs(a), abs(b))
            for a, b in zip(self.spacing, other.spacing)
        )


def _as_volume(values) -> np.ndarray:
    arr = np.asarray(values)
    if arr.ndim > 3:
        raise InputError(f"expected at most 3 axes, got shape {arr.shape}")
    while arr.ndim < 3:
        arr = arr[..., np.newaxis]
    return arr


class _Grid:
    """Shared plumbing: holds an immutable array and its geometry."""

    __slots__ = ("values", "meta")

    def __init__(self, values: np.ndarray, meta: GridMeta):
        if values.shape != meta.dims:
            raise InputError(f"value shape {values.shape} does not match dims {meta.dims}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "meta", meta)

    def __setattr__(self, name, value):
        raise AttributeError(f"{type(self).__name__} is immutable")

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.meta.dims

    @property
    def spacing(self) -> tuple[float, float, float]:
        return self.meta.spacing

    def flat(self) -> np.ndarray:
        """x-fastest linearization of the values."""
        return self.values.ravel(order="F")

    def __repr__(self):
        return f"{type(self).__name__}(dims={self.meta.dims}, spacing={self.meta.spacing})"


def _resolve_meta(arr: np.ndarray, spacing, meta: GridMeta | None) -> GridMeta:
    if meta is not None:
        return meta
    return GridMeta(arr.shape, spacing)


class ScalarGrid(_Grid):
    """Real-valued field (uncertainty, distance, smoothed maps).

    Values are held in float64 and must be finite.
    """

    __slots__ = ()

    def __init__(self, values, spacing: Sequence[float] = (1.0, 1.0, 1.0), meta: GridMeta | None = None):
        arr = np.array(_as_volume(values), dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise InputError("scalar grid contains NaN or Inf")
        super().__init__(arr, _resolve_meta(arr, spacing, meta))


class UncertaintyGrid(ScalarGrid):
    """Scalar field restricted to [0, 1]; larger means less confident."""

    __slots__ = ()

    def __init__(self, values, spacing: Sequence[float] = (1.0, 1.0, 1.0), meta: GridMeta | None = None):
        super().__init__(values, spacing, meta)
        if self.values.min() < 0.0 or self.values.max() > 1.0:
            raise RangeViolation(
                f"uncertainty values must lie in [0, 1], got [{self.values.min()}, {self.values.max()}]"
            )


class BinaryGrid(_Grid):
    __slots__ = ()

    def __init__(self, values, spacing: Sequence[float] = (1.0, 1.0, 1.0), meta: GridMeta | None = None):
        arr = _as_volume(values)
        if arr.dtype != np.bool_:
            if arr.size and not np.all((arr == 0) | (arr == 1)):
                raise InputError("binary grid values must be 0 or 1")
            arr = arr.astype(bool)
        else:
            arr = arr.copy()
        super().__init__(arr, _resolve_meta(arr, spacing, meta))

    def count(self) -> int:
        return int(np.count_nonzero(self.values))


class LabelGrid(_Grid):
    """Integer class labels in ``[0, n_classes)``."""

    __slots__ = ("n_classes",)

    def __init__(
        self,
        values,
        spacing: Sequence[float] = (1.0, 1.0, 1.0),
        n_classes: int | None = None,
        meta: GridMeta | None = None,
    ):
        arr = _as_volume(values)
        if arr.dtype.kind == "f":
            if not np.all(np.isfinite(arr)) or not np.all(arr == np.round(arr)):
                raise InputError("label grid contains non-integer values")
        elif arr.dtype.kind not in "biu":
            raise InputError(f"unsupported label dtype {arr.dtype}")
        arr = arr.astype(np.int32)
        if arr.min() < 0:
            raise InputError("labels must be non-negative")
        top = int(arr.max()) + 1
        if n_classes is None:
            n_classes = max(top, 2)
        elif top > n_classes:
            raise UnknownClass(f"label {top - 1} exceeds declared class count {n_classes}")
        super().__init__(arr, _resolve_meta(arr, spacing, meta))
        object.__setattr__(self, "n_classes", int(n_classes))


def check_compatible(*grids: _Grid) -> GridMeta:
    """Return the shared meta or raise :class:`GeometryMismatch`."""
    first = grids[0].meta
    for g in grids[1:]:
        if not first.compatible(g.meta):
            raise GeometryMismatch(f"grid geometry differs: {first} vs {g.meta}")
    return first


def error_map(pred: LabelGrid, gt: LabelGrid) -> BinaryGrid:
    """Voxel-wise label disagreement between prediction and ground truth."""
    meta = check_compatible(pred, gt)
    return BinaryGrid(pred.values != gt.values, meta=meta)


def normalize_uncertainty(raw: ScalarGrid, method: str = "minmax") -> UncertaintyGrid:
    """Map a raw uncertainty field into [0, 1].

    Parameters
    ----------
    raw : ScalarGrid
        Unnormalized uncertainty (variance, entropy, ...).
    method : {"minmax", "clamp", "identity"}
        ``minmax`` rescales affinely so the field spans exactly [0, 1];
        ``clamp`` truncates; ``identity`` only validates the range.
    """
    v = raw.values
    if method == "minmax":
        lo, hi = float(v.min()), float(v.max())
        if not hi > lo:
            raise ConstantField("min-max normalization of a constant field")
        out = (v - lo) / (hi - lo)
        # guard the endpoints against rounding
        out = np.clip(out, 0.0, 1.0)
    elif method == "clamp":
        out = np.clip(v, 0.0, 1.0)
    elif method == "identity":
        if v.min() < 0.0 or v.max() > 1.0:
            raise RangeViolation(f"values outside [0, 1]: [{v.min()}, {v.max()}]")
        out = v
    else:
        raise InputError(f"unknown normalization method {method!r}")
    return UncertaintyGrid(out, meta=raw.meta)


def foreground_mask(labels: LabelGrid, classes: Iterable[int]) -> BinaryGrid:
    classes = sorted({int(c) for c in classes})
    if not classes:
        raise InputError("foreground class set must be non-empty")
    bad = [c for c in classes if c < 0 or c >= labels.n_classes]
    if bad:
        raise UnknownClass(f"classes {bad} outside [0, {labels.n_classes})")
    return BinaryGrid(np.isin(labels.values, classes), meta=labels.meta)
