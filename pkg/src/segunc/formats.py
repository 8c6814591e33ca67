"""Volume file formats: NIfTI-1 (single file, optionally gzipped), NPY and
raw little-endian float32 with a JSON sidecar.

Readers never guess: anything malformed raises a :class:`FormatError`
subclass before a grid is built.  Only ``dim`` and ``pixdim`` of the NIfTI
header are honoured; orientation fields are parsed but ignored.
"""

from __future__ import annotations

import gzip
import io
import json
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.lib import format as npy_format

from .errors import (
    BadHeader,
    BadMagic,
    DimMismatch,
    FormatError,
    FortranOrderUnsupported,
    InputError,
    TruncatedPayload,
    UnsupportedDatatype,
)
from .grid import GridMeta, LabelGrid, ScalarGrid, _Grid

NIFTI_HEADER_SIZE = 348
NIFTI_VOX_OFFSET = 352
NIFTI_MAGIC = b"n+1\x00"

# NIfTI datatype code -> numpy type
NIFTI_DTYPES = {
    2: np.uint8,
    4: np.int16,
    8: np.int32,
    16: np.float32,
    64: np.float64,
}
NIFTI_CODES = {np.dtype(v): k for k, v in NIFTI_DTYPES.items()}

NPY_DTYPES = {"f4", "f8", "u1", "i2", "i4", "b1"}


@dataclass(frozen=True)
class Volume:
    meta: GridMeta
    values: np.ndarray  # [x, y, z]
    datatype: str


def _open_bytes(path: Path) -> bytes:
    raw = Path(path).read_bytes()
    if raw[:2] == b"\x1f\x8b":
        try:
            return gzip.decompress(raw)
        except (EOFError, OSError, zlib.error) as exc:
            raise TruncatedPayload(f"{path}: corrupt or truncated gzip stream ({exc})") from None
    return raw


# --- NIfTI-1 ---

def _nifti_endian(hdr: bytes) -> str:
    if len(hdr) < NIFTI_HEADER_SIZE:
        raise BadMagic(f"file too short for a NIfTI-1 header ({len(hdr)} bytes)")
    for e in "<>":
        if struct.unpack(e + "i", hdr[:4])[0] == NIFTI_HEADER_SIZE:
            return e
    raise BadMagic("sizeof_hdr is not 348")


def read_nifti1(path) -> Volume:
    """Parse a single-file NIfTI-1 volume (``.nii`` or ``.nii.gz``)."""
    path = Path(path)
    data = _open_bytes(path)
    e = _nifti_endian(data)
    if data[344:348] != NIFTI_MAGIC:
        raise BadMagic(f"{path}: magic {data[344:348]!r} is not single-file NIfTI-1 'n+1'")

    dim = struct.unpack(e + "8h", data[40:56])
    datatype, bitpix = struct.unpack(e + "2h", data[70:74])
    pixdim = struct.unpack(e + "8f", data[76:108])
    vox_offset, scl_slope, scl_inter = struct.unpack(e + "3f", data[108:120])

    ndim = dim[0]
    if not 1 <= ndim <= 7:
        raise DimMismatch(f"{path}: dim[0] = {ndim} out of range")
    dims = list(dim[1 : ndim + 1]) + [1] * (3 - ndim)
    if any(d < 1 for d in dims):
        raise DimMismatch(f"{path}: non-positive dimension in {dims}")
    if ndim > 3 and any(d != 1 for d in dims[3:]):
        raise DimMismatch(f"{path}: only 3D volumes are supported, got dims {dims}")
    dims = tuple(dims[:3])

    if datatype not in NIFTI_DTYPES:
        raise UnsupportedDatatype(f"{path}: NIfTI datatype code {datatype}")
    dtype = np.dtype(NIFTI_DTYPES[datatype]).newbyteorder(e)
    if bitpix != dtype.itemsize * 8:
        raise BadHeader(f"{path}: bitpix {bitpix} inconsistent with datatype {datatype}")

    # pixdim is float32 on disk; its shortest decimal form recovers e.g. 0.8 exactly
    spacing = tuple(float(str(np.float32(abs(p)))) for p in pixdim[1:4])
    spacing = tuple(s if s > 0 else 1.0 for s in spacing[: min(ndim, 3)]) + (1.0,) * (3 - min(ndim, 3))

    offset = int(vox_offset)
    if offset < NIFTI_HEADER_SIZE:
        raise BadHeader(f"{path}: vox_offset {vox_offset} inside the header")
    count = dims[0] * dims[1] * dims[2]
    nbytes = count * dtype.itemsize
    if len(data) < offset + nbytes:
        raise TruncatedPayload(f"{path}: expected {nbytes} payload bytes, found {max(len(data) - offset, 0)}")
    flat = np.frombuffer(data, dtype=dtype, count=count, offset=offset)
    values = flat.reshape(dims, order="F").astype(dtype.newbyteorder("="))

    if np.isfinite(scl_slope) and scl_slope != 0 and (scl_slope != 1 or scl_inter != 0):
        values = values.astype(np.float64) * float(scl_slope) + float(scl_inter)
    return Volume(GridMeta(dims, spacing), values, np.dtype(NIFTI_DTYPES[datatype]).name)


def _nifti_header(meta: GridMeta, dtype: np.dtype) -> bytes:
    hdr = bytearray(NIFTI_VOX_OFFSET)
    struct.pack_into("<i", hdr, 0, NIFTI_HEADER_SIZE)
    hdr[38] = ord("r")
    struct.pack_into("<8h", hdr, 40, 3, *meta.dims, 1, 1, 1, 1)
    struct.pack_into("<2h", hdr, 70, NIFTI_CODES[dtype], dtype.itemsize * 8)
    struct.pack_into("<8f", hdr, 76, 1.0, *meta.spacing, 0.0, 0.0, 0.0, 0.0)
    struct.pack_into("<3f", hdr, 108, float(NIFTI_VOX_OFFSET), 1.0, 0.0)
    hdr[123] = 2  # xyzt_units: mm
    struct.pack_into("<2h", hdr, 252, 0, 1)  # qform_code, sform_code
    sx, sy, sz = meta.spacing
    struct.pack_into("<12f", hdr, 280, sx, 0, 0, 0, 0, sy, 0, 0, 0, 0, sz, 0)
    hdr[344:348] = NIFTI_MAGIC
    return bytes(hdr)


def write_nifti1(path, grid: _Grid, dtype=None) -> Path:
    """Minimal single-file NIfTI-1 writer; gzips when the name ends in ``.gz``.

    Gzip output carries no timestamp or file name, so identical volumes give
    identical files.
    """
    path = Path(path)
    dtype = np.dtype(dtype if dtype is not None else _storage_dtype(grid))
    if dtype not in NIFTI_CODES:
        raise UnsupportedDatatype(f"cannot store {dtype} in NIfTI-1")
    payload = np.asarray(grid.values, dtype=dtype.newbyteorder("<")).tobytes(order="F")
    blob = _nifti_header(grid.meta, dtype) + payload
    if path.name.endswith(".gz"):
        blob = gzip.compress(blob, mtime=0)
    path.write_bytes(blob)
    return path


def _storage_dtype(grid: _Grid) -> np.dtype:
    v = grid.values
    if isinstance(grid, LabelGrid) or v.dtype == np.bool_:
        top = int(v.max()) if v.size else 0
        return np.dtype(np.uint8 if top < 256 else np.int16 if top < 32768 else np.int32)
    as32 = v.astype(np.float32)
    return np.dtype(np.float32 if np.array_equal(as32.astype(v.dtype), v) else np.float64)


# --- NPY ---

def _sidecar(path: Path) -> Path:
    return path.with_suffix(".json")


def _read_sidecar(path: Path) -> dict | None:
    side = _sidecar(path)
    if not side.exists():
        return None
    try:
        return json.loads(side.read_text())
    except json.JSONDecodeError as exc:
        raise BadHeader(f"{side}: invalid JSON sidecar ({exc})") from None


def _sidecar_spacing(info: dict | None, where) -> tuple[float, float, float]:
    if not info or "spacing" not in info:
        return (1.0, 1.0, 1.0)
    sp = info["spacing"]
    if not (isinstance(sp, list) and len(sp) == 3):
        raise BadHeader(f"{where}: sidecar spacing must be a list of 3 numbers")
    return tuple(float(s) for s in sp)


def read_npy(path) -> Volume:
    """Read a 3D C-order NPY (v1 or v2) array, spacing from an optional sidecar."""
    path = Path(path)
    f = io.BytesIO(path.read_bytes())
    try:
        version = npy_format.read_magic(f)
    except ValueError as exc:
        raise BadHeader(f"{path}: {exc}") from None
    try:
        if version == (1, 0):
            shape, fortran, dtype = npy_format.read_array_header_1_0(f)
        elif version == (2, 0):
            shape, fortran, dtype = npy_format.read_array_header_2_0(f)
        else:
            raise BadHeader(f"{path}: unsupported NPY version {version}")
    except ValueError as exc:
        raise BadHeader(f"{path}: {exc}") from None
    if fortran:
        raise FortranOrderUnsupported(f"{path}: Fortran-ordered arrays are not supported")
    if len(shape) != 3:
        raise BadHeader(f"{path}: expected a 3D array, got shape {shape}")
    if dtype.byteorder == ">" or f"{dtype.kind}{dtype.itemsize}" not in NPY_DTYPES:
        raise UnsupportedDatatype(f"{path}: dtype {dtype.str}")
    count = int(np.prod(shape))
    buf = f.read()
    if len(buf) < count * dtype.itemsize:
        raise TruncatedPayload(f"{path}: expected {count * dtype.itemsize} payload bytes, found {len(buf)}")
    values = np.frombuffer(buf, dtype=dtype, count=count).reshape(shape)
    spacing = _sidecar_spacing(_read_sidecar(path), path)
    return Volume(GridMeta(shape, spacing), values.copy(), dtype.name)


def write_npy(path, grid: _Grid, dtype=None, sidecar: bool = True) -> Path:
    path = Path(path)
    dtype = np.dtype(dtype if dtype is not None else _storage_dtype(grid))
    np.save(path, np.ascontiguousarray(grid.values, dtype=dtype.newbyteorder("<")), allow_pickle=False)
    if sidecar and grid.spacing != (1.0, 1.0, 1.0):
        _sidecar(path).write_text(json.dumps({"spacing": list(grid.spacing)}))
    return path


# --- raw float32 + sidecar ---

def read_raw(path) -> Volume:
    path = Path(path)
    info = _read_sidecar(path)
    if info is None or "dims" not in info:
        raise BadHeader(f"{path}: raw volumes need a JSON sidecar with 'dims'")
    dims = info["dims"]
    if not (isinstance(dims, list) and len(dims) == 3 and all(isinstance(d, int) and d > 0 for d in dims)):
        raise DimMismatch(f"{path}: sidecar dims must be 3 positive integers, got {dims}")
    meta = GridMeta(dims, _sidecar_spacing(info, path))
    data = path.read_bytes()
    if len(data) != meta.size * 4:
        raise TruncatedPayload(f"{path}: expected {meta.size * 4} bytes, found {len(data)}")
    values = np.frombuffer(data, dtype="<f4").reshape(meta.dims, order="F").astype(np.float32)
    return Volume(meta, values, "float32")


def write_raw(path, grid: _Grid) -> Path:
    path = Path(path)
    path.write_bytes(np.asarray(grid.values, dtype="<f4").tobytes(order="F"))
    _sidecar(path).write_text(json.dumps({"dims": list(grid.meta.dims), "spacing": list(grid.spacing)}))
    return path


# --- format dispatch ---

def detect_format(path) -> str:
    name = Path(path).name.lower()
    if name.endswith(".nii") or name.endswith(".nii.gz"):
        return "nifti1"
    if name.endswith(".npy"):
        return "npy"
    if name.endswith(".raw"):
        return "raw"
    raise InputError(f"cannot infer volume format from file name {path!s}")


READERS = {"nifti1": read_nifti1, "npy": read_npy, "raw": read_raw}
WRITERS = {"nifti1": write_nifti1, "npy": write_npy, "raw": write_raw}


def read_volume(path, fmt: str | None = None) -> Volume:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"no such file: {path}")
    fmt = fmt or detect_format(path)
    if fmt not in READERS:
        raise InputError(f"unknown volume format {fmt!r}")
    return READERS[fmt](path)


def load_volume(path, role: str = "scalar", fmt: str | None = None):
    """Read a file and build a :class:`LabelGrid` or :class:`ScalarGrid`."""
    vol = read_volume(path, fmt)
    if role == "labels":
        try:
            return LabelGrid(vol.values, meta=vol.meta)
        except InputError as exc:
            raise FormatError(f"{path}: not a label volume ({exc})") from None
    if role == "scalar":
        return ScalarGrid(vol.values, meta=vol.meta)
    raise InputError(f"unknown volume role {role!r}")


def save_volume(path, grid: _Grid, fmt: str | None = None) -> Path:
    fmt = fmt or detect_format(path)
    if fmt not in WRITERS:
        raise InputError(f"unknown volume format {fmt!r}")
    return WRITERS[fmt](path, grid)
