"""Minimal NIfTI-1 reader/writer for 3D volumes.

Supports single-file .nii and .nii.gz, both endiannesses, the common scalar
datatypes, and scl_slope/scl_inter rescaling on read. The volume kind
(intensity/map/mask) travels in the intent_name header field; masks are
written as uint8, everything else as float32. Written gzip streams carry a
zero mtime so identical volumes always produce identical bytes.

Voxel order on disk is x-fastest, as the format prescribes; the affine is
carried through untouched (no canonical reorientation).
"""

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    MalformedNiftiError,
    MissingMapError,
    UnsupportedDatatypeError,
    UnsupportedDimsError,
)
from .volume import Grid3D, QMRIMaps, Volume3D, validate_maps

HEADER_SIZE = 348
_MAGIC_SINGLE = b"n+1\x00"

# NIfTI datatype code -> numpy dtype character (endianness applied per file).
_DTYPES = {
    2: "u1",
    4: "i2",
    8: "i4",
    16: "f4",
    64: "f8",
    256: "i1",
    512: "u2",
    768: "u4",
}
_BITPIX = {2: 8, 4: 16, 8: 32, 16: 32, 64: 64, 256: 8, 512: 16, 768: 32}

_STRUCT_FIELDS = (
    "i",    # sizeof_hdr
    "10s",  # data_type (unused)
    "18s",  # db_name (unused)
    "i",    # extents
    "h",    # session_error
    "c",    # regular
    "B",    # dim_info
    "8h",   # dim
    "3f",   # intent_p1..p3
    "h",    # intent_code
    "h",    # datatype
    "h",    # bitpix
    "h",    # slice_start
    "8f",   # pixdim
    "f",    # vox_offset
    "f",    # scl_slope
    "f",    # scl_inter
    "h",    # slice_end
    "B",    # slice_code
    "B",    # xyzt_units
    "f",    # cal_max
    "f",    # cal_min
    "f",    # slice_duration
    "f",    # toffset
    "i",    # glmax
    "i",    # glmin
    "80s",  # descrip
    "24s",  # aux_file
    "h",    # qform_code
    "h",    # sform_code
    "3f",   # quatern_b, c, d
    "3f",   # qoffset_x, y, z
    "4f",   # srow_x
    "4f",   # srow_y
    "4f",   # srow_z
    "16s",  # intent_name
    "4s",   # magic
)
_STRUCT_FMT = "".join(_STRUCT_FIELDS)
assert struct.calcsize("<" + _STRUCT_FMT) == HEADER_SIZE


@dataclass(frozen=True)
class VolumeHeader:
    """Parsed geometry and typing information from a NIfTI-1 header."""

    shape: tuple[int, int, int]
    spacing: tuple[float, float, float]
    affine: np.ndarray
    datatype: str
    intent: str


def _read_bytes(path) -> bytes:
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(2)
        fh.seek(0)
        if head == b"\x1f\x8b":
            with gzip.GzipFile(fileobj=fh) as gz:
                return gz.read()
        return fh.read()


def _quaternion_rotation(b: float, c: float, d: float) -> np.ndarray:
    a = np.sqrt(max(0.0, 1.0 - (b * b + c * c + d * d)))
    return np.array(
        [
            [a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c)],
            [2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b)],
            [2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - b * b - c * c],
        ]
    )


# Indices into the regrouped header tuple (see _STRUCT_FIELDS order).
_F_DIM = 7
_F_DATATYPE = 10
_F_PIXDIM = 13
_F_VOX_OFFSET = 14
_F_SCL_SLOPE = 15
_F_SCL_INTER = 16
_F_QFORM = 28
_F_SFORM = 29
_F_QUATERN = 30
_F_QOFFSET = 31
_F_SROW_X = 32
_F_INTENT_NAME = 35
_F_MAGIC = 36


def _parse_header(raw: bytes, path):
    if len(raw) < HEADER_SIZE:
        raise MalformedNiftiError(f"{path}: file shorter than a NIfTI-1 header")

    endian = "<"
    (sizeof_hdr,) = struct.unpack_from("<i", raw, 0)
    if sizeof_hdr != HEADER_SIZE:
        endian = ">"
        (sizeof_hdr,) = struct.unpack_from(">i", raw, 0)
        if sizeof_hdr != HEADER_SIZE:
            raise MalformedNiftiError(f"{path}: sizeof_hdr is not 348")

    fields = _regroup(struct.unpack_from(endian + _STRUCT_FMT, raw, 0))
    dim = fields[_F_DIM]
    datatype = fields[_F_DATATYPE]
    pixdim = fields[_F_PIXDIM]
    vox_offset = fields[_F_VOX_OFFSET]
    scl_slope = fields[_F_SCL_SLOPE]
    scl_inter = fields[_F_SCL_INTER]
    qform_code = fields[_F_QFORM]
    sform_code = fields[_F_SFORM]
    quatern = fields[_F_QUATERN]
    qoffset = fields[_F_QOFFSET]
    srow_x, srow_y, srow_z = fields[_F_SROW_X : _F_SROW_X + 3]
    intent_name = fields[_F_INTENT_NAME]
    magic = fields[_F_MAGIC]

    if magic != _MAGIC_SINGLE:
        raise MalformedNiftiError(
            f"{path}: unsupported magic {magic!r} (only single-file NIfTI-1)"
        )
    if dim[0] != 3:
        raise UnsupportedDimsError(f"{path}: {dim[0]}-dimensional data, need 3")
    shape = tuple(int(n) for n in dim[1:4])
    if any(n < 1 for n in shape):
        raise MalformedNiftiError(f"{path}: non-positive dimension in {shape}")
    if datatype not in _DTYPES:
        raise UnsupportedDatatypeError(f"{path}: datatype code {datatype}")

    if sform_code > 0:
        affine = np.eye(4)
        affine[0] = srow_x
        affine[1] = srow_y
        affine[2] = srow_z
    elif qform_code > 0:
        qfac = -1.0 if pixdim[0] < 0 else 1.0
        rot = _quaternion_rotation(*quatern)
        affine = np.eye(4)
        affine[:3, :3] = rot @ np.diag([pixdim[1], pixdim[2], qfac * pixdim[3]])
        affine[:3, 3] = qoffset
    else:
        affine = np.diag([pixdim[1], pixdim[2], pixdim[3], 1.0])

    spacing = tuple(abs(float(p)) for p in pixdim[1:4])
    if any(s <= 0 for s in spacing):
        spacing = tuple(float(np.linalg.norm(affine[:3, ax])) for ax in range(3))
    if any(s <= 0 for s in spacing):
        raise MalformedNiftiError(f"{path}: no usable voxel spacing")

    intent = intent_name.split(b"\x00", 1)[0].decode("ascii", "ignore")
    header = VolumeHeader(shape, spacing, affine, _DTYPES[datatype], intent)
    return header, endian, datatype, float(vox_offset), (float(scl_slope), float(scl_inter))


def _regroup(fields):
    """Regroup the flat struct tuple into per-field values."""
    out = []
    i = 0
    for fmt in _STRUCT_FIELDS:
        count = int(fmt[:-1]) if len(fmt) > 1 else 1
        if fmt[-1] == "s" or count == 1:
            out.append(fields[i])
            i += 1
        else:
            out.append(tuple(fields[i : i + count]))
            i += count
    return out


def read_header(path) -> VolumeHeader:
    """Parse the header of a NIfTI-1 file without loading voxel data."""
    return _parse_header(_read_bytes(path), path)[0]


def read_nifti(path) -> Volume3D:
    """Load a 3D NIfTI-1 volume (.nii or .nii.gz)."""
    raw = _read_bytes(path)
    header, endian, datatype, vox_offset, (slope, inter) = _parse_header(raw, path)

    offset = int(round(vox_offset))
    if offset < HEADER_SIZE:
        raise MalformedNiftiError(f"{path}: vox_offset {vox_offset} before data")
    nvox = int(np.prod(header.shape))
    dtype = np.dtype(endian + _DTYPES[datatype])
    need = offset + nvox * dtype.itemsize
    if len(raw) < need:
        raise MalformedNiftiError(
            f"{path}: truncated data ({len(raw)} bytes, need {need})"
        )

    flat = np.frombuffer(raw, dtype=dtype, count=nvox, offset=offset)
    data = flat.reshape(header.shape, order="F").astype(np.float64)
    if slope not in (0.0, 1.0) or inter != 0.0:
        data = data * slope + inter

    grid = Grid3D(header.shape, header.spacing, header.affine)
    kind = header.intent if header.intent in ("intensity", "map", "mask") else "intensity"
    return Volume3D(grid, data.astype(np.float32), kind)


def _build_header(v: Volume3D, datatype: int) -> bytes:
    nx, ny, nz = v.grid.shape
    sx, sy, sz = v.grid.spacing
    affine = np.asarray(v.grid.affine, dtype=np.float64)
    values = (
        HEADER_SIZE,
        b"",
        b"",
        0,
        0,
        b"r",
        0,
        (3, nx, ny, nz, 1, 1, 1, 1),
        (0.0, 0.0, 0.0),
        0,
        datatype,
        _BITPIX[datatype],
        0,
        (1.0, sx, sy, sz, 0.0, 0.0, 0.0, 0.0),
        352.0,
        1.0,
        0.0,
        0,
        0,
        2,  # spatial units: millimetres
        0.0,
        0.0,
        0.0,
        0.0,
        0,
        0,
        b"qmrisim",
        b"",
        0,
        1,  # sform only
        (0.0, 0.0, 0.0),
        (0.0, 0.0, 0.0),
        tuple(float(x) for x in affine[0]),
        tuple(float(x) for x in affine[1]),
        tuple(float(x) for x in affine[2]),
        v.kind.encode("ascii"),
        _MAGIC_SINGLE,
    )
    flat = []
    for val in values:
        if isinstance(val, tuple):
            flat.extend(val)
        else:
            flat.append(val)
    return struct.pack("<" + _STRUCT_FMT, *flat)


def write_nifti(v: Volume3D, path) -> None:
    """Write a volume as single-file NIfTI-1; gzip when the path ends .gz.

    Masks are stored as uint8, other kinds as little-endian float32. Gzip
    output uses a fixed zero mtime so the bytes depend only on the volume.
    """
    path = Path(path)
    if v.kind == "mask":
        datatype = 2
        payload = v.data.astype(np.uint8).ravel(order="F").tobytes()
    else:
        datatype = 16
        payload = v.data.astype("<f4").ravel(order="F").tobytes()

    blob = _build_header(v, datatype) + b"\x00\x00\x00\x00" + payload
    if path.name.endswith(".gz"):
        # filename="" and mtime=0 keep the stream a pure function of the volume
        with open(path, "wb") as fh:
            with gzip.GzipFile(filename="", fileobj=fh, mode="wb", mtime=0) as gz:
                gz.write(blob)
    else:
        path.write_bytes(blob)


_MAP_NAMES = ("pd", "r1", "r2", "mt", "b1")


def _locate(directory: Path, name: str) -> Path | None:
    for suffix in (".nii.gz", ".nii"):
        candidate = directory / f"{name}{suffix}"
        if candidate.exists():
            return candidate
    return None


def read_qmri_set(source) -> QMRIMaps:
    """Load and validate a quantitative map set.

    `source` is either a directory containing pd/r1/r2[/mt/b1].nii[.gz], or a
    mapping from those names to file paths. pd, r1 and r2 are required.
    """
    if isinstance(source, (str, Path)):
        directory = Path(source)
        paths = {name: _locate(directory, name) for name in _MAP_NAMES}
        paths = {name: p for name, p in paths.items() if p is not None}
    else:
        paths = {name: Path(p) for name, p in dict(source).items()}
        unknown = set(paths) - set(_MAP_NAMES)
        if unknown:
            raise MissingMapError(f"unknown map names: {sorted(unknown)}")

    for required in ("pd", "r1", "r2"):
        if required not in paths:
            raise MissingMapError(f"required map '{required}' not found in {source}")

    volumes = {}
    for name, p in paths.items():
        vol = read_nifti(p)
        volumes[name] = Volume3D(vol.grid, vol.data, "map")

    maps = QMRIMaps(
        pd=volumes["pd"],
        r1=volumes["r1"],
        r2=volumes["r2"],
        mt=volumes.get("mt"),
        b1=volumes.get("b1"),
    )
    validate_maps(maps)
    return maps
