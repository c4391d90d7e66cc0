"""3D volume and quantitative-map data model.

A :class:`Volume3D` is an immutable 3D scalar field on a :class:`Grid3D`.
Voxel data is stored as 32-bit floats indexed ``data[x, y, z]``; the declared
serialization order is x-fastest (Fortran ravel of that indexing), matching
the on-disk layout of NIfTI. Metric-style accumulations elsewhere in the
package are performed in 64-bit.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    GridMismatchError,
    InvalidGridError,
    MTOutOfRangeError,
    NegativePDError,
    NonBinaryMaskError,
    NonPositiveRateError,
    OutOfBoundsError,
)

VOLUME_KINDS = ("intensity", "map", "mask")


def _as_triple(value, caster, name):
    t = tuple(caster(v) for v in value)
    if len(t) != 3:
        raise InvalidGridError(f"{name} must have exactly 3 entries, got {len(t)}")
    return t


@dataclass(frozen=True, eq=False)
class Grid3D:
    """Voxel lattice geometry: shape, spacing (mm) and voxel-to-world affine."""

    shape: tuple[int, int, int]
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    affine: np.ndarray | None = None

    def __post_init__(self):
        shape = _as_triple(self.shape, int, "shape")
        spacing = _as_triple(self.spacing, float, "spacing")
        if any(n < 1 for n in shape):
            raise InvalidGridError(f"all shape entries must be >= 1, got {shape}")
        if any(s <= 0 for s in spacing):
            raise InvalidGridError(f"all spacing entries must be > 0, got {spacing}")
        if self.affine is None:
            affine = np.diag([*spacing, 1.0])
        else:
            affine = np.array(self.affine, dtype=np.float64)
        if affine.shape != (4, 4):
            raise InvalidGridError(f"affine must be 4x4, got {affine.shape}")
        if abs(float(np.linalg.det(affine))) == 0.0:
            raise InvalidGridError("affine is singular")
        affine.setflags(write=False)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "affine", affine)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Grid3D):
            return NotImplemented
        return (
            self.shape == other.shape
            and self.spacing == other.spacing
            and bool(np.array_equal(self.affine, other.affine))
        )

    __hash__ = None

    @property
    def n_voxels(self) -> int:
        nx, ny, nz = self.shape
        return nx * ny * nz


@dataclass(frozen=True, eq=False)
class Volume3D:
    """Immutable scalar field over a grid; kind is intensity, map or mask."""

    grid: Grid3D
    data: np.ndarray
    kind: str = "intensity"

    def __post_init__(self):
        if self.kind not in VOLUME_KINDS:
            raise ValueError(f"kind must be one of {VOLUME_KINDS}, got {self.kind!r}")
        data = np.ascontiguousarray(self.data, dtype=np.float32)
        if data.shape != self.grid.shape:
            raise ValueError(
                f"data shape {data.shape} does not match grid shape {self.grid.shape}"
            )
        if self.kind == "mask" and not np.all((data == 0.0) | (data == 1.0)):
            raise NonBinaryMaskError("mask volumes may contain only 0 or 1")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    def with_data(self, data, kind: str | None = None) -> "Volume3D":
        """New volume on the same grid with replaced voxel data."""
        return Volume3D(self.grid, data, self.kind if kind is None else kind)


@dataclass(frozen=True, eq=False)
class QMRIMaps:
    """Co-registered quantitative maps. pd/r1/r2 required, mt/b1 optional.

    r2 is interpreted as the effective transverse rate (R2*) by the
    gradient-echo model. Absent mt acts as 0 and absent b1 as 1 during
    simulation, so both factors are neutral when not provided.
    """

    pd: Volume3D
    r1: Volume3D
    r2: Volume3D
    mt: Volume3D | None = None
    b1: Volume3D | None = None

    @property
    def grid(self) -> Grid3D:
        return self.pd.grid

    def present(self):
        out = [("pd", self.pd), ("r1", self.r1), ("r2", self.r2)]
        if self.mt is not None:
            out.append(("mt", self.mt))
        if self.b1 is not None:
            out.append(("b1", self.b1))
        return out


def new_volume(grid: Grid3D, fill: float, kind: str = "intensity") -> Volume3D:
    """Constant-filled volume on the given grid."""
    return Volume3D(grid, np.full(grid.shape, fill, dtype=np.float32), kind)


def _first_bad_index(bad: np.ndarray) -> tuple[int, int, int]:
    """First offending voxel in x-fastest scan order."""
    flat = int(np.flatnonzero(bad.ravel(order="F"))[0])
    return tuple(int(c) for c in np.unravel_index(flat, bad.shape, order="F"))


def validate_maps(maps: QMRIMaps) -> None:
    """Check every map-set invariant; raise naming the first violation.

    Constraint order: shared grid, pd >= 0, r1 > 0, r2 > 0, mt in [0, 1),
    b1 > 0. The raised error message carries the (x, y, z) index of the
    first violating voxel in x-fastest order.
    """
    for name, vol in maps.present()[1:]:
        if vol.grid != maps.pd.grid:
            raise GridMismatchError(f"map '{name}' is not on the pd grid")

    bad = maps.pd.data < 0
    if bad.any():
        raise NegativePDError(f"pd < 0 at voxel {_first_bad_index(bad)}")
    for name, vol in (("r1", maps.r1), ("r2", maps.r2)):
        bad = vol.data <= 0
        if bad.any():
            raise NonPositiveRateError(f"{name} <= 0 at voxel {_first_bad_index(bad)}")
    if maps.mt is not None:
        bad = (maps.mt.data < 0) | (maps.mt.data >= 1)
        if bad.any():
            raise MTOutOfRangeError(
                f"mt outside [0, 1) at voxel {_first_bad_index(bad)}"
            )
    if maps.b1 is not None:
        bad = maps.b1.data <= 0
        if bad.any():
            raise NonPositiveRateError(f"b1 <= 0 at voxel {_first_bad_index(bad)}")


def extract_patch(v: Volume3D, origin, size) -> Volume3D:
    """Sub-volume of exactly `size` voxels starting at `origin`.

    Spacing is preserved and the affine is translated so the patch keeps its
    world coordinates.
    """
    origin = tuple(int(o) for o in origin)
    size = tuple(int(s) for s in size)
    shape = v.grid.shape
    for ax in range(3):
        if size[ax] < 1:
            raise OutOfBoundsError(f"patch size must be >= 1 on axis {ax}")
        if origin[ax] < 0 or origin[ax] + size[ax] > shape[ax]:
            raise OutOfBoundsError(
                f"patch [{origin[ax]}, {origin[ax] + size[ax]}) exceeds "
                f"axis {ax} extent {shape[ax]}"
            )
    ox, oy, oz = origin
    sx, sy, sz = size
    data = v.data[ox : ox + sx, oy : oy + sy, oz : oz + sz]

    affine = np.array(v.grid.affine)
    affine[:, 3] = v.grid.affine @ np.array([ox, oy, oz, 1.0])
    grid = Grid3D(size, v.grid.spacing, affine)
    return Volume3D(grid, data, v.kind)
