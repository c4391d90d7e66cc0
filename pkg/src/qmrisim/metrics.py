"""Image-quality and segmentation metrics: PSNR, Dice, HD95.

PSNR is reported in dB against a caller-supplied peak value; Dice is the
usual overlap ratio with the empty-vs-empty case defined as 1; HD95 is the
95th percentile (linear interpolation between order statistics) of the
pooled directed boundary distances, measured in world millimetres via the
grid spacing. Boundaries use 6-connectivity: a foreground voxel whose
6-neighbourhood touches background or leaves the volume.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import EmptyMaskError, GridMismatchError, NonBinaryMaskError
from .volume import Volume3D


@dataclass(frozen=True)
class MetricResult:
    """Named metric value, optionally broken down per label."""

    name: str
    value: float
    per_class: dict | None = None


def _check_same_grid(a: Volume3D, b: Volume3D, what: str):
    if a.grid != b.grid:
        raise GridMismatchError(f"{what} requires volumes on the same grid")


def psnr(reference: Volume3D, test: Volume3D, peak: float) -> float:
    """20*log10(peak / sqrt(MSE)); +inf when the volumes are identical.

    MSE is the mean squared voxel difference accumulated in 64-bit.
    """
    _check_same_grid(reference, test, "psnr")
    peak = float(peak)
    if peak <= 0:
        raise ValueError("peak must be > 0")
    diff = reference.data.astype(np.float64) - test.data.astype(np.float64)
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return math.inf
    return 20.0 * math.log10(peak / math.sqrt(mse))


def _as_bool_mask(v: Volume3D, what: str) -> np.ndarray:
    data = v.data
    if not np.all((data == 0.0) | (data == 1.0)):
        raise NonBinaryMaskError(f"{what} requires binary masks")
    return data != 0.0


def dice(y: Volume3D, yhat: Volume3D) -> float:
    """2|Y n Yhat| / (|Y| + |Yhat|); two empty masks score 1."""
    _check_same_grid(y, yhat, "dice")
    a = _as_bool_mask(y, "dice")
    b = _as_bool_mask(yhat, "dice")
    denom = int(a.sum()) + int(b.sum())
    if denom == 0:
        return 1.0
    return 2.0 * int(np.logical_and(a, b).sum()) / denom


def boundary_voxels(mask: np.ndarray) -> np.ndarray:
    """(k, 3) indices of foreground voxels with a 6-connected background
    or out-of-bounds neighbour."""
    m = mask.astype(bool)
    padded = np.pad(m, 1, constant_values=False)
    interior = np.ones_like(m)
    for ax in range(3):
        lo = [slice(1, -1)] * 3
        hi = [slice(1, -1)] * 3
        lo[ax] = slice(0, -2)
        hi[ax] = slice(2, None)
        interior &= padded[tuple(lo)] & padded[tuple(hi)]
    return np.argwhere(m & ~interior)


def hd95(y: Volume3D, yhat: Volume3D) -> float:
    """95th percentile of the pooled directed boundary distances, in mm.

    Both directed sets (Y boundary to nearest Yhat boundary and vice versa)
    are pooled before taking the percentile, so the result is symmetric.
    Raises on an empty mask: distance to nothing is undefined.
    """
    _check_same_grid(y, yhat, "hd95")
    a = _as_bool_mask(y, "hd95")
    b = _as_bool_mask(yhat, "hd95")
    if not a.any() or not b.any():
        raise EmptyMaskError("hd95 is undefined for empty masks")

    spacing = np.asarray(y.grid.spacing, dtype=np.float64)
    pts_a = boundary_voxels(a) * spacing
    pts_b = boundary_voxels(b) * spacing
    d_ab = cKDTree(pts_b).query(pts_a)[0]
    d_ba = cKDTree(pts_a).query(pts_b)[0]
    pooled = np.concatenate([d_ab, d_ba])
    return float(np.percentile(pooled, 95, method="linear"))


def multiclass_dice(y: Volume3D, yhat: Volume3D, labels) -> dict:
    """One-vs-rest Dice per listed label; absent-from-both scores 1."""
    _check_same_grid(y, yhat, "multiclass_dice")
    out = {}
    for label in labels:
        val = float(label)
        a = y.data == val
        b = yhat.data == val
        denom = int(a.sum()) + int(b.sum())
        out[label] = 1.0 if denom == 0 else 2.0 * int((a & b).sum()) / denom
    return out
