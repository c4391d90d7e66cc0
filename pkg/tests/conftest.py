"""Shared fixtures: synthetic map sets and phantom directories."""

import numpy as np
import pytest

from qmrisim import Grid3D, QMRIMaps, Volume3D, write_nifti


def random_maps(
    shape=(16, 16, 16),
    spacing=(1.0, 1.0, 1.0),
    seed=0,
    with_mt=False,
    with_b1=False,
) -> QMRIMaps:
    """Random but physically valid map set (rates strictly positive)."""
    rng = np.random.default_rng(seed)
    grid = Grid3D(shape, spacing)

    def vol(lo, hi):
        return Volume3D(grid, rng.uniform(lo, hi, shape).astype(np.float32), "map")

    return QMRIMaps(
        pd=vol(0.0, 1.0),
        r1=vol(0.2, 2.5),
        r2=vol(5.0, 40.0),
        mt=vol(0.0, 0.4) if with_mt else None,
        b1=vol(0.8, 1.2) if with_b1 else None,
    )


def smooth_phantom_maps(shape=(64, 64, 64), seed=11) -> QMRIMaps:
    """Blobby phantom: a few ellipsoidal tissues over a dim background."""
    rng = np.random.default_rng(seed)
    grid = Grid3D(shape)
    coords = np.stack(
        np.meshgrid(*[np.linspace(-1, 1, n) for n in shape], indexing="ij")
    )
    pd = np.full(shape, 0.05)
    r1 = np.full(shape, 0.3)
    r2 = np.full(shape, 8.0)
    for _ in range(4):
        center = rng.uniform(-0.5, 0.5, 3)
        radii = rng.uniform(0.2, 0.5, 3)
        inside = (((coords - center[:, None, None, None]) / radii[:, None, None, None]) ** 2).sum(0) <= 1
        pd[inside] = rng.uniform(0.5, 1.0)
        r1[inside] = rng.uniform(0.5, 2.0)
        r2[inside] = rng.uniform(10.0, 30.0)
    return QMRIMaps(
        pd=Volume3D(grid, pd.astype(np.float32), "map"),
        r1=Volume3D(grid, r1.astype(np.float32), "map"),
        r2=Volume3D(grid, r2.astype(np.float32), "map"),
    )


def write_maps_dir(maps: QMRIMaps, directory) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    for name, vol in maps.present():
        write_nifti(vol, directory / f"{name}.nii.gz")


@pytest.fixture
def small_maps():
    return random_maps()


@pytest.fixture
def maps_dir(tmp_path):
    d = tmp_path / "maps"
    write_maps_dir(random_maps(shape=(12, 12, 12), seed=5), d)
    return d
