"""Seeded, replayable 3D augmentations.

A plan is an ordered list of fully resolved steps; applying the same plan to
the same volume is bit-identical across runs and worker counts, so plans can
be serialized into manifests and replayed. Step order is fixed as
spatial (rotate, shear, flip, crop) -> bias field -> k-space truncation ->
Rician noise -> cuboid dropout, mirroring acquisition: geometry first, then
receive field, then k-space, then measurement noise, then occlusion.

Numeric defaults (rotation <= 15 deg, shear <= 0.1, bias amplitude 0.3,
keep fraction in [0.5, 1], sigma in [0, 0.1], 1-4 cuboids of side 8-32) are
repository choices, not literature values.
"""

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import ndimage

from .errors import CropTooLargeError, OutOfBoundsError
from .rng import RngState
from .signal import NoiseParams, add_rician
from .volume import Grid3D, Volume3D, extract_patch


@dataclass(frozen=True)
class CropStep:
    origin: tuple[int, int, int]
    size: tuple[int, int, int]


@dataclass(frozen=True)
class FlipStep:
    axes: tuple[int, ...]


@dataclass(frozen=True)
class RotateStep:
    axis: int
    angle_deg: float


@dataclass(frozen=True)
class ShearStep:
    # Row-major 3x3 matrix mapping output voxel offsets (about the volume
    # centre) to input offsets, i.e. exactly what the resampler consumes.
    matrix: tuple[tuple[float, float, float], ...]


@dataclass(frozen=True)
class BiasFieldStep:
    shape: tuple[int, int, int]
    values: tuple[float, ...]  # C-order flattening of the control grid
    amplitude: float


@dataclass(frozen=True)
class GibbsStep:
    keep_fraction: tuple[float, float, float]


@dataclass(frozen=True)
class RicianNoiseStep:
    sigma: float
    seed: int


@dataclass(frozen=True)
class CuboidDropoutStep:
    cuboids: tuple[tuple[tuple[int, int, int], tuple[int, int, int]], ...]


Step = Union[
    CropStep,
    FlipStep,
    RotateStep,
    ShearStep,
    BiasFieldStep,
    GibbsStep,
    RicianNoiseStep,
    CuboidDropoutStep,
]

_STEP_TAGS = {
    CropStep: "crop",
    FlipStep: "flip",
    RotateStep: "rotate",
    ShearStep: "shear",
    BiasFieldStep: "bias_field",
    GibbsStep: "gibbs",
    RicianNoiseStep: "rician_noise",
    CuboidDropoutStep: "cuboid_dropout",
}
_TAG_STEPS = {tag: cls for cls, tag in _STEP_TAGS.items()}


@dataclass(frozen=True)
class AugmentationPlan:
    """Fully resolved augmentation chain; no residual randomness."""

    steps: tuple[Step, ...]
    seed: int

    def to_dict(self) -> dict:
        return {"seed": self.seed, "steps": [step_to_dict(s) for s in self.steps]}

    @classmethod
    def from_dict(cls, d: dict) -> "AugmentationPlan":
        return cls(
            steps=tuple(step_from_dict(s) for s in d["steps"]),
            seed=int(d["seed"]),
        )


def step_to_dict(step: Step) -> dict:
    tag = _STEP_TAGS[type(step)]
    if isinstance(step, CropStep):
        return {"type": tag, "origin": list(step.origin), "size": list(step.size)}
    if isinstance(step, FlipStep):
        return {"type": tag, "axes": list(step.axes)}
    if isinstance(step, RotateStep):
        return {"type": tag, "axis": step.axis, "angle_deg": step.angle_deg}
    if isinstance(step, ShearStep):
        return {"type": tag, "matrix": [list(row) for row in step.matrix]}
    if isinstance(step, BiasFieldStep):
        return {
            "type": tag,
            "shape": list(step.shape),
            "values": list(step.values),
            "amplitude": step.amplitude,
        }
    if isinstance(step, GibbsStep):
        return {"type": tag, "keep_fraction": list(step.keep_fraction)}
    if isinstance(step, RicianNoiseStep):
        return {"type": tag, "sigma": step.sigma, "seed": step.seed}
    return {
        "type": tag,
        "cuboids": [
            {"origin": list(o), "size": list(s)} for o, s in step.cuboids
        ],
    }


def step_from_dict(d: dict) -> Step:
    tag = d["type"]
    if tag not in _TAG_STEPS:
        raise ValueError(f"unknown augmentation step type {tag!r}")
    if tag == "crop":
        return CropStep(tuple(int(v) for v in d["origin"]), tuple(int(v) for v in d["size"]))
    if tag == "flip":
        return FlipStep(tuple(int(a) for a in d["axes"]))
    if tag == "rotate":
        return RotateStep(int(d["axis"]), float(d["angle_deg"]))
    if tag == "shear":
        return ShearStep(tuple(tuple(float(v) for v in row) for row in d["matrix"]))
    if tag == "bias_field":
        return BiasFieldStep(
            tuple(int(v) for v in d["shape"]),
            tuple(float(v) for v in d["values"]),
            float(d["amplitude"]),
        )
    if tag == "gibbs":
        return GibbsStep(tuple(float(v) for v in d["keep_fraction"]))
    if tag == "rician_noise":
        return RicianNoiseStep(float(d["sigma"]), int(d["seed"]))
    return CuboidDropoutStep(
        tuple(
            (tuple(int(v) for v in c["origin"]), tuple(int(v) for v in c["size"]))
            for c in d["cuboids"]
        )
    )


@dataclass(frozen=True)
class AugmentationConfig:
    """Ranges and per-step probabilities for plan generation."""

    crop_size: tuple[int, int, int] = (96, 96, 96)
    rotate_max_deg: float = 15.0
    shear_max: float = 0.1
    flip_prob: tuple[float, float, float] = (0.5, 0.5, 0.5)
    bias_amplitude: float = 0.3
    bias_control_points: tuple[int, int, int] = (4, 4, 4)
    gibbs_keep_range: tuple[float, float] = (0.5, 1.0)
    noise_sigma_range: tuple[float, float] = (0.0, 0.1)
    dropout_count_range: tuple[int, int] = (1, 4)
    dropout_size_range: tuple[int, int] = (8, 32)
    rotate_prob: float = 0.5
    shear_prob: float = 0.5
    bias_prob: float = 0.5
    gibbs_prob: float = 0.5
    noise_prob: float = 0.5
    dropout_prob: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "crop_size", tuple(int(v) for v in self.crop_size))
        object.__setattr__(self, "flip_prob", tuple(float(v) for v in self.flip_prob))
        object.__setattr__(
            self, "bias_control_points", tuple(int(v) for v in self.bias_control_points)
        )
        for name in ("gibbs_keep_range", "noise_sigma_range"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        for name in ("dropout_count_range", "dropout_size_range"):
            object.__setattr__(self, name, tuple(int(v) for v in getattr(self, name)))

        if any(c < 1 for c in self.crop_size):
            raise ValueError("crop_size entries must be >= 1")
        if self.rotate_max_deg < 0 or self.shear_max < 0 or self.bias_amplitude < 0:
            raise ValueError("rotate_max_deg, shear_max and bias_amplitude must be >= 0")
        if any(c < 2 for c in self.bias_control_points):
            raise ValueError("bias_control_points entries must be >= 2")
        lo, hi = self.gibbs_keep_range
        if not (0 < lo <= hi <= 1):
            raise ValueError("gibbs_keep_range must be a sub-interval of (0, 1]")
        lo, hi = self.noise_sigma_range
        if not (0 <= lo <= hi):
            raise ValueError("noise_sigma_range must be well-ordered and >= 0")
        for name in ("dropout_count_range", "dropout_size_range"):
            lo, hi = getattr(self, name)
            if not (1 <= lo <= hi):
                raise ValueError(f"{name} must be well-ordered and >= 1")
        probs = (*self.flip_prob, self.rotate_prob, self.shear_prob, self.bias_prob,
                 self.gibbs_prob, self.noise_prob, self.dropout_prob)
        if any(not 0 <= p <= 1 for p in probs):
            raise ValueError("probabilities must lie in [0, 1]")


def _shear_matrix(coeffs) -> tuple[tuple[float, float, float], ...]:
    m = np.eye(3)
    m[0, 1], m[0, 2], m[1, 0], m[1, 2], m[2, 0], m[2, 1] = coeffs
    return tuple(tuple(float(v) for v in row) for row in m)


def make_plan(cfg: AugmentationConfig, grid: Grid3D, rng: RngState) -> AugmentationPlan:
    """Resolve one augmentation chain for a volume on `grid`.

    Steps with probability 0 never appear; the crop is always present. Same
    (cfg, grid, stream) gives a field-by-field identical plan.
    """
    shape = grid.shape
    crop = cfg.crop_size
    if any(crop[ax] > shape[ax] for ax in range(3)):
        raise CropTooLargeError(f"crop {crop} does not fit grid shape {shape}")

    steps: list[Step] = []

    if rng.uniform() < cfg.rotate_prob:
        axis = rng.choice_index(3)
        angle = float(rng.uniform(-cfg.rotate_max_deg, cfg.rotate_max_deg))
        steps.append(RotateStep(axis, angle))

    if rng.uniform() < cfg.shear_prob:
        coeffs = [float(rng.uniform(-cfg.shear_max, cfg.shear_max)) for _ in range(6)]
        steps.append(ShearStep(_shear_matrix(coeffs)))

    flip_axes = tuple(ax for ax in range(3) if rng.uniform() < cfg.flip_prob[ax])
    if flip_axes:
        steps.append(FlipStep(flip_axes))

    origin = tuple(int(rng.integers(0, shape[ax] - crop[ax] + 1)) for ax in range(3))
    steps.append(CropStep(origin, crop))

    if rng.uniform() < cfg.bias_prob:
        a = cfg.bias_amplitude
        values = rng.uniform(1.0 - a, 1.0 + a, size=cfg.bias_control_points)
        steps.append(
            BiasFieldStep(
                cfg.bias_control_points,
                tuple(float(v) for v in np.asarray(values).ravel()),
                a,
            )
        )

    if rng.uniform() < cfg.gibbs_prob:
        lo, hi = cfg.gibbs_keep_range
        keep = tuple(float(rng.uniform(lo, hi)) for _ in range(3))
        steps.append(GibbsStep(keep))

    if rng.uniform() < cfg.noise_prob:
        lo, hi = cfg.noise_sigma_range
        sigma = float(rng.uniform(lo, hi))
        steps.append(RicianNoiseStep(sigma, int(rng.integers(0, 1 << 63))))

    if rng.uniform() < cfg.dropout_prob:
        clo, chi = cfg.dropout_count_range
        count = int(rng.integers(clo, chi + 1))
        cuboids = []
        for _ in range(count):
            size = tuple(
                int(min(rng.integers(cfg.dropout_size_range[0], cfg.dropout_size_range[1] + 1),
                        crop[ax]))
                for ax in range(3)
            )
            corner = tuple(int(rng.integers(0, crop[ax] - size[ax] + 1)) for ax in range(3))
            cuboids.append((corner, size))
        steps.append(CuboidDropoutStep(tuple(cuboids)))

    return AugmentationPlan(tuple(steps), rng.seed)


def bias_field(grid: Grid3D, control_values, amplitude: float) -> Volume3D:
    """Smooth multiplicative field: trilinear upsampling of a control grid.

    Control values must lie in [1 - amplitude, 1 + amplitude]; the field is
    a convex combination of them, clipped back onto the interval to absorb
    interpolation round-off.
    """
    if amplitude < 0:
        raise ValueError("amplitude must be >= 0")
    ctrl = np.asarray(control_values, dtype=np.float64)
    if ctrl.ndim != 3 or any(n < 2 for n in ctrl.shape):
        raise ValueError("control grid must be 3D with at least 2 points per axis")
    lo, hi = 1.0 - amplitude, 1.0 + amplitude
    if ctrl.min() < lo or ctrl.max() > hi:
        raise ValueError(f"control values must lie in [{lo}, {hi}]")

    axes = [
        np.linspace(0.0, ctrl.shape[ax] - 1.0, grid.shape[ax]) for ax in range(3)
    ]
    coords = np.meshgrid(*axes, indexing="ij")
    out = ndimage.map_coordinates(
        ctrl, [c.ravel() for c in coords], order=1, mode="nearest"
    )
    out = np.clip(out, lo, hi).reshape(grid.shape)
    return Volume3D(grid, out.astype(np.float32), "map")


def gibbs_truncate(v: Volume3D, keep_fraction) -> Volume3D:
    """Hard k-space low-pass: zero coefficients past keep/2 per axis.

    Frequencies are normalized cycles/sample from the DFT; a coefficient
    survives only if |f| <= keep/2 on every axis. keep = 1 retains the full
    band (identity up to transform round-off); the operation is a projection,
    so applying it twice equals applying it once.
    """
    keep = tuple(float(k) for k in keep_fraction)
    if any(not 0 < k <= 1 for k in keep):
        raise ValueError("keep fractions must lie in (0, 1]")
    spectrum = np.fft.fftn(v.data.astype(np.float64))
    for ax in range(3):
        freqs = np.fft.fftfreq(v.grid.shape[ax])
        mask_shape = [1, 1, 1]
        mask_shape[ax] = -1
        spectrum *= (np.abs(freqs) <= keep[ax] / 2.0).reshape(mask_shape)
    out = np.fft.ifftn(spectrum).real
    return v.with_data(out.astype(np.float32))


def cuboid_dropout(v: Volume3D, cuboids) -> Volume3D:
    """Zero all voxels inside the listed (origin, size) cuboids."""
    shape = v.grid.shape
    for origin, size in cuboids:
        for ax in range(3):
            if size[ax] < 1 or origin[ax] < 0 or origin[ax] + size[ax] > shape[ax]:
                raise OutOfBoundsError(
                    f"cuboid origin={tuple(origin)} size={tuple(size)} exceeds "
                    f"shape {shape}"
                )
    data = np.array(v.data)
    for (ox, oy, oz), (sx, sy, sz) in cuboids:
        data[ox : ox + sx, oy : oy + sy, oz : oz + sz] = 0.0
    return v.with_data(data)


def _resample(data: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    """Trilinear resample about the volume centre, zero outside the FOV.

    grid-constant blends edge voxels with the zero padding instead of
    snapping samples an epsilon past the boundary to zero outright.
    """
    center = (np.asarray(data.shape, dtype=np.float64) - 1.0) / 2.0
    offset = center - matrix @ center
    return ndimage.affine_transform(
        data, matrix, offset=offset, order=1, mode="grid-constant", cval=0.0
    )


def _rotation_matrix(axis: int, angle_deg: float) -> np.ndarray:
    # Output-to-input map: the inverse (transpose) of the forward rotation.
    theta = math.radians(angle_deg)
    c, s = math.cos(theta), math.sin(theta)
    a, b = [(1, 2), (0, 2), (0, 1)][axis]
    m = np.eye(3)
    m[a, a] = c
    m[a, b] = s
    m[b, a] = -s
    m[b, b] = c
    return m


def _apply_rotate(v: Volume3D, step: RotateStep) -> Volume3D:
    return v.with_data(_resample(v.data, _rotation_matrix(step.axis, step.angle_deg)))


def _apply_shear(v: Volume3D, step: ShearStep) -> Volume3D:
    return v.with_data(_resample(v.data, np.asarray(step.matrix, dtype=np.float64)))


def _apply_flip(v: Volume3D, step: FlipStep) -> Volume3D:
    return v.with_data(np.flip(v.data, axis=step.axes))


def _apply_crop(v: Volume3D, step: CropStep) -> Volume3D:
    return extract_patch(v, step.origin, step.size)


def _apply_bias(v: Volume3D, step: BiasFieldStep) -> Volume3D:
    ctrl = np.asarray(step.values, dtype=np.float64).reshape(step.shape)
    fld = bias_field(v.grid, ctrl, step.amplitude)
    return v.with_data(v.data * fld.data)


def _apply_gibbs(v: Volume3D, step: GibbsStep) -> Volume3D:
    return gibbs_truncate(v, step.keep_fraction)


def _apply_noise(v: Volume3D, step: RicianNoiseStep) -> Volume3D:
    return add_rician(v, NoiseParams(step.sigma), step.seed)


def _apply_dropout(v: Volume3D, step: CuboidDropoutStep) -> Volume3D:
    return cuboid_dropout(v, step.cuboids)


_APPLY = {
    RotateStep: _apply_rotate,
    ShearStep: _apply_shear,
    FlipStep: _apply_flip,
    CropStep: _apply_crop,
    BiasFieldStep: _apply_bias,
    GibbsStep: _apply_gibbs,
    RicianNoiseStep: _apply_noise,
    CuboidDropoutStep: _apply_dropout,
}


def apply_plan(v: Volume3D, plan: AugmentationPlan) -> Volume3D:
    """Apply every step of a resolved plan in order. Pure and deterministic."""
    out = v
    for step in plan.steps:
        out = _APPLY[type(step)](out, step)
    return out
