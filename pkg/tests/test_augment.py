import json

import numpy as np
import pytest

from qmrisim import (
    AugmentationConfig,
    AugmentationPlan,
    Grid3D,
    NoiseParams,
    RngState,
    Volume3D,
    add_rician,
    apply_plan,
    bias_field,
    cuboid_dropout,
    gibbs_truncate,
    make_plan,
    new_volume,
)
from qmrisim.augment import (
    BiasFieldStep,
    CropStep,
    CuboidDropoutStep,
    FlipStep,
    GibbsStep,
    RicianNoiseStep,
    RotateStep,
    ShearStep,
)
from qmrisim.errors import CropTooLargeError, OutOfBoundsError


def random_volume(shape=(16, 16, 16), seed=0, lo=0.0, hi=1.0):
    rng = np.random.default_rng(seed)
    return Volume3D(Grid3D(shape), rng.uniform(lo, hi, shape).astype(np.float32))


def identity_config(crop):
    return AugmentationConfig(
        crop_size=crop,
        flip_prob=(0.0, 0.0, 0.0),
        rotate_prob=0.0,
        shear_prob=0.0,
        bias_prob=0.0,
        gibbs_prob=0.0,
        noise_prob=0.0,
        dropout_prob=0.0,
    )


class TestMakePlan:
    def test_identity_plan_is_single_full_crop(self):
        grid = Grid3D((12, 12, 12))
        plan = make_plan(identity_config((12, 12, 12)), grid, RngState(1))
        assert len(plan.steps) == 1
        step = plan.steps[0]
        assert isinstance(step, CropStep)
        assert step.origin == (0, 0, 0)
        assert step.size == (12, 12, 12)

    def test_crop_96_on_128_grid(self):
        grid = Grid3D((128, 128, 128))
        cfg = AugmentationConfig(crop_size=(96, 96, 96))
        plan = make_plan(cfg, grid, RngState(2))
        crop = next(s for s in plan.steps if isinstance(s, CropStep))
        assert crop.size == (96, 96, 96)

    def test_same_seed_gives_equal_plans(self):
        grid = Grid3D((32, 32, 32))
        cfg = AugmentationConfig(crop_size=(16, 16, 16))
        a = make_plan(cfg, grid, RngState(3))
        b = make_plan(cfg, grid, RngState(3))
        assert a == b

    def test_crop_too_large(self):
        with pytest.raises(CropTooLargeError):
            make_plan(
                AugmentationConfig(crop_size=(96, 96, 96)), Grid3D((64, 64, 64)),
                RngState(4),
            )

    def test_plans_are_fully_resolved_json_round_trip(self):
        grid = Grid3D((32, 32, 32))
        cfg = AugmentationConfig(
            crop_size=(16, 16, 16),
            rotate_prob=1.0, shear_prob=1.0, bias_prob=1.0,
            gibbs_prob=1.0, noise_prob=1.0, dropout_prob=1.0,
            flip_prob=(1.0, 1.0, 1.0),
        )
        plan = make_plan(cfg, grid, RngState(5))
        types = {type(s) for s in plan.steps}
        assert types == {
            RotateStep, ShearStep, FlipStep, CropStep, BiasFieldStep,
            GibbsStep, RicianNoiseStep, CuboidDropoutStep,
        }
        restored = AugmentationPlan.from_dict(
            json.loads(json.dumps(plan.to_dict()))
        )
        assert restored == plan


class TestApplyPlan:
    def test_identity_plan_is_voxelwise_identity(self):
        v = random_volume()
        plan = make_plan(identity_config(v.grid.shape), v.grid, RngState(6))
        out = apply_plan(v, plan)
        assert np.array_equal(out.data, v.data)

    def test_apply_is_bit_identical_across_runs(self):
        v = random_volume(seed=9)
        cfg = AugmentationConfig(
            crop_size=(8, 8, 8),
            rotate_prob=1.0, shear_prob=1.0, bias_prob=1.0,
            gibbs_prob=1.0, noise_prob=1.0, dropout_prob=1.0,
        )
        plan = make_plan(cfg, v.grid, RngState(7))
        a = apply_plan(v, plan)
        b = apply_plan(v, plan)
        assert np.array_equal(a.data, b.data)

    def test_flip_is_involution(self):
        v = random_volume(seed=10)
        plan = AugmentationPlan((FlipStep((0,)),), seed=0)
        once = apply_plan(v, plan)
        twice = apply_plan(once, plan)
        assert not np.array_equal(once.data, v.data)
        assert np.array_equal(twice.data, v.data)

    def test_flip_all_axes_involution(self):
        v = random_volume(seed=11)
        plan = AugmentationPlan((FlipStep((0, 1, 2)),), seed=0)
        assert np.array_equal(apply_plan(apply_plan(v, plan), plan).data, v.data)

    def test_noise_only_plan_equals_add_rician(self):
        v = random_volume(seed=12)
        plan = AugmentationPlan((RicianNoiseStep(0.2, 424242),), seed=0)
        direct = add_rician(v, NoiseParams(0.2), 424242)
        assert np.array_equal(apply_plan(v, plan).data, direct.data)


class TestRotation:
    def test_rotate_90_matches_index_permutation(self):
        # Brute-force oracle: a 90 degree turn about z permutes lattice sites.
        v = random_volume(shape=(8, 8, 8), seed=13)
        out = apply_plan(v, AugmentationPlan((RotateStep(2, 90.0),), seed=0))
        perms = [
            np.rot90(v.data, k=1, axes=(0, 1)),
            np.rot90(v.data, k=-1, axes=(0, 1)),
        ]
        errs = [np.max(np.abs(out.data - p)) for p in perms]
        assert min(errs) < 1e-5

    def test_two_quarter_turns_equal_half_turn(self):
        v = random_volume(shape=(8, 8, 8), seed=14)
        quarter = AugmentationPlan((RotateStep(2, 90.0),), seed=0)
        half = AugmentationPlan((RotateStep(2, 180.0),), seed=0)
        twice = apply_plan(apply_plan(v, quarter), quarter)
        once = apply_plan(v, half)
        assert np.max(np.abs(twice.data - once.data)) < 1e-5

    def test_half_turn_matches_double_flip(self):
        v = random_volume(shape=(8, 8, 8), seed=15)
        half = apply_plan(v, AugmentationPlan((RotateStep(2, 180.0),), seed=0))
        flipped = np.flip(np.flip(v.data, axis=0), axis=1)
        assert np.max(np.abs(half.data - flipped)) < 1e-5

    def test_rotate_zero_is_identity(self):
        v = random_volume(shape=(8, 8, 8), seed=16)
        out = apply_plan(v, AugmentationPlan((RotateStep(0, 0.0),), seed=0))
        assert np.array_equal(out.data, v.data)


class TestBiasField:
    def test_amplitude_zero_is_multiplicative_identity(self):
        g = Grid3D((10, 10, 10))
        fld = bias_field(g, np.ones((2, 2, 2)), 0.0)
        assert np.all(fld.data == 1.0)

    def test_constant_control_gives_constant_field(self):
        g = Grid3D((9, 7, 5))
        fld = bias_field(g, np.full((3, 3, 3), 1.3), 0.5)
        assert np.allclose(fld.data, 1.3, atol=1e-6)

    def test_field_bounded_by_amplitude(self):
        g = Grid3D((17, 13, 11))
        rng = np.random.default_rng(17)
        amplitude = 0.3
        ctrl = rng.uniform(0.7, 1.3, (4, 5, 6))
        fld = bias_field(g, ctrl, amplitude)
        # exhaustive scan of the interpolated field
        assert float(fld.data.min()) >= 1.0 - amplitude
        assert float(fld.data.max()) <= 1.0 + amplitude

    def test_control_values_outside_amplitude_rejected(self):
        with pytest.raises(ValueError):
            bias_field(Grid3D((4, 4, 4)), np.full((2, 2, 2), 1.5), 0.3)

    def test_control_grid_too_small_rejected(self):
        with pytest.raises(ValueError):
            bias_field(Grid3D((4, 4, 4)), np.ones((1, 2, 2)), 0.1)


class TestGibbs:
    def test_full_band_is_identity(self):
        for seed in range(3):
            v = random_volume(shape=(12, 10, 8), seed=seed)
            out = gibbs_truncate(v, (1.0, 1.0, 1.0))
            assert np.max(np.abs(out.data - v.data)) < 1e-5

    def test_projection_is_idempotent(self):
        v = random_volume(shape=(16, 16, 16), seed=18)
        keep = (0.6, 0.8, 0.5)
        once = gibbs_truncate(v, keep)
        twice = gibbs_truncate(once, keep)
        assert np.max(np.abs(twice.data - once.data)) < 1e-5

    def test_constant_volume_unchanged(self):
        v = new_volume(Grid3D((8, 8, 8)), 2.5)
        out = gibbs_truncate(v, (0.3, 0.3, 0.3))
        assert np.max(np.abs(out.data - 2.5)) < 1e-5

    def test_dc_component_preserved(self):
        v = random_volume(shape=(16, 16, 16), seed=19, lo=0.5, hi=1.5)
        out = gibbs_truncate(v, (0.5, 0.5, 0.5))
        dc_in = float(v.data.astype(np.float64).mean())
        dc_out = float(out.data.astype(np.float64).mean())
        assert abs(dc_out - dc_in) / abs(dc_in) < 1e-5

    def test_truncation_actually_removes_energy(self):
        v = random_volume(shape=(16, 16, 16), seed=20)
        out = gibbs_truncate(v, (0.4, 0.4, 0.4))
        assert not np.array_equal(out.data, v.data)

    def test_invalid_keep_rejected(self):
        v = random_volume(shape=(4, 4, 4))
        with pytest.raises(ValueError):
            gibbs_truncate(v, (0.0, 0.5, 0.5))
        with pytest.raises(ValueError):
            gibbs_truncate(v, (0.5, 0.5, 1.5))


class TestCuboidDropout:
    def test_empty_list_is_identity(self):
        v = random_volume(seed=21)
        assert np.array_equal(cuboid_dropout(v, []).data, v.data)

    def test_full_volume_cuboid_zeroes_everything(self):
        v = random_volume(seed=22, lo=0.5, hi=1.0)
        out = cuboid_dropout(v, [((0, 0, 0), v.grid.shape)])
        assert np.all(out.data == 0.0)

    def test_single_cuboid_voxel_count(self):
        v = new_volume(Grid3D((16, 16, 16)), 1.0)
        out = cuboid_dropout(v, [((4, 4, 4), (4, 4, 4))])
        assert int((out.data == 0.0).sum()) == 64

    def test_changes_exactly_the_union(self):
        # brute-force oracle mask over random overlapping cuboids
        rng = np.random.default_rng(23)
        v = random_volume(seed=24, lo=0.5, hi=1.5)
        cuboids = []
        mask = np.zeros(v.grid.shape, dtype=bool)
        for _ in range(4):
            origin = tuple(int(rng.integers(0, 12)) for _ in range(3))
            size = tuple(int(rng.integers(1, 5)) for _ in range(3))
            cuboids.append((origin, size))
            mask[
                origin[0] : origin[0] + size[0],
                origin[1] : origin[1] + size[1],
                origin[2] : origin[2] + size[2],
            ] = True
        out = cuboid_dropout(v, cuboids)
        assert np.all(out.data[mask] == 0.0)
        assert np.array_equal(out.data[~mask], v.data[~mask])

    def test_out_of_bounds_rejected(self):
        v = random_volume()
        with pytest.raises(OutOfBoundsError):
            cuboid_dropout(v, [((14, 0, 0), (4, 4, 4))])


class TestConfigValidation:
    def test_bad_probability(self):
        with pytest.raises(ValueError):
            AugmentationConfig(rotate_prob=1.5)

    def test_bad_keep_range(self):
        with pytest.raises(ValueError):
            AugmentationConfig(gibbs_keep_range=(0.0, 1.0))

    def test_bad_dropout_range(self):
        with pytest.raises(ValueError):
            AugmentationConfig(dropout_count_range=(4, 1))
