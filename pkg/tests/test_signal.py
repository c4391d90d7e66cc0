import math

import numpy as np
import pytest

from qmrisim import (
    Grid3D,
    NoiseParams,
    QMRIMaps,
    SequenceParams,
    Volume3D,
    add_rician,
    new_volume,
    signal_flair,
    signal_fse,
    signal_gre,
    signal_mprage,
    simulate_volume,
)
from qmrisim.errors import MTOutOfRangeError, SequenceKindError

from conftest import random_maps

# Frozen from an independent 50-digit evaluation of the closed forms.
FSE_FIXTURE = 0.38340049956420359467
GRE_FIXTURE = 0.4237230820940328238
FLAIR_FIXTURE = 0.0020294306362957343634
MPRAGE_FIXTURE = 0.91791500137610120483


# Independent scalar oracles, written out separately from the library kernels.
def oracle_fse(pd, b1, r1, r2, te, tr):
    return pd * b1 * (1.0 - math.exp(-r1 * tr)) * math.exp(-r2 * te)


def oracle_gre(pd, b1, r1, r2s, mt, te, tr, alpha_deg):
    a = math.radians(alpha_deg)
    e1 = math.exp(-r1 * tr)
    return (
        pd
        * b1
        * math.sin(a)
        * (1.0 - mt)
        * (1.0 - e1)
        / (1.0 - math.cos(a) * (1.0 - mt) * e1)
        * math.exp(-r2s * te)
    )


def oracle_flair(pd, b1, r1, r2, te, tr, ti):
    return (
        pd
        * b1
        * math.exp(-r2 * te)
        * (1.0 - 2.0 * math.exp(-r1 * ti) + math.exp(-r1 * tr))
    )


def oracle_mprage(pd, b1, r1, tr, tx, td, n, alpha_deg):
    a = math.radians(alpha_deg)
    e1 = math.exp(-r1 * tr)
    ex = math.exp(-tx * r1)
    ed = math.exp(-td * r1)
    core = (
        math.sin(a)
        * (1.0 - e1)
        / (1.0 - math.cos(a) * e1)
        * (1.0 - (math.cos(a) * ex) ** n)
        * ed
        + 1.0
        - ed
    )
    return pd * b1 * abs(core)


class TestSequenceParams:
    def test_required_fields_enforced(self):
        with pytest.raises(SequenceKindError, match="ti"):
            SequenceParams(kind="flair", te=0.1, tr=5.0)

    def test_unused_fields_rejected(self):
        with pytest.raises(SequenceKindError, match="alpha_deg"):
            SequenceParams(kind="fse", te=0.1, tr=5.0, alpha_deg=30.0)

    def test_sign_constraints(self):
        with pytest.raises(SequenceKindError):
            SequenceParams(kind="fse", te=-0.1, tr=5.0)
        with pytest.raises(SequenceKindError):
            SequenceParams(kind="gre", te=0.01, tr=1.0, alpha_deg=120.0)

    def test_dict_round_trip(self):
        p = SequenceParams(
            kind="mprage", te=0.003, tr=23.0, ti=0.8, tx=0.006, td=21.0,
            alpha_deg=8.0, n=192,
        )
        assert SequenceParams.from_dict(p.to_dict()) == p


class TestScalarModels:
    def test_fse_fixture(self):
        p = SequenceParams(kind="fse", te=0.05, tr=1.0)
        got = signal_fse(1.0, 1.0, 1.0, 10.0, p)
        assert got == pytest.approx(FSE_FIXTURE, rel=1e-12)

    def test_fse_saturation_limit(self):
        p = SequenceParams(kind="fse", te=1e-12, tr=1e6)
        assert signal_fse(1.0, 1.0, 1.0, 10.0, p) == pytest.approx(1.0, abs=1e-9)

    def test_fse_zero_pd(self):
        p = SequenceParams(kind="fse", te=0.05, tr=1.0)
        assert signal_fse(0.0, 1.0, 1.0, 10.0, p) == 0.0

    def test_fse_wrong_kind(self):
        p = SequenceParams(kind="gre", te=0.05, tr=1.0, alpha_deg=30.0)
        with pytest.raises(SequenceKindError):
            signal_fse(1.0, 1.0, 1.0, 10.0, p)

    def test_gre_fixture_alpha90_mt0(self):
        p = SequenceParams(kind="gre", te=0.02, tr=1.0, alpha_deg=90.0)
        got = signal_gre(1.0, 1.0, 1.0, 20.0, 0.0, p)
        assert got == pytest.approx(GRE_FIXTURE, rel=1e-12)

    def test_gre_vanishes_at_small_alpha(self):
        p = SequenceParams(kind="gre", te=0.02, tr=1.0, alpha_deg=1e-8)
        assert abs(signal_gre(1.0, 1.0, 1.0, 20.0, 0.0, p)) < 1e-9

    def test_gre_vanishes_as_mt_saturates(self):
        p = SequenceParams(kind="gre", te=0.02, tr=1.0, alpha_deg=45.0)
        assert abs(signal_gre(1.0, 1.0, 1.0, 20.0, 1.0 - 1e-9, p)) < 1e-8

    def test_gre_mt_out_of_range(self):
        p = SequenceParams(kind="gre", te=0.02, tr=1.0, alpha_deg=45.0)
        with pytest.raises(MTOutOfRangeError):
            signal_gre(1.0, 1.0, 1.0, 20.0, 1.0, p)

    def test_flair_fixture_near_nulling(self):
        p = SequenceParams(kind="flair", te=0.1, tr=5.0, ti=math.log(2.0))
        got = signal_flair(1.0, 1.0, 1.0, 12.0, p)
        assert got == pytest.approx(FLAIR_FIXTURE, rel=1e-10)

    def test_flair_full_recovery_limit(self):
        p = SequenceParams(kind="flair", te=1e-12, tr=1e6, ti=1e6)
        assert signal_flair(1.0, 1.0, 1.0, 12.0, p) == pytest.approx(1.0, abs=1e-9)

    def test_flair_cancels_at_short_ti_and_tr(self):
        # bracket 1 - 2e^(-R1 TI) + e^(-R1 TR) -> 1 - 2 + 1 = 0 as ti, tr -> 0
        p = SequenceParams(kind="flair", te=0.1, tr=1e-12, ti=1e-12)
        assert abs(signal_flair(1.0, 1.0, 1.0, 12.0, p)) < 1e-9

    def test_flair_may_be_negative(self):
        # Just above the nulling point the bracket goes negative for short tr.
        p = SequenceParams(kind="flair", te=0.01, tr=50.0, ti=0.5)
        assert signal_flair(1.0, 1.0, 1.0, 1.0, p) < 0.0

    def test_mprage_fixture_alpha90_n1(self):
        p = SequenceParams(
            kind="mprage", te=0.003, tr=2.0, ti=0.8, tx=0.006, td=0.5,
            alpha_deg=90.0, n=1,
        )
        got = signal_mprage(1.0, 1.0, 1.0, p)
        assert got == pytest.approx(MPRAGE_FIXTURE, rel=1e-12)

    def test_mprage_small_alpha_reduces_to_recovery_term(self):
        p = SequenceParams(
            kind="mprage", te=0.003, tr=2.0, ti=0.8, tx=0.006, td=0.5,
            alpha_deg=1e-7, n=192,
        )
        expected = 1.0 - math.exp(-0.5)
        assert signal_mprage(1.0, 1.0, 1.0, p) == pytest.approx(expected, abs=1e-6)

    def test_mprage_zero_td_small_alpha(self):
        p = SequenceParams(
            kind="mprage", te=0.003, tr=2.0, ti=0.8, tx=0.006, td=0.0,
            alpha_deg=1e-7, n=192,
        )
        assert abs(signal_mprage(1.0, 1.0, 1.0, p)) < 1e-8

    def test_mprage_nonnegative(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            p = SequenceParams(
                kind="mprage",
                te=0.003,
                tr=float(rng.uniform(0.5, 30)),
                ti=float(rng.uniform(0.6, 0.9)),
                tx=float(rng.uniform(0.004, 0.008)),
                td=float(rng.uniform(0.0, 5.0)),
                alpha_deg=float(rng.uniform(1, 90)),
                n=int(rng.integers(1, 256)),
            )
            assert signal_mprage(1.0, 1.0, float(rng.uniform(0.2, 3)), p) >= 0.0


class TestAlgebraicReductions:
    def test_gre_alpha90_mt0_equals_fse(self):
        rng = np.random.default_rng(7)
        for _ in range(300):
            pd, b1 = rng.uniform(0.1, 2, 2)
            r1 = rng.uniform(0.1, 3)
            r2s = rng.uniform(1, 50)
            te = rng.uniform(0.001, 0.1)
            tr = rng.uniform(0.05, 5)
            pg = SequenceParams(kind="gre", te=te, tr=tr, alpha_deg=90.0)
            pf = SequenceParams(kind="fse", te=te, tr=tr)
            g = signal_gre(pd, b1, r1, r2s, 0.0, pg)
            f = signal_fse(pd, b1, r1, r2s, pf)
            assert g == pytest.approx(f, rel=1e-12)

    def test_fse_monotone_in_tr_and_te(self):
        trs = np.linspace(0.05, 5.0, 12)
        tes = np.linspace(0.002, 0.2, 12)
        for r1, r2 in ((0.5, 10.0), (1.5, 25.0)):
            sig_tr = [
                signal_fse(1, 1, r1, r2, SequenceParams(kind="fse", te=0.01, tr=t))
                for t in trs
            ]
            assert all(a < b for a, b in zip(sig_tr, sig_tr[1:]))
            sig_te = [
                signal_fse(1, 1, r1, r2, SequenceParams(kind="fse", te=t, tr=1.0))
                for t in tes
            ]
            assert all(a > b for a, b in zip(sig_te, sig_te[1:]))


class TestSimulateVolume:
    def test_constant_maps_match_scalar_oracle(self):
        g = Grid3D((6, 6, 6))
        maps = QMRIMaps(
            pd=new_volume(g, 1.0, "map"),
            r1=new_volume(g, 1.0, "map"),
            r2=new_volume(g, 10.0, "map"),
        )
        out = simulate_volume(maps, SequenceParams(kind="fse", te=0.05, tr=1.0))
        assert out.kind == "intensity"
        assert np.all(out.data == out.data[0, 0, 0])
        assert float(out.data[0, 0, 0]) == pytest.approx(FSE_FIXTURE, rel=1e-6)

    def test_zero_pd_gives_zero_volume_for_every_kind(self, small_maps):
        maps = QMRIMaps(
            pd=new_volume(small_maps.grid, 0.0, "map"),
            r1=small_maps.r1,
            r2=small_maps.r2,
        )
        params = [
            SequenceParams(kind="fse", te=0.05, tr=1.0),
            SequenceParams(kind="gre", te=0.02, tr=1.0, alpha_deg=30.0),
            SequenceParams(kind="flair", te=0.1, tr=5.0, ti=0.5),
            SequenceParams(
                kind="mprage", te=0.003, tr=23.0, ti=0.8, tx=0.006, td=1.0,
                alpha_deg=8.0, n=192,
            ),
        ]
        for p in params:
            assert np.all(simulate_volume(maps, p).data == 0.0)

    def test_single_voxel_equals_scalar_op(self):
        g = Grid3D((1, 1, 1))
        maps = QMRIMaps(
            pd=new_volume(g, 0.7, "map"),
            r1=new_volume(g, 1.3, "map"),
            r2=new_volume(g, 15.0, "map"),
        )
        p = SequenceParams(kind="fse", te=0.03, tr=0.8)
        vol = simulate_volume(maps, p)
        scalar = signal_fse(0.7, 1.0, 1.3, 15.0, p)  # absent b1 acts as 1
        assert float(vol.data[0, 0, 0]) == pytest.approx(scalar, rel=1e-6)

    @pytest.mark.parametrize("kind", ["fse", "gre", "flair", "mprage"])
    def test_vectorized_matches_independent_scalar_oracle(self, kind):
        rng = np.random.default_rng(42)
        shape = (10, 10, 5)
        g = Grid3D(shape)
        pd = rng.uniform(0, 2, shape)
        r1 = rng.uniform(0.1, 3, shape)
        r2 = rng.uniform(1, 50, shape)
        mt = rng.uniform(0, 0.5, shape)
        b1 = rng.uniform(0.5, 1.5, shape)
        maps = QMRIMaps(
            pd=Volume3D(g, pd, "map"),
            r1=Volume3D(g, r1, "map"),
            r2=Volume3D(g, r2, "map"),
            mt=Volume3D(g, mt, "map"),
            b1=Volume3D(g, b1, "map"),
        )
        # float32 storage quantizes the inputs; the oracle must see the same
        # values, widened to python floats so it runs entirely in 64-bit
        def at(arr, i):
            return float(arr[i])

        pd, r1, r2 = maps.pd.data, maps.r1.data, maps.r2.data
        mt, b1 = maps.mt.data, maps.b1.data

        if kind == "fse":
            p = SequenceParams(kind=kind, te=0.05, tr=1.2)
            oracle = lambda i: oracle_fse(
                at(pd, i), at(b1, i), at(r1, i), at(r2, i), p.te, p.tr
            )
        elif kind == "gre":
            p = SequenceParams(kind=kind, te=0.02, tr=0.9, alpha_deg=22.0)
            oracle = lambda i: oracle_gre(
                at(pd, i), at(b1, i), at(r1, i), at(r2, i), at(mt, i),
                p.te, p.tr, p.alpha_deg,
            )
        elif kind == "flair":
            p = SequenceParams(kind=kind, te=0.08, tr=4.0, ti=0.7)
            oracle = lambda i: oracle_flair(
                at(pd, i), at(b1, i), at(r1, i), at(r2, i), p.te, p.tr, p.ti
            )
        else:
            p = SequenceParams(
                kind=kind, te=0.003, tr=21.0, ti=0.8, tx=0.006, td=1.5,
                alpha_deg=9.0, n=160,
            )
            oracle = lambda i: oracle_mprage(
                at(pd, i), at(b1, i), at(r1, i), p.tr, p.tx, p.td, p.n, p.alpha_deg
            )

        out = simulate_volume(maps, p)
        for idx in np.ndindex(shape):
            expected = oracle(idx)
            got = float(out.data[idx])
            assert got == pytest.approx(expected, rel=1e-6, abs=1e-12)


class TestAddRician:
    def test_sigma_zero_is_magnitude(self, small_maps):
        signed = simulate_volume(
            small_maps, SequenceParams(kind="flair", te=0.01, tr=50.0, ti=0.5)
        )
        out = add_rician(signed, NoiseParams(0.0), seed=1)
        assert np.array_equal(out.data, np.abs(signed.data))

    def test_fixed_seed_is_bit_identical(self, small_maps):
        vol = simulate_volume(small_maps, SequenceParams(kind="fse", te=0.05, tr=1.0))
        a = add_rician(vol, NoiseParams(0.2), seed=99)
        b = add_rician(vol, NoiseParams(0.2), seed=99)
        assert np.array_equal(a.data, b.data)

    def test_different_seeds_differ(self, small_maps):
        vol = simulate_volume(small_maps, SequenceParams(kind="fse", te=0.05, tr=1.0))
        a = add_rician(vol, NoiseParams(0.2), seed=1)
        b = add_rician(vol, NoiseParams(0.2), seed=2)
        assert not np.array_equal(a.data, b.data)

    def test_output_nonnegative_at_paper_sigma(self, small_maps):
        vol = simulate_volume(small_maps, SequenceParams(kind="fse", te=0.05, tr=1.0))
        out = add_rician(vol, NoiseParams(0.2), seed=3)
        assert np.all(out.data >= 0.0)

    def test_rayleigh_mean_on_zero_volume(self):
        # mean of sqrt(er^2 + ei^2) with unit-variance components is sqrt(pi/2)
        n = 200_000
        zero = new_volume(Grid3D((n, 1, 1)), 0.0, "intensity")
        out = add_rician(zero, NoiseParams(1.0), seed=12345)
        se = math.sqrt((4.0 - math.pi) / 2.0) / math.sqrt(n)
        assert abs(float(out.data.mean()) - math.sqrt(math.pi / 2.0)) < 4 * se

    def test_negative_sigma_rejected(self):
        with pytest.raises(ValueError):
            NoiseParams(-0.1)
