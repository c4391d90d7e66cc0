"""Forward signal models and Rician noise.

Four closed-form steady-state models (fast spin-echo, spoiled gradient-echo,
FLAIR and MPRAGE) map per-voxel tissue parameters (PD, R1, R2/R2*, MT, B1)
plus acquisition timings to a synthetic signal. All exponentials are
evaluated in 64-bit regardless of the 32-bit map storage; the FLAIR bracket
in particular cancels near the nulling point.

Sign conventions follow the usual inversion-recovery algebra: FLAIR returns
the signed value (magnitude is restored by the Rician stage), MPRAGE takes
the absolute value of its steady-state expression.
"""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import MTOutOfRangeError, SequenceKindError
from .rng import RngState
from .volume import QMRIMaps, Volume3D, validate_maps


class SequenceKind(str, Enum):
    FSE = "fse"
    GRE = "gre"
    FLAIR = "flair"
    MPRAGE = "mprage"


def as_kind(value) -> SequenceKind:
    """Coerce a string or SequenceKind to SequenceKind (case-insensitive)."""
    if isinstance(value, SequenceKind):
        return value
    try:
        return SequenceKind(str(value).lower())
    except ValueError:
        raise SequenceKindError(
            f"unknown sequence kind {value!r}; expected one of "
            f"{[k.value for k in SequenceKind]}"
        ) from None


# Fields each kind requires beyond (te, tr), and fields it must not carry.
_REQUIRED = {
    SequenceKind.FSE: (),
    SequenceKind.GRE: ("alpha_deg",),
    SequenceKind.FLAIR: ("ti",),
    SequenceKind.MPRAGE: ("ti", "tx", "td", "alpha_deg", "n"),
}
_OPTIONAL_FIELDS = ("ti", "tx", "td", "alpha_deg", "n")


@dataclass(frozen=True)
class SequenceParams:
    """Acquisition parameters for one simulated sequence.

    Times are in seconds, the flip angle in degrees. Fields that the kind
    does not use must be left as None; fields it requires must be set.
    """

    kind: SequenceKind
    te: float
    tr: float
    ti: float | None = None
    tx: float | None = None
    td: float | None = None
    alpha_deg: float | None = None
    n: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", as_kind(self.kind))
        object.__setattr__(self, "te", float(self.te))
        object.__setattr__(self, "tr", float(self.tr))
        for name in ("ti", "tx", "td", "alpha_deg"):
            val = getattr(self, name)
            if val is not None:
                object.__setattr__(self, name, float(val))
        if self.n is not None:
            object.__setattr__(self, "n", int(self.n))

        required = _REQUIRED[self.kind]
        for name in required:
            if getattr(self, name) is None:
                raise SequenceKindError(f"{self.kind.value} requires '{name}'")
        for name in _OPTIONAL_FIELDS:
            if name not in required and getattr(self, name) is not None:
                raise SequenceKindError(f"{self.kind.value} does not use '{name}'")

        if self.te <= 0:
            raise SequenceKindError("te must be > 0")
        if self.tr <= 0:
            raise SequenceKindError("tr must be > 0")
        if self.ti is not None and self.ti <= 0:
            raise SequenceKindError("ti must be > 0")
        if self.tx is not None and self.tx <= 0:
            raise SequenceKindError("tx must be > 0")
        if self.td is not None and self.td < 0:
            raise SequenceKindError("td must be >= 0")
        if self.alpha_deg is not None and not 0 < self.alpha_deg <= 90:
            raise SequenceKindError("alpha_deg must lie in (0, 90]")
        if self.n is not None and self.n < 1:
            raise SequenceKindError("n must be >= 1")

    def to_dict(self) -> dict:
        out = {"kind": self.kind.value, "te": self.te, "tr": self.tr}
        for name in _OPTIONAL_FIELDS:
            val = getattr(self, name)
            if val is not None:
                out[name] = val
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "SequenceParams":
        known = {"kind", "te", "tr", *_OPTIONAL_FIELDS}
        extra = set(d) - known
        if extra:
            raise SequenceKindError(f"unknown sequence parameter fields: {sorted(extra)}")
        return cls(**d)


@dataclass(frozen=True)
class NoiseParams:
    """Standard deviation of both complex Gaussian components."""

    sigma: float

    def __post_init__(self):
        object.__setattr__(self, "sigma", float(self.sigma))
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")


def _check_kind(p: SequenceParams, expected: SequenceKind):
    if p.kind is not expected:
        raise SequenceKindError(
            f"params are for {p.kind.value!r}, expected {expected.value!r}"
        )


def _fse(pd, b1, r1, r2, te, tr):
    return pd * b1 * (1.0 - np.exp(-r1 * tr)) * np.exp(-r2 * te)


def _gre(pd, b1, r1, r2star, mt, te, tr, alpha_rad):
    e1 = np.exp(-r1 * tr)
    sat = 1.0 - mt
    steady = (1.0 - e1) / (1.0 - math.cos(alpha_rad) * sat * e1)
    return pd * b1 * math.sin(alpha_rad) * sat * steady * np.exp(-r2star * te)


def _flair(pd, b1, r1, r2, te, tr, ti):
    bracket = 1.0 - 2.0 * np.exp(-r1 * ti) + np.exp(-r1 * tr)
    return pd * b1 * np.exp(-r2 * te) * bracket


def _mprage(pd, b1, r1, tr, tx, td, n, alpha_rad):
    cos_a = math.cos(alpha_rad)
    e1 = np.exp(-r1 * tr)
    ex = np.exp(-tx * r1)
    ed = np.exp(-td * r1)
    train = math.sin(alpha_rad) * (1.0 - e1) / (1.0 - cos_a * e1)
    train = train * (1.0 - (cos_a * ex) ** n) * ed
    return pd * b1 * np.abs(train + 1.0 - ed)


def signal_fse(pd: float, b1: float, r1: float, r2: float, p: SequenceParams) -> float:
    """Fast spin-echo signal: PD*B1*(1 - e^(-R1*TR))*e^(-R2*TE)."""
    _check_kind(p, SequenceKind.FSE)
    return float(_fse(float(pd), float(b1), float(r1), float(r2), p.te, p.tr))


def signal_gre(
    pd: float, b1: float, r1: float, r2star: float, mt: float, p: SequenceParams
) -> float:
    """Spoiled gradient-echo steady-state signal with MT attenuation.

    PD*B1*sin(a)*(1-MT)*(1 - E1) / (1 - cos(a)*(1-MT)*E1) * e^(-R2star*TE)
    with E1 = e^(-R1*TR).
    """
    _check_kind(p, SequenceKind.GRE)
    mt = float(mt)
    if not 0 <= mt < 1:
        raise MTOutOfRangeError(f"mt must lie in [0, 1), got {mt}")
    alpha = math.radians(p.alpha_deg)
    return float(
        _gre(float(pd), float(b1), float(r1), float(r2star), mt, p.te, p.tr, alpha)
    )


def signal_flair(pd: float, b1: float, r1: float, r2: float, p: SequenceParams) -> float:
    """Inversion-recovery FLAIR signal, signed.

    PD*B1*e^(-R2*TE)*(1 - 2 e^(-R1*TI) + e^(-R1*TR)). May be negative near
    the nulling point; magnitude reconstruction happens in the noise stage.
    """
    _check_kind(p, SequenceKind.FLAIR)
    return float(_flair(float(pd), float(b1), float(r1), float(r2), p.te, p.tr, p.ti))


def signal_mprage(pd: float, b1: float, r1: float, p: SequenceParams) -> float:
    """Magnetisation-prepared rapid gradient-echo signal (absolute value).

    PD*B1*|sin(a)*(1-E1)/(1-cos(a)*E1)*[1-(cos(a)*e^(-TX*R1))^n]*e^(-TD*R1)
    + 1 - e^(-TD*R1)| with E1 = e^(-R1*TR).
    """
    _check_kind(p, SequenceKind.MPRAGE)
    alpha = math.radians(p.alpha_deg)
    return float(_mprage(float(pd), float(b1), float(r1), p.tr, p.tx, p.td, p.n, alpha))


def simulate_volume(maps: QMRIMaps, p: SequenceParams) -> Volume3D:
    """Apply the matching signal model voxelwise over a validated map set.

    Deterministic: no randomness is involved. Returns an intensity volume on
    the input grid. Absent mt is treated as 0 and absent b1 as 1.
    """
    validate_maps(maps)
    pd = maps.pd.data.astype(np.float64)
    r1 = maps.r1.data.astype(np.float64)
    r2 = maps.r2.data.astype(np.float64)
    mt = 0.0 if maps.mt is None else maps.mt.data.astype(np.float64)
    b1 = 1.0 if maps.b1 is None else maps.b1.data.astype(np.float64)

    if p.kind is SequenceKind.FSE:
        out = _fse(pd, b1, r1, r2, p.te, p.tr)
    elif p.kind is SequenceKind.GRE:
        out = _gre(pd, b1, r1, r2, mt, p.te, p.tr, math.radians(p.alpha_deg))
    elif p.kind is SequenceKind.FLAIR:
        out = _flair(pd, b1, r1, r2, p.te, p.tr, p.ti)
    else:
        out = _mprage(pd, b1, r1, p.tr, p.tx, p.td, p.n, math.radians(p.alpha_deg))

    return Volume3D(maps.grid, np.asarray(out, dtype=np.float32), "intensity")


# Voxels per independently-seeded noise chunk. Part of the reproducibility
# contract: changing it changes every noisy output for a given seed.
NOISE_CHUNK_VOXELS = 1 << 18


def add_rician(v: Volume3D, noise: NoiseParams, seed: int) -> Volume3D:
    """Rician-corrupt a volume: S' = sqrt((S + er)^2 + ei^2), er,ei ~ N(0, s^2).

    The flattened volume (x-fastest order) is split into fixed-size chunks,
    each drawing its Gaussian pair from a substream keyed by (seed, chunk
    index). Output is therefore bit-identical for a given (volume, sigma,
    seed) regardless of how the work is scheduled. sigma = 0 degenerates to
    the voxelwise magnitude |S|.
    """
    if noise.sigma == 0.0:
        return Volume3D(v.grid, np.abs(v.data), "intensity")

    flat = v.data.ravel(order="F").astype(np.float64)
    out = np.empty_like(flat)
    for chunk, start in enumerate(range(0, flat.size, NOISE_CHUNK_VOXELS)):
        stop = min(start + NOISE_CHUNK_VOXELS, flat.size)
        gen = RngState(seed, (chunk,)).generator
        eps = gen.normal(0.0, noise.sigma, size=(2, stop - start))
        out[start:stop] = np.hypot(flat[start:stop] + eps[0], eps[1])

    data = out.astype(np.float32).reshape(v.grid.shape, order="F")
    return Volume3D(v.grid, data, "intensity")
