"""Random acquisition-parameter draws per sequence kind.

Each sequence has a fixed table of distributions (log-uniform, uniform or
reflected normal) over its timing parameters. Draws happen in a documented
order (te, tr, then the extras in table order) so a given stream always
yields the same record. Bounds are closed: log-uniform and uniform draws are
clipped onto [lo, hi] to absorb round-off at the edges.

MPRAGE carries two values the table does not sample: the excitation count n
(configurable, default 192) and the recovery delay td, computed as
max(0, tr - ti - n*tx) so the shot timing stays consistent.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .rng import RngState
from .signal import SequenceKind, SequenceParams, as_kind

# Distribution table: per kind, parameter -> (family, arg1, arg2) where
# family is "logu" (log-uniform on [a1, a2]), "u" (uniform on [a1, a2]) or
# "absnorm" (|N(a1, a2^2)|). Draw order is the listed order.
SAMPLING_TABLE = {
    SequenceKind.FLAIR: (
        ("te", "logu", 0.02, 0.10),
        ("tr", "logu", 0.001, 5.0),
        ("ti", "logu", 0.001, 3.0),
    ),
    SequenceKind.FSE: (
        ("te", "logu", 0.001, 3.0),
        ("tr", "logu", 0.001, 3.0),
    ),
    SequenceKind.MPRAGE: (
        ("te", "u", 0.002, 0.004),
        ("tr", "absnorm", 23.0, 2.3),
        ("ti", "u", 0.6, 0.9),
        ("tx", "u", 0.004, 0.008),
        ("alpha_deg", "u", 5.0, 12.0),
    ),
    SequenceKind.GRE: (
        ("te", "logu", 0.002, 0.08),
        ("tr", "logu", 0.005, 5.0),
        ("alpha_deg", "u", 5.0, 50.0),
    ),
}


@dataclass(frozen=True)
class SamplerConfig:
    """Sampler knobs: MPRAGE excitation count, flip-angle cap, range overrides.

    `overrides` mirrors the table structure: {kind: {param: (lo, hi)}}. An
    override replaces the two numeric arguments of the parameter's entry but
    keeps its distribution family (for the MPRAGE tr it replaces (mu, sd)).
    """

    mprage_n: int = 192
    alpha_max_deg: float = 90.0
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mprage_n < 1:
            raise ValueError("mprage_n must be >= 1")
        if not 0 < self.alpha_max_deg <= 90:
            raise ValueError("alpha_max_deg must lie in (0, 90]")
        for kind, params in self.overrides.items():
            table = {row[0]: row for row in SAMPLING_TABLE[as_kind(kind)]}
            for name, bounds in params.items():
                if name not in table:
                    raise ValueError(f"no sampled parameter {name!r} for {kind}")
                if len(tuple(bounds)) != 2:
                    raise ValueError(f"override for {kind}/{name} must be a pair")


def sample_loguniform(lo: float, hi: float, rng: RngState) -> float:
    """exp(u) with u uniform on [ln lo, ln hi]; result clipped into [lo, hi]."""
    if not 0 < lo < hi:
        raise ValueError(f"need 0 < lo < hi, got ({lo}, {hi})")
    u = rng.uniform(math.log(lo), math.log(hi))
    return float(min(max(math.exp(u), lo), hi))


def sample_reflected_normal(mu: float, sd: float, rng: RngState) -> float:
    """|x| for x ~ N(mu, sd^2); negative draws are reflected."""
    if sd <= 0:
        raise ValueError("sd must be > 0")
    return abs(float(rng.normal(mu, sd)))


def _draw(family: str, a1: float, a2: float, rng: RngState) -> float:
    if family == "logu":
        return sample_loguniform(a1, a2, rng)
    if family == "u":
        return float(min(max(rng.uniform(a1, a2), a1), a2))
    if family == "absnorm":
        return sample_reflected_normal(a1, a2, rng)
    raise ValueError(f"unknown distribution family {family!r}")


def sample_sequence(kind, cfg: SamplerConfig, rng: RngState) -> SequenceParams:
    """Draw a fully populated SequenceParams for `kind` from the table."""
    kind = as_kind(kind)
    over = {k2: v for k2, v in cfg.overrides.get(kind.value, {}).items()}
    over.update(cfg.overrides.get(kind, {}))

    values = {}
    for name, family, a1, a2 in SAMPLING_TABLE[kind]:
        if name in over:
            a1, a2 = over[name]
        values[name] = _draw(family, a1, a2, rng)

    if "alpha_deg" in values:
        alpha = min(values["alpha_deg"], cfg.alpha_max_deg)
        values["alpha_deg"] = max(alpha, np.nextafter(0.0, 1.0))

    if kind is SequenceKind.MPRAGE:
        n = cfg.mprage_n
        td = max(0.0, values["tr"] - values["ti"] - n * values["tx"])
        return SequenceParams(kind=kind, n=n, td=td, **values)
    return SequenceParams(kind=kind, **values)


def sequence_kinds() -> tuple[SequenceKind, ...]:
    """The four simulated kinds in fixed draw order."""
    return (SequenceKind.FSE, SequenceKind.GRE, SequenceKind.FLAIR, SequenceKind.MPRAGE)
