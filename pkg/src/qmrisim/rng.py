"""Deterministic random streams.

Every random draw in this package goes through :class:`RngState`, which wraps
numpy's counter-based Philox4x32-10 bit generator. A stream is fully
identified by ``(seed, path)`` where ``path`` is a tuple of substream ids fed
to ``numpy.random.SeedSequence`` as a spawn key. Identical ``(seed, path)``
always reproduces the identical draw sequence, so any sampled artefact can be
replayed bit-exactly from its recorded seed, independent of worker layout.
"""

import numpy as np

# Name and version of the mandated generator; recorded in manifests would be
# redundant since it never varies within a release.
ALGORITHM = "philox4x32-10/numpy-seedseq/v1"

_UINT64_MASK = (1 << 64) - 1


def normalize_seed(seed: int) -> int:
    """Map an arbitrary Python int onto the unsigned 64-bit seed space."""
    return int(seed) & _UINT64_MASK


def derive_seed(seed: int, *ids: int) -> int:
    """Derive a child seed from (seed, ids), e.g. one per batch index."""
    ss = np.random.SeedSequence(normalize_seed(seed), spawn_key=tuple(int(i) for i in ids))
    return int(ss.generate_state(1, np.uint64)[0])


class RngState:
    """A seeded Philox stream plus the substream path that produced it."""

    algorithm = ALGORITHM

    def __init__(self, seed: int, path: tuple[int, ...] = ()):
        self.seed = normalize_seed(seed)
        self.path = tuple(int(p) for p in path)
        ss = np.random.SeedSequence(self.seed, spawn_key=self.path)
        self._gen = np.random.Generator(np.random.Philox(ss))

    def __repr__(self) -> str:
        return f"RngState(seed={self.seed}, path={self.path})"

    def substream(self, *ids: int) -> "RngState":
        """Fresh independent stream keyed by this seed and an extended path."""
        return RngState(self.seed, self.path + tuple(int(i) for i in ids))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def uniform(self, lo: float = 0.0, hi: float = 1.0, size=None):
        return self._gen.uniform(lo, hi, size=size)

    def normal(self, mu: float = 0.0, sd: float = 1.0, size=None):
        return self._gen.normal(mu, sd, size=size)

    def integers(self, lo: int, hi: int, size=None):
        """Draw from [lo, hi) like numpy's half-open convention."""
        return self._gen.integers(lo, hi, size=size)

    def choice_index(self, n: int) -> int:
        """Uniform index in [0, n)."""
        return int(self._gen.integers(0, n))
