"""Reference implementations of the self-supervised objective.

The contrastive term is the normalized-temperature cross entropy over cosine
similarities: each embedding is an anchor, its partner in the pair is the
positive, and every other embedding in the batch is a negative. The loss is
averaged over all 2N anchors so its scale does not depend on batch size.
The reconstruction term is a plain mean-absolute-error; the combined
objective adds the two with equal weight.

These are numerical references with analytic gradients, intended for
verification rather than training throughput.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import GridMismatchError
from .volume import Volume3D


@dataclass(frozen=True, eq=False)
class EmbeddingBatch:
    """2N embedding vectors ordered (a1, b1, a2, b2, ...), plus temperature."""

    vectors: np.ndarray
    tau: float = 0.5

    def __post_init__(self):
        vec = np.ascontiguousarray(self.vectors, dtype=np.float64)
        if vec.ndim != 2:
            raise ValueError("vectors must be a 2D array of shape (2*n_pairs, dim)")
        if vec.shape[0] < 2 or vec.shape[0] % 2 != 0:
            raise ValueError("vector count must be even and >= 2")
        if vec.shape[1] < 1:
            raise ValueError("dim must be >= 1")
        if not np.all(np.isfinite(vec)):
            raise ValueError("embeddings must be finite")
        if self.tau <= 0:
            raise ValueError("tau must be > 0")
        vec.setflags(write=False)
        object.__setattr__(self, "vectors", vec)
        object.__setattr__(self, "tau", float(self.tau))

    @property
    def n_pairs(self) -> int:
        return self.vectors.shape[0] // 2

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def cosine_similarity(u, v) -> float:
    """u.v / (|u||v|), in [-1, 1]. Raises on a zero-norm input."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ValueError("cosine similarity is undefined for zero-norm vectors")
    return float(np.dot(u, v) / (nu * nv))


def _similarity_matrix(batch: EmbeddingBatch):
    z = batch.vectors
    norms = np.linalg.norm(z, axis=1)
    if np.any(norms == 0.0):
        raise ValueError("embeddings must have nonzero norm")
    u = z / norms[:, None]
    return u @ u.T, u, norms


def _anchor_log_terms(sim: np.ndarray, tau: float):
    """Per-anchor (positive logit, masked logits, log-sum-exp) pieces."""
    m = sim.shape[0]
    logits = sim / tau
    np.fill_diagonal(logits, -np.inf)
    # Partner of anchor i under (a1, b1, a2, b2, ...) ordering.
    pos = np.arange(m) ^ 1
    # Max-subtracted log-sum-exp over the non-self entries.
    row_max = logits.max(axis=1)
    lse = row_max + np.log(np.exp(logits - row_max[:, None]).sum(axis=1))
    return logits[np.arange(m), pos], lse, pos


def nt_xent_loss(batch: EmbeddingBatch) -> float:
    """Contrastive loss, mean over all 2N anchors.

    For anchor i with positive p(i):
        -log( exp(sim(z_i, z_p(i))/tau) / sum_{k != i} exp(sim(z_i, z_k)/tau) )

    Requires n_pairs >= 2 so every anchor has at least one negative.
    """
    if batch.n_pairs < 2:
        raise ValueError("nt_xent_loss needs n_pairs >= 2")
    sim, _, _ = _similarity_matrix(batch)
    pos_logit, lse, _ = _anchor_log_terms(sim, batch.tau)
    return float(np.mean(lse - pos_logit))


def nt_xent_grad(batch: EmbeddingBatch) -> np.ndarray:
    """Analytic gradient of nt_xent_loss w.r.t. every embedding vector.

    Derivation: with u_i = z_i/|z_i| and s = u u^T, the loss depends on z_i
    only through row/column i of s. The softmax weights minus the positive
    indicator give dL/ds, and the chain rule through the normalization
    contributes (I - u_i u_i^T)/|z_i|.
    """
    if batch.n_pairs < 2:
        raise ValueError("nt_xent_grad needs n_pairs >= 2")
    sim, u, norms = _similarity_matrix(batch)
    m = sim.shape[0]
    logits = sim / batch.tau
    np.fill_diagonal(logits, -np.inf)
    row_max = logits.max(axis=1)
    w = np.exp(logits - row_max[:, None])
    w /= w.sum(axis=1, keepdims=True)

    pos = np.arange(m) ^ 1
    g = w.copy()
    g[np.arange(m), pos] -= 1.0
    g /= batch.tau * m

    a = g + g.T
    du = a @ u
    radial = np.einsum("ik,ik->i", a, sim)
    return (du - radial[:, None] * u) / norms[:, None]


def l1_loss(pred: Volume3D, target: Volume3D) -> float:
    """Mean absolute voxel difference, accumulated in 64-bit."""
    if pred.grid != target.grid:
        raise GridMismatchError("l1_loss requires volumes on the same grid")
    diff = pred.data.astype(np.float64) - target.data.astype(np.float64)
    return float(np.mean(np.abs(diff)))


def combined_loss(contrastive: float, recon_l1: float) -> float:
    """Equally weighted sum of the contrastive and reconstruction terms."""
    c = float(contrastive)
    r = float(recon_l1)
    if not (math.isfinite(c) and math.isfinite(r)):
        raise ValueError("loss terms must be finite")
    return c + r
