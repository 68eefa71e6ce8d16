"""Seeded sampling: unit spheres in C^n, Haar unitaries, rank-one projection nodes."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import LipextError

# sample-based routines draw in fixed-size shards so results do not depend on
# how the work is split across workers
SHARD_SIZE = 1 << 16


def make_rng(seed: int, shard: int | None = None) -> np.random.Generator:
    """PCG64 generator for ``seed``; shard s gets the stream keyed by (seed, s)."""
    if seed is None:
        raise LipextError("an explicit seed is required")
    key = [int(seed)] if shard is None else [int(seed), int(shard)]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(key)))


def shard_sizes(samples: int, shard_size: int = SHARD_SIZE):
    """Yield (shard index, count) pairs covering ``samples`` draws."""
    full, rest = divmod(int(samples), shard_size)
    for s in range(full):
        yield s, shard_size
    if rest:
        yield full, rest


def complex_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard complex normal entries, E|z|^2 = 1."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def sample_unit_vectors(n: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """``size`` independent uniform unit vectors in C^n, shape (size, n)."""
    if n < 1:
        raise LipextError("n must be >= 1")
    z = complex_gaussian(rng, (size, n))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def sample_unit_vector(n: int, rng: np.random.Generator) -> np.ndarray:
    return sample_unit_vectors(n, 1, rng)[0]


def sample_haar_unitary(n: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Haar-distributed U(n) matrices via QR of a Ginibre matrix.

    Each column of Q is rescaled by the phase of the matching diagonal entry
    of R; without that the output is unitary but not Haar.
    """
    if n < 1:
        raise LipextError("n must be >= 1")
    shape = (n, n) if size is None else (size, n, n)
    q, r = np.linalg.qr(complex_gaussian(rng, shape))
    d = np.diagonal(r, axis1=-2, axis2=-1)
    return q * (d / np.abs(d))[..., None, :]


def outer(vectors: np.ndarray) -> np.ndarray:
    """Rank-one projections v v* for a stack of unit vectors, shape (..., n, n)."""
    return vectors[..., :, None] * np.conj(vectors[..., None, :])


@dataclass(frozen=True, eq=False)
class RankOneNode:
    """A point p = v v* of the rank-one projection manifold."""

    unit: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.unit, dtype=np.complex128)
        if v.ndim != 1 or abs(np.linalg.norm(v) - 1.0) > 1e-12:
            raise LipextError("a rank-one node needs a unit vector")
        object.__setattr__(self, "unit", v)

    @property
    def projection(self) -> np.ndarray:
        return outer(self.unit)


@dataclass(frozen=True, eq=False)
class QuadratureSet:
    """Equal-weight nodes on the manifold of rank-one projections in M_n."""

    n: int
    vectors: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=np.complex128)
        if v.ndim != 2 or v.shape[1] != self.n or len(v) == 0:
            raise LipextError(f"expected node vectors of shape (N, {self.n})")
        v.setflags(write=False)
        object.__setattr__(self, "vectors", v)

    def __len__(self) -> int:
        return len(self.vectors)

    @property
    def weight(self) -> float:
        return 1.0 / len(self.vectors)

    @property
    def nodes(self) -> list[RankOneNode]:
        return [RankOneNode(v) for v in self.vectors]

    @cached_property
    def projections(self) -> np.ndarray:
        return outer(self.vectors)

    @cached_property
    def coords(self) -> np.ndarray:
        """Real coordinates with coords[i] . coords[j] = tr(p_i p_j)."""
        p = self.projections.reshape(len(self), -1)
        return np.ascontiguousarray(np.concatenate([p.real, p.imag], axis=1))


def sample_quadrature(n: int, size: int, rng: np.random.Generator, frames: bool = True) -> QuadratureSet:
    """Draw ``size`` nodes with the unitarily invariant law.

    With ``frames`` the nodes come in orthonormal frames (the columns of
    independent Haar unitaries), so the node average of p is exactly I/n
    whenever n divides ``size``. Every node is still uniformly distributed.
    """
    if frames and n > 1:
        count = -(-size // n)
        u = sample_haar_unitary(n, rng, size=count)
        vecs = np.swapaxes(u, 1, 2).reshape(count * n, n)[:size]
    else:
        vecs = sample_unit_vectors(n, size, rng)
    return QuadratureSet(n, vecs)
