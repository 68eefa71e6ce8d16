"""
Normed target spaces, finite metric spaces and Lipschitz constants.

Every target space is treated as a real Banach space. Values are stored as
numpy arrays whose trailing shape is fixed by the descriptor:

    real-sup(k), real-euclid(k)   float64, shape (k,)
    complex                       complex128, shape (1,)
    seq-sup-complex(k)            complex128, shape (k,)
    mn(n), mn-sa(n)               complex128, shape (n, n)

Batched helpers (``norms``, ``to_real``) accept any number of leading axes.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse.csgraph import floyd_warshall

from .errors import (
    DimensionMismatchError,
    MalformedElementError,
    MetricError,
)

KINDS = ("real-sup", "real-euclid", "complex", "seq-sup-complex", "mn", "mn-sa")

HERMITIAN_TOL = 1e-12
METRIC_TOL = 1e-12


@dataclass(frozen=True)
class SpaceDescriptor:
    """Tag for a finite-dimensional normed space.

    ``size`` is k for the sequence kinds and n for the matrix kinds; it is
    forced to 1 for ``complex``.
    """

    kind: str
    size: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise MalformedElementError(f"unknown space kind {self.kind!r}")
        if self.kind == "complex":
            object.__setattr__(self, "size", 1)
        if int(self.size) != self.size or self.size < 1:
            raise MalformedElementError(f"space size must be a positive integer, got {self.size!r}")
        object.__setattr__(self, "size", int(self.size))

    @classmethod
    def real_sup(cls, k: int) -> SpaceDescriptor:
        return cls("real-sup", k)

    @classmethod
    def real_euclid(cls, k: int) -> SpaceDescriptor:
        return cls("real-euclid", k)

    @classmethod
    def complex_plane(cls) -> SpaceDescriptor:
        return cls("complex", 1)

    @classmethod
    def seq_sup_complex(cls, k: int) -> SpaceDescriptor:
        return cls("seq-sup-complex", k)

    @classmethod
    def matrix_full(cls, n: int) -> SpaceDescriptor:
        return cls("mn", n)

    @classmethod
    def matrix_sa(cls, n: int) -> SpaceDescriptor:
        return cls("mn-sa", n)

    @property
    def is_real(self) -> bool:
        return self.kind in ("real-sup", "real-euclid")

    @property
    def is_matrix(self) -> bool:
        return self.kind in ("mn", "mn-sa")

    @property
    def shape(self) -> tuple[int, ...]:
        if self.is_matrix:
            return (self.size, self.size)
        return (self.size,)

    @property
    def dtype(self):
        return np.float64 if self.is_real else np.complex128

    @property
    def real_dim(self) -> int:
        """Dimension over the reals."""
        if self.is_real:
            return self.size
        if self.kind == "complex":
            return 2
        if self.kind == "seq-sup-complex":
            return 2 * self.size
        if self.kind == "mn":
            return 2 * self.size ** 2
        return self.size ** 2

    def zeros(self, *lead: int) -> np.ndarray:
        return np.zeros(lead + self.shape, dtype=self.dtype)

    def __str__(self) -> str:
        if self.kind == "complex":
            return "complex"
        return f"{self.kind}({self.size})"


def check_shape(desc: SpaceDescriptor, arr: np.ndarray, lead: int | None = None) -> None:
    tail = arr.shape[arr.ndim - len(desc.shape):] if arr.ndim >= len(desc.shape) else None
    if tail != desc.shape or (lead is not None and arr.ndim != lead + len(desc.shape)):
        raise MalformedElementError(
            f"data of shape {arr.shape} does not match {desc} (element shape {desc.shape})"
        )


def hermitian_defect(a: np.ndarray) -> np.ndarray:
    """Max entrywise |a - a*| per matrix, for arrays of shape (..., n, n)."""
    return np.abs(a - np.conj(np.swapaxes(a, -1, -2))).max(axis=(-2, -1))


def coerce(desc: SpaceDescriptor, data, lead: int | None = None) -> np.ndarray:
    """Convert ``data`` to a validated array for ``desc``."""
    arr = np.asarray(data)
    if desc.is_real:
        if np.iscomplexobj(arr):
            raise MalformedElementError(f"{desc} takes real data")
        arr = arr.astype(np.float64)
    else:
        arr = arr.astype(np.complex128)
    check_shape(desc, arr, lead)
    if not np.all(np.isfinite(arr)):
        raise MalformedElementError("element data contains non-finite entries")
    if desc.kind == "mn-sa" and arr.size:
        mag = np.abs(arr).max(axis=(-2, -1))
        if np.any(hermitian_defect(arr) > HERMITIAN_TOL * (1.0 + mag)):
            raise MalformedElementError("mn-sa element is not Hermitian")
    return arr


def norms(desc: SpaceDescriptor, arr: np.ndarray) -> np.ndarray:
    """Norms of a stack of elements; reduces the trailing element axes."""
    kind = desc.kind
    if kind in ("real-sup", "seq-sup-complex"):
        return np.abs(arr).max(axis=-1)
    if kind in ("real-euclid", "complex"):
        return np.sqrt((np.abs(arr) ** 2).sum(axis=-1))
    if kind == "mn-sa":
        # symmetrize so roundoff-level skew parts cannot leak into eigvalsh
        herm = 0.5 * (arr + np.conj(np.swapaxes(arr, -1, -2)))
        return np.abs(np.linalg.eigvalsh(herm)).max(axis=-1)
    return np.linalg.svd(arr, compute_uv=False)[..., 0]


def to_real(desc: SpaceDescriptor, arr: np.ndarray) -> np.ndarray:
    """Real coordinates (Euclidean / Frobenius geometry), shape (..., d)."""
    nlead = arr.ndim - len(desc.shape)
    flat = arr.reshape(arr.shape[:nlead] + (-1,))
    if desc.is_real:
        return np.ascontiguousarray(flat, dtype=np.float64)
    return np.ascontiguousarray(np.stack([flat.real, flat.imag], axis=-1).reshape(flat.shape[:-1] + (-1,)))


def from_real(desc: SpaceDescriptor, coords: np.ndarray) -> np.ndarray:
    """Inverse of :func:`to_real`."""
    lead = coords.shape[:-1]
    if desc.is_real:
        return coords.reshape(lead + desc.shape).copy()
    pairs = coords.reshape(lead + (-1, 2))
    return (pairs[..., 0] + 1j * pairs[..., 1]).reshape(lead + desc.shape)


@dataclass(frozen=True, eq=False)
class SpaceElement:
    """A value in a target space."""

    descriptor: SpaceDescriptor
    data: np.ndarray

    def __post_init__(self):
        arr = coerce(self.descriptor, self.data, lead=0)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    def norm(self) -> float:
        return norm(self)

    def __sub__(self, other: SpaceElement) -> SpaceElement:
        if other.descriptor != self.descriptor:
            raise DimensionMismatchError(f"{self.descriptor} vs {other.descriptor}")
        return SpaceElement(self.descriptor, self.data - other.data)


def norm(v: SpaceElement) -> float:
    return float(norms(v.descriptor, v.data))


def pairing_sa(a, b) -> float:
    """tr(ab) for Hermitian matrices (SpaceElements of mn-sa or raw arrays)."""
    if isinstance(a, SpaceElement):
        if a.descriptor.kind != "mn-sa":
            raise DimensionMismatchError("pairing_sa needs mn-sa elements")
        a = a.data
    if isinstance(b, SpaceElement):
        if b.descriptor.kind != "mn-sa":
            raise DimensionMismatchError("pairing_sa needs mn-sa elements")
        b = b.data
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 2:
        raise DimensionMismatchError(f"cannot pair {a.shape} with {b.shape}")
    # tr(ab) = sum_ij a_ij b_ji, real for Hermitian a, b
    return float(np.real(np.sum(a * b.T)))


@dataclass(frozen=True, eq=False)
class FiniteMetricSpace:
    """Labeled points with a validated distance matrix."""

    labels: tuple
    dist: np.ndarray

    def __post_init__(self):
        labels = tuple(self.labels)
        d = np.array(self.dist, dtype=np.float64)
        m = len(labels)
        if d.shape != (m, m):
            raise MetricError(f"distance matrix has shape {d.shape}, expected ({m}, {m})")
        if len(set(labels)) != m:
            raise MetricError("point labels must be distinct")
        validate_metric(d)
        d.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "dist", d)

    def __len__(self) -> int:
        return len(self.labels)

    def index(self, label) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise MetricError(f"unknown point label {label!r}") from None

    @classmethod
    def from_points(cls, points, labels: Sequence | None = None) -> FiniteMetricSpace:
        """Euclidean distances between the rows of ``points``."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if pts.shape[0] == 1 and np.ndim(points) == 1:
            pts = pts.T
        diff = pts[:, None, :] - pts[None, :, :]
        d = np.sqrt((diff ** 2).sum(axis=-1))
        if labels is None:
            labels = range(len(pts))
        return cls(tuple(labels), d)

    @classmethod
    def from_matrix(cls, mat, labels: Sequence | None = None, repair: bool = False) -> FiniteMetricSpace:
        """Build from a symmetric positive matrix, optionally repaired by metric closure."""
        d = np.array(mat, dtype=np.float64)
        if repair:
            d = metric_closure(d)
        if labels is None:
            labels = range(len(d))
        return cls(tuple(labels), d)

    @classmethod
    def line(cls, m: int) -> FiniteMetricSpace:
        """Points 0..m-1 on the real line."""
        return cls.from_points(np.arange(m, dtype=float)[:, None])


def metric_closure(mat: np.ndarray) -> np.ndarray:
    """All-pairs shortest paths over a symmetric matrix of positive edge lengths."""
    d = np.asarray(mat, dtype=np.float64)
    d = 0.5 * (d + d.T)
    if np.any(d[~np.eye(len(d), dtype=bool)] <= 0):
        raise MetricError("metric closure needs strictly positive off-diagonal entries")
    np.fill_diagonal(d, 0.0)
    closed = floyd_warshall(d, directed=False)
    np.fill_diagonal(closed, 0.0)
    return closed


def validate_metric(d: np.ndarray) -> None:
    m = len(d)
    if not np.all(np.isfinite(d)):
        raise MetricError("distances must be finite")
    if np.any(np.diag(d) != 0):
        raise MetricError("dist[i][i] must be 0")
    if not np.array_equal(d, d.T):
        raise MetricError("distance matrix must be symmetric")
    off = ~np.eye(m, dtype=bool)
    if np.any(d[off] <= 0):
        i, j = np.argwhere((d <= 0) & off)[0]
        raise MetricError(f"dist[{i}][{j}] = {d[i, j]} must be positive")
    if m < 3:
        return
    slack = METRIC_TOL * max(1.0, float(d.max()))
    # best two-hop route i -> j -> k for every (i, k)
    two_hop = (d[:, :, None] + d[None, :, :]).min(axis=1)
    bad = d > two_hop + slack
    if np.any(bad):
        i, k = np.argwhere(bad)[0]
        j = int(np.argmin(d[i, :] + d[:, k]))
        raise MetricError(
            f"triangle inequality fails: dist[{i}][{k}] = {d[i, k]} > "
            f"dist[{i}][{j}] + dist[{j}][{k}] = {d[i, j] + d[j, k]}"
        )


def pairwise_lipschitz(dist: np.ndarray, desc: SpaceDescriptor, values: np.ndarray) -> float:
    """Exact max of ||v_i - v_j|| / dist[i, j] over unordered pairs; 0 for one point."""
    m = len(values)
    if m < 2:
        return 0.0
    iu, ju = np.triu_indices(m, k=1)
    diffs = values[iu] - values[ju]
    return float((norms(desc, diffs) / dist[iu, ju]).max())


@dataclass(frozen=True, eq=False)
class PartialFunction:
    """A target-valued function on a subset X of a finite metric space Z."""

    space: FiniteMetricSpace
    subset: tuple
    values: np.ndarray
    target: SpaceDescriptor

    def __post_init__(self):
        subset = tuple(int(i) for i in self.subset)
        if not subset:
            raise MetricError("the subset X must be nonempty")
        if len(set(subset)) != len(subset):
            raise MetricError("the subset X has duplicate indices")
        if min(subset) < 0 or max(subset) >= len(self.space):
            raise MetricError("subset index out of range")
        vals = coerce(self.target, self.values, lead=1)
        if len(vals) != len(subset):
            raise MalformedElementError(f"{len(vals)} values for {len(subset)} subset points")
        vals.setflags(write=False)
        object.__setattr__(self, "subset", subset)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_mapping(cls, space: FiniteMetricSpace, values: dict, target: SpaceDescriptor) -> PartialFunction:
        """Build from ``{label: data}``; insertion order defines the subset order."""
        subset = [space.index(lbl) for lbl in values]
        data = [coerce(target, v, lead=0) for v in values.values()]
        return cls(space, tuple(subset), np.stack(data), target)

    @property
    def subset_dist(self) -> np.ndarray:
        idx = np.asarray(self.subset)
        return self.space.dist[np.ix_(idx, idx)]

    @property
    def free(self) -> tuple:
        """Indices of Z outside X."""
        taken = set(self.subset)
        return tuple(i for i in range(len(self.space)) if i not in taken)

    @property
    def elements(self) -> list[SpaceElement]:
        return [SpaceElement(self.target, v) for v in self.values]

    @cached_property
    def _lip(self) -> float:
        return pairwise_lipschitz(self.subset_dist, self.target, self.values)

    def lipschitz(self) -> float:
        return self._lip

    def sup_norm(self) -> float:
        return float(norms(self.target, self.values).max())


def lipschitz_constant(f, values: np.ndarray | None = None) -> float:
    """L(f) for a PartialFunction, or for a full assignment on a metric space.

    ``lipschitz_constant(pf)`` uses the induced submetric on X;
    ``lipschitz_constant((space, target), values)`` scores an assignment on all of Z.
    """
    if isinstance(f, PartialFunction):
        return f.lipschitz()
    space, target = f
    vals = coerce(target, values, lead=1)
    if len(vals) != len(space):
        raise MalformedElementError(f"{len(vals)} values for {len(space)} points")
    return pairwise_lipschitz(space.dist, target, vals)


def restrict_dist(space: FiniteMetricSpace, rows: Iterable[int], cols: Iterable[int]) -> np.ndarray:
    return space.dist[np.ix_(list(rows), list(cols))]
