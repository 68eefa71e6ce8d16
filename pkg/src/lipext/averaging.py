"""
Projections from C(M) onto the functions p -> tr(a p), M the rank-one
projections in M_n, built from finitely many point evaluations, and their
averages over the unitary group acting by conjugation.

A ``PointEvaluationMap`` sends f to the Hermitian matrix
a = sum_k f(x_k) b_k; it is a projection when sum_k tr(a x_k) b_k = a for
every Hermitian a. Conjugating by u replaces the nodes x_k by u x_k u* and the
duals b_k by u b_k u*, so a Haar average of conjugates is again a map of the
same kind, with more nodes.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import linalg, optimize

from .errors import DimensionMismatchError, InvalidProjectionError
from .extension import herm_coords, herm_from_coords
from .sampling import QuadratureSet, make_rng, outer, sample_haar_unitary, sample_unit_vectors
from .spaces import SpaceDescriptor, norms

PROJECTION_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class PointEvaluationMap:
    n: int
    nodes: np.ndarray  # (K, n) unit vectors x_k
    duals: np.ndarray  # (K, n, n) Hermitian b_k

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=np.complex128)
        duals = np.asarray(self.duals, dtype=np.complex128)
        if nodes.ndim != 2 or nodes.shape[1] != self.n or duals.shape != (len(nodes), self.n, self.n):
            raise DimensionMismatchError("nodes must be (K, n) and duals (K, n, n)")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "duals", duals)

    def __len__(self) -> int:
        return len(self.nodes)

    @cached_property
    def node_coords(self) -> np.ndarray:
        return herm_coords(outer(self.nodes))

    @cached_property
    def dual_coords(self) -> np.ndarray:
        return herm_coords(self.duals)

    def apply(self, values: np.ndarray) -> np.ndarray:
        """Hermitian matrices for node values of shape (..., K)."""
        values = np.asarray(values, dtype=float)
        if values.shape[-1] != len(self):
            raise DimensionMismatchError(f"{values.shape[-1]} values for {len(self)} nodes")
        return herm_from_coords(values @ self.dual_coords, self.n)

    def apply_function(self, fn) -> np.ndarray:
        """``fn`` maps an array of unit vectors (K, n) to real values (K,)."""
        return self.apply(fn(self.nodes))

    def sampling_map(self) -> np.ndarray:
        """n^2 x n^2 matrix of a -> sum_k tr(a x_k) b_k in Hermitian coordinates."""
        return self.dual_coords.T @ self.node_coords

    def projection_defect(self) -> float:
        return float(np.abs(self.sampling_map() - np.eye(self.n ** 2)).max())

    def is_projection(self, tol: float = PROJECTION_TOL) -> bool:
        return self.projection_defect() <= tol

    def corrected(self) -> PointEvaluationMap:
        """Compose with the inverse sampling map, which makes the map an exact projection."""
        S = self.sampling_map()
        coords = self.dual_coords @ np.linalg.inv(S).T
        return PointEvaluationMap(self.n, self.nodes, herm_from_coords(coords, self.n))

    def conjugated(self, u: np.ndarray) -> PointEvaluationMap:
        """The map f -> u Q(f o Ad(u)) u*, i.e. nodes u x_k and duals u b_k u*."""
        return PointEvaluationMap(self.n, self.nodes @ u.T, u @ self.duals @ u.conj().T)

    def lebesgue(self, probes: np.ndarray) -> np.ndarray:
        """sum_k |tr(b_k p)| at each probe p = v v*, for probe vectors (m, n)."""
        pc = herm_coords(outer(probes))
        out = np.empty(len(pc))
        step = max(1, 4_000_000 // max(len(self), 1))
        for s in range(0, len(pc), step):
            out[s:s + step] = np.abs(pc[s:s + step] @ self.dual_coords.T).sum(axis=1)
        return out

    def norm(self, probes: int = 4096, refine: int = 8, seed: int = 0) -> float:
        """sup over M of sum_k |tr(b_k p)|, the C(M) -> C(M) operator norm.

        Random probes followed by Nelder-Mead refinement of the best few; the
        result is a lower estimate of the supremum.
        """
        rng = make_rng(seed)
        vecs = sample_unit_vectors(self.n, probes, rng)
        vals = self.lebesgue(vecs)
        best = float(vals.max())
        n = self.n

        def neg(x):
            v = x[:n] + 1j * x[n:]
            nv = np.linalg.norm(v)
            if nv == 0:
                return 0.0
            return -float(self.lebesgue((v / nv)[None, :])[0])

        for idx in np.argsort(vals)[::-1][:refine]:
            x0 = np.concatenate([vecs[idx].real, vecs[idx].imag])
            res = optimize.minimize(neg, x0, method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 4000})
            best = max(best, -float(res.fun))
        return best


def interpolation_projection(nodes: np.ndarray) -> PointEvaluationMap:
    """Projection interpolating f at n^2 rank-one projections (must span the Hermitian matrices)."""
    nodes = np.asarray(nodes, dtype=np.complex128)
    n = nodes.shape[1]
    if len(nodes) != n * n:
        raise DimensionMismatchError(f"interpolation needs exactly n^2 = {n * n} nodes")
    X = herm_coords(outer(nodes))
    if np.linalg.matrix_rank(X) < n * n:
        raise InvalidProjectionError("interpolation nodes do not span the Hermitian matrices")
    duals = np.linalg.inv(X).T
    return PointEvaluationMap(n, nodes, herm_from_coords(duals, n))


def select_interpolation_nodes(n: int, seed: int, pool: int = 256) -> np.ndarray:
    """Pick n^2 well-spread nodes from a random pool by column-pivoted QR."""
    cand = sample_unit_vectors(n, pool, make_rng(seed))
    X = herm_coords(outer(cand))
    _, _, piv = linalg.qr(X.T, pivoting=True, mode="economic")
    return cand[np.sort(piv[: n * n])]


def kernel_point_map(quad: QuadratureSet, exact: bool = True) -> PointEvaluationMap:
    """Discrete kernel projection: b_j = (-n I + n(n+1) p_j) / N."""
    n = quad.n
    duals = (-n * np.eye(n) + n * (n + 1) * quad.projections) / len(quad)
    m = PointEvaluationMap(n, quad.vectors, duals)
    return m.corrected() if exact else m


def average_projection(Q: PointEvaluationMap, samples: int | None = None, seed: int | None = None,
                       unitaries: np.ndarray | None = None) -> PointEvaluationMap:
    """Monte Carlo version of the group average of u Q(f o Ad(u)) u* over Haar u.

    Either ``samples`` Haar unitaries are drawn from ``seed`` or an explicit
    stack of ``unitaries`` is used. Each conjugate is a projection with the
    same norm as Q, so the average is a projection of norm at most ||Q||.
    """
    if not Q.is_projection():
        raise InvalidProjectionError(f"Q is not a projection (defect {Q.projection_defect():.3g})")
    if unitaries is None:
        if samples is None or seed is None:
            raise InvalidProjectionError("give samples and seed, or explicit unitaries")
        unitaries = sample_haar_unitary(Q.n, make_rng(seed), size=samples)
    unitaries = np.asarray(unitaries, dtype=np.complex128).reshape(-1, Q.n, Q.n)
    S = len(unitaries)
    # nodes u x_k: (S, K, n); duals u b_k u*: (S, K, n, n)
    nodes = np.einsum("sab,kb->ska", unitaries, Q.nodes).reshape(-1, Q.n)
    duals = np.einsum("sab,kbc,sdc->skad", unitaries, Q.duals, unitaries.conj()).reshape(-1, Q.n, Q.n) / S
    return PointEvaluationMap(Q.n, nodes, duals)


def quadratic_probe(c: np.ndarray):
    """f(q) = tr(c q)^2 as a function of unit vectors."""
    return lambda v: np.real(np.einsum("ka,ab,kb->k", v.conj(), c, v)) ** 2


def kernel_image_quadratic(c: np.ndarray) -> np.ndarray:
    """Exact image of tr(c q)^2 under the invariant projection.

    Uses the third moment of a uniform rank-one projection q:
    E[q tr(cq)^2] = ((tr c)^2 + tr c^2) I + 2 tr(c) c + 2 c^2, over n(n+1)(n+2),
    and E[tr(cq)^2] = ((tr c)^2 + tr c^2) / (n(n+1)).
    """
    n = c.shape[0]
    t1 = np.trace(c).real
    t2 = np.trace(c @ c).real
    mean_f = (t1 ** 2 + t2) / (n * (n + 1))
    moment = ((t1 ** 2 + t2) * np.eye(n) + 2 * t1 * c + 2 * c @ c) / (n * (n + 1) * (n + 2))
    return -n * mean_f * np.eye(n) + n * (n + 1) * moment


def probe_matrices(n: int, count: int = 4, seed: int = 0) -> list[np.ndarray]:
    """Fixed Hermitian probes of unit operator norm."""
    rng = make_rng(seed)
    out = []
    for _ in range(count):
        a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        a = a + a.conj().T
        out.append(a / norms(SpaceDescriptor.matrix_sa(n), a))
    return out


def distance_to_kernel(P: PointEvaluationMap, probes: list[np.ndarray] | None = None) -> float:
    """max over probe matrices c of ||P(tr(c .)^2) - P_kernel(tr(c .)^2)|| (operator norm)."""
    if probes is None:
        probes = probe_matrices(P.n)
    desc = SpaceDescriptor.matrix_sa(P.n)
    return max(
        float(norms(desc, P.apply_function(quadratic_probe(c)) - kernel_image_quadratic(c)))
        for c in probes
    )
