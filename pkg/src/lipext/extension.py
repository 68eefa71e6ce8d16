"""
Constructive Lipschitz extenders.

* ``mcshane_extend``: scalar sup-of-cones extension, exact Lipschitz constant.
* ``coordinatewise_extend``: McShane per real coordinate for sup-norm targets.
* ``extend_sa``: Hermitian matrix targets. Values are lifted to functions on a
  sample of rank-one projections, each node is extended by McShane, and the
  result is mapped back by the invariant kernel projection
  K(p, q) = -n + n(n+1) tr(pq).
* ``radial_retract`` / ``extend_norm_preserving``: sup-norm preservation at
  the cost of at most a factor 2 in the Lipschitz constant.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import (
    DimensionMismatchError,
    LipextError,
    UnderdeterminedQuadratureError,
    WrongTargetError,
)
from .sampling import QuadratureSet, make_rng, sample_quadrature
from .spaces import (
    FiniteMetricSpace,
    PartialFunction,
    SpaceDescriptor,
    SpaceElement,
    coerce,
    from_real,
    norms,
    pairwise_lipschitz,
    to_real,
)

SQRT2 = float(np.sqrt(2.0))


@dataclass(frozen=True, eq=False)
class ExtensionResult:
    """An extension g of f to all of Z, with recomputed diagnostics."""

    space: FiniteMetricSpace
    target: SpaceDescriptor
    assignment: np.ndarray
    method: str
    achieved_L: float
    achieved_sup: float
    lipschitz_f: float
    ratio: float
    restriction_error: float
    guarantee: str
    metadata: dict = field(default_factory=dict)

    @property
    def elements(self) -> list[SpaceElement]:
        return [SpaceElement(self.target, v) for v in self.assignment]

    def recompute_L(self) -> float:
        return pairwise_lipschitz(self.space.dist, self.target, self.assignment)


def finish(f: PartialFunction, assignment: np.ndarray, method: str, guarantee: str, **metadata) -> ExtensionResult:
    """Wrap an assignment on Z; every reported number is recomputed here."""
    assignment = coerce(f.target, assignment, lead=1)
    if len(assignment) != len(f.space):
        raise DimensionMismatchError(f"assignment covers {len(assignment)} of {len(f.space)} points")
    achieved = pairwise_lipschitz(f.space.dist, f.target, assignment)
    lip = f.lipschitz()
    ratio = achieved / lip if lip > 0 else 1.0
    restricted = assignment[list(f.subset)]
    err = float(norms(f.target, restricted - f.values).max())
    return ExtensionResult(
        space=f.space,
        target=f.target,
        assignment=assignment,
        method=method,
        achieved_L=achieved,
        achieved_sup=float(norms(f.target, assignment).max()),
        lipschitz_f=lip,
        ratio=ratio,
        restriction_error=err,
        guarantee=guarantee,
        metadata=metadata,
    )


def mcshane_columns(values: np.ndarray, dist_zx: np.ndarray, lip, bound=None) -> np.ndarray:
    """McShane extension of several real functions at once.

    values: (|X|, m) samples on X; dist_zx: (|Z|, |X|) distances;
    lip: scalar or (m,) Lipschitz constants used in the cones;
    bound: optional (m,) floors, g := max(g, -bound).
    Returns (|Z|, m).
    """
    lip = np.broadcast_to(np.asarray(lip, dtype=float), values.shape[1:])
    cones = values[None, :, :] - dist_zx[:, :, None] * lip[None, None, :]
    g = cones.max(axis=1)
    if bound is not None:
        g = np.maximum(g, -np.asarray(bound, dtype=float))
    return g


def _columnwise(f: PartialFunction, cols: np.ndarray, lip, clamp: bool) -> np.ndarray:
    bound = np.abs(cols).max(axis=0) if clamp else None
    dist_zx = f.space.dist[:, list(f.subset)]
    g = mcshane_columns(cols, dist_zx, lip, bound)
    # restriction to X is f itself, bit for bit
    g[list(f.subset)] = cols
    return g


def mcshane_extend(f: PartialFunction, clamp: bool = True, lip: float | None = None) -> ExtensionResult:
    """g(z) = max_x f(x) - L(f) rho(z, x), floored at -||f||_inf when ``clamp``."""
    if f.target.kind not in ("real-sup", "real-euclid") or f.target.size != 1:
        raise WrongTargetError(f"McShane extension needs a scalar real target, got {f.target}")
    L = f.lipschitz() if lip is None else float(lip)
    g = _columnwise(f, f.values, L, clamp)
    return finish(f, g, "mcshane", "L(g) = L(f)", clamp=clamp)


def coordinatewise_extend(f: PartialFunction, clamp: bool = True) -> ExtensionResult:
    """McShane in every real coordinate, each with its own Lipschitz constant.

    Exact (L(g) = L(f)) for real-sup targets. Complex coordinates are split
    into real and imaginary parts, which only guarantees sqrt(2) L(f).
    """
    kind = f.target.kind
    if kind not in ("real-sup", "seq-sup-complex", "complex"):
        raise WrongTargetError(f"coordinatewise extension needs a sup-norm target, got {f.target}")
    cols = to_real(f.target, f.values)
    sub = f.subset_dist
    lips = np.array([
        pairwise_lipschitz(sub, SpaceDescriptor.real_sup(1), cols[:, [c]]) for c in range(cols.shape[1])
    ])
    g = from_real(f.target, _columnwise(f, cols, lips, clamp))
    if kind == "real-sup":
        return finish(f, g, "coordinatewise", "L(g) = L(f)", clamp=clamp, guarantee_factor=1.0)
    return finish(f, g, "coordinatewise", "L(g) <= sqrt(2) L(f)", clamp=clamp, guarantee_factor=SQRT2)


# --- invariant kernel projection on rank-one projections ------------------


def hermitian_basis(n: int) -> np.ndarray:
    """Frobenius-orthonormal basis of the n x n Hermitian matrices, shape (n^2, n, n)."""
    basis = []
    for i in range(n):
        e = np.zeros((n, n), complex)
        e[i, i] = 1.0
        basis.append(e)
    for i in range(n):
        for j in range(i + 1, n):
            e = np.zeros((n, n), complex)
            e[i, j] = e[j, i] = 1 / SQRT2
            basis.append(e)
            e = np.zeros((n, n), complex)
            e[i, j], e[j, i] = 1j / SQRT2, -1j / SQRT2
            basis.append(e)
    return np.array(basis)


def herm_coords(a: np.ndarray) -> np.ndarray:
    """Coordinates of Hermitian matrices (..., n, n) in :func:`hermitian_basis`."""
    n = a.shape[-1]
    return np.real(np.einsum("kij,...ji->...k", hermitian_basis(n), a))


def herm_from_coords(c: np.ndarray, n: int) -> np.ndarray:
    return np.einsum("...k,kij->...ij", c, hermitian_basis(n))


@dataclass(frozen=True, eq=False)
class KernelProjection:
    """Discrete surrogate of the invariant projection onto tr(a p) functions."""

    n: int
    quad: QuadratureSet

    @property
    def mu(self) -> float:
        return -float(self.n)

    @property
    def nu(self) -> float:
        return float(self.n * (self.n + 1))

    def kernel_matrix(self) -> np.ndarray:
        return kernel_matrix(self.quad)

    def discrete_norm(self) -> float:
        return discrete_projection_norm(self.quad)

    @cached_property
    def node_coords(self) -> np.ndarray:
        """(N, n^2) Hermitian-basis coordinates of the node projections."""
        return herm_coords(self.quad.projections)

    def reconstruct_coords(self, h: np.ndarray) -> np.ndarray:
        """Coordinates of mu mean(h) I + nu mean(h_j p_j), for h of shape (..., N)."""
        h = np.asarray(h, dtype=float)
        if h.shape[-1] != len(self.quad):
            raise DimensionMismatchError(f"{h.shape[-1]} node values for {len(self.quad)} nodes")
        N = len(self.quad)
        eye = herm_coords(np.eye(self.n))
        return (self.mu * h.mean(axis=-1))[..., None] * eye + self.nu * (h @ self.node_coords) / N

    def reconstruct(self, h: np.ndarray) -> np.ndarray:
        return herm_from_coords(self.reconstruct_coords(h), self.n)

    @cached_property
    def sampling_map(self) -> np.ndarray:
        """Matrix R with reconstruct(node values of tr(a p)) = R a, in Hermitian coordinates.

        R tends to the identity as N grows; its inverse turns the discrete
        operator into an exact projection onto the sampled tr(a p) functions.
        """
        C = self.node_coords
        N = len(C)
        if N < self.n ** 2 or np.linalg.matrix_rank(C) < self.n ** 2:
            raise UnderdeterminedQuadratureError(
                f"{N} nodes do not determine an element of a {self.n ** 2}-dimensional space"
            )
        eye = herm_coords(np.eye(self.n))
        return self.mu * np.outer(eye, C.mean(axis=0)) + self.nu * (C.T @ C) / N

    def project_coords(self, h: np.ndarray) -> np.ndarray:
        """Exact projection: coordinates of the a whose node values best match P_N h."""
        raw = self.reconstruct_coords(h)
        return np.linalg.solve(self.sampling_map, raw.reshape(-1, raw.shape[-1]).T).T.reshape(raw.shape)


def kernel_matrix(quad: QuadratureSet) -> np.ndarray:
    """K[i, j] = -n + n(n+1) tr(p_i p_j); the diagonal is exactly n^2."""
    n = quad.n
    C = quad.coords
    K = -n + n * (n + 1) * (C @ C.T)
    np.fill_diagonal(K, float(n * n))
    return K


def kernel_project_reconstruct(h, quad: QuadratureSet) -> SpaceElement:
    """a = -n mean(h) I + n(n+1) mean(h_j p_j), so tr(a p_i) = mean_j K(p_i, p_j) h_j."""
    h = np.asarray(h, dtype=float)
    if h.shape != (len(quad),):
        raise DimensionMismatchError(f"{h.size} values for {len(quad)} nodes")
    n = quad.n
    a = -n * h.mean() * np.eye(n) + n * (n + 1) * np.einsum("j,jab->ab", h, quad.projections) / len(quad)
    a = 0.5 * (a + a.conj().T)
    return SpaceElement(SpaceDescriptor.matrix_sa(n), a)


def discrete_projection_norm(quad: QuadratureSet, chunk: int = 2048) -> float:
    """max_i mean_j |K(p_i, p_j)|, the l-infinity operator norm of the discrete kernel."""
    n = quad.n
    C = quad.coords
    N = len(C)
    # |K| = n(n+1) |tr(pq) - 1/(n+1)|
    shift = 1.0 / (n + 1)
    best = 0.0
    for start in range(0, N, chunk):
        G = C[start:start + chunk] @ C.T
        np.subtract(G, shift, out=G)
        np.abs(G, out=G)
        rows = G.sum(axis=1)
        # diagonal: tr(pp) = 1 up to roundoff; K(p, p) = n^2 exactly
        idx = np.arange(start, min(start + chunk, N))
        rows += (n / (n + 1.0)) - G[idx - start, idx]
        best = max(best, float(rows.max()))
    return best * n * (n + 1) / N


def extend_sa(f: PartialFunction, nodes: int = 4000, seed: int = 0, exact_restriction: bool = True,
              frames: bool = True) -> ExtensionResult:
    """Extend a Hermitian-matrix-valued f through the rank-one projection lift.

    1. sample ``nodes`` rank-one projections p_j;
    2. lift: h_j(x) = tr(f(x) p_j);
    3. McShane-extend every h_j with the global constant L(f), clamped;
    4. map each point's node values back through the kernel projection.

    With ``exact_restriction`` the reconstruction is composed with the
    inverse sampling map, which makes it an exact projection onto the
    sampled functions tr(a p_j): then g = f on X up to roundoff.
    """
    if f.target.kind != "mn-sa":
        raise WrongTargetError(f"extend_sa needs an mn-sa target, got {f.target}")
    n = f.target.size
    if nodes < n * n:
        raise UnderdeterminedQuadratureError(f"need at least n^2 = {n * n} nodes, got {nodes}")
    quad = sample_quadrature(n, nodes, make_rng(seed), frames=frames)
    kp = KernelProjection(n, quad)
    # h[x, j] = tr(f(x) p_j) = v_j* f(x) v_j
    v = quad.vectors
    lifted = np.real(np.einsum("ja,xab,jb->xj", v.conj(), f.values, v))
    H = _columnwise(f, lifted, f.lipschitz(), clamp=True)
    coords = kp.project_coords(H) if exact_restriction else kp.reconstruct_coords(H)
    g = herm_from_coords(coords, n)
    g = 0.5 * (g + np.conj(np.swapaxes(g, -1, -2)))
    return finish(
        f, g, "kernel-projection", "L(g) <= ||P_N|| L(f)",
        nodes=nodes, seed=seed, frames=frames, exact_restriction=exact_restriction,
    )


# --- sup-norm preservation -------------------------------------------------


def radial_retract_array(desc: SpaceDescriptor, arr: np.ndarray, r: float) -> np.ndarray:
    """Pi_r applied to a stack of elements."""
    if not r > 0:
        raise LipextError(f"retraction radius must be positive, got {r}")
    nv = norms(desc, arr)
    scale = np.where(nv > r, r / np.where(nv > 0, nv, 1.0), 1.0)
    return arr * scale.reshape(scale.shape + (1,) * len(desc.shape))


def radial_retract(v: SpaceElement, r: float) -> SpaceElement:
    """v if ||v|| <= r, else r v / ||v||."""
    return SpaceElement(v.descriptor, radial_retract_array(v.descriptor, v.data, r))


EXTENDERS = {
    "mcshane": mcshane_extend,
    "coordinatewise": coordinatewise_extend,
    "projection": extend_sa,
}


def extend_norm_preserving(f: PartialFunction, inner_method: str = "projection", **params) -> ExtensionResult:
    """Run an extender, then retract onto the ball of radius ||f||_inf.

    The result has sup norm ||f||_inf and Lipschitz constant at most twice
    that of the inner extension.
    """
    if inner_method not in EXTENDERS:
        raise LipextError(f"unknown extension method {inner_method!r}")
    r = f.sup_norm()
    if r == 0:
        zero = np.zeros((len(f.space),) + f.target.shape, dtype=f.target.dtype)
        return finish(f, zero, inner_method, "f = 0", preserve_norm=True)
    inner = EXTENDERS[inner_method](f, **params)
    g = radial_retract_array(f.target, inner.assignment, r)
    return finish(
        f, g, inner.method, f"L(g) <= 2 * {inner.achieved_L!r}",
        **inner.metadata, preserve_norm=True, inner_achieved_L=inner.achieved_L,
        inner_achieved_sup=inner.achieved_sup,
    )
