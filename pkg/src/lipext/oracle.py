"""
Minimal Lipschitz extensions on finite instances.

``minimal_extension`` bisects on the constant c; each probe asks the
cyclic-projection solver for an assignment on Z with
||g(z) - g(w)|| <= c rho(z, w) for every pair and g = f on X. The upper end
of the bracket is always backed by an explicit witness whose Lipschitz
constant is recomputed; the lower end is only numerically infeasible.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import _pocs
from .errors import LipextError, WrongTargetError
from .sampling import make_rng
from .spaces import (
    FiniteMetricSpace,
    PartialFunction,
    SpaceDescriptor,
    from_real,
    metric_closure,
    pairwise_lipschitz,
    to_real,
)

log = logging.getLogger(__name__)

TOL_BISECT = 1e-4
TOL_FEAS = 1e-8
MAX_SWEEPS = 200_000


def _ball_code(desc: SpaceDescriptor) -> tuple[int, int, int]:
    kind = desc.kind
    if kind == "real-sup":
        return _pocs.BLOCK, 1, 0
    if kind in ("seq-sup-complex", "complex"):
        return _pocs.BLOCK, 2, 0
    if kind == "real-euclid":
        return _pocs.BLOCK, desc.size, 0
    if kind == "mn-sa":
        return _pocs.HERMITIAN, 0, desc.size
    if kind == "mn":
        return _pocs.FULL, 0, desc.size
    raise WrongTargetError(f"no feasibility geometry for {desc}")


@dataclass
class Feasibility:
    feasible: bool
    assignment: np.ndarray | None
    sweeps: int
    violation: float


def _pairs(f: PartialFunction):
    pinned = np.zeros(len(f.space), dtype=np.bool_)
    pinned[list(f.subset)] = True
    # lexicographic order over pairs with at least one free endpoint
    pi, pj = np.triu_indices(len(f.space), k=1)
    keep = ~(pinned[pi] & pinned[pj])
    return pinned, pi[keep].astype(np.int64), pj[keep].astype(np.int64)


def _start(f: PartialFunction, how: str = "mcshane") -> np.ndarray:
    """Real coordinates of a starting assignment on Z.

    "mcshane": McShane in every real coordinate (a genuine extension);
    "mean": every free point at the mean of the values of f.
    """
    cols = to_real(f.target, f.values)
    if how == "mean":
        x = np.repeat(cols.mean(axis=0)[None, :], len(f.space), axis=0)
        x[list(f.subset)] = cols
        return x
    if how != "mcshane":
        raise LipextError(f"unknown start {how!r}")
    dist_zx = f.space.dist[:, list(f.subset)]
    sub = f.subset_dist
    iu, ju = np.triu_indices(len(cols), k=1)
    if len(iu):
        lips = (np.abs(cols[iu] - cols[ju]) / sub[iu, ju][:, None]).max(axis=0)
    else:
        lips = np.zeros(cols.shape[1])
    x = (cols[None, :, :] - dist_zx[:, :, None] * lips[None, None, :]).max(axis=1)
    x[list(f.subset)] = cols
    if f.target.kind == "mn-sa":
        # average with the adjoint extension so the start is Hermitian
        g = from_real(f.target, x)
        g = 0.5 * (g + np.conj(np.swapaxes(g, -1, -2)))
        x = to_real(f.target, g)
    return np.ascontiguousarray(x)


def feasible_extension(f: PartialFunction, c: float, tol_feas: float = TOL_FEAS,
                       max_iters: int = MAX_SWEEPS, start: np.ndarray | None = None,
                       dykstra: bool = True, check_every: int = 10,
                       stall_window: int = 2000, stall_ratio: float = 0.995) -> Feasibility:
    """Look for an extension g of f with L(g) <= c.

    ``start`` is an optional (|Z|, d) array of real coordinates; values on X
    are always reset to f. An infeasible verdict means the solver stalled
    or ran out of sweeps, not a proof.
    """
    kind, block, n = _ball_code(f.target)
    L = f.lipschitz()
    if c < L - 1e-12 * max(L, 1.0):
        return Feasibility(False, None, 0, (L - c) / max(c, 1e-300))
    pinned, pi, pj = _pairs(f)
    x = _start(f) if start is None else np.array(start, dtype=np.float64)
    x[list(f.subset)] = to_real(f.target, f.values)
    if len(pi) == 0:
        return Feasibility(True, from_real(f.target, x), 0, 0.0)
    radii = c * f.space.dist[pi, pj]
    if np.any(radii <= 0):
        # c = 0: every point must share the one value of f
        x[:] = x[list(f.subset)][0]
        return Feasibility(True, from_real(f.target, x), 0, 0.0)
    status, sweeps, viol = _pocs.solve(
        x, pinned, pi, pj, radii, kind, block, n, tol_feas, int(max_iters),
        dykstra, int(check_every), int(stall_window), float(stall_ratio),
    )
    g = from_real(f.target, x)
    if f.target.kind == "mn-sa":
        g = 0.5 * (g + np.conj(np.swapaxes(g, -1, -2)))
    return Feasibility(bool(status), g, int(sweeps), float(viol))


@dataclass
class OracleResult:
    """Bisection bracket for the least Lipschitz constant of an extension."""

    optimal_L: float
    lo: float
    hi: float
    lipschitz_f: float
    assignment: np.ndarray
    iterations: int
    sweeps: int
    tol_bisect: float
    seed: int | None = None
    history: list = field(default_factory=list)

    @property
    def ratio(self) -> float:
        return self.optimal_L / self.lipschitz_f if self.lipschitz_f > 0 else 1.0


def auerbach_bound(desc: SpaceDescriptor) -> int:
    return desc.real_dim


def minimal_extension(f: PartialFunction, tol_bisect: float = TOL_BISECT, tol_feas: float = TOL_FEAS,
                      max_iters: int = MAX_SWEEPS, seed: int | None = None, start: str = "mcshane",
                      **solver) -> OracleResult:
    """Bisect on c in [L(f), dim * L(f)] for the least feasible constant.

    ``hi`` is always the recomputed Lipschitz constant of the returned
    assignment, so ``optimal_L = hi`` is a certified upper bound. With
    ``start="mean"`` no constructive extension is used anywhere, which keeps
    the oracle independent of the McShane formula.
    """
    L = f.lipschitz()
    space, target = f.space, f.target

    def score(g):
        return pairwise_lipschitz(space.dist, target, g)

    x0 = _start(f, start)
    best = from_real(target, x0)
    if target.kind == "mn-sa":
        best = 0.5 * (best + np.conj(np.swapaxes(best, -1, -2)))
    hi = score(best)
    history = [("start", hi, True)]
    sweeps = 0
    iterations = 0
    if L == 0:
        return OracleResult(hi, 0.0, hi, 0.0, best, 0, 0, tol_bisect, seed, history)
    ub = auerbach_bound(target) * L
    if hi > ub:
        res = feasible_extension(f, ub, tol_feas, max_iters, start=x0, **solver)
        sweeps += res.sweeps
        if res.feasible and score(res.assignment) < hi:
            best = res.assignment
            hi = score(best)
        history.append((ub, hi, res.feasible))
    lo = L
    width = tol_bisect * L
    c = lo
    while hi - lo > width:
        iterations += 1
        res = feasible_extension(f, c, tol_feas, max_iters, start=to_real(target, best), **solver)
        sweeps += res.sweeps
        if res.feasible:
            value = score(res.assignment)
            if value < hi:
                best, hi = res.assignment, value
        else:
            lo = c
        history.append((c, hi, res.feasible))
        c = 0.5 * (lo + hi)
        if iterations > 200:
            raise LipextError("bisection failed to converge")
    return OracleResult(hi, lo, hi, L, best, iterations, sweeps, tol_bisect, seed, history)


def four_point_example() -> PartialFunction:
    """alpha, beta, gamma pairwise at distance 2, each at distance 1 from mu;
    f sends alpha, beta, gamma to the cube roots of unity."""
    d = np.array([
        [0, 2, 2, 1],
        [2, 0, 2, 1],
        [2, 2, 0, 1],
        [1, 1, 1, 0],
    ], dtype=float)
    space = FiniteMetricSpace(("alpha", "beta", "gamma", "mu"), d)
    roots = np.exp(2j * np.pi * np.arange(3) / 3)[:, None]
    return PartialFunction(space, (0, 1, 2), roots, SpaceDescriptor.complex_plane())


def four_point_sa() -> PartialFunction:
    """The four-point metric with three rank-one projections in M_2 as values.

    Their Bloch vectors are 120 degrees apart, so the values sit at mutual
    operator distance sqrt(3)/2, exactly like the cube roots of unity.
    """
    base = four_point_example()
    angles = 2 * np.pi * np.arange(3) / 3
    sx = np.array([[0, 1], [1, 0]], complex)
    sy = np.array([[0, -1j], [1j, 0]])
    vals = np.array([(np.eye(2) + np.cos(t) * sx + np.sin(t) * sy) / 2 for t in angles])
    return PartialFunction(base.space, base.subset, vals, SpaceDescriptor.matrix_sa(2))


# --- randomized search for large extension ratios ---------------------------


def random_values(desc: SpaceDescriptor, m: int, rng: np.random.Generator) -> np.ndarray:
    if desc.is_real:
        return rng.uniform(-1, 1, (m,) + desc.shape)
    if desc.kind in ("complex", "seq-sup-complex"):
        z = rng.standard_normal((m,) + desc.shape) + 1j * rng.standard_normal((m,) + desc.shape)
        return z / np.sqrt(2)
    a = (rng.standard_normal((m,) + desc.shape) + 1j * rng.standard_normal((m,) + desc.shape)) / 2
    if desc.kind == "mn-sa":
        a = a + np.conj(np.swapaxes(a, -1, -2))
    return a


def random_instance(desc: SpaceDescriptor, rng: np.random.Generator, z_range=(3, 6), x_range=(2, None)) -> PartialFunction:
    """Random metric (Euclidean points or repaired random matrix), subset and values."""
    nz = int(rng.integers(z_range[0], z_range[1] + 1))
    xmax = nz - 1 if x_range[1] is None else min(x_range[1], nz - 1)
    nx = int(rng.integers(min(x_range[0], xmax), xmax + 1))
    if rng.random() < 0.5:
        dim = int(rng.integers(1, 4))
        pts = rng.standard_normal((nz, dim))
        space = FiniteMetricSpace.from_points(pts)
        if np.any(space.dist[~np.eye(nz, dtype=bool)] < 1e-6):
            return random_instance(desc, rng, z_range, x_range)
    else:
        m = rng.uniform(0.2, 2.0, (nz, nz))
        space = FiniteMetricSpace.from_matrix(metric_closure(m))
    subset = tuple(int(i) for i in rng.permutation(nz)[:nx])
    return PartialFunction(space, subset, random_values(desc, nx, rng), desc)


def perturb(f: PartialFunction, rng: np.random.Generator, scale: float = 0.1) -> PartialFunction:
    """Jitter the distances (then repair by metric closure) and the values on X."""
    d = np.array(f.space.dist)
    m = len(d)
    noise = np.exp(scale * rng.standard_normal((m, m)))
    noise = np.sqrt(noise * noise.T)
    np.fill_diagonal(noise, 1.0)
    off = ~np.eye(m, dtype=bool)
    d[off] = d[off] * noise[off]
    space = FiniteMetricSpace(f.space.labels, metric_closure(d))
    vals = np.array(f.values)
    jitter = random_values(f.target, len(vals), rng)
    typical = float(np.abs(vals).max()) or 1.0
    vals = vals + scale * typical * jitter
    return PartialFunction(space, f.subset, vals, f.target)


@dataclass
class ProspectRecord:
    source: str
    instance: PartialFunction
    ratio: float
    optimal_L: float
    lipschitz_f: float


@dataclass
class ProspectResult:
    best: ProspectRecord
    records: list

    @property
    def ratios(self) -> np.ndarray:
        return np.array([r.ratio for r in self.records])


def seeded_pool(desc: SpaceDescriptor) -> list[tuple[str, PartialFunction]]:
    if desc.kind == "complex":
        return [("four-point", four_point_example())]
    if desc.kind == "seq-sup-complex":
        base = four_point_example()
        vals = np.repeat(base.values, desc.size, axis=1)
        return [("four-point", PartialFunction(base.space, base.subset, vals, desc))]
    if desc.kind == "mn-sa" and desc.size == 2:
        return [("four-point", four_point_sa())]
    return []


def _evaluate(source: str, f: PartialFunction, tol_bisect: float, solver: dict) -> ProspectRecord:
    res = minimal_extension(f, tol_bisect=tol_bisect, **solver)
    return ProspectRecord(source, f, res.ratio, res.optimal_L, res.lipschitz_f)


def _trial(args):
    desc, seed, t, z_range, tol_bisect, solver = args
    rng = make_rng(seed, shard=t)
    f = random_instance(desc, rng, z_range)
    return _evaluate(f"random:{t}", f, tol_bisect, solver)


def prospect_lower_bound(space: SpaceDescriptor, trials: int, seed: int, z_range=(3, 6),
                         ascent_steps: int = 0, ascent_scale: float = 0.1,
                         tol_bisect: float = TOL_BISECT, workers: int = 1,
                         **solver) -> ProspectResult:
    """Random search for instances with a large minimal-extension ratio.

    Evaluates the seeded pool, ``trials`` random instances (trial t draws
    from the stream keyed by (seed, t), so the outcome does not depend on
    ``workers``), then ``ascent_steps`` perturbations of the running best,
    each kept only if it raises the ratio. Every ratio found is a lower bound
    on the extension constant of ``space``, up to ``tol_bisect``.
    """
    if trials < 1:
        raise LipextError("trials must be >= 1")
    records = [_evaluate(f"seeded:{name}", f, tol_bisect, solver) for name, f in seeded_pool(space)]
    jobs = [(space, seed, t, z_range, tol_bisect, solver) for t in range(trials)]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            records.extend(pool.map(_trial, jobs, chunksize=max(1, trials // (4 * workers))))
    else:
        records.extend(map(_trial, jobs))
    best = max(records, key=lambda r: r.ratio)
    rng = make_rng(seed, shard=trials + 1)
    for step in range(ascent_steps):
        cand = perturb(best.instance, rng, ascent_scale)
        rec = _evaluate(f"ascent:{step}", cand, tol_bisect, solver)
        records.append(rec)
        if rec.ratio > best.ratio:
            best = rec
    return ProspectResult(best, records)
