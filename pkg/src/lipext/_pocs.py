"""Compiled inner loop of the cyclic-projection feasibility solver.

Points live in real coordinates (see ``spaces.to_real``). The norm ball of
the target is described by ``kind``:

    0  block-radial: coordinates split into blocks of ``block`` entries and
       each block is clipped radially (block 1 = sup norm, block 2 = complex
       sup norm, block d = Euclidean)
    1  Hermitian operator norm on n x n matrices (eigenvalue clipping)
    2  full operator norm on n x n matrices (singular-value clipping)

Matrices are stored row-major with interleaved (re, im) pairs.
"""

import numpy as np
from numba import njit

BLOCK, HERMITIAN, FULL = 0, 1, 2


@njit(cache=True)
def _to_matrix(v, n):
    a = np.empty((n, n), dtype=np.complex128)
    for i in range(n):
        for j in range(n):
            e = 2 * (i * n + j)
            a[i, j] = v[e] + 1j * v[e + 1]
    return a


@njit(cache=True)
def _from_matrix(a, n, out):
    for i in range(n):
        for j in range(n):
            e = 2 * (i * n + j)
            out[e] = a[i, j].real
            out[e + 1] = a[i, j].imag


@njit(cache=True)
def _herm2(v):
    # 2 x 2 Hermitian part in closed form: mean, half-gap, off-diagonal
    m = 0.5 * (v[0] + v[6])
    h = 0.5 * (v[0] - v[6])
    bre = 0.5 * (v[2] + v[4])
    bim = 0.5 * (v[3] - v[5])
    s = np.sqrt(h * h + bre * bre + bim * bim)
    return m, h, bre, bim, s


@njit(cache=True)
def target_norm(v, kind, block, n):
    if kind == BLOCK:
        best = 0.0
        for s in range(0, v.shape[0], block):
            acc = 0.0
            for t in range(s, s + block):
                acc += v[t] * v[t]
            if acc > best:
                best = acc
        return np.sqrt(best)
    if kind == HERMITIAN:
        if n == 2:
            m, h, bre, bim, s = _herm2(v)
            return abs(m) + s
        a = _to_matrix(v, n)
        a = 0.5 * (a + a.conj().T)
        w = np.linalg.eigvalsh(a)
        return max(abs(w[0]), abs(w[-1]))
    a = _to_matrix(v, n)
    return np.linalg.svd(a)[1][0]


@njit(cache=True)
def project_ball(v, r, kind, block, n):
    """Euclidean (Frobenius) projection of v onto {||v||_target <= r}, in place."""
    if kind == BLOCK:
        r2 = r * r
        for s in range(0, v.shape[0], block):
            acc = 0.0
            for t in range(s, s + block):
                acc += v[t] * v[t]
            if acc > r2:
                k = r / np.sqrt(acc)
                for t in range(s, s + block):
                    v[t] *= k
        return
    if kind == HERMITIAN and n == 2:
        m, h, bre, bim, s = _herm2(v)
        lo = min(max(m - s, -r), r)
        hi = min(max(m + s, -r), r)
        m2 = 0.5 * (hi + lo)
        k = 0.5 * (hi - lo) / s if s > 0 else 0.0
        v[0] = m2 + k * h
        v[1] = 0.0
        v[2] = k * bre
        v[3] = k * bim
        v[4] = k * bre
        v[5] = -k * bim
        v[6] = m2 - k * h
        v[7] = 0.0
        return
    a = _to_matrix(v, n)
    if kind == HERMITIAN:
        a = 0.5 * (a + a.conj().T)
        w, u = np.linalg.eigh(a)
        for i in range(n):
            w[i] = min(max(w[i], -r), r)
        b = (u * w) @ u.conj().T
        b = 0.5 * (b + b.conj().T)
    else:
        u, sv, vh = np.linalg.svd(a)
        for i in range(n):
            sv[i] = min(sv[i], r)
        b = (u * sv) @ vh
    _from_matrix(b, n, v)


@njit(cache=True)
def max_violation(x, pi, pj, radii, kind, block, n):
    """max over constrained pairs of (||x_i - x_j|| - r_ij) / r_ij."""
    worst = -np.inf
    d = x.shape[1]
    delta = np.empty(d)
    for k in range(pi.shape[0]):
        for t in range(d):
            delta[t] = x[pi[k], t] - x[pj[k], t]
        v = (target_norm(delta, kind, block, n) - radii[k]) / radii[k]
        if v > worst:
            worst = v
    return worst


@njit(cache=True)
def solve(x, pinned, pi, pj, radii, kind, block, n, tol, max_sweeps,
          dykstra, check_every, stall_window, stall_ratio):
    """Cyclic projections (optionally with Dykstra increments) over pair constraints.

    Returns (status, sweeps, violation) with status 1 = feasible point found,
    0 = stalled or out of sweeps. ``x`` is updated in place.
    """
    npairs = pi.shape[0]
    d = x.shape[1]
    incr = np.zeros((npairs, 2, d))
    yi = np.empty(d)
    yj = np.empty(d)
    delta = np.empty(d)
    history = np.full(stall_window // check_every + 1, np.inf)
    hpos = 0
    best = np.inf
    viol = max_violation(x, pi, pj, radii, kind, block, n)
    if viol <= tol:
        return 1, 0, viol
    sweeps = 0
    while sweeps < max_sweeps:
        for _ in range(check_every):
            for k in range(npairs):
                i = pi[k]
                j = pj[k]
                for t in range(d):
                    yi[t] = x[i, t] + incr[k, 0, t]
                    yj[t] = x[j, t] + incr[k, 1, t]
                    delta[t] = yi[t] - yj[t]
                project_ball(delta, radii[k], kind, block, n)
                if pinned[j]:
                    for t in range(d):
                        x[i, t] = yj[t] + delta[t]
                elif pinned[i]:
                    for t in range(d):
                        x[j, t] = yi[t] - delta[t]
                else:
                    for t in range(d):
                        mid = 0.5 * (yi[t] + yj[t])
                        x[i, t] = mid + 0.5 * delta[t]
                        x[j, t] = mid - 0.5 * delta[t]
                if dykstra:
                    for t in range(d):
                        incr[k, 0, t] = yi[t] - x[i, t]
                        incr[k, 1, t] = yj[t] - x[j, t]
            sweeps += 1
        viol = max_violation(x, pi, pj, radii, kind, block, n)
        if viol <= tol:
            return 1, sweeps, viol
        if viol < best:
            best = viol
        # stalled: best violation barely moved over the last stall_window sweeps
        old = history[hpos]
        history[hpos] = best
        hpos = (hpos + 1) % history.shape[0]
        if old < np.inf and best > stall_ratio * old:
            return 0, sweeps, viol
    return 0, sweeps, viol
