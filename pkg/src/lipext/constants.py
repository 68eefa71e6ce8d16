"""
Closed-form Lipschitz extension / projection constants and their numerical
cross-checks (quadrature of the projection-norm integral, Monte Carlo over
uniform unit vectors).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy import integrate

from .errors import OutOfRangeError
from .sampling import make_rng, sample_unit_vectors, shard_sizes
from .spaces import SpaceDescriptor

EXACT_LIMIT = 16


def le_complex() -> float:
    """Extension constant of C (= R^2 with the Euclidean norm): 4/pi."""
    return 4.0 / math.pi


def le_diag(k: int) -> float:
    """Diagonal matrices D_k = complex l-infinity(k); independent of k."""
    if k < 1:
        raise OutOfRangeError("k must be >= 1")
    return le_complex()


def pc_complex_n_exact(n: int) -> Fraction:
    """4^n (n!)^2 / (2 (2n)!) as an exact rational."""
    if n < 1:
        raise OutOfRangeError("n must be >= 1")
    return Fraction(4 ** n * math.factorial(n) ** 2, 2 * math.factorial(2 * n))


def pc_complex_n(n: int) -> float:
    """Projection constant of complex l2^n, Gamma(3/2) Gamma(n+1) / Gamma(n+1/2).

    Exact integers up to n = 16, then the ratio recurrence
    c(m+1) = c(m) * 2(m+1) / (2m+1).
    """
    if n < 1:
        raise OutOfRangeError("n must be >= 1")
    if n <= EXACT_LIMIT:
        return float(pc_complex_n_exact(n))
    value = float(pc_complex_n_exact(EXACT_LIMIT))
    for m in range(EXACT_LIMIT, n):
        value *= 2.0 * (m + 1) / (2 * m + 1)
    return value


def pc_complex_n_lgamma(n: int) -> float:
    """Same constant through log-Gamma; independent route for cross-checks."""
    return math.exp(math.lgamma(1.5) + math.lgamma(n + 1) - math.lgamma(n + 0.5))


def le_mn(n: int) -> float:
    """Extension constant of M_n(C) with the operator norm, n >= 2."""
    if n < 2:
        raise OutOfRangeError("le_mn is stated for n >= 2; M_1(C) = C, use le_complex()")
    value = pc_complex_n(n) ** 2
    assert value >= le_mn_lower_bound(n)
    return value


def le_mn_lower_bound(n: int) -> float:
    return math.pi / 4 * n


def le_mn_sa_exact(n: int) -> Fraction:
    """2n (n/(n+1))^(n-1) - 1 as an exact rational."""
    if n < 1:
        raise OutOfRangeError("n must be >= 1")
    return 2 * n * Fraction(n, n + 1) ** (n - 1) - 1


def le_mn_sa(n: int) -> float:
    """Extension constant of the self-adjoint n x n matrices with the operator norm."""
    return float(le_mn_sa_exact(n))


def omega(n: int) -> float:
    """le_mn_sa(n) / n, which tends to 2/e."""
    return float(le_mn_sa_exact(n) / n)


# --- the projection-norm integral -------------------------------------------


def _binomial_poly(n: int) -> list[Fraction]:
    """Coefficients (ascending in t) of |(n-1) + (n+1)t| (1-t)^(n-2) without the sign."""
    base = [Fraction(math.comb(n - 2, k) * (-1) ** k) for k in range(n - 1)]
    lin = [Fraction(n - 1), Fraction(n + 1)]
    out = [Fraction(0)] * n
    for i, a in enumerate(lin):
        for k, b in enumerate(base):
            out[i + k] += a * b
    return out


def _poly_integral(coeffs: list[Fraction], a: Fraction, b: Fraction) -> Fraction:
    return sum(c * (b ** (k + 1) - a ** (k + 1)) / (k + 1) for k, c in enumerate(coeffs))


def p_norm_integrand(n: int) -> Callable[[float], float]:
    return lambda t: abs((n - 1) + (n + 1) * t) * (1 - t) ** (n - 2)


def p_norm_quadrature_exact(n: int) -> Fraction:
    """2^-n n(n-1) * integral over [-1, 1] of |(n-1) + (n+1)t| (1-t)^(n-2) dt, exactly.

    The absolute value changes sign at t* = -(n-1)/(n+1); each side is a
    polynomial integrated term by term.
    """
    if n < 2:
        raise OutOfRangeError("the integral is defined for n >= 2")
    poly = _binomial_poly(n)
    kink = Fraction(-(n - 1), n + 1)
    total = -_poly_integral(poly, Fraction(-1), kink) + _poly_integral(poly, kink, Fraction(1))
    return Fraction(n * (n - 1), 2 ** n) * total


def p_norm_quadrature(n: int) -> float:
    """Norm of the invariant projection, by integrating over the law of tr(pq).

    Rational arithmetic for n <= 16, adaptive Gauss-Kronrod beyond.
    """
    if n < 2:
        raise OutOfRangeError("the integral is defined for n >= 2")
    if n <= EXACT_LIMIT:
        return float(p_norm_quadrature_exact(n))
    kink = -(n - 1) / (n + 1)
    value, _ = integrate.quad(p_norm_integrand(n), -1.0, 1.0, points=[kink], epsabs=1e-13, epsrel=1e-13, limit=200)
    return 2.0 ** -n * n * (n - 1) * value


# --- averages over rank-one projections q with p0 = e1 e1* ------------------

TEST_FUNCTIONS = ("t", "t2", "abs", "indicator")
INDICATOR_CUT = 0.0


def test_function(tag: str, n: int) -> tuple[Callable, list[float]]:
    """h on [-1, 1] and its kinks. "abs" is |(n-1) + (n+1)t|, "indicator" is 1[t <= 0]."""
    if tag == "t":
        return (lambda t: t), []
    if tag == "t2":
        return (lambda t: t * t), []
    if tag == "abs":
        return (lambda t: np.abs((n - 1) + (n + 1) * t)), [-(n - 1) / (n + 1)]
    if tag == "indicator":
        return (lambda t: (np.asarray(t) <= INDICATOR_CUT).astype(float)), [INDICATOR_CUT]
    raise OutOfRangeError(f"unknown test function {tag!r}; choose from {TEST_FUNCTIONS}")


def lemma71_rhs(n: int, tag: str) -> float:
    """(n-1) 2^(1-n) * integral over [-1, 1] of h(t) (1-t)^(n-2) dt by adaptive quadrature."""
    if n < 2:
        raise OutOfRangeError("the density is degenerate for n < 2")
    h, kinks = test_function(tag, n)
    edges = [-1.0] + sorted(kinks) + [1.0]
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        # split at kinks so each piece is smooth
        part, _ = integrate.quad(lambda t: float(h(t)) * (1 - t) ** (n - 2), a, b, epsabs=1e-12, epsrel=1e-12, limit=200)
        total += part
    return (n - 1) * 2.0 ** (1 - n) * total


@dataclass
class MCResult:
    estimate: float
    sigma: float
    samples: int


def _mc(statistic: Callable[[np.ndarray], np.ndarray], n: int, samples: int, seed: int) -> MCResult:
    """Mean and standard error of statistic(v) over uniform unit vectors v in C^n."""
    total = 0.0
    total_sq = 0.0
    for shard, count in shard_sizes(samples):
        v = sample_unit_vectors(n, count, make_rng(seed, shard))
        vals = statistic(v)
        total += vals.sum()
        total_sq += (vals * vals).sum()
    mean = total / samples
    var = max(total_sq / samples - mean * mean, 0.0)
    return MCResult(mean, math.sqrt(var / max(samples - 1, 1)), samples)


@dataclass
class Lemma71Check:
    n: int
    tag: str
    lhs_mc: float
    rhs_quadrature: float
    mc_sigma: float

    @property
    def ok(self) -> bool:
        return abs(self.lhs_mc - self.rhs_quadrature) <= 3 * self.mc_sigma + 1e-12


def lemma71_check(n: int, tag: str, samples: int, seed: int) -> Lemma71Check:
    """Average of h(2 tr(p0 q) - 1) over random rank-one q, against the 1-D integral."""
    if n < 2:
        raise OutOfRangeError("the density is degenerate for n < 2")
    h, _ = test_function(tag, n)
    # tr(p0 q) = |v_1|^2 for p0 = e1 e1*, q = v v*
    mc = _mc(lambda v: h(2 * np.abs(v[:, 0]) ** 2 - 1), n, samples, seed)
    return Lemma71Check(n, tag, mc.estimate, lemma71_rhs(n, tag), mc.sigma)


def pc_cn_monte_carlo(n: int, samples: int, seed: int) -> tuple[float, float]:
    """Monte Carlo estimate of n * E|z_1| over the unit sphere of C^n, with its standard error."""
    if n < 1:
        raise OutOfRangeError("n must be >= 1")
    mc = _mc(lambda v: n * np.abs(v[:, 0]), n, samples, seed)
    return mc.estimate, mc.sigma


# --- constants table ---------------------------------------------------------


@dataclass(frozen=True)
class ConstantEntry:
    space: str
    n: int
    value: float
    kind: str  # exact, bound-upper, bound-lower
    provenance: str


KT_DIM4 = (2 + 3 * math.sqrt(6)) / 5


def bounds_table(dim_real: int, space: SpaceDescriptor | None = None) -> list[ConstantEntry]:
    """Upper bounds valid for every space of real dimension ``dim_real``.

    Matrix descriptors add the elementary bounds n sqrt(2) and 4n/pi for M_n(C).
    """
    if dim_real < 1:
        raise OutOfRangeError("dim_real must be >= 1")
    label = str(space) if space is not None else f"dim={dim_real}"
    n = space.size if space is not None else dim_real
    rows = [
        ConstantEntry(label, n, float(dim_real), "bound-upper", "Auerbach basis: LE(V) <= dim V"),
        ConstantEntry(label, n, math.sqrt(dim_real), "bound-upper", "Kadec-Snobar: LE(V) <= sqrt(dim V)"),
    ]
    if dim_real == 4:
        rows.append(ConstantEntry(label, n, KT_DIM4, "bound-upper", "Konig-Tomczak-Jaegermann, dim 4: (2 + 3 sqrt 6)/5"))
    if space is not None and space.kind == "mn":
        rows.append(ConstantEntry(label, n, n * math.sqrt(2), "bound-upper", "cyclic-diagonal decomposition with real/imaginary split"))
        rows.append(ConstantEntry(label, n, 4 * n / math.pi, "bound-upper", "cyclic-diagonal decomposition with LE(C) = 4/pi"))
    return rows


def exact_entry(space: SpaceDescriptor) -> ConstantEntry | None:
    kind, n = space.kind, space.size
    if kind == "real-sup":
        return ConstantEntry(str(space), n, 1.0, "exact", "l-infinity: coordinatewise McShane")
    if kind == "real-euclid" and n == 1:
        return ConstantEntry(str(space), n, 1.0, "exact", "McShane")
    if kind == "real-euclid" and n == 2 or kind == "complex":
        return ConstantEntry(str(space), n, le_complex(), "exact", "Grunbaum: PC(R^2) = 4/pi")
    if kind == "seq-sup-complex":
        return ConstantEntry(str(space), n, le_diag(n), "exact", "diagonal matrices: LE(D_n) = 4/pi")
    if kind == "mn" and n >= 2:
        return ConstantEntry(str(space), n, le_mn(n), "exact", "PC(M_n) = PC(C^n)^2, Gamma ratio squared")
    if kind == "mn" and n == 1:
        return ConstantEntry(str(space), n, le_complex(), "exact", "M_1(C) = C")
    if kind == "mn-sa":
        return ConstantEntry(str(space), n, le_mn_sa(n), "exact", "invariant kernel projection: 2n(n/(n+1))^(n-1) - 1")
    return None


def lower_entries(space: SpaceDescriptor) -> list[ConstantEntry]:
    if space.kind == "mn" and space.size >= 2:
        return [ConstantEntry(str(space), space.size, le_mn_lower_bound(space.size), "bound-lower", "(pi/4) n")]
    return []


def constants_table(max_n: int = 8) -> list[ConstantEntry]:
    """Every exact value and bound the package knows, for sizes 1..max_n."""
    spaces = [SpaceDescriptor.complex_plane()]
    for k in range(1, max_n + 1):
        spaces += [
            SpaceDescriptor.real_sup(k),
            SpaceDescriptor.seq_sup_complex(k),
            SpaceDescriptor.matrix_full(k),
            SpaceDescriptor.matrix_sa(k),
        ]
    rows = []
    for sp in spaces:
        exact = exact_entry(sp)
        if exact is not None:
            rows.append(exact)
        rows.extend(lower_entries(sp))
        rows.extend(bounds_table(sp.real_dim, sp))
    return rows


def check_table(rows: list[ConstantEntry]) -> list[str]:
    """Return descriptions of every incoherent (exact, bound) pair; empty when consistent."""
    problems = []
    by_space: dict[str, list[ConstantEntry]] = {}
    for r in rows:
        by_space.setdefault(r.space, []).append(r)
    for space, entries in by_space.items():
        exact = [e for e in entries if e.kind == "exact"]
        for e in exact:
            for b in entries:
                if b.kind == "bound-upper" and b.value < e.value - 1e-12:
                    problems.append(f"{space}: upper bound {b.value} < exact {e.value} ({b.provenance})")
                if b.kind == "bound-lower" and b.value > e.value + 1e-12:
                    problems.append(f"{space}: lower bound {b.value} > exact {e.value} ({b.provenance})")
    return problems


def published_le(space: SpaceDescriptor) -> float:
    entry = exact_entry(space)
    if entry is None:
        raise OutOfRangeError(f"no closed-form extension constant for {space}")
    return entry.value
