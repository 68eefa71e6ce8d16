"""Command-line interface: ``lipext <command> ...``.

Exit codes: 0 success, 1 a verification or cap check failed, 2 bad usage or input.
"""

from __future__ import annotations

import argparse
import csv
import io as _stringio
import math
import os
import sys

import numpy as np

from . import constants as C
from .averaging import (
    average_projection,
    distance_to_kernel,
    interpolation_projection,
    select_interpolation_nodes,
)
from .errors import LipextError, OutOfRangeError, WrongTargetError
from .extension import EXTENDERS, extend_norm_preserving, radial_retract_array
from .io import (
    ProblemFileError,
    canonical_kind,
    dumps,
    load_problem,
    oracle_to_json,
    problem_to_json,
    result_to_json,
)
from .oracle import (
    MAX_SWEEPS,
    TOL_BISECT,
    TOL_FEAS,
    four_point_example,
    four_point_sa,
    minimal_extension,
    prospect_lower_bound,
)
from .sampling import make_rng, outer, sample_haar_unitary
from .spaces import SpaceDescriptor, norms

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
CAP_SLACK = 1e-3
STOCHASTIC_SUITES = {"lemma71", "haar-mean", "pc-mc", "retraction", "averaging"}
BUILTINS = {"four-point": four_point_example, "four-point-sa": four_point_sa}


class UsageError(LipextError):
    pass


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def worker_count(requested: int | None) -> int:
    cap = os.environ.get("LIPEXT_THREADS")
    try:
        cap = max(1, int(cap)) if cap else None
    except ValueError:
        raise UsageError(f"LIPEXT_THREADS must be an integer, got {cap!r}") from None
    n = requested or 1
    return min(n, cap) if cap else n


def descriptor_from_args(space: str, k: int | None, n: int | None) -> SpaceDescriptor:
    kind = canonical_kind(space)
    size = n if n is not None else k
    if kind == "complex":
        return SpaceDescriptor.complex_plane()
    return SpaceDescriptor(kind, 1 if size is None else size)


def require_seed(args, what: str) -> int:
    if args.seed is None:
        raise UsageError(f"{what} is stochastic: --seed is required")
    return args.seed


def emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def csv_text(header: list[str], rows: list[list]) -> str:
    buf = _stringio.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


# --- constants ---------------------------------------------------------------


def cmd_constants(args) -> int:
    if args.all:
        rows = C.constants_table(args.max_n)
        emit(csv_text(["space", "n", "value", "kind", "provenance"],
                      [[r.space, r.n, r.value, r.kind, r.provenance] for r in rows]), args.out)
        problems = C.check_table(rows)
        for p in problems:
            print(f"incoherent table: {p}", file=sys.stderr)
        return EXIT_FAIL if problems else EXIT_OK
    if args.space is None:
        raise UsageError("constants needs --space or --all")
    desc = descriptor_from_args(args.space, args.k, args.n)
    if desc.kind == "mn" and desc.size == 1:
        raise OutOfRangeError("M_1(C) is the complex plane; use --space complex")
    exact = C.exact_entry(desc)
    rows = ([exact] if exact else []) + C.lower_entries(desc) + C.bounds_table(desc.real_dim, desc)
    if exact is None:
        print(f"{desc}: no closed form; bounds only")
    for r in rows:
        print(f"{desc}  {r.kind:<11s}  {r.value:.10f}  {r.provenance}")
    return EXIT_OK


# --- extend / oracle ---------------------------------------------------------


def cmd_extend(args) -> int:
    f = load_problem(args.problem)
    method = args.method
    params = {}
    if method == "projection":
        if f.target.kind != "mn-sa":
            raise WrongTargetError(f"method projection needs an mn-sa target, problem has {f.target}")
        params = {"nodes": args.nodes, "seed": require_seed(args, "method projection")}
    elif method in ("mcshane", "coordinatewise"):
        params = {"clamp": not args.no_clamp}
    if args.preserve_norm:
        res = extend_norm_preserving(f, method, **params)
    else:
        res = EXTENDERS[method](f, **params)
    emit(dumps(result_to_json(f, res)), args.out)
    if args.out:
        print(f"{res.method}: achieved_L={res.achieved_L:.10g} L(f)={res.lipschitz_f:.10g} "
              f"ratio={res.ratio:.10g} sup={res.achieved_sup:.10g} restriction_error={res.restriction_error:.3g}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    if (args.problem is None) == (args.builtin is None):
        raise UsageError("oracle needs exactly one of --problem or --builtin")
    f = BUILTINS[args.builtin]() if args.builtin else load_problem(args.problem)
    res = minimal_extension(f, tol_bisect=args.tol, tol_feas=args.tol_feas, max_iters=args.max_iters)
    emit(dumps(oracle_to_json(f, res)), args.out)
    if args.out:
        print(f"optimal_L in [{res.lo:.10g}, {res.hi:.10g}]  L(f)={res.lipschitz_f:.10g}  ratio={res.ratio:.10g}")
    return EXIT_OK


# --- verify ------------------------------------------------------------------


class Report:
    def __init__(self):
        self.ok = True

    def line(self, name: str, measured: float, expected: float, passed: bool, detail: str = "") -> None:
        self.ok &= bool(passed)
        status = "PASS" if passed else "FAIL"
        print(f"{status}  {name}: measured {measured:.12g} vs expected {expected:.12g}  {detail}".rstrip())


def verify_lemma71(args, rep: Report) -> None:
    ns = [args.n] if args.n else [2, 3, 4, 5]
    samples = args.samples or 1_000_000
    for n in ns:
        for tag in C.TEST_FUNCTIONS:
            r = C.lemma71_check(n, tag, samples, args.seed)
            rep.line(f"lemma71 n={n} h={tag}", r.lhs_mc, r.rhs_quadrature, r.ok,
                     f"|diff|={abs(r.lhs_mc - r.rhs_quadrature):.3g} sigma={r.mc_sigma:.3g} tol=3 sigma")


def verify_haar_mean(args, rep: Report) -> None:
    ns = [args.n] if args.n else [2, 3]
    samples = args.samples or 100_000
    for n in ns:
        rng = make_rng(args.seed)
        u = sample_haar_unitary(n, rng, size=samples)
        mean = outer(u[:, :, 0]).mean(axis=0)
        err = float(np.abs(mean - np.eye(n) / n).max())
        rep.line(f"haar-mean n={n} samples={samples}", err, 0.0, err <= 5e-3, "max entrywise |mean(q) - I/n|, tol 5e-3")


def verify_pnorm(args, rep: Report) -> None:
    ns = [args.n] if args.n else list(range(2, 13))
    for n in ns:
        q, e = C.p_norm_quadrature(n), C.le_mn_sa(n)
        rep.line(f"pnorm-quad n={n}", q, e, abs(q - e) <= 1e-10, "tol 1e-10")


def verify_pc_mc(args, rep: Report) -> None:
    ns = [args.n] if args.n else [1, 2, 3]
    samples = args.samples or 1_000_000
    for n in ns:
        est, sigma = C.pc_cn_monte_carlo(n, samples, args.seed)
        exact = C.pc_complex_n(n)
        rep.line(f"pc-mc n={n}", est, exact, abs(est - exact) <= 3 * sigma + 1e-12, f"sigma={sigma:.3g} tol=3 sigma")


def retraction_ratios(desc: SpaceDescriptor, pairs: int, seed: int, r: float = 1.0) -> np.ndarray:
    """||Pi_r v - Pi_r w|| / ||v - w|| over random pairs straddling the sphere of radius r."""
    rng = make_rng(seed)
    shape = (pairs,) + desc.shape

    def draw():
        x = rng.standard_normal(shape)
        if not desc.is_real:
            x = x + 1j * rng.standard_normal(shape)
        if desc.kind == "mn-sa":
            x = 0.5 * (x + np.conj(np.swapaxes(x, -1, -2)))
        nx = norms(desc, x).reshape((pairs,) + (1,) * len(desc.shape))
        scale = rng.uniform(0.2, 3.0, size=nx.shape) * r
        return x / nx * scale

    v = draw()
    # half the pairs are close together, where the ratio is largest
    w = draw()
    close = np.arange(pairs) < pairs // 2
    eps = rng.uniform(1e-3, 0.3, size=(pairs,) + (1,) * len(desc.shape))
    w[close] = v[close] + eps[close] * (w[close] - v[close])
    diff = norms(desc, v - w)
    keep = diff > 1e-12
    pv, pw = radial_retract_array(desc, v, r), radial_retract_array(desc, w, r)
    return norms(desc, pv - pw)[keep] / diff[keep]


def retraction_witness(eps: float) -> float:
    """Ratio for g = (1, -1), f = g + eps in the plane with the sup norm, r = 1."""
    desc = SpaceDescriptor.real_sup(2)
    g = np.array([1.0, -1.0])
    f = g + eps
    pf, pg = radial_retract_array(desc, np.stack([f, g]), 1.0)
    return float(norms(desc, pf - pg) / norms(desc, f - g))


def verify_retraction(args, rep: Report) -> None:
    desc = descriptor_from_args(args.space or "real-sup", args.k, args.n)
    pairs = args.samples or 100_000
    ratios = retraction_ratios(desc, pairs, args.seed)
    worst = float(ratios.max())
    if desc.kind in ("real-euclid", "complex") or desc.real_dim == 1:
        rep.line(f"retraction {desc} Hilbert", worst, 1.0, worst <= 1 + 1e-9, f"max ratio over {pairs} pairs, tol 1 + 1e-9")
    else:
        rep.line(f"retraction {desc} global", worst, 2.0, worst <= 2 + 1e-9, f"max ratio over {pairs} pairs, bound 2 + 1e-9")
    if desc.kind == "real-sup" and desc.size == 2:
        for eps in (0.1, 0.01, 0.001):
            w = retraction_witness(eps)
            rep.line(f"retraction witness eps={eps}", w, 2 / (1 + eps), w >= 2 - 10 * eps, f"need >= {2 - 10 * eps:g}")


def verify_averaging(args, rep: Report) -> None:
    n = args.n or 2
    counts = [100, 1000, 10000] if args.samples is None else [args.samples]
    Q = interpolation_projection(select_interpolation_nodes(n, seed=args.seed))
    q_norm = Q.norm()
    dists = []
    for S in counts:
        P = average_projection(Q, S, seed=args.seed)
        p_norm = P.norm()
        rep.line(f"averaging n={n} samples={S} norm", p_norm, q_norm, p_norm <= q_norm + 1e-2, "||P_avg|| <= ||Q|| + 1e-2")
        dists.append(distance_to_kernel(P))
        print(f"      distance to kernel projection: {dists[-1]:.6g}")
    if len(dists) > 1:
        mono = all(b < a for a, b in zip(dists, dists[1:]))
        rep.line(f"averaging n={n} distance trend", dists[-1], 0.0, mono, "strictly decreasing in sample count")


SUITES = {
    "lemma71": verify_lemma71,
    "haar-mean": verify_haar_mean,
    "pnorm-quad": verify_pnorm,
    "pc-mc": verify_pc_mc,
    "retraction": verify_retraction,
    "averaging": verify_averaging,
}


def cmd_verify(args) -> int:
    if args.suite in STOCHASTIC_SUITES:
        require_seed(args, f"suite {args.suite}")
    rep = Report()
    SUITES[args.suite](args, rep)
    print("ALL PASS" if rep.ok else "VERIFICATION FAILED")
    return EXIT_OK if rep.ok else EXIT_FAIL


# --- prospect / report -------------------------------------------------------


def cmd_prospect(args) -> int:
    desc = descriptor_from_args(args.space, args.k, args.n)
    seed = require_seed(args, "prospect")
    # the ratio cap; sup-norm real targets are exactly 1
    try:
        cap = C.published_le(desc)
    except OutOfRangeError:
        cap = math.inf
    res = prospect_lower_bound(
        desc, args.trials, seed, z_range=(3, args.z_max), ascent_steps=args.ascent_steps,
        tol_bisect=args.tol, workers=worker_count(args.workers),
    )
    records = sorted(res.records, key=lambda r: (-r.ratio, r.source))
    rows = [[i + 1, r.source, str(desc), r.ratio, r.optimal_L, r.lipschitz_f,
             len(r.instance.space), len(r.instance.subset), cap] for i, r in enumerate(records)]
    emit(csv_text(["rank", "source", "space", "ratio", "optimal_L", "lipschitz_f", "points", "subset", "cap"], rows), args.out)
    if args.instance_out:
        with open(args.instance_out, "w", encoding="utf-8") as fh:
            fh.write(dumps(problem_to_json(res.best.instance)))
    over = [r for r in records if r.ratio > cap + CAP_SLACK]
    print(f"best ratio {res.best.ratio:.10g} ({res.best.source}) over {len(records)} instances; cap {cap:.10g}",
          file=sys.stderr if not args.out else sys.stdout)
    if over:
        print(f"CAP VIOLATION: {len(over)} instances exceed {cap:.10g} + {CAP_SLACK}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_report(args) -> int:
    if args.what != "omega":
        raise UsageError(f"unknown report {args.what!r}")
    two_over_e = 2 / math.e
    rows = []
    for n in range(1, args.max_n + 1):
        w = C.omega(n)
        rows.append([n, C.le_mn_sa(n), w, w - two_over_e])
    emit(csv_text(["n", "le_mn_sa", "omega", "omega_minus_2_over_e"], rows), args.out)
    return EXIT_OK


# --- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lipext", description="Lipschitz extensions and extension constants.")
    sub = p.add_subparsers(dest="command", required=True)

    def size_args(sp):
        sp.add_argument("--k", type=int, help="vector length for sequence kinds")
        sp.add_argument("--n", type=int, help="matrix size for matrix kinds")

    c = sub.add_parser("constants", help="closed-form constants and bounds")
    c.add_argument("--space", help="real-sup (seq-sup), real-euclid (euclid), complex, seq-sup-complex, mn, mn-sa")
    size_args(c)
    c.add_argument("--all", action="store_true", help="dump the full table as CSV")
    c.add_argument("--max-n", type=int, default=8)
    c.add_argument("--out")
    c.set_defaults(func=cmd_constants)

    e = sub.add_parser("extend", help="extend a partial function from a problem file")
    e.add_argument("--problem", required=True)
    e.add_argument("--method", required=True, choices=sorted(EXTENDERS))
    e.add_argument("--preserve-norm", action="store_true", help="retract onto the ball of radius ||f||_inf")
    e.add_argument("--no-clamp", action="store_true", help="skip the McShane floor at -||f||_inf")
    e.add_argument("--nodes", type=int, default=4000)
    e.add_argument("--seed", type=int)
    e.add_argument("--out")
    e.set_defaults(func=cmd_extend)

    o = sub.add_parser("oracle", help="minimal Lipschitz extension by bisection")
    o.add_argument("--problem")
    o.add_argument("--builtin", choices=sorted(BUILTINS))
    o.add_argument("--tol", type=float, default=TOL_BISECT, help="relative bisection width")
    o.add_argument("--tol-feas", type=float, default=TOL_FEAS)
    o.add_argument("--max-iters", type=int, default=MAX_SWEEPS)
    o.add_argument("--out")
    o.set_defaults(func=cmd_oracle)

    v = sub.add_parser("verify", help="numerical verification suites")
    v.add_argument("--suite", required=True, choices=sorted(SUITES))
    v.add_argument("--space")
    size_args(v)
    v.add_argument("--samples", type=int)
    v.add_argument("--seed", type=int)
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("prospect", help="search for instances with large extension ratio")
    s.add_argument("--space", required=True)
    size_args(s)
    s.add_argument("--trials", type=int, required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--z-max", type=int, default=6)
    s.add_argument("--ascent-steps", type=int, default=0)
    s.add_argument("--tol", type=float, default=TOL_BISECT)
    s.add_argument("--workers", type=int)
    s.add_argument("--instance-out", help="write the best instance as a problem file")
    s.add_argument("--out")
    s.set_defaults(func=cmd_prospect)

    r = sub.add_parser("report", help="CSV reports")
    r.add_argument("what", choices=["omega"])
    r.add_argument("--max-n", type=int, default=500)
    r.add_argument("--out")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ProblemFileError, UsageError, LipextError) as exc:
        print(f"lipext {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
