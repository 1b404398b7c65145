"""Command-line interface: ``entroscope {estimate,bench,rate,lb,selfcheck}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 check failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import bench as _bench
from .estimator import (ConfigError, EstimatorConfig, OrliczTail, estimate_entropy,
                        estimate_entropy_unbounded)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_CHECK = 0, 1, 2, 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: error: {message}")


def read_samples(path: str) -> np.ndarray:
    """One point per line, whitespace-separated coordinates, ``#`` comments."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            try:
                rows.append([float(v) for v in text.split()])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: not a list of numbers") from None
    if not rows:
        raise ValueError(f"{path}: no sample points")
    if len({len(r) for r in rows}) != 1:
        raise ValueError(f"{path}: rows have differing dimensions")
    return np.asarray(rows, dtype=float)


def _load_json(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ValueError(f"{path}: expected a JSON object")
    return data


# ---------------------------------------------------------------------------
# subcommands


def _cmd_estimate(args, out) -> int:
    X = read_samples(args.samples)
    raw = _load_json(args.config)
    bandwidth = raw.pop("bandwidth", None)
    unbounded = bool(raw.pop("unbounded", False))
    orlicz_q = float(raw.pop("orlicz_q", 1.0))
    raw.setdefault("d", X.shape[1])
    cfg = EstimatorConfig.from_mapping(raw)
    if unbounded:
        res = estimate_entropy_unbounded(X, cfg, OrliczTail(orlicz_q), threads=args.threads)
    else:
        res = estimate_entropy(X, cfg, bandwidth=bandwidth, threads=args.threads)
    out.write(res.to_record(timing=args.timing))
    return EXIT_OK


def _cmd_bench(args, out) -> int:
    cfg = _bench.load_config(args.config)
    if args.timing:
        cfg = _bench.BenchConfig(**{**cfg.__dict__, "timing": True})
    recs = _bench.run_bench(cfg, args.out, threads=args.threads)
    if args.out:
        out.write(f"wrote {len(recs)} records to {args.out}\n")
    else:
        _bench.write_records(recs, out)
    return EXIT_OK


def _cmd_rate(args, out) -> int:
    recs = _bench.read_records(args.csv)
    fits = _bench.fit_rate(recs, resamples=args.resamples, min_reps=args.min_reps,
                           seed=args.seed)
    out.write(_bench.format_rate_table(fits) + "\n")
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["estimator", "density", "slope", "intercept", "r2", "ci_low", "ci_high",
                        "n_grid"])
            for f in fits:
                w.writerow([f.estimator, f.density, repr(f.slope), repr(f.intercept), repr(f.r2),
                            repr(f.ci_low), repr(f.ci_high), " ".join(map(str, f.n_grid))])
    return EXIT_OK


def lb_report(raw: dict) -> tuple:
    """Build priors from an ``lb`` config; return (csv text, summary text, ok)."""
    from .densities import LipschitzSpec
    from .lower_bound import (build_priors, default_eta, lipschitz_membership_check,
                              poisson_mixture_tv, tv_bound, two_point_demo)

    n = int(raw.get("n", 10_000))
    ln = math.log(n)
    d2 = float(raw.get("d2", 4.0))
    d3 = float(raw.get("d3", 1.0))
    q = int(raw.get("q", 1))
    k = raw.get("k")
    k = math.ceil(d2 * ln) if k is None else int(k)
    eta = raw.get("eta")
    eta = default_eta(n, raw.get("d1"), d2) if eta is None else float(eta)
    pri = build_priors(q, k, eta, raw.get("grid_m"), dilation=d3 * ln / n)
    tv = poisson_mixture_tv(pri, n)
    bound = tv_bound(n, q, k, d3)
    worst = max(pri.residuals.values())
    ok = worst <= 1e-8 and pri.gap > 0 and tv <= bound
    rows = [("n", n), ("q", q), ("k", k), ("eta", eta), ("dilation", pri.dilation),
            ("atoms", len(pri.atoms)), ("lp_objective", pri.lp_objective),
            ("residual_base", pri.residuals["base"]), ("residual_tilted", pri.residuals["tilted"]),
            ("residual_q_moment", pri.residuals["q_moment"]), ("gap", pri.gap),
            ("gap_n_ln_n", pri.gap * n * ln), ("tv", tv), ("tv_bound", bound)]
    summary = [f"priors q={q} k={k} eta={eta:.6g}: worst moment residual {worst:.3e}, "
               f"gap {pri.gap:.6e} (x n ln n = {pri.gap * n * ln:.6g}), TV {tv:.3e} "
               f"(bound {bound:.3e})"]
    mem = raw.get("membership")
    if mem:
        spec = LipschitzSpec(float(mem.get("s", 1)), float(mem.get("p", 2)), int(mem.get("d", 1)),
                             float(mem.get("L", 1e4)))
        h = (float(mem.get("d0", 1.0)) * spec.L * n * ln) ** (-1.0 / (spec.s + spec.d))
        S = max(1, round((2 * h) ** (-spec.d)))
        rep = lipschitz_membership_check(pri, spec, S, h, n, draws=int(mem.get("draws", 2000)),
                                         rng=np.random.default_rng(int(mem.get("seed", 0))))
        rows += [("membership_S", S), ("membership_pass_mu0", rep.pass_both[0]),
                 ("membership_pass_mu1", rep.pass_both[1])]
        summary.append(str(rep))
    tp = raw.get("two_point")
    if tp:
        r = two_point_demo(float(tp.get("L", 1e4)), int(tp.get("n", n)), s=float(tp.get("s", 1)),
                           d=int(tp.get("d", 1)))
        rows += [("two_point_A", r.A), ("two_point_chi2", r.chi2),
                 ("two_point_separation", r.separation)]
        summary.append("two-point: " + str(r))
        ok = ok and r.ok
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["quantity", "value"])
    for key, val in rows:
        w.writerow([key, repr(val) if isinstance(val, float) else val])
    summary.append("all invariants hold" if ok else "INVARIANT VIOLATED")
    return buf.getvalue(), "\n".join(summary) + "\n", ok


def _cmd_lb(args, out) -> int:
    text, summary, ok = lb_report(_load_json(args.config))
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
    else:
        out.write(text)
    out.write(summary)
    return EXIT_OK if ok else EXIT_CHECK


def selfcheck() -> list:
    """Fast internal consistency checks as ``(name, passed, detail)`` triples."""
    from fractions import Fraction

    from .densities import beta_product, uniform_cube
    from .kernels import BOX, TRIANGLE, check_kernel_assumptions
    from .lower_bound import build_priors
    from .oracle import quadrature_entropy
    from .poly_approx import remez_minimax
    from .u_stats import elementary_symmetric, power_sums, u_statistic

    out = []
    p0 = remez_minimax(1.0, 0)
    out.append(("constant minimax of -t ln t", abs(p0.sup_error - 1 / (2 * math.e)) < 1e-10,
                f"{p0.sup_error:.12f}"))
    p4 = remez_minimax(1.0, 4)
    out.append(("degree-4 alternation", len(p4.alternation) >= 6,
                 f"{len(p4.alternation)} points"))
    e = elementary_symmetric(power_sums([Fraction(1), Fraction(2), Fraction(3)], 3))
    out.append(("Newton identities", list(e) == [1, 6, 11, 6], str(list(map(str, e)))))
    out.append(("second-order U-statistic", u_statistic([1.0, 2.0, 3.0], 2) == 11 / 3, ""))
    for kern in (BOX, TRIANGLE):
        rep = check_kernel_assumptions(kern)
        out.append((f"{kern.kind} kernel assumptions", rep.passed, ""))
    q = quadrature_entropy(uniform_cube(1), resolution=2**8)
    out.append(("uniform entropy quadrature", q.value == 0.0, repr(q.value)))
    b = beta_product(2.0, 2.0, 1)
    qb = quadrature_entropy(b)
    out.append(("Beta(2,2) entropy quadrature", abs(qb.value - b.entropy_truth) < 1e-6,
                f"{qb.value - b.entropy_truth:.2e}"))
    pri = build_priors(1, 4, 0.05)
    worst = max(pri.residuals.values())
    out.append(("prior moment residuals", worst <= 1e-8 and pri.gap > 0, f"{worst:.2e}"))
    X = b.sample(3000, np.random.default_rng(0))
    H = estimate_entropy(X, EstimatorConfig.from_mapping({"s": 2, "p": 2, "d": 1})).H
    out.append(("estimate on Beta(2,2), n=3000", abs(H - b.entropy_truth) < 0.1,
                f"{H - b.entropy_truth:+.4f}"))
    return out


def _cmd_selfcheck(args, out) -> int:
    ok = True
    for name, passed, detail in selfcheck():
        ok &= bool(passed)
        out.write(f"{'PASS' if passed else 'FAIL'}  {name}" + (f"  ({detail})" if detail else "")
                  + "\n")
    return EXIT_OK if ok else EXIT_CHECK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="entroscope", description="Differential entropy estimation toolkit.")
    ap.add_argument("--threads", type=int, default=None,
                    help="worker threads (default: ENTROSCOPE_THREADS or 1)")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("estimate", help="estimate the entropy of a sample file")
    p.add_argument("samples")
    p.add_argument("config", help="JSON estimator options (s, p, d, L, c0, ...)")
    p.add_argument("--timing", action="store_true", help="append wall time to the record")
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("bench", help="run a benchmark grid")
    p.add_argument("config")
    p.add_argument("--out", help="CSV path (resumes if present); default stdout")
    p.add_argument("--timing", action="store_true", help="fill the wall_ms column")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("rate", help="fit convergence rates from a bench CSV")
    p.add_argument("csv")
    p.add_argument("--out", help="write fits as CSV")
    p.add_argument("--resamples", type=int, default=200)
    p.add_argument("--min-reps", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_rate)

    p = sub.add_parser("lb", help="build moment-matched priors and report")
    p.add_argument("config")
    p.add_argument("--out", help="write the CSV part to a file")
    p.set_defaults(func=_cmd_lb)

    p = sub.add_parser("selfcheck", help="run fast internal checks")
    p.set_defaults(func=_cmd_selfcheck)
    return ap


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    try:
        args = build_parser().parse_args(argv)
    except _UsageError as exc:
        sys.stderr.write(str(exc) + "\n")
        return EXIT_USAGE
    if args.threads is not None and args.threads < 1:
        sys.stderr.write("entroscope: --threads must be positive\n")
        return EXIT_USAGE
    try:
        return args.func(args, out)
    except (OSError, ValueError, _bench.BenchError, ConfigError) as exc:
        sys.stderr.write(f"entroscope: {exc}\n")
        return EXIT_DATA


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
