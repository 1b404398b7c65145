"""Benchmark harness: estimator x density x n x replicate grids and rate fits.

Config files are JSON documents validated against :data:`CONFIG_SCHEMA`::

    {
      "densities": [{"kind": "beta_product", "alpha": 2, "beta": 2}],
      "estimators": ["optimal", "plugin"],
      "n_grid": [3000, 12000],
      "replicates": 20,
      "master_seed": 1,
      "class": {"s": 2, "p": 2, "d": 1, "L": 1},
      "estimator_options": {"c2": 0.05},
      "plugin_c0": 1.0
    }

``n`` always counts the total number of samples handed to an estimator.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Iterable, Mapping, Sequence

import jsonschema
import numpy as np

from .baselines import (discrete_bandwidth, discrete_reduction_entropy, plugin_bandwidth,
                        plugin_entropy, resubstitution_entropy)
from .densities import DensityModel, density_id, make_density
from .estimator import (EstimatorConfig, OrliczTail, estimate_entropy,
                        estimate_entropy_unbounded, resolve_threads)

__all__ = [
    "CONFIG_SCHEMA",
    "ESTIMATORS",
    "CSV_HEADER",
    "BenchConfig",
    "BenchError",
    "ExperimentRecord",
    "RateFit",
    "splitmix64",
    "cell_seed",
    "load_config",
    "run_bench",
    "read_records",
    "write_records",
    "fit_rate",
    "format_rate_table",
    "bias_comparison",
    "BiasComparison",
]

_MASK = (1 << 64) - 1

ESTIMATORS = ("optimal", "plugin", "discrete-mm", "discrete-poly", "resub")

CSV_HEADER = ("estimator", "density", "n", "replicate", "seed", "estimate", "truth", "error",
              "wall_ms")

CONFIG_SCHEMA: dict = {
    "type": "object",
    "required": ["estimators", "n_grid", "replicates", "master_seed"],
    "properties": {
        "density": {"type": ["object", "string"]},
        "densities": {"type": "array", "minItems": 1, "items": {"type": ["object", "string"]}},
        "estimators": {"type": "array", "minItems": 1,
                       "items": {"type": "string", "enum": list(ESTIMATORS)}},
        "n_grid": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 48}},
        "replicates": {"type": "integer", "minimum": 1},
        "master_seed": {"type": "integer", "minimum": 0},
        "class": {
            "type": "object",
            "properties": {"s": {"type": "number", "exclusiveMinimum": 0},
                           "p": {"type": "number", "minimum": 1},
                           "d": {"type": "integer", "minimum": 1},
                           "L": {"type": "number", "exclusiveMinimum": 0}},
            "additionalProperties": False,
        },
        "estimator_options": {"type": "object"},
        "plugin_c0": {"type": "number", "exclusiveMinimum": 0},
        "kernel": {"type": "string", "enum": ["box", "triangle_product"]},
        "orlicz_q": {"type": "number", "minimum": 1},
        "timing": {"type": "boolean"},
    },
    "oneOf": [{"required": ["density"]}, {"required": ["densities"]}],
    "additionalProperties": False,
}


class BenchError(ValueError):
    """Malformed configuration or insufficient data."""


def splitmix64(x: int) -> int:
    """One step of the SplitMix64 generator (output of state ``x``)."""
    z = (x + 0x9E3779B97F4A7C15) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def _hash64(text: str) -> int:
    return int.from_bytes(hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest(), "little")


def cell_seed(master: int, did: str, n: int, replicate: int) -> int:
    """``splitmix(master, density_id, n, r)``: fold each key into the state in turn."""
    state = splitmix64(int(master) & _MASK)
    for v in (_hash64(did), int(n), int(replicate)):
        state = splitmix64(state ^ (v & _MASK))
    return state


@dataclass(frozen=True)
class BenchConfig:
    densities: tuple
    estimators: tuple
    n_grid: tuple
    replicates: int
    master_seed: int
    s: float = 1.0
    p: float = 2.0
    d: int = 1
    L: float = 1.0
    estimator_options: Mapping[str, Any] | None = None
    plugin_c0: float = 1.0
    kernel: str = "box"
    orlicz_q: float = 1.0
    timing: bool = False

    @classmethod
    def from_mapping(cls, raw: Mapping[str, Any]) -> "BenchConfig":
        try:
            jsonschema.validate(raw, CONFIG_SCHEMA)
        except jsonschema.ValidationError as exc:
            raise BenchError(f"invalid bench config: {exc.message}") from None
        dens = raw.get("densities") or [raw["density"]]
        dens = tuple({"kind": d} if isinstance(d, str) else dict(d) for d in dens)
        cls_ = raw.get("class", {})
        return cls(densities=dens, estimators=tuple(raw["estimators"]),
                   n_grid=tuple(int(n) for n in raw["n_grid"]), replicates=int(raw["replicates"]),
                   master_seed=int(raw["master_seed"]), s=float(cls_.get("s", 1.0)),
                   p=float(cls_.get("p", 2.0)), d=int(cls_.get("d", 1)),
                   L=float(cls_.get("L", 1.0)),
                   estimator_options=dict(raw.get("estimator_options", {})),
                   plugin_c0=float(raw.get("plugin_c0", 1.0)), kernel=raw.get("kernel", "box"),
                   orlicz_q=float(raw.get("orlicz_q", 1.0)), timing=bool(raw.get("timing", False)))

    def estimator_config(self, density: DensityModel) -> EstimatorConfig:
        opts = {"s": self.s, "p": self.p, "d": self.d, "L": self.L, "kernel": self.kernel}
        if density.bounded_support:
            opts["support"] = (float(density.lo), float(density.hi))
        opts.update(self.estimator_options or {})
        return EstimatorConfig.from_mapping(opts)


def load_config(path_or_mapping) -> BenchConfig:
    """Read and validate a config from a JSON file path or a mapping."""
    if isinstance(path_or_mapping, Mapping):
        return BenchConfig.from_mapping(path_or_mapping)
    with open(path_or_mapping, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise BenchError(f"config is not valid JSON: {exc}") from None
    return BenchConfig.from_mapping(raw)


@dataclass(frozen=True)
class ExperimentRecord:
    estimator: str
    density: str
    n: int
    replicate: int
    seed: int
    estimate: float
    truth: float
    error: float
    wall_ms: float | None = None

    @property
    def key(self) -> tuple:
        return (self.estimator, self.density, self.n, self.replicate)

    def row(self) -> list:
        wall = "" if self.wall_ms is None else repr(self.wall_ms)
        return [self.estimator, self.density, str(self.n), str(self.replicate), str(self.seed),
                repr(self.estimate), repr(self.truth), repr(self.error), wall]

    @classmethod
    def from_row(cls, row: Mapping[str, str]) -> "ExperimentRecord":
        wall = row.get("wall_ms", "")
        return cls(row["estimator"], row["density"], int(row["n"]), int(row["replicate"]),
                   int(row["seed"]), float(row["estimate"]), float(row["truth"]),
                   float(row["error"]), float(wall) if wall else None)


def _run_estimator(name: str, X: np.ndarray, density: DensityModel, cfg: BenchConfig) -> float:
    N, d = X.shape
    if name == "optimal":
        ec = cfg.estimator_config(density)
        if density.bounded_support:
            return estimate_entropy(X, ec, threads=1).H
        return estimate_entropy_unbounded(X, ec, OrliczTail(q=cfg.orlicz_q), threads=1).H
    if not density.bounded_support:
        raise BenchError(f"estimator {name!r} needs a density with bounded support")
    h = plugin_bandwidth(N, cfg.s, d, cfg.L, cfg.plugin_c0)
    if name == "plugin":
        return plugin_entropy(X, cfg.kernel, h, support=(density.lo, density.hi))
    if name == "resub":
        return resubstitution_entropy(X, cfg.kernel, h)
    hb = discrete_bandwidth(N, cfg.s, d, cfg.L)
    if name == "discrete-mm":
        return discrete_reduction_entropy(X, hb, "miller_madow")
    if name == "discrete-poly":
        return discrete_reduction_entropy(X, hb, "poly")
    raise BenchError(f"unknown estimator id {name!r}")


def _run_cell(cfg: BenchConfig, density: DensityModel, did: str, n: int, r: int,
              wanted: Sequence[str]) -> list:
    seed = cell_seed(cfg.master_seed, did, n, r)
    X = density.sample(n, np.random.default_rng(seed))
    truth = float(density.entropy_truth)
    out = []
    for name in wanted:
        t0 = time.perf_counter()
        est = float(_run_estimator(name, X, density, cfg))
        wall = (time.perf_counter() - t0) * 1e3 if cfg.timing else None
        out.append(ExperimentRecord(name, did, n, r, seed, est, truth, est - truth, wall))
    return out


def read_records(source) -> list:
    """Parse records from a CSV path, file object or string."""
    if isinstance(source, (str, os.PathLike)) and os.path.exists(source):
        with open(source, newline="", encoding="utf-8") as fh:
            return read_records(fh)
    fh = io.StringIO(source) if isinstance(source, str) else source
    reader = csv.DictReader(fh)
    if reader.fieldnames is None or tuple(reader.fieldnames) != CSV_HEADER:
        raise BenchError(f"unexpected CSV header {reader.fieldnames}")
    try:
        return [ExperimentRecord.from_row(r) for r in reader]
    except (KeyError, ValueError) as exc:
        raise BenchError(f"malformed record: {exc}") from None


def write_records(records: Iterable[ExperimentRecord], fh) -> None:
    """RFC-4180 CSV with LF line endings."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for rec in records:
        w.writerow(rec.row())


def run_bench(config, out_path: str | None = None, *, threads: int | None = None,
              existing: Iterable[ExperimentRecord] | None = None) -> list:
    """Run every (density, n, replicate) cell and return records in canonical order.

    Canonical order is density, n, replicate (config order), then estimator
    (config order).  Rows already present in ``existing`` or in the CSV at
    ``out_path`` are kept verbatim and their cells skipped, so an
    interrupted run resumes to the same file.  The output is identical for
    any thread count.
    """
    cfg = config if isinstance(config, BenchConfig) else load_config(config)
    if existing is None and out_path and os.path.exists(out_path):
        existing = read_records(out_path)
    have = {rec.key: rec for rec in (existing or [])}
    models = [(make_density(spec), density_id(spec)) for spec in cfg.densities]
    for m, _ in models:
        if m.d != cfg.d:
            raise BenchError(f"density {m.name} has dimension {m.d}, class declares {cfg.d}")
    jobs = []
    for m, did in models:
        for n in cfg.n_grid:
            for r in range(cfg.replicates):
                wanted = [e for e in cfg.estimators if (e, did, n, r) not in have]
                if wanted:
                    jobs.append((m, did, n, r, wanted))
    nthreads = resolve_threads(threads)
    if nthreads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=nthreads) as ex:
            results = list(ex.map(lambda j: _run_cell(cfg, *j), jobs))
    else:
        results = [_run_cell(cfg, *j) for j in jobs]
    for batch in results:
        for rec in batch:
            have[rec.key] = rec
    ordered = []
    for _, did in models:
        for n in cfg.n_grid:
            for r in range(cfg.replicates):
                for e in cfg.estimators:
                    ordered.append(have[(e, did, n, r)])
    if out_path:
        with open(out_path, "w", newline="", encoding="utf-8") as fh:
            write_records(ordered, fh)
    return ordered


# ---------------------------------------------------------------------------
# rate fits


@dataclass(frozen=True)
class RateFit:
    estimator: str
    density: str
    slope: float
    intercept: float
    r2: float
    n_grid: tuple
    rmse: tuple
    ci_low: float
    ci_high: float
    level: float = 0.90


def _group(records):
    groups: dict = {}
    for rec in records:
        groups.setdefault((rec.estimator, rec.density), {}).setdefault(rec.n, []).append(rec.error)
    return groups


def _ols(x, y):
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / ss_tot if ss_tot > 0 else 1.0
    return float(coef[0]), float(coef[1]), r2


def fit_rate(records: Iterable[ExperimentRecord], *, resamples: int = 200, level: float = 0.90,
             min_n: int = 3, min_reps: int = 20, seed: int = 0) -> list:
    """OLS of ``ln RMSE`` on ``ln n`` per (estimator, density), with a bootstrap slope CI.

    The bootstrap resamples replicates independently within each ``n``.
    """
    fits = []
    for (est, did), by_n in sorted(_group(records).items()):
        ns = sorted(by_n)
        if len(ns) < min_n:
            raise BenchError(f"{est}/{did}: need at least {min_n} distinct n, got {len(ns)}")
        short = [n for n in ns if len(by_n[n]) < min_reps]
        if short:
            raise BenchError(f"{est}/{did}: fewer than {min_reps} replicates at n = {short}")
        errs = [np.asarray(by_n[n], dtype=float) for n in ns]
        x = np.log(np.asarray(ns, dtype=float))
        rmse = np.array([math.sqrt(float(np.mean(e * e))) for e in errs])
        slope, icpt, r2 = _ols(x, np.log(rmse))
        rng = np.random.default_rng(seed)
        boots = np.empty(resamples)
        for b in range(resamples):
            rb = np.array([math.sqrt(float(np.mean(e[rng.integers(0, len(e), len(e))] ** 2)))
                           for e in errs])
            boots[b] = _ols(x, np.log(np.maximum(rb, 1e-300)))[0]
        a = (1.0 - level) / 2.0
        lo, hi = np.quantile(boots, [a, 1.0 - a])
        fits.append(RateFit(est, did, slope, icpt, r2, tuple(ns), tuple(float(v) for v in rmse),
                            float(lo), float(hi), level))
    return fits


def format_rate_table(fits: Sequence[RateFit]) -> str:
    lines = [f"{'estimator':<14} {'slope':>8} {'CI':>20} {'R2':>6}  density / RMSE by n"]
    for f in fits:
        ci = f"[{f.ci_low:.3f}, {f.ci_high:.3f}]"
        lines.append(f"{f.estimator:<14} {f.slope:>8.3f} {ci:>20} {f.r2:>6.3f}  {f.density}")
        lines.append("    " + "  ".join(f"n={n}: {r:.4g}" for n, r in zip(f.n_grid, f.rmse)))
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# bias comparison


@dataclass(frozen=True)
class BiasComparison:
    first: str
    second: str
    n: int
    bias_first: float
    bias_second: float
    ci_first: tuple
    ci_second: tuple
    verdict: str  # "confirmed", "reversed" or "inconclusive"

    def __str__(self):
        return (f"|bias| {self.first}: {self.bias_first:.4g} CI [{self.ci_first[0]:.4g}, "
                f"{self.ci_first[1]:.4g}]; {self.second}: {self.bias_second:.4g} CI "
                f"[{self.ci_second[0]:.4g}, {self.ci_second[1]:.4g}] -> {self.verdict}")


def bias_comparison(records: Iterable[ExperimentRecord], first: str, second: str, n: int, *,
                    density: str | None = None, level: float = 0.95, resamples: int = 2000,
                    seed: int = 0) -> BiasComparison:
    """Is ``|bias(first)| <= |bias(second)|`` at sample size ``n``?

    Percentile bootstrap CIs of the absolute mean error.  ``confirmed`` when
    the CI of ``first`` lies entirely below that of ``second``, ``reversed``
    for the opposite, ``inconclusive`` when they overlap.
    """
    recs = [r for r in records if r.n == n and (density is None or r.density == density)]
    rng = np.random.default_rng(seed)
    a = (1.0 - level) / 2.0
    out = {}
    for name in (first, second):
        e = np.array([r.error for r in recs if r.estimator == name])
        if len(e) < 2:
            raise BenchError(f"not enough records for {name!r} at n = {n}")
        idx = rng.integers(0, len(e), size=(resamples, len(e)))
        boots = np.abs(e[idx].mean(axis=1))
        out[name] = (abs(float(e.mean())), tuple(float(v) for v in np.quantile(boots, [a, 1 - a])))
    (b1, c1), (b2, c2) = out[first], out[second]
    if c1[1] < c2[0]:
        verdict = "confirmed"
    elif c2[1] < c1[0]:
        verdict = "reversed"
    else:
        verdict = "inconclusive"
    return BiasComparison(first, second, n, b1, b2, c1, c2, verdict)
