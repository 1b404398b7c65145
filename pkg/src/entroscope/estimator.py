"""Minimax-rate differential entropy estimator on the unit cube.

The sample (size ``3n``) is split into three index blocks.  At each point
``x`` the first block decides the regime:

* non-smooth (``fhat_1(x) < tau``): an unbiased estimate of ``Q(f_h(x))``,
  with ``Q`` the best degree-``k`` polynomial approximation of ``-t ln t``
  on ``[0, 2 tau]``, built from product U-statistics of the second block
  and clipped from above;
* smooth: a second-order bias-corrected plug-in that uses the second block
  for the expansion point and the third for the correction terms.

The pointwise estimate is integrated over the support of the smoothed
density.  For the box kernel in one dimension the integrand is piecewise
constant between the breakpoints ``X_i +- h/2`` and is integrated exactly;
otherwise a midpoint grid of pitch ``h / resolution`` is used and a
coarse-grid error indicator is reported.
"""

from __future__ import annotations

import math
import os
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Mapping

import numpy as np

from .densities import LipschitzSpec
from .kernels import BoundaryMode, Kernel, SampleIndex, kernel_values, wrap_unit
from .poly_approx import PolyApprox, cached_minimax
from .u_stats import h1_nonsmooth, second_order_u

__all__ = [
    "EstimatorConfig",
    "Parameters",
    "SplitSamples",
    "EstimateResult",
    "OrliczTail",
    "ConfigError",
    "select_parameters",
    "classify_regime",
    "NONSMOOTH",
    "SMOOTH",
    "h2_smooth",
    "pointwise_estimate",
    "pointwise_estimates",
    "estimate_entropy",
    "estimate_entropy_unbounded",
    "resolve_threads",
]

NONSMOOTH = "NonSmooth"
SMOOTH = "Smooth"


class ConfigError(ValueError):
    """Estimator configuration violates its invariants."""


@dataclass(frozen=True)
class EstimatorConfig:
    """Class parameters and tuning constants.

    Parameters
    ----------
    lipschitz : LipschitzSpec
        Smoothness ``s``, norm ``p``, dimension ``d`` and radius ``L``.
    c0 : float
        Bandwidth constant, ``h = c0 (L n ln n)^{-1/(s+d)}``.
    c1 : float or None
        Classification constant; ``None`` means ``2 ||K||_inf``.
    c2 : float
        Degree constant, ``k = ceil(c2 ln n)``.
    eps : float
        Clipping exponent, clip level ``1 / (n^{1-2 eps} h^d)``.
    kernel : {"box", "triangle_product"}
    boundary : {"zero_extension", "periodic"}
    resolution : int
        Grid cells per bandwidth for grid integration.
    integration : {"auto", "exact", "grid"}
        ``auto`` is exact for the one-dimensional box kernel, grid otherwise.
    support : (float, float)
        Cube ``[lo, hi]^d`` known to contain the support of ``f``.
    seed : int
        Master seed carried for bookkeeping; the estimator is deterministic.
    force_regime : {None, "Smooth", "NonSmooth"}
        Diagnostic override of the regime test.
    clip : bool
        Apply the upper clip in the non-smooth regime.
    """

    lipschitz: LipschitzSpec = field(default_factory=lambda: LipschitzSpec(1.0, 2.0, 1, 1.0))
    c0: float = 1.0
    c1: float | None = None
    c2: float = 0.05
    eps: float = 0.3
    kernel: str = "box"
    boundary: str = "zero_extension"
    resolution: int = 4
    integration: str = "auto"
    support: tuple = (0.0, 1.0)
    seed: int = 0
    force_regime: str | None = None
    clip: bool = True

    def __post_init__(self):
        s, d = self.lipschitz.s, self.lipschitz.d
        lower = 7.0 * self.c2 * math.log(2.0)
        if not self.c2 > 0:
            raise ConfigError("c2 must be positive")
        if not lower < self.eps:
            raise ConfigError(f"need 7 c2 ln 2 = {lower:.4f} < eps = {self.eps}")
        if not self.eps < s / (s + d):
            raise ConfigError(f"need eps = {self.eps} < s/(s+d) = {s / (s + d):.4f}")
        if not self.c0 > 0:
            raise ConfigError("c0 must be positive")
        if self.c1 is not None and not self.c1 > 0:
            raise ConfigError("c1 must be positive")
        Kernel(self.kernel, d)
        BoundaryMode.parse(self.boundary)
        if self.integration not in ("auto", "exact", "grid"):
            raise ConfigError(f"unknown integration mode {self.integration!r}")
        if self.resolution < 1:
            raise ConfigError("resolution must be a positive integer")
        if self.force_regime not in (None, SMOOTH, NONSMOOTH):
            raise ConfigError(f"unknown regime {self.force_regime!r}")
        lo, hi = self.support
        if not hi > lo:
            raise ConfigError("empty support interval")

    @property
    def d(self) -> int:
        return self.lipschitz.d

    @property
    def kernel_obj(self) -> Kernel:
        return Kernel(self.kernel, self.d)

    @property
    def boundary_mode(self) -> BoundaryMode:
        return BoundaryMode.parse(self.boundary)

    @property
    def c1_value(self) -> float:
        return 2.0 * self.kernel_obj.sup_norm if self.c1 is None else float(self.c1)

    def replace(self, **changes) -> "EstimatorConfig":
        from dataclasses import replace

        return replace(self, **changes)

    @classmethod
    def from_mapping(cls, m: Mapping[str, Any]) -> "EstimatorConfig":
        """Build from a flat mapping (``s, p, d, L`` plus any field name)."""
        m = dict(m)
        lip = LipschitzSpec(float(m.pop("s", 1.0)), float(m.pop("p", 2.0)),
                            int(m.pop("d", 1)), float(m.pop("L", 1.0)))
        if "support" in m:
            m["support"] = tuple(float(v) for v in m["support"])
        known = {f for f in cls.__dataclass_fields__} - {"lipschitz"}
        unknown = set(m) - known
        if unknown:
            raise ConfigError(f"unknown estimator option(s): {sorted(unknown)}")
        return cls(lipschitz=lip, **m)

    def to_mapping(self) -> dict:
        out = asdict(self)
        lip = out.pop("lipschitz")
        out.update(lip)
        out["support"] = list(self.support)
        return out


@dataclass(frozen=True)
class Parameters:
    """Derived tuning quantities for a per-block sample size ``n``."""

    n: int
    h: float
    k: int
    tau: float
    tau_h2: float
    clip: float
    delta: float

    def __iter__(self):
        # unpacks as (h, k, tau_classify, tau_H2, clip)
        return iter((self.h, self.k, self.tau, self.tau_h2, self.clip))


def select_parameters(config: EstimatorConfig, n: int, h: float | None = None) -> Parameters:
    """Bandwidth, degree, thresholds and clip level for block size ``n``.

    ``h = c0 (L n ln n)^{-1/(s+d)}``, ``k = ceil(c2 ln n)``,
    ``tau = c1 ln n / (n h^d)``, ``tau_H2 = tau / 4``,
    ``clip = 1 / (n^{1 - 2 eps} h^d)`` and the approximation interval is
    ``[0, 2 tau]``.  An explicit ``h`` overrides the bandwidth rule.
    """
    if n < 16:
        raise ConfigError(f"block size n = {n} is below the minimum of 16")
    lip = config.lipschitz
    s, d, L = lip.s, lip.d, lip.L
    ln = math.log(n)
    if h is None:
        h = config.c0 * (L * n * ln) ** (-1.0 / (s + d))
        if h >= 1.0:
            warnings.warn(f"bandwidth {h:.3g} >= 1: sample too small for the class; using 0.5",
                          RuntimeWarning, stacklevel=2)
            h = 0.5
    if not h > 0:
        raise ConfigError("bandwidth must be positive")
    k = max(1, math.ceil(config.c2 * ln))
    tau = config.c1_value * ln / (n * h**d)
    clip = 1.0 / (n ** (1.0 - 2.0 * config.eps) * h**d) if config.clip else math.inf
    return Parameters(n=n, h=float(h), k=k, tau=tau, tau_h2=tau / 4.0, clip=clip, delta=2.0 * tau)


def classify_regime(fhat1_x: float, tau_classify: float) -> str:
    """``NonSmooth`` iff ``fhat1_x < tau_classify`` (ties are smooth)."""
    if not tau_classify > 0:
        raise ValueError("threshold must be positive")
    return NONSMOOTH if fhat1_x < tau_classify else SMOOTH


def h2_smooth(fhat2_x, fhat3_x, u2_x, tau_h2):
    """Second-order bias-corrected plug-in for ``-f ln f``.

    ``-f2 ln f2 - (1 + ln f2)(f3 - f2) - (f2 - 2 f3 + u2 / f2) / 2`` when
    ``f2 >= tau_h2``, zero otherwise.  Accepts scalars or arrays.
    """
    f2 = np.asarray(fhat2_x, dtype=float)
    f3 = np.asarray(fhat3_x, dtype=float)
    u2 = np.asarray(u2_x, dtype=float)
    ok = f2 >= tau_h2
    safe = np.where(ok & (f2 > 0), f2, 1.0)
    lg = np.log(safe)
    val = -safe * lg - (1.0 + lg) * (f3 - safe) - 0.5 * (safe - 2.0 * f3 + u2 / safe)
    out = np.where(ok & (f2 > 0), val, 0.0)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# samples


@dataclass
class SplitSamples:
    """Three disjoint index blocks of equal size ``n``."""

    X1: np.ndarray
    X2: np.ndarray
    X3: np.ndarray
    dropped: int = 0

    @classmethod
    def from_samples(cls, samples) -> "SplitSamples":
        X = _as_sample_array(samples)
        n = len(X) // 3
        if n < 1:
            raise ValueError("need at least 3 samples")
        return cls(X[:n], X[n:2 * n], X[2 * n:3 * n], dropped=len(X) - 3 * n)

    @property
    def n(self) -> int:
        return len(self.X1)

    @property
    def d(self) -> int:
        return self.X1.shape[1]

    def indexes(self, boundary) -> tuple:
        return tuple(SampleIndex(X, boundary) for X in (self.X1, self.X2, self.X3))


def _as_sample_array(samples) -> np.ndarray:
    X = np.asarray(samples, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValueError("samples must be an (N, d) array")
    if not np.all(np.isfinite(X)):
        raise ValueError("samples contain non-finite coordinates")
    return X


# ---------------------------------------------------------------------------
# pointwise evaluation


def _falling_ratio_sum(Z, n, scale, coeffs):
    """``sum_l b_l scale^l Z(Z-1)..(Z-l+1) / (n(n-1)..(n-l+1))`` (vectorised)."""
    Z = np.asarray(Z, dtype=float)
    acc = np.full(Z.shape, float(coeffs[0]))
    ratio = np.ones_like(Z)
    for l in range(1, len(coeffs)):
        ratio = ratio * (Z - l + 1) / (n - l + 1) * scale
        acc = acc + coeffs[l] * ratio
    return acc


@dataclass
class _PointwiseOut:
    value: np.ndarray
    nonsmooth: np.ndarray
    clipped: np.ndarray


def _evaluate_points(P, idx, params: Parameters, poly: PolyApprox, kernel: Kernel,
                     force_regime=None) -> _PointwiseOut:
    """Pointwise estimate at the rows of ``P`` given the three block indexes."""
    n, h = params.n, params.h
    d = kernel.d
    hd = h**d
    if kernel.kind == "box":
        r = 0.5 * h
        Z1, Z2, Z3 = (ix.count_within(P, r).astype(float) for ix in idx)
        f1, f2, f3 = Z1 / (n * hd), Z2 / (n * hd), Z3 / (n * hd)
        H1 = _falling_ratio_sum(Z2, n, 1.0 / (hd * poly.delta), poly.coeffs)
        u2 = Z3 * (Z3 - 1.0) / (n * (n - 1.0) * hd * hd)
    else:
        V1, V2, V3 = (kernel_values(ix, kernel, h, P) for ix in idx)
        f1 = np.array([math.fsum(v) for v in V1]) / n
        f2 = np.array([math.fsum(v) for v in V2]) / n
        f3 = np.array([math.fsum(v) for v in V3]) / n
        H1 = np.array([h1_nonsmooth(v, poly, n) for v in V2])
        u2 = np.array([second_order_u(v, n) for v in V3])
    if force_regime == SMOOTH:
        ns = np.zeros(len(P), dtype=bool)
    elif force_regime == NONSMOOTH:
        ns = np.ones(len(P), dtype=bool)
    else:
        ns = f1 < params.tau
    clipped = ns & (H1 > params.clip)
    H1c = np.minimum(H1, params.clip)
    H2 = h2_smooth(f2, f3, u2, params.tau_h2)
    H2 = np.atleast_1d(H2)
    return _PointwiseOut(np.where(ns, H1c, H2), ns, clipped)


def pointwise_estimates(points, splits: SplitSamples, params: Parameters,
                        poly: PolyApprox | None = None, *, kernel: str | Kernel = "box",
                        boundary=BoundaryMode.ZERO_EXTENSION, force_regime=None) -> np.ndarray:
    """Final point estimates at the rows of ``points``, sharing one index per block."""
    if poly is None:
        poly = cached_minimax(params.delta, params.k)
    kern = kernel if isinstance(kernel, Kernel) else Kernel(kernel, splits.d)
    kern = kern.with_dim(splits.d)
    idx = splits.indexes(BoundaryMode.parse(boundary))
    P = np.asarray(points, dtype=float).reshape(-1, splits.d)
    return _evaluate_points(P, idx, params, poly, kern, force_regime).value


def pointwise_estimate(x, splits: SplitSamples, params: Parameters, poly: PolyApprox | None = None,
                       *, kernel: str | Kernel = "box",
                       boundary=BoundaryMode.ZERO_EXTENSION, force_regime=None) -> float:
    """Final point estimate of ``-f_h(x) ln f_h(x)`` at a single point."""
    x = np.asarray(x, dtype=float)
    if x.size != splits.d:
        raise ValueError(f"point has {x.size} coordinates, samples have {splits.d}")
    return float(pointwise_estimates(x, splits, params, poly, kernel=kernel, boundary=boundary,
                                     force_regime=force_regime)[0])


# ---------------------------------------------------------------------------
# integration


@dataclass
class EstimateResult:
    """Outcome of one estimate.

    ``H`` is in nats.  ``nonsmooth_fraction`` and ``clip_fraction`` are
    volume fractions of the integration domain.
    """

    H: float
    h: float
    k: int
    n: int
    nonsmooth_fraction: float
    clip_fraction: float
    wall_time: float
    integration: str
    cells: int
    quadrature_error: float
    tau: float
    delta: float
    clip: float
    dropped: int = 0
    negative_density_free: bool = True
    extra: dict = field(default_factory=dict)

    def to_record(self, timing: bool = False) -> str:
        """Flat ``key=value`` text record (wall time only when ``timing``)."""
        items = [("H", repr(self.H)), ("h", repr(self.h)), ("k", self.k), ("n", self.n),
                 ("nonsmooth_fraction", repr(self.nonsmooth_fraction)),
                 ("clip_fraction", repr(self.clip_fraction)),
                 ("integration", self.integration), ("cells", self.cells),
                 ("quadrature_error", repr(self.quadrature_error)),
                 ("tau", repr(self.tau)), ("delta", repr(self.delta)), ("clip", repr(self.clip)),
                 ("dropped", self.dropped),
                 ("negative_density_free", str(self.negative_density_free).lower())]
        items += [(k, repr(v) if isinstance(v, float) else v) for k, v in sorted(self.extra.items())]
        if timing:
            items.append(("wall_time", repr(self.wall_time)))
        return "".join(f"{k}={v}\n" for k, v in items)


def resolve_threads(threads: int | None = None) -> int:
    """Thread count: explicit argument, else ``ENTROSCOPE_THREADS``, else 1."""
    if threads is None:
        env = os.environ.get("ENTROSCOPE_THREADS", "").strip()
        threads = int(env) if env else 1
    return max(1, int(threads))


def _domain(config: EstimatorConfig, kernel: Kernel, h: float):
    if config.boundary_mode is BoundaryMode.PERIODIC:
        return 0.0, 1.0
    lo, hi = config.support
    r = h * kernel.support_radius
    return lo - r, hi + r


def _exact_cells_1d(splits: SplitSamples, h: float, lo: float, hi: float, periodic: bool):
    """Midpoints and widths of the cells on which all box counts are constant."""
    X = np.concatenate([splits.X1, splits.X2, splits.X3])[:, 0]
    if periodic:
        X = wrap_unit(X)
        br = wrap_unit(np.concatenate([X - h / 2, X + h / 2]))
    else:
        br = np.concatenate([X - h / 2, X + h / 2])
    br = br[(br > lo) & (br < hi)]
    edges = np.unique(np.concatenate([[lo, hi], br]))
    widths = np.diff(edges)
    mids = 0.5 * (edges[:-1] + edges[1:])
    keep = widths > 0
    return mids[keep][:, None], widths[keep]


def _grid_cells(lo, hi, pitch, d):
    m = max(1, math.ceil((hi - lo) / pitch - 1e-9))
    step = (hi - lo) / m
    g = lo + step * (np.arange(m) + 0.5)
    if d == 1:
        return g[:, None], np.full(m, step)
    mesh = np.stack(np.meshgrid(*([g] * d), indexing="ij"), -1).reshape(-1, d)
    return mesh, np.full(len(mesh), step**d)


def _evaluate_chunked(P, idx, params, poly, kernel, force_regime, threads):
    chunk = 4096 if kernel.kind == "box" else 256
    starts = list(range(0, len(P), chunk))

    def work(s):
        return _evaluate_points(P[s:s + chunk], idx, params, poly, kernel, force_regime)

    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(work, starts))
    else:
        parts = [work(s) for s in starts]
    return (np.concatenate([p.value for p in parts]),
            np.concatenate([p.nonsmooth for p in parts]),
            np.concatenate([p.clipped for p in parts]))


def estimate_entropy(samples, config: EstimatorConfig | None = None, *,
                     bandwidth: float | None = None, threads: int | None = None) -> EstimateResult:
    """Entropy estimate from ``3n`` samples (index-block split).

    Deterministic given the sample order and the configuration; the thread
    count does not change the result because cell values are summed with
    correctly rounded :func:`math.fsum`.
    """
    t0 = time.perf_counter()
    config = config or EstimatorConfig()
    X = _as_sample_array(samples)
    if X.shape[1] != config.d:
        raise ValueError(f"samples have dimension {X.shape[1]}, configuration expects {config.d}")
    periodic = config.boundary_mode is BoundaryMode.PERIODIC
    if periodic:
        X = wrap_unit(X)
    else:
        lo, hi = config.support
        if np.any(X < lo) or np.any(X > hi):
            raise ValueError(f"samples fall outside the declared support [{lo}, {hi}]^d")
    splits = SplitSamples.from_samples(X)
    params = select_parameters(config, splits.n, bandwidth)
    kernel = config.kernel_obj
    if periodic and params.h * kernel.support_radius >= 0.5:
        raise ValueError("bandwidth too large for periodic mode")
    poly = cached_minimax(params.delta, params.k)
    idx = splits.indexes(config.boundary_mode)
    lo, hi = _domain(config, kernel, params.h)
    threads = resolve_threads(threads)

    method = config.integration
    if method == "auto":
        method = "exact" if (kernel.kind == "box" and config.d == 1) else "grid"
    if method == "exact" and not (kernel.kind == "box" and config.d == 1):
        raise ConfigError("exact integration is available for the one-dimensional box kernel only")

    if method == "exact":
        P, W = _exact_cells_1d(splits, params.h, lo, hi, periodic)
        vals, ns, cl = _evaluate_chunked(P, idx, params, poly, kernel, config.force_regime, threads)
        H = math.fsum(vals * W)
        qerr = 0.0
    else:
        pitch = params.h / config.resolution
        P, W = _grid_cells(lo, hi, pitch, config.d)
        vals, ns, cl = _evaluate_chunked(P, idx, params, poly, kernel, config.force_regime, threads)
        H = math.fsum(vals * W)
        Pc, Wc = _grid_cells(lo, hi, 2 * pitch, config.d)
        vc, _, _ = _evaluate_chunked(Pc, idx, params, poly, kernel, config.force_regime, threads)
        qerr = abs(H - math.fsum(vc * Wc))
    total = math.fsum(W)
    return EstimateResult(
        H=float(H), h=params.h, k=params.k, n=splits.n,
        nonsmooth_fraction=float(math.fsum(W[ns]) / total),
        clip_fraction=float(math.fsum(W[cl]) / total),
        wall_time=time.perf_counter() - t0, integration=method, cells=len(W),
        quadrature_error=float(qerr), tau=params.tau, delta=params.delta, clip=params.clip,
        dropped=splits.dropped,
    )


# ---------------------------------------------------------------------------
# unbounded support


@dataclass(frozen=True)
class OrliczTail:
    """Orlicz function ``Psi_q(u) = exp(u^q) - 1`` with truncation constant ``C0``."""

    q: float = 1.0
    C0: float | None = None

    def __post_init__(self):
        if self.q < 1:
            raise ConfigError("Orlicz exponent q must be >= 1")
        if self.C0 is not None and not self.C0 > 0:
            raise ConfigError("truncation constant must be positive")

    @property
    def kappa(self) -> float:
        return 2.0 ** (1.0 / self.q)

    @property
    def c0(self) -> float:
        return self.kappa**3 if self.C0 is None else float(self.C0)

    def psi(self, u):
        return np.expm1(np.asarray(u, dtype=float) ** self.q)

    def psi_inv(self, y):
        return np.log1p(np.asarray(y, dtype=float)) ** (1.0 / self.q)

    def radius(self, n: int) -> float:
        """Truncation radius ``C0 Psi^{-1}(n)``."""
        return float(self.c0 * self.psi_inv(n))

    def check(self, grid=None) -> bool:
        """Monotone, convex, ``Psi(0) = 0`` and ``Psi(kappa u) >= Psi(u)^2`` on a grid."""
        u = np.linspace(0.0, 5.0, 2001) if grid is None else np.asarray(grid, dtype=float)
        p = self.psi(u)
        with np.errstate(over="ignore", invalid="ignore"):
            rapid = self.psi(self.kappa * u) >= p * p * (1 - 1e-12)
        return bool(p[0] == 0 and np.all(np.diff(p) >= 0) and np.all(np.diff(p, 2) >= -1e-9 * p[2:])
                    and np.all(rapid | ~np.isfinite(p * p)))


def estimate_entropy_unbounded(samples, config: EstimatorConfig | None = None,
                               tail: OrliczTail | None = None, *, radius: float | None = None,
                               threads: int | None = None) -> EstimateResult:
    """Entropy of a density on ``R^d`` with an Orlicz tail.

    Samples with ``|x|_inf > R`` are discarded, ``[-R, R]^d`` is mapped
    affinely onto the unit cube, the cube estimator runs with the tail
    bandwidth ``c0 (n ln n)^{-1/(s+d)} R^{d/(p(s+d))}`` (expressed in mapped
    units), and ``d ln(2R)`` is added back.
    """
    config = config or EstimatorConfig()
    tail = tail or OrliczTail()
    X = _as_sample_array(samples)
    d = X.shape[1]
    n = len(X) // 3
    if n < 16:
        raise ConfigError("too few samples")
    R = tail.radius(n) if radius is None else float(radius)
    inside = np.all(np.abs(X) <= R, axis=1)
    dropped = int((~inside).sum())
    if dropped > 0.05 * len(X):
        warnings.warn(f"{dropped} of {len(X)} samples lie outside radius {R:.3g}; "
                      "the tail assumption is likely violated", RuntimeWarning, stacklevel=2)
    Y = (X[inside] + R) / (2.0 * R)
    lip = config.lipschitz
    s, p = lip.s, lip.p
    n_kept = len(Y) // 3
    h_orig = config.c0 * (n_kept * math.log(n_kept)) ** (-1.0 / (s + d)) * R ** (d / (p * (s + d)))
    h = h_orig / (2.0 * R)
    cube_cfg = config.replace(support=(0.0, 1.0), boundary="zero_extension")
    res = estimate_entropy(Y, cube_cfg, bandwidth=h, threads=threads)
    res.H = res.H + d * math.log(2.0 * R)
    res.extra = {**res.extra, "radius": R, "truncated": dropped, "h_original": h_orig}
    return res
