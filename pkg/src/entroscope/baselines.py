"""Comparison estimators: kernel plug-in, discretisation and resubstitution."""

from __future__ import annotations

import math

import numpy as np

from .kernels import BoundaryMode, Kernel, SampleIndex, kde, kernel_values, wrap_unit
from .poly_approx import cached_minimax
from .u_stats import h1_box_fastpath

__all__ = [
    "plugin_entropy",
    "plugin_bandwidth",
    "Histogram",
    "histogram",
    "discrete_reduction_entropy",
    "discrete_bandwidth",
    "resubstitution_entropy",
]


def _samples(samples):
    X = np.asarray(samples, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if not np.all(np.isfinite(X)):
        raise ValueError("samples contain non-finite coordinates")
    return X


def _neg_xlogx(f):
    out = np.zeros_like(f)
    pos = f > 0
    out[pos] = -f[pos] * np.log(f[pos])
    return out


def plugin_bandwidth(n: int, s: float, d: int, L: float = 1.0, c0: float = 1.0) -> float:
    """Bandwidth ``c0 (L n)^{-1/(s+d)}`` of the integral-form plug-in."""
    return c0 * (L * n) ** (-1.0 / (s + d))


def plugin_entropy(samples, kernel: Kernel | str = "box", h: float = 0.1,
                   boundary=BoundaryMode.ZERO_EXTENSION, resolution: int = 4,
                   support=(0.0, 1.0)) -> float:
    """Integral-form plug-in ``int -fhat_h ln fhat_h`` over the enlarged support.

    The box kernel in one dimension is integrated exactly between the
    breakpoints ``X_i +- h/2``; other cases use a midpoint grid of pitch
    ``h / resolution``.
    """
    if not h > 0:
        raise ValueError("bandwidth must be positive")
    X = _samples(samples)
    n, d = X.shape
    boundary = BoundaryMode.parse(boundary)
    kern = (kernel if isinstance(kernel, Kernel) else Kernel(kernel, d)).with_dim(d)
    periodic = boundary is BoundaryMode.PERIODIC
    if periodic:
        X = wrap_unit(X)
        lo, hi = 0.0, 1.0
    else:
        r = h * kern.support_radius
        lo, hi = support[0] - r, support[1] + r
    index = SampleIndex(X, boundary)
    if kern.kind == "box" and d == 1:
        x = X[:, 0]
        br = np.concatenate([x - h / 2, x + h / 2])
        if periodic:
            br = wrap_unit(br)
        br = br[(br > lo) & (br < hi)]
        edges = np.unique(np.concatenate([[lo, hi], br]))
        W = np.diff(edges)
        P = (0.5 * (edges[:-1] + edges[1:]))[:, None]
    else:
        m = max(1, math.ceil((hi - lo) * resolution / h - 1e-9))
        step = (hi - lo) / m
        g = lo + step * (np.arange(m) + 0.5)
        P = np.stack(np.meshgrid(*([g] * d), indexing="ij"), -1).reshape(-1, d)
        W = np.full(len(P), step**d)
    f = np.asarray(kde(index, kern, h, P, boundary), dtype=float)
    return float(math.fsum(_neg_xlogx(f) * W))


class Histogram:
    """Counts on the regular grid of edge ``h`` tiling ``[0, 1]^d``."""

    def __init__(self, samples, h: float):
        X = _samples(samples)
        m = round(1.0 / h)
        if m < 1 or abs(m * h - 1.0) > 1e-9:
            raise ValueError(f"bin edge {h} does not tile the unit cube")
        if np.any(X < 0) or np.any(X > 1):
            raise ValueError("samples fall outside the unit cube")
        self.h = float(h)
        self.m = int(m)
        self.d = X.shape[1]
        idx = np.minimum((X * m).astype(np.int64), m - 1)
        flat = np.ravel_multi_index(idx.T, (m,) * self.d) if self.d > 1 else idx[:, 0]
        self.counts = np.bincount(flat, minlength=m**self.d)
        self.n = len(X)

    @property
    def S(self) -> int:
        return self.m**self.d

    @property
    def frequencies(self) -> np.ndarray:
        return self.counts / self.n


def histogram(samples, h: float) -> Histogram:
    return Histogram(samples, h)


def discrete_bandwidth(n: int, s: float, d: int, L: float = 1.0) -> float:
    """Bin edge ``(L n ln n)^{-1/(s+d)}`` snapped to the nearest tiling value ``1/m``."""
    raw = (L * n * math.log(n)) ** (-1.0 / (s + d))
    return 1.0 / max(1, round(1.0 / raw))


def _discrete_poly(Xa, Xb, h, c1, c2):
    """Split-sample polynomial/bias-corrected discrete entropy (nats)."""
    Ha, Hb = Histogram(Xa, h), Histogram(Xb, h)
    n = Hb.n
    ln = math.log(n)
    tau = c1 * ln / n
    k = max(1, math.ceil(c2 * ln))
    k = min(k, n)
    poly = cached_minimax(2.0 * tau, k)
    pa = Ha.frequencies
    zb = Hb.counts
    pb = zb / n
    nonsmooth = pa < tau
    total = []
    for z in np.unique(zb[nonsmooth]):
        count = int(np.sum(nonsmooth & (zb == z)))
        total.append(count * h1_box_fastpath(int(z), n, 1.0, 1, poly))
    sm = ~nonsmooth
    total.append(math.fsum(_neg_xlogx(pb[sm]) + (1.0 - pb[sm]) / (2.0 * n)))
    return math.fsum(total)


def discrete_reduction_entropy(samples, h: float, mode: str = "miller_madow", *,
                               c1: float = 2.0, c2: float = 1.0) -> float:
    """Quantise to bins of edge ``h`` and add ``d ln h`` to a discrete entropy.

    ``plugin``: ``sum -p ln p`` of the empirical frequencies.
    ``miller_madow``: plug-in plus ``(S_+ - 1) / (2n)``.
    ``poly``: the first half of the sample flags bins with frequency below
    ``c1 ln n / n``; on the second half those bins get the unbiased
    falling-factorial estimate of the best polynomial approximation of
    ``-p ln p`` on ``[0, 2 c1 ln n / n]``, the rest get the plug-in with its
    first-order bias correction ``(1 - p) / (2n)``.  The degree is
    ``ceil(c2 ln n)``; the default ``c2`` is larger than the continuous
    estimator's because no clipping constraint ties it to a small value.
    """
    X = _samples(samples)
    d = X.shape[1]
    if mode == "plugin":
        Hd = math.fsum(_neg_xlogx(Histogram(X, h).frequencies))
    elif mode == "miller_madow":
        H = Histogram(X, h)
        p = H.frequencies
        occupied = int(np.count_nonzero(H.counts))
        Hd = math.fsum(_neg_xlogx(p)) + (occupied - 1) / (2.0 * H.n)
    elif mode == "poly":
        half = len(X) // 2
        if half < 2:
            raise ValueError("poly mode needs at least four samples")
        Hd = _discrete_poly(X[:half], X[half:2 * half], h, c1, c2)
    else:
        raise ValueError(f"unknown discrete mode {mode!r}")
    return Hd + d * math.log(h)


def resubstitution_entropy(samples, kernel: Kernel | str = "box", h: float = 0.1,
                           boundary=BoundaryMode.ZERO_EXTENSION) -> float:
    """Leave-one-out resubstitution ``-(1/n) sum_i ln fhat_{-i}(X_i)``.

    A leave-one-out density of zero is floored at ``1 / (n h^d)``.
    """
    X = _samples(samples)
    n, d = X.shape
    if n < 2:
        raise ValueError("resubstitution needs at least two samples")
    boundary = BoundaryMode.parse(boundary)
    kern = (kernel if isinstance(kernel, Kernel) else Kernel(kernel, d)).with_dim(d)
    index = SampleIndex(X, boundary)
    hd = h**d
    if kern.kind == "box":
        total = index.count_within(X, 0.5 * h) * (1.0 / hd)
    else:
        total = np.array([v.sum() for v in kernel_values(index, kern, h, X)])
    loo = (total - kern.sup_norm / hd) / (n - 1)
    loo = np.maximum(loo, 1.0 / (n * hd))
    return float(-math.fsum(np.log(loo)) / n)
