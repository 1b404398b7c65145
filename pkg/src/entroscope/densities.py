"""Test densities with exact entropies, samplers and box masses.

Every density here is a finite mixture of product densities

    f(x) = sum_c w_c prod_i f_{c,i}(x_i),

built from a handful of one-dimensional factors (uniform, scaled beta,
cosine, normal).  That representation gives, at no extra cost, exact
inverse-CDF sampling, exact box masses (needed for the box-kernel smoothed
density) and analytic gradients (needed for Fisher information).  When the
components have disjoint supports the entropy is exact:

    H(f) = sum_c w_c (H(f_c) - ln w_c).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from itertools import product
from typing import Any, Mapping, Sequence

import numpy as np
from scipy import special

__all__ = [
    "LipschitzSpec",
    "BumpMixtureSpec",
    "DensityModel",
    "DensityError",
    "SamplingError",
    "Uniform1D",
    "Beta1D",
    "Cosine1D",
    "Normal1D",
    "uniform_cube",
    "beta_product",
    "cosine_bump",
    "bump_mixture",
    "hard_bump_mixture",
    "scaled_bump",
    "gaussian",
    "rescaled",
    "make_density",
    "sample",
    "BUMP_ENTROPY_1D",
    "background_entropy",
    "density_id",
    "rejection_sample",
]


class DensityError(ValueError):
    """Invalid density specification."""


class SamplingError(RuntimeError):
    """Rejection sampling could not proceed."""


@dataclass(frozen=True)
class LipschitzSpec:
    """Smoothness class parameters ``(s, p, d, L)``."""

    s: float
    p: float
    d: int
    L: float

    def __post_init__(self):
        if not 0 < self.s <= 2:
            raise DensityError(f"smoothness s must lie in (0, 2], got {self.s}")
        if self.p < 1:
            raise DensityError(f"norm parameter p must be >= 1, got {self.p}")
        if int(self.d) != self.d or self.d < 1:
            raise DensityError(f"dimension must be a positive integer, got {self.d}")
        if not self.L > 0:
            raise DensityError(f"radius L must be positive, got {self.L}")

    @property
    def upper_bound_regime(self) -> bool:
        """True when ``p >= 2``, where only the upper bound is claimed tight."""
        return self.p >= 2

    @property
    def rate_exponent(self) -> float:
        return self.s / (self.s + self.d)


# ---------------------------------------------------------------------------
# one-dimensional factors


class Factor1D:
    lo: float
    hi: float

    def pdf(self, x):
        raise NotImplementedError

    def cdf(self, x):
        raise NotImplementedError

    def ppf(self, u):
        raise NotImplementedError

    def dpdf(self, x):
        raise NotImplementedError

    def d2pdf(self, x):
        raise NotImplementedError

    entropy: float = float("nan")
    sup: float = float("inf")


@dataclass(frozen=True)
class Uniform1D(Factor1D):
    lo: float = 0.0
    hi: float = 1.0

    def _inside(self, x):
        return (x >= self.lo) & (x <= self.hi)

    def pdf(self, x):
        return np.where(self._inside(x), 1.0 / (self.hi - self.lo), 0.0)

    def cdf(self, x):
        return np.clip((x - self.lo) / (self.hi - self.lo), 0.0, 1.0)

    def ppf(self, u):
        return self.lo + (self.hi - self.lo) * u

    def dpdf(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    d2pdf = dpdf

    @property
    def entropy(self):
        return math.log(self.hi - self.lo)

    @property
    def sup(self):
        return 1.0 / (self.hi - self.lo)


@dataclass(frozen=True)
class Beta1D(Factor1D):
    """Beta(a, b) law affinely mapped onto ``[lo, hi]``."""

    a: float
    b: float
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise DensityError("beta parameters must be positive")

    @property
    def _w(self):
        return self.hi - self.lo

    @property
    def _logc(self):
        return -special.betaln(self.a, self.b) - math.log(self._w)

    def _u(self, x):
        return (np.asarray(x, dtype=float) - self.lo) / self._w

    def pdf(self, x):
        u = self._u(x)
        inside = (u > 0) & (u < 1)
        uc = np.where(inside, u, 0.5)
        val = np.exp(self._logc + (self.a - 1) * np.log(uc) + (self.b - 1) * np.log1p(-uc))
        out = np.where(inside, val, 0.0)
        # endpoint values for a or b equal to one
        if self.a == 1:
            out = np.where(u == 0, math.exp(self._logc), out)
        if self.b == 1:
            out = np.where(u == 1, math.exp(self._logc), out)
        return out

    def cdf(self, x):
        return special.betainc(self.a, self.b, np.clip(self._u(x), 0.0, 1.0))

    def ppf(self, u):
        return self.lo + self._w * special.betaincinv(self.a, self.b, u)

    def dpdf(self, x):
        u = self._u(x)
        inside = (u > 0) & (u < 1)
        uc = np.where(inside, u, 0.5)
        base = np.exp(self._logc + (self.a - 2) * np.log(uc) + (self.b - 2) * np.log1p(-uc))
        val = base * ((self.a - 1) * (1 - uc) - (self.b - 1) * uc) / self._w
        return np.where(inside, val, 0.0)

    def d2pdf(self, x):
        u = self._u(x)
        inside = (u > 0) & (u < 1)
        uc = np.where(inside, u, 0.5)
        a, b = self.a, self.b
        base = np.exp(self._logc + (a - 3) * np.log(uc) + (b - 3) * np.log1p(-uc))
        poly = ((a - 1) * (a - 2) * (1 - uc) ** 2 - 2 * (a - 1) * (b - 1) * uc * (1 - uc)
                + (b - 1) * (b - 2) * uc**2)
        return np.where(inside, base * poly / self._w**2, 0.0)

    @property
    def entropy(self):
        a, b = self.a, self.b
        return float(special.betaln(a, b) - (a - 1) * special.digamma(a)
                     - (b - 1) * special.digamma(b)
                     + (a + b - 2) * special.digamma(a + b) + math.log(self._w))

    @property
    def sup(self):
        a, b = self.a, self.b
        if a < 1 or b < 1:
            return float("inf")
        if a == 1 and b == 1:
            return 1.0 / self._w
        mode = (a - 1) / (a + b - 2)
        return float(self.pdf(self.lo + self._w * mode))


@dataclass(frozen=True)
class Cosine1D(Factor1D):
    """``1 + a cos(2 pi x)`` on ``[0, 1]``; smooth as a periodic function."""

    a: float
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if not abs(self.a) < 1:
            raise DensityError(f"cosine amplitude must satisfy |a| < 1, got {self.a}")

    def _inside(self, x):
        return (x >= 0) & (x <= 1)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(self._inside(x), 1.0 + self.a * np.cos(2 * np.pi * x), 0.0)

    def cdf(self, x):
        xc = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        return xc + self.a * np.sin(2 * np.pi * xc) / (2 * np.pi)

    def ppf(self, u):
        # F is strictly increasing with F' >= 1 - |a|; safeguarded Newton
        u = np.asarray(u, dtype=float)
        x = u.copy()
        lo, hi = np.zeros_like(u), np.ones_like(u)
        for _ in range(60):
            F = self.cdf(x) - u
            lo = np.where(F < 0, x, lo)
            hi = np.where(F >= 0, x, hi)
            step = x - F / (1.0 + self.a * np.cos(2 * np.pi * x))
            bad = (step <= lo) | (step >= hi)
            x = np.where(bad, 0.5 * (lo + hi), step)
            if np.max(np.abs(F), initial=0.0) < 1e-15:
                break
        return x

    def dpdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(self._inside(x), -2 * np.pi * self.a * np.sin(2 * np.pi * x), 0.0)

    def d2pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(self._inside(x), -((2 * np.pi) ** 2) * self.a * np.cos(2 * np.pi * x), 0.0)

    @property
    def entropy(self):
        r = math.sqrt(1.0 - self.a * self.a)
        return -math.log((1.0 + r) / 2.0) - (1.0 - r)

    @property
    def sup(self):
        return 1.0 + abs(self.a)


@dataclass(frozen=True)
class Normal1D(Factor1D):
    mu: float = 0.0
    sigma: float = 1.0
    lo: float = -math.inf
    hi: float = math.inf

    def pdf(self, x):
        z = (np.asarray(x, dtype=float) - self.mu) / self.sigma
        return np.exp(-0.5 * z * z) / (self.sigma * math.sqrt(2 * math.pi))

    def cdf(self, x):
        return special.ndtr((np.asarray(x, dtype=float) - self.mu) / self.sigma)

    def ppf(self, u):
        return self.mu + self.sigma * special.ndtri(u)

    def dpdf(self, x):
        z = (np.asarray(x, dtype=float) - self.mu) / self.sigma
        return -z / self.sigma * self.pdf(x)

    def d2pdf(self, x):
        z = (np.asarray(x, dtype=float) - self.mu) / self.sigma
        return (z * z - 1.0) / self.sigma**2 * self.pdf(x)

    @property
    def entropy(self):
        return 0.5 * math.log(2 * math.pi * math.e * self.sigma**2)

    @property
    def sup(self):
        return 1.0 / (self.sigma * math.sqrt(2 * math.pi))


# Bump template: Beta(3, 3) density 30 x^2 (1 - x)^2 on [0, 1].
BUMP_ENTROPY_1D = Beta1D(3, 3).entropy


def _bump(lo, hi):
    return Beta1D(3.0, 3.0, lo, hi)


# ---------------------------------------------------------------------------
# the density model


@dataclass(frozen=True)
class DensityModel:
    """Evaluable density on ``R^d`` as a mixture of product components.

    Attributes
    ----------
    name : str
    d : int
    weights : ndarray
        Mixture weights (sum to one for a probability density).
    components : tuple of tuple of Factor1D
        ``components[c][i]`` is the axis-``i`` factor of component ``c``.
    support : str
        ``"unit_cube"``, ``"scaled_cube"`` or ``"real"``.
    lo, hi : float
        Bounding interval (same on every axis) of the support.
    entropy_truth : float
    provenance : str
        ``"closed_form"`` or ``"quadrature"``.
    declared_class : LipschitzSpec or None
    smoothness : str
        Global differentiability of the zero-extended density, used to
        decide eligibility for the Fisher-information probe.
    spec : dict
        The serialisable specification the model was built from.
    """

    name: str
    d: int
    weights: np.ndarray
    components: tuple
    support: str = "unit_cube"
    lo: float = 0.0
    hi: float = 1.0
    entropy_truth: float = float("nan")
    provenance: str = "closed_form"
    declared_class: LipschitzSpec | None = None
    smoothness: str = "C0"
    spec: Mapping[str, Any] = field(default_factory=dict)

    # -- evaluation -----------------------------------------------------
    def _points(self, x):
        x = np.asarray(x, dtype=float)
        if self.d == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        if x.shape[-1] != self.d:
            raise DensityError(f"expected points of dimension {self.d}, got shape {x.shape}")
        return x

    def _factor_values(self, x, which):
        """Per component, per axis values of pdf / dpdf / d2pdf."""
        vals = np.empty((len(self.components),) + x.shape)
        for c, comp in enumerate(self.components):
            for i, fac in enumerate(comp):
                vals[c, ..., i] = getattr(fac, which)(x[..., i])
        return vals

    def pdf(self, x):
        """Density at points ``x`` of shape ``(..., d)`` (or ``(...)`` when d = 1)."""
        x = self._points(x)
        P = self._factor_values(x, "pdf")
        out = np.tensordot(self.weights, P.prod(axis=-1), axes=1)
        return out

    __call__ = pdf

    def grad(self, x):
        """Gradient ``(..., d)``."""
        x = self._points(x)
        P = self._factor_values(x, "pdf")
        D = self._factor_values(x, "dpdf")
        out = np.zeros(x.shape)
        for i in range(self.d):
            prod_others = np.prod(np.delete(P, i, axis=-1), axis=-1)
            out[..., i] = np.tensordot(self.weights, D[..., i] * prod_others, axes=1)
        return out

    def hess_diag(self, x):
        """Pure second derivatives ``d^2 f / dx_i^2`` as ``(..., d)``."""
        x = self._points(x)
        P = self._factor_values(x, "pdf")
        D2 = self._factor_values(x, "d2pdf")
        out = np.zeros(x.shape)
        for i in range(self.d):
            prod_others = np.prod(np.delete(P, i, axis=-1), axis=-1)
            out[..., i] = np.tensordot(self.weights, D2[..., i] * prod_others, axes=1)
        return out

    def box_mass(self, lo, hi):
        """Exact probability of the axis-aligned boxes ``[lo, hi]``."""
        lo = self._points(lo)
        hi = self._points(hi)
        total = np.zeros(np.broadcast_shapes(lo.shape, hi.shape)[:-1])
        for w, comp in zip(self.weights, self.components):
            part = np.ones_like(total)
            for i, fac in enumerate(comp):
                part = part * np.maximum(fac.cdf(hi[..., i]) - fac.cdf(lo[..., i]), 0.0)
            total = total + w * part
        return total

    @property
    def sup_norm(self) -> float:
        """Upper envelope of the density (exact when components are disjoint)."""
        sups = [w * math.prod(f.sup for f in comp) for w, comp in zip(self.weights, self.components)]
        return float(max(sups)) if self.disjoint else float(sum(sups))

    @property
    def disjoint(self) -> bool:
        return bool(self.spec.get("_disjoint", len(self.components) == 1))

    @property
    def bounded_support(self) -> bool:
        return self.support != "real"

    # -- sampling -------------------------------------------------------
    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """``n`` iid points as an ``(n, d)`` array (exact inverse-CDF per component)."""
        n = int(n)
        if n < 0:
            raise DensityError("sample size must be nonnegative")
        counts = rng.multinomial(n, self.weights / self.weights.sum())
        parts = []
        for cnt, comp in zip(counts, self.components):
            if cnt == 0:
                continue
            U = rng.random((cnt, self.d))
            pts = np.column_stack([fac.ppf(U[:, i]) for i, fac in enumerate(comp)])
            parts.append(pts)
        X = np.concatenate(parts, axis=0) if parts else np.empty((0, self.d))
        return X[rng.permutation(n)]


def sample(density, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` iid points from ``density``.

    Mixture-of-products models use their exact sampler.  Any other object
    exposing ``pdf``, ``d``, ``lo``, ``hi`` and ``sup_norm`` is sampled by
    rejection against the uniform envelope on its bounding cube.
    """
    if isinstance(density, DensityModel):
        return density.sample(n, rng)
    return rejection_sample(density.pdf, density.d, density.lo, density.hi,
                            density.sup_norm, n, rng)


def rejection_sample(pdf, d, lo, hi, envelope, n, rng, *, batch=4096,
                     min_rate=1e-4, probe=20000):
    """Uniform-envelope rejection sampler with an acceptance-rate guard."""
    if not np.isfinite(envelope) or envelope <= 0:
        raise SamplingError("rejection sampling needs a finite positive envelope")
    vol = (hi - lo) ** d
    expected = 1.0 / (envelope * vol)
    if expected < min_rate:
        raise SamplingError(f"envelope too loose: expected acceptance {expected:.2e} < {min_rate:g}")
    out = []
    have = tried = 0
    while have < n:
        Y = lo + (hi - lo) * rng.random((batch, d))
        acc = rng.random(batch) * envelope < pdf(Y)
        out.append(Y[acc])
        have += int(acc.sum())
        tried += batch
        if tried >= probe and have / tried < min_rate:
            raise SamplingError(f"observed acceptance {have / tried:.2e} below {min_rate:g}")
    return np.concatenate(out)[:n]


# ---------------------------------------------------------------------------
# constructors


def _mixture_entropy(weights, components):
    w = np.asarray(weights, dtype=float)
    H = 0.0
    for wc, comp in zip(w, components):
        if wc > 0:
            H += wc * (sum(f.entropy for f in comp) - math.log(wc))
    return float(H)


def uniform_cube(d: int = 1) -> DensityModel:
    comp = (tuple(Uniform1D() for _ in range(d)),)
    return DensityModel(name=f"uniform_cube(d={d})", d=d, weights=np.ones(1), components=comp,
                        entropy_truth=0.0, smoothness="discontinuous",
                        spec={"kind": "uniform_cube", "d": d})


def beta_product(alpha: float, beta: float, d: int = 1,
                 declared_class: LipschitzSpec | None = None) -> DensityModel:
    """Tensor product of ``Beta(alpha, beta)`` marginals on the unit cube.

    Extended by zero, ``Beta(2, 2)`` is only continuous at the faces of the cube
    (``smoothness="C0"``) even when a caller declares it in an ``s = 2`` class;
    ``declared_class`` is stored as given and not checked.
    """
    facs = tuple(Beta1D(alpha, beta) for _ in range(d))
    H = sum(f.entropy for f in facs)
    if alpha > 2 and beta > 2:
        smooth = "C1"
    elif alpha > 1 and beta > 1:
        smooth = "C0"
    else:
        smooth = "discontinuous"
    return DensityModel(name=f"beta_product({alpha:g},{beta:g},d={d})", d=d, weights=np.ones(1),
                        components=(facs,), entropy_truth=float(H),
                        declared_class=declared_class, smoothness=smooth,
                        spec={"kind": "beta_product", "alpha": alpha, "beta": beta, "d": d})


def cosine_bump(amplitude: float, d: int = 1) -> DensityModel:
    """Product of ``1 + a cos(2 pi x_i)``; smooth on the torus."""
    if not abs(amplitude) < 1:
        raise DensityError("amplitude must satisfy |a| < 1 or the density turns negative")
    facs = tuple(Cosine1D(amplitude) for _ in range(d))
    return DensityModel(name=f"cosine_bump(a={amplitude:g},d={d})", d=d, weights=np.ones(1),
                        components=(facs,), entropy_truth=float(sum(f.entropy for f in facs)),
                        smoothness="periodic_smooth",
                        spec={"kind": "cosine_bump", "amplitude": amplitude, "d": d})


@dataclass(frozen=True)
class BumpMixtureSpec:
    """Weights on a grid of sub-cubes of ``[1/4, 3/4]^d`` plus a frame background.

    ``f_P(x) = sum_i p_i h^{-d} g((x - t_i)/h) + (1 - S alpha) w(x)`` where
    ``g`` is the tensor ``Beta(3, 3)`` bump and ``w`` is an equal-weight
    mixture of tensor bumps filling the frame ``[0,1]^d minus [1/4,3/4]^d``.
    """

    weights: tuple
    h: float
    alpha: float
    d: int = 1

    @property
    def S(self) -> int:
        return len(self.weights)

    @property
    def background_weight(self) -> float:
        return 1.0 - self.S * self.alpha

    @property
    def total_mass(self) -> float:
        return float(sum(self.weights)) + self.background_weight


def _frame_cells(d):
    edges = [(0.0, 0.25), (0.25, 0.75), (0.75, 1.0)]
    cells = []
    for idx in product(range(3), repeat=d):
        if all(i == 1 for i in idx):
            continue
        cells.append(tuple(edges[i] for i in idx))
    return cells


def background_entropy(d: int) -> float:
    """Entropy of the frame background ``w``."""
    cells = _frame_cells(d)
    Hs = [sum(BUMP_ENTROPY_1D + math.log(b - a) for a, b in cell) for cell in cells]
    return math.log(len(cells)) + float(np.mean(Hs))


def bump_mixture(spec: BumpMixtureSpec, name: str | None = None,
                 declared_class: LipschitzSpec | None = None) -> DensityModel:
    d = int(spec.d)
    P = np.asarray(spec.weights, dtype=float)
    if np.any(P < 0):
        raise DensityError("bump weights must be nonnegative")
    S = len(P)
    per_axis = 0.5 / spec.h
    m = int(round(per_axis))
    if abs(per_axis - m) > 1e-9 or m ** d != S:
        raise DensityError(f"S = {S} sub-cubes of edge {spec.h} do not tile [1/4, 3/4]^{d}")
    if spec.alpha < 0 or S * spec.alpha > 1 + 1e-12:
        raise DensityError(f"S * alpha = {S * spec.alpha:g} exceeds 1")
    bg = max(spec.background_weight, 0.0)
    comps, wts = [], []
    for i, corner in enumerate(product(range(m), repeat=d)):
        t = [0.25 + c * spec.h for c in corner]
        comps.append(tuple(_bump(ti, ti + spec.h) for ti in t))
        wts.append(P[i])
    cells = _frame_cells(d)
    for cell in cells:
        comps.append(tuple(_bump(a, b) for a, b in cell))
        wts.append(bg / len(cells))
    wts = np.array(wts)
    H = _mixture_entropy(wts, comps)
    payload = {"kind": "bump_mixture", "weights": [float(p) for p in P], "h": spec.h,
               "alpha": spec.alpha, "d": d, "_disjoint": True}
    return DensityModel(name=name or f"bump_mixture(S={S},d={d})", d=d, weights=wts,
                        components=tuple(comps), entropy_truth=H, smoothness="C1",
                        declared_class=declared_class, spec=payload)


# sparse weight profile of the rate-benchmark density
_HARD_PROFILE = (0.0, 1.0, 0.0, 3.0, 0.0, 0.5, 0.0, 2.5)


def hard_bump_mixture() -> DensityModel:
    """Fixed one-dimensional bump mixture with sparse, uneven weights.

    Eight sub-cubes of edge 1/16, half of them empty, carrying half of the
    mass; the other half sits on the frame.  Low-density regions next to
    tall narrow bumps exercise the non-smooth branch of the estimator.
    """
    prof = np.array(_HARD_PROFILE)
    S = len(prof)
    alpha = 0.5 / S
    P = 0.5 * prof / prof.sum()
    dm = bump_mixture(BumpMixtureSpec(tuple(P), 1 / 16, alpha, 1), name="hard_bump_mixture",
                      declared_class=LipschitzSpec(1.0, 2.0, 1, 1.0))
    return _respec(dm, {"kind": "hard_bump_mixture"})


def scaled_bump(width: float, d: int = 1, center: float = 0.5) -> DensityModel:
    """Tensor ``Beta(3, 3)`` bump of the given width centred in the cube.

    Extended by zero the bump is ``C^{1,1}`` (bounded second derivative with a
    jump at the ends), not ``C^2``.
    """
    if not 0 < width <= 1 or center - width / 2 < 0 or center + width / 2 > 1:
        raise DensityError("bump must fit inside the unit cube")
    facs = tuple(_bump(center - width / 2, center + width / 2) for _ in range(d))
    return DensityModel(name=f"scaled_bump(w={width:g},d={d})", d=d, weights=np.ones(1),
                        components=(facs,), entropy_truth=float(sum(f.entropy for f in facs)),
                        smoothness="C1",
                        spec={"kind": "scaled_bump", "width": width, "d": d, "center": center})


def gaussian(sigma: float = 1.0, d: int = 1) -> DensityModel:
    """Isotropic centred normal on ``R^d``."""
    if sigma <= 0:
        raise DensityError("sigma must be positive")
    facs = tuple(Normal1D(0.0, sigma) for _ in range(d))
    return DensityModel(name=f"gaussian(sigma={sigma:g},d={d})", d=d, weights=np.ones(1),
                        components=(facs,), support="real", lo=-math.inf, hi=math.inf,
                        entropy_truth=float(sum(f.entropy for f in facs)), smoothness="smooth",
                        spec={"kind": "gaussian", "sigma": sigma, "d": d})


def _scale_factor(f: Factor1D, c: float) -> Factor1D:
    if isinstance(f, Uniform1D):
        return Uniform1D(f.lo * c, f.hi * c)
    if isinstance(f, Beta1D):
        return Beta1D(f.a, f.b, f.lo * c, f.hi * c)
    if isinstance(f, Normal1D):
        return Normal1D(f.mu * c, f.sigma * c)
    raise DensityError(f"cannot rescale factor {type(f).__name__}")


def rescaled(base: DensityModel, scale: float) -> DensityModel:
    """Law of ``scale * X`` for ``X ~ base``; entropy shifts by ``d ln scale``."""
    if scale <= 0:
        raise DensityError("scale must be positive")
    comps = tuple(tuple(_scale_factor(f, scale) for f in comp) for comp in base.components)
    spec = {"kind": "rescaled", "scale": scale, "base": dict(base.spec)}
    if "_disjoint" in base.spec:
        spec["_disjoint"] = base.spec["_disjoint"]
    return DensityModel(name=f"{base.name}*{scale:g}", d=base.d, weights=base.weights,
                        components=comps,
                        support="scaled_cube" if base.bounded_support else "real",
                        lo=base.lo * scale, hi=base.hi * scale,
                        entropy_truth=base.entropy_truth + base.d * math.log(scale),
                        provenance=base.provenance, smoothness=base.smoothness, spec=spec)


def _respec(dm: DensityModel, extra: Mapping[str, Any]) -> DensityModel:
    spec = dict(dm.spec)
    spec.update(extra)
    return replace(dm, spec=spec)


def make_density(spec: Mapping[str, Any]) -> DensityModel:
    """Build a density from its serialisable specification.

    Recognised ``kind`` values: ``uniform_cube``, ``beta_product``,
    ``cosine_bump``, ``bump_mixture``, ``hard_bump_mixture``,
    ``scaled_bump``, ``gaussian``, ``rescaled``.
    """
    if isinstance(spec, str):
        spec = {"kind": spec}
    kind = spec.get("kind")
    d = int(spec.get("d", 1))
    if kind == "uniform_cube":
        return uniform_cube(d)
    if kind == "beta_product":
        return beta_product(float(spec.get("alpha", 2.0)), float(spec.get("beta", 2.0)), d)
    if kind == "cosine_bump":
        return cosine_bump(float(spec["amplitude"]), d)
    if kind == "bump_mixture":
        P = tuple(float(p) for p in spec["weights"])
        S = len(P)
        h = float(spec.get("h", 0.5 / round(S ** (1.0 / d))))
        alpha = float(spec.get("alpha", sum(P) / S))
        return bump_mixture(BumpMixtureSpec(P, h, alpha, d))
    if kind == "hard_bump_mixture":
        return hard_bump_mixture()
    if kind == "scaled_bump":
        return scaled_bump(float(spec["width"]), d, float(spec.get("center", 0.5)))
    if kind == "gaussian":
        return gaussian(float(spec.get("sigma", 1.0)), d)
    if kind == "rescaled":
        return rescaled(make_density(spec["base"]), float(spec["scale"]))
    raise DensityError(f"unknown density kind {kind!r}")


def density_id(spec: Mapping[str, Any]) -> str:
    """Stable short identifier of a density spec (used in seeds and CSV rows)."""
    clean = {k: v for k, v in dict(spec).items() if not str(k).startswith("_")}
    return json.dumps(clean, sort_keys=True, separators=(",", ":"))
