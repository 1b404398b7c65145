"""Best uniform polynomial approximation of ``-t ln t`` on ``[0, delta]``.

The approximation is computed by the Remez exchange algorithm on the
rescaled variable ``u = t / delta`` so that the stored coefficients stay
bounded even when ``delta`` is tiny.  Internally the iterate lives in the
Chebyshev basis on ``[0, 1]``; monomial coefficients in ``u`` (``b_l``) are
derived from it by exact rational conversion.
"""

from __future__ import annotations

import csv
import functools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.optimize import brentq, minimize_scalar

__all__ = [
    "PolyApprox",
    "RemezError",
    "neg_xlogx",
    "remez",
    "remez_minimax",
    "cached_minimax",
    "eval_poly",
    "write_coefficients_csv",
    "read_coefficients_csv",
]

MAX_DEGREE = 64


class RemezError(RuntimeError):
    """Raised when the exchange iteration fails to converge."""

    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = list(trace)


def neg_xlogx(t):
    """``-t ln t`` with the continuous extension ``0 ln 0 = 0``."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = -t[pos] * np.log(t[pos])
    return out


def _cheb_grid(a, b, n):
    """Chebyshev-clustered points on [a, b] including both endpoints."""
    j = np.arange(n)
    x = 0.5 * (1.0 - np.cos(np.pi * j / (n - 1)))
    return a + (b - a) * x


def _local_extrema(x, e):
    """One signed extremum per run of constant sign of ``e`` on the grid."""
    s = np.sign(e)
    # zeros inherit the sign of their left neighbour (or right, at the start)
    for i in range(len(s)):
        if s[i] == 0:
            s[i] = s[i - 1] if i > 0 else 0
    if s[0] == 0:
        nz = np.flatnonzero(s)
        if len(nz) == 0:
            return []
        s[: nz[0]] = s[nz[0]]
    runs = []
    start = 0
    for i in range(1, len(s) + 1):
        if i == len(s) or s[i] != s[start]:
            seg = slice(start, i)
            j = start + int(np.argmax(np.abs(e[seg])))
            runs.append(j)
            start = i
    return runs


@dataclass
class _RemezResult:
    cheb: np.ndarray
    level: float
    reference: np.ndarray
    sup_error: float
    dvp_lower: float
    iterations: int
    trace: list = field(default_factory=list)


def remez(func: Callable, k: int, a: float = 0.0, b: float = 1.0, *,
          tol: float = 1e-10, maxiter: int = 100, grid_size: int | None = None,
          _restarts: int = 3) -> _RemezResult:
    """Minimax polynomial of degree ``k`` for ``func`` on ``[a, b]``.

    Returns the Chebyshev coefficients (basis ``T_j`` of the affine map of
    ``[a, b]`` onto ``[-1, 1]``), the levelled error, the final reference and
    the certified sup error on a dense clustered grid.
    """
    if k < 0 or k > MAX_DEGREE:
        raise ValueError(f"degree must be in [0, {MAX_DEGREE}], got {k}")
    if not b > a:
        raise ValueError("empty interval")
    m = k + 2
    n_grid = grid_size or max(4000, 200 * m)
    grid = _cheb_grid(a, b, n_grid)
    fgrid = np.asarray(func(grid), dtype=float)

    def to_s(x):
        return (2.0 * np.asarray(x, dtype=float) - a - b) / (b - a)

    def err(x, c):
        return np.asarray(func(x), dtype=float) - C.chebval(to_s(x), c)

    rng = np.random.default_rng(20240917)
    ref = _cheb_grid(a, b, m) if m > 1 else np.array([a])
    trace = []
    for attempt in range(_restarts + 1):
        try:
            return _remez_loop(func, err, to_s, k, a, b, ref, grid, fgrid,
                               tol, maxiter, trace)
        except _Degenerate as exc:
            trace.append(f"restart {attempt}: {exc}")
            jitter = rng.uniform(-0.25, 0.25, size=m) * (b - a) / m
            ref = np.sort(np.clip(_cheb_grid(a, b, m) + jitter, a, b))
            ref[0], ref[-1] = a, b
    raise RemezError(f"Remez degenerate after {_restarts} restarts", trace)


class _Degenerate(Exception):
    pass


def _solve_levelled(func, to_s, k, ref):
    m = k + 2
    A = np.empty((m, m))
    A[:, : k + 1] = C.chebvander(to_s(ref), k)
    A[:, k + 1] = (-1.0) ** np.arange(m)
    rhs = np.asarray(func(ref), dtype=float)
    try:
        sol = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as exc:
        raise _Degenerate("singular reference system") from exc
    if not np.all(np.isfinite(sol)):
        raise _Degenerate("non-finite reference solution")
    return sol[: k + 1], sol[k + 1]


def _refine(err, c, x, j, sign):
    lo = x[max(j - 1, 0)]
    hi = x[min(j + 1, len(x) - 1)]
    best = x[j]
    if hi - lo <= 0:
        return best
    res = minimize_scalar(lambda t: -sign * float(err(np.array([t]), c)[0]),
                          bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-15 * max(1.0, abs(hi))})
    if -res.fun > sign * float(err(np.array([best]), c)[0]):
        return float(res.x)
    return best


def _single_exchange(ref, xstar, estar, signs):
    ref = ref.copy()
    m = len(ref)
    s = np.sign(estar)
    pos = np.searchsorted(ref, xstar)
    if pos == 0:
        if signs[0] == s:
            ref[0] = xstar
        else:
            ref = np.concatenate([[xstar], ref[:-1]])
    elif pos == m:
        if signs[-1] == s:
            ref[-1] = xstar
        else:
            ref = np.concatenate([ref[1:], [xstar]])
    else:
        i = pos - 1
        if signs[i] == s:
            ref[i] = xstar
        else:
            ref[i + 1] = xstar
    return ref


def _remez_loop(func, err, to_s, k, a, b, ref, grid, fgrid, tol, maxiter, trace):
    m = k + 2
    vander = C.chebvander(to_s(grid), k)
    prev_sup = None
    for it in range(1, maxiter + 1):
        if np.any(np.diff(ref) <= 1e-15 * (b - a)):
            raise _Degenerate("reference points collide")
        c, level = _solve_levelled(func, to_s, k, ref)
        e = fgrid - vander @ c
        ext = _local_extrema(grid, e)
        if len(ext) >= m:
            # windows of m consecutive alternating extrema containing the global max
            mags = np.abs(e[ext])
            g = int(np.argmax(mags))
            best_w, best_min = None, -1.0
            for w0 in range(max(0, g - m + 1), min(g, len(ext) - m) + 1):
                mn = mags[w0:w0 + m].min()
                if mn > best_min:
                    best_min, best_w = mn, w0
            chosen = ext[best_w:best_w + m]
            new_ref = np.array([_refine(err, c, grid, j, np.sign(e[j])) for j in chosen])
        else:
            j = int(np.argmax(np.abs(e)))
            xstar = _refine(err, c, grid, j, np.sign(e[j]))
            e_ref = err(ref, c)
            signs = np.sign(e_ref)
            fallback = np.sign(level) * (-1.0) ** np.arange(m) if level != 0 else (-1.0) ** np.arange(m)
            signs = np.where(signs == 0, fallback, signs)
            new_ref = _single_exchange(ref, xstar, float(err(np.array([xstar]), c)[0]), signs)
        new_ref = np.sort(new_ref)
        e_new = np.abs(err(new_ref, c))
        sup = max(float(e_new.max()), float(np.abs(e).max()))
        lower = abs(level)
        trace.append((it, lower, sup))
        ref = new_ref
        spread = (sup - lower) / sup if sup > 0 else 0.0
        stalled = prev_sup is not None and abs(sup - prev_sup) <= tol * sup
        if spread <= tol or (stalled and spread <= 1e-6):
            c, level = _solve_levelled(func, to_s, k, ref)
            return _certify(err, c, level, ref, a, b, it, trace)
        prev_sup = sup
    raise RemezError(f"Remez did not converge in {maxiter} iterations", trace)


def _certify(err, c, level, ref, a, b, iterations, trace):
    e_ref = err(ref, c)
    dense = np.union1d(_cheb_grid(a, b, 10_000), np.linspace(a, b, 10_000))
    sup = max(float(np.abs(e_ref).max()), float(np.abs(err(dense, c)).max()))
    return _RemezResult(cheb=c, level=float(level), reference=np.asarray(ref),
                        sup_error=sup, dvp_lower=float(np.abs(e_ref).min()),
                        iterations=iterations, trace=trace)


@functools.lru_cache(maxsize=None)
def _cheb_to_monomial_matrix(k):
    """Integer matrix M with T_j(2u - 1) = sum_m M[j][m] u^m."""
    rows = [[1], [-1, 2]]
    for j in range(2, k + 1):
        prev, prev2 = rows[j - 1], rows[j - 2]
        nxt = [0] * (j + 1)
        # 2 (2u - 1) T_{j-1} - T_{j-2}
        for i, coef in enumerate(prev):
            nxt[i + 1] += 4 * coef
            nxt[i] -= 2 * coef
        for i, coef in enumerate(prev2):
            nxt[i] -= coef
        rows.append(nxt)
    return [r + [0] * (k + 1 - len(r)) for r in rows[: k + 1]]


def _cheb_to_monomial(c):
    k = len(c) - 1
    M = _cheb_to_monomial_matrix(k)
    fc = [Fraction(float(x)) for x in c]
    return np.array([float(sum(fc[j] * M[j][l] for j in range(k + 1)))
                     for l in range(k + 1)])


@dataclass(frozen=True)
class PolyApprox:
    """Minimax polynomial ``Q(t) = sum_l b_l (t/delta)^l`` for ``-t ln t``.

    Attributes
    ----------
    delta : float
        Right endpoint of the approximation interval ``[0, delta]``.
    degree : int
    coeffs : ndarray
        Scaled monomial coefficients ``b_0 .. b_k`` in ``u = t / delta``.
    cheb : ndarray
        The same polynomial in the Chebyshev basis of ``[0, 1]`` (in ``u``).
    sup_error : float
        Certified uniform error on ``[0, delta]``.
    alternation : ndarray
        The ``k + 2`` equioscillation points, in ``t`` units.
    dvp_lower : float
        de la Vallee-Poussin lower bound (smallest error on the reference).
    """

    delta: float
    degree: int
    coeffs: np.ndarray
    cheb: np.ndarray
    sup_error: float
    alternation: np.ndarray
    dvp_lower: float
    iterations: int = 0

    @property
    def unscaled(self) -> np.ndarray:
        """Coefficients ``a_l = b_l / delta^l`` of ``Q`` in ``t``."""
        l = np.arange(self.degree + 1)
        with np.errstate(over="ignore"):
            return self.coeffs / float(self.delta) ** l

    def __call__(self, t):
        return eval_poly(self, t)

    def error(self, t):
        """Signed error ``-t ln t - Q(t)`` evaluated stably."""
        u = np.asarray(t, dtype=float) / self.delta
        return neg_xlogx(t) - C.chebval(2.0 * u - 1.0, self.cheb)


def remez_minimax(delta: float, k: int, *, tol: float = 1e-10,
                  maxiter: int = 100) -> PolyApprox:
    """Best degree-``k`` uniform approximation of ``-t ln t`` on ``[0, delta]``."""
    delta = float(delta)
    if not delta > 0:
        raise ValueError("delta must be positive")
    if k < 0 or k > MAX_DEGREE:
        raise ValueError(f"degree must be in [0, {MAX_DEGREE}]")

    def target(u):
        return neg_xlogx(delta * np.asarray(u, dtype=float))

    res = remez(target, k, 0.0, 1.0, tol=tol, maxiter=maxiter)
    return PolyApprox(delta=delta, degree=k, coeffs=_cheb_to_monomial(res.cheb),
                      cheb=res.cheb, sup_error=res.sup_error,
                      alternation=res.reference * delta, dvp_lower=res.dvp_lower,
                      iterations=res.iterations)


@functools.lru_cache(maxsize=256)
def cached_minimax(delta: float, k: int) -> PolyApprox:
    return remez_minimax(delta, k)


def eval_poly(poly: PolyApprox, t):
    """Horner evaluation of ``Q(t)`` in the scaled variable ``u = t / delta``."""
    u = np.asarray(t, dtype=float) / poly.delta
    acc = np.zeros_like(u) + poly.coeffs[-1]
    for b in poly.coeffs[-2::-1]:
        acc = acc * u + b
    return acc if acc.ndim else float(acc)


def write_coefficients_csv(polys: Iterable[PolyApprox], path) -> None:
    """Cache a table of coefficients (one row per coefficient)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["delta", "degree", "sup_error", "l", "b_l"])
        for p in polys:
            for l, b in enumerate(p.coeffs):
                w.writerow([repr(p.delta), p.degree, repr(p.sup_error), l, repr(float(b))])


def read_coefficients_csv(path) -> dict[tuple[float, int], tuple[np.ndarray, float]]:
    """Inverse of :func:`write_coefficients_csv`.

    Returns ``{(delta, degree): (b, sup_error)}``.
    """
    table: dict[tuple[float, int], dict] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            key = (float(row["delta"]), int(row["degree"]))
            entry = table.setdefault(key, {"err": float(row["sup_error"]), "b": {}})
            entry["b"][int(row["l"])] = float(row["b_l"])
    return {key: (np.array([v["b"][l] for l in range(key[1] + 1)]), v["err"])
            for key, v in table.items()}
