"""Unbiased estimators of powers of a mean via product U-statistics.

For iid nonnegative values ``v_1 .. v_n`` the order-``l`` U-statistic

    U_l = C(n, l)^{-1} * sum over l-subsets J of prod_{j in J} v_j

is unbiased for ``(E v)^l``.  The subset sum is the elementary symmetric
polynomial ``e_l``, obtained from power sums via Newton's identities in
``O(n k + k^2)`` time.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Sequence

import numpy as np

from .poly_approx import PolyApprox

__all__ = [
    "power_sums",
    "elementary_symmetric",
    "u_statistic",
    "u_statistics",
    "u_statistics_batch",
    "h1_nonsmooth",
    "h1_box_fastpath",
    "falling_factorial_ratios",
    "second_order_u",
]


def power_sums(values, k: int) -> list:
    """Power sums ``p_l = sum_i v_i^l`` for ``l = 1 .. k``.

    Floats are accumulated with :func:`math.fsum`; exact types such as
    ``Fraction`` or ``int`` are summed exactly.
    """
    vals = list(values) if not isinstance(values, np.ndarray) else values.tolist()
    if k > len(vals):
        raise ValueError(f"order {k} exceeds sample size {len(vals)}")
    return _power_sums(vals, k)


def _power_sums(vals: list, k: int) -> list:
    if k < 0:
        raise ValueError("k must be nonnegative")
    exact = all(not isinstance(v, float) for v in vals)
    out = []
    cur = [1] * len(vals) if exact else [1.0] * len(vals)
    for _ in range(k):
        cur = [c * v for c, v in zip(cur, vals)]
        out.append(sum(cur) if exact else math.fsum(cur))
    return out


def elementary_symmetric(p: Sequence) -> list:
    """Elementary symmetric polynomials ``e_0 .. e_k`` from power sums.

    Uses Newton's identities ``l e_l = sum_{i=1}^{l} (-1)^{i-1} e_{l-i} p_i``.
    Works with any numeric type that supports ``+ - *`` and division by int.
    """
    e = [1 if not p or not isinstance(p[0], float) else 1.0]
    for l in range(1, len(p) + 1):
        acc = 0
        for i in range(1, l + 1):
            term = e[l - i] * p[i - 1]
            acc = acc + term if i % 2 == 1 else acc - term
        if isinstance(acc, int):
            q, r = divmod(acc, l)
            e.append(q if r == 0 else acc / l)
        else:
            e.append(acc / l)
    return e


def u_statistic(values, l: int):
    """Order-``l`` product U-statistic ``e_l / C(n, l)`` (exact for integer or Fraction input)."""
    n = len(values)
    if l > n:
        raise ValueError(f"order {l} exceeds sample size {n}")
    if l == 0:
        return 1.0
    e = elementary_symmetric(power_sums(values, l))
    if isinstance(e[l], int):
        return Fraction(e[l], math.comb(n, l))
    return e[l] / math.comb(n, l)


def u_statistics(values, k: int, n: int | None = None) -> np.ndarray:
    """All of ``U_0 .. U_k`` in one pass (float).

    When ``n`` is given, ``values`` holds only the nonzero entries of a
    length-``n`` value set; zeros do not change the symmetric polynomials.
    """
    vals = np.asarray(values, dtype=float).ravel()
    n = len(vals) if n is None else int(n)
    if len(vals) > n:
        raise ValueError("more nonzero values than the sample size")
    if k > n:
        raise ValueError(f"order {k} exceeds sample size {n}")
    e = elementary_symmetric(_power_sums(vals.tolist(), k))
    return np.array([float(e[l]) / math.comb(n, l) for l in range(k + 1)])


def u_statistics_batch(values: np.ndarray, k: int) -> np.ndarray:
    """Row-wise ``U_0 .. U_k`` for a ``(m, n)`` array of value sets.

    Plain float summation; used where many small U-statistics are needed
    at once (Monte Carlo replicates, evaluation grids).
    """
    V = np.asarray(values, dtype=float)
    m, n = V.shape
    if k > n:
        raise ValueError(f"order {k} exceeds sample size {n}")
    P = np.empty((m, k))
    cur = np.ones_like(V)
    for l in range(k):
        cur = cur * V
        P[:, l] = cur.sum(axis=1)
    E = np.zeros((m, k + 1))
    E[:, 0] = 1.0
    for l in range(1, k + 1):
        acc = np.zeros(m)
        for i in range(1, l + 1):
            sgn = 1.0 if i % 2 == 1 else -1.0
            acc += sgn * E[:, l - i] * P[:, i - 1]
        E[:, l] = acc / l
    return E / np.array([math.comb(n, l) for l in range(k + 1)], dtype=float)


def h1_nonsmooth(values, poly: PolyApprox, n: int | None = None) -> float:
    """Unbiased estimator of ``Q(E v)`` for the minimax polynomial ``Q``.

    Accumulated in the scaled basis: ``sum_l b_l * (U_l / delta^l)``.
    ``n`` has the same meaning as in :func:`u_statistics`.
    """
    k = poly.degree
    U = u_statistics(values, k, n)
    scaled = U / float(poly.delta) ** np.arange(k + 1)
    return math.fsum(b * s for b, s in zip(poly.coeffs, scaled))


def falling_factorial_ratios(z: int, n: int, k: int) -> np.ndarray:
    """``z(z-1)...(z-l+1) / (n(n-1)...(n-l+1))`` for ``l = 0 .. k``."""
    if z < 0 or z > n:
        raise ValueError(f"count {z} must lie in [0, {n}]")
    if k > n:
        raise ValueError(f"order {k} exceeds sample size {n}")
    out = np.empty(k + 1)
    out[0] = 1.0
    for l in range(1, k + 1):
        out[l] = out[l - 1] * (z - l + 1) / (n - l + 1)
    return out


def h1_box_fastpath(z: int, n: int, h: float, d: int, poly: PolyApprox) -> float:
    """Box-kernel specialisation of :func:`h1_nonsmooth`.

    With ``K_h(x - X_i) in {0, h^-d}`` and ``z`` of the ``n`` values nonzero,
    ``U_l = z(z-1)..(z-l+1) / (h^{dl} n(n-1)..(n-l+1))``.
    """
    k = poly.degree
    ratio = falling_factorial_ratios(int(z), int(n), k)
    scale = 1.0 / (float(h) ** d * float(poly.delta))
    return math.fsum(b * r * scale**l for l, (b, r) in enumerate(zip(poly.coeffs, ratio)))


def second_order_u(values, n: int | None = None) -> float:
    """``(p_1^2 - p_2) / (n (n - 1))``, unbiased for ``(E v)^2``.

    ``n`` has the same meaning as in :func:`u_statistics`.
    """
    vals = np.asarray(values, dtype=float).ravel()
    n = len(vals) if n is None else int(n)
    if n < 2:
        raise ValueError("second-order U-statistic needs at least two values")
    p1, p2 = _power_sums(vals.tolist(), 2)
    return (p1 * p1 - p2) / (n * (n - 1))
