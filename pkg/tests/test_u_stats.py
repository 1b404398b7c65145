import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from entroscope.poly_approx import PolyApprox, remez_minimax
from entroscope.u_stats import (elementary_symmetric, falling_factorial_ratios, h1_box_fastpath,
                                h1_nonsmooth, power_sums, second_order_u, u_statistic,
                                u_statistics, u_statistics_batch)
from tests.frozen import H1_FIXTURE


def _fixed_poly(b, delta=1.0):
    b = np.asarray(b, dtype=float)
    return PolyApprox(delta=delta, degree=len(b) - 1, coeffs=b, cheb=np.zeros(len(b)),
                      sup_error=0.0, alternation=np.zeros(len(b) + 1), dvp_lower=0.0)


def _subset_e(values, l):
    return sum(math.prod(s) for s in itertools.combinations(values, l))


def test_power_sums_examples():
    assert power_sums([1, 2, 3], 2) == [6, 14]
    assert power_sums([0.0] * 4, 3) == [0.0, 0.0, 0.0]
    assert power_sums([0.5] * 4, 3) == [2.0, 1.0, 0.5]


def test_power_sums_order_limit():
    with pytest.raises(ValueError):
        power_sums([1.0, 2.0], 3)


def test_elementary_examples():
    assert elementary_symmetric(power_sums([1, 2, 3], 3)) == [1, 6, 11, 6]
    assert elementary_symmetric(power_sums([7.5], 1)) == [1.0, 7.5]


@given(st.lists(st.fractions(min_value=-3, max_value=3, max_denominator=7), min_size=1,
                max_size=12))
@settings(max_examples=80, deadline=None)
def test_newton_identities_exact(vals):
    e = elementary_symmetric(power_sums(vals, len(vals)))
    for l in range(len(vals) + 1):
        assert e[l] == _subset_e(vals, l)


def test_fifty_values_against_subset_sums(rng):
    # double precision against an exact rational oracle on the same (dyadic) inputs
    vals = [Fraction(int(v), 64) for v in rng.integers(1, 64, 50)]
    e_exact = [_subset_e_dp(vals, l) for l in range(11)]
    e_float = elementary_symmetric(power_sums([float(v) for v in vals], 10))
    for l in range(11):
        assert e_float[l] == pytest.approx(float(e_exact[l]), rel=1e-10)


def _subset_e_dp(vals, k):
    # e_k by the product-expansion recurrence (no Newton identities involved)
    e = [Fraction(1)] + [Fraction(0)] * k
    for v in vals:
        for l in range(k, 0, -1):
            e[l] += e[l - 1] * v
    return e[k]


def test_u_statistic_examples():
    assert u_statistic([1.0, 1.0, 1.0, 1.0], 2) == 1.0
    assert u_statistic([1, 2, 3], 2) == Fraction(11, 3)
    assert u_statistic([1.0, 2.0, 3.0], 2) == pytest.approx(11 / 3, rel=1e-15)


def test_u_statistics_with_implicit_zeros():
    full = u_statistics([0.0, 0.0, 1.5, 2.0, 0.0], 3)
    sparse = u_statistics([1.5, 2.0], 3, n=5)
    assert np.allclose(full, sparse, rtol=1e-14)


def test_batch_matches_scalar(rng):
    V = rng.random((20, 15))
    B = u_statistics_batch(V, 6)
    for row, v in zip(B, V):
        assert np.allclose(row, u_statistics(v, 6), rtol=1e-10)


def test_u_statistic_monte_carlo_mean(rng):
    V = rng.random((100_000, 20))
    U3 = u_statistics_batch(V, 3)[:, 3]
    se = U3.std(ddof=1) / math.sqrt(len(U3))
    assert abs(U3.mean() - 0.125) <= 3 * se


def test_h1_constant_poly():
    p = remez_minimax(1.0, 0)
    assert h1_nonsmooth([0.3, 0.9, 0.1], p) == pytest.approx(p.coeffs[0])


def test_h1_fixture():
    vals = [0.5, 1 / 3, 0.0, 2.0, 0.75]
    assert h1_nonsmooth(vals, _fixed_poly([0.1, -2.0, 1.5])) == pytest.approx(H1_FIXTURE,
                                                                             rel=1e-14)


def test_fastpath_empty_count_is_b0():
    p = remez_minimax(0.4, 5)
    assert h1_box_fastpath(0, 50, 0.1, 1, p) == pytest.approx(p.coeffs[0], abs=1e-15)


def test_fastpath_hand_term():
    # z=3, n=5, h^d = 0.25: U_2 = 3*2 / (0.25^2 * 5 * 4) = 4.8
    p = _fixed_poly([0.0, 0.0, 1.0])
    assert h1_box_fastpath(3, 5, 0.25, 1, p) == pytest.approx(4.8, rel=1e-14)
    assert h1_box_fastpath(3, 5, 0.5, 2, p) == pytest.approx(4.8, rel=1e-14)


@pytest.mark.parametrize("seed", range(5))
def test_fastpath_matches_generic(seed):
    r = np.random.default_rng(seed)
    n = int(r.integers(10, 201))
    k = int(r.integers(1, 11))
    z = int(r.integers(0, n + 1))
    h = float(r.uniform(0.01, 0.5))
    p = remez_minimax(float(r.uniform(0.5, 5.0)), k)
    generic = h1_nonsmooth([1.0 / h] * z, p, n=n)
    fast = h1_box_fastpath(z, n, h, 1, p)
    assert fast == pytest.approx(generic, rel=1e-9, abs=1e-12)


def test_falling_factorial_bounds():
    with pytest.raises(ValueError):
        falling_factorial_ratios(6, 5, 2)
    assert np.allclose(falling_factorial_ratios(5, 5, 5), 1.0)


def test_second_order_examples():
    assert second_order_u([1.0, 1.0]) == 1.0
    assert second_order_u([1.0, 2.0, 3.0]) == pytest.approx(11 / 3)
    with pytest.raises(ValueError):
        second_order_u([1.0])


def test_second_order_variance_bound(rng):
    # uniform values: E v = 1/2, E v^2 = 1/3
    n = 10
    V = rng.random((200_000, n))
    p1 = V.sum(axis=1)
    p2 = (V * V).sum(axis=1)
    U = (p1 * p1 - p2) / (n * (n - 1))
    m1, m2 = 0.5, 1 / 3
    bound = 4 * (n - 2) / (n * (n - 1)) * m2 * m1**2 + 2 * m2**2 / (n * (n - 1))
    var = U.var(ddof=1)
    # the variance estimate has relative standard error about sqrt(2 / N) times a kurtosis factor
    assert var <= bound * 1.02
    assert second_order_u(V[0]) == pytest.approx(U[0], rel=1e-12)
