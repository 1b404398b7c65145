import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from entroscope.poly_approx import (PolyApprox, RemezError, cached_minimax, eval_poly, remez,
                                    read_coefficients_csv, remez_minimax,
                                    write_coefficients_csv)
from tests.frozen import LP_MINIMAX


def test_constant_fit_is_range_midpoint():
    p = remez_minimax(1.0, 0)
    assert p.coeffs[0] == pytest.approx(1 / (2 * math.e), abs=1e-12)
    assert p.sup_error == pytest.approx(1 / (2 * math.e), abs=1e-12)


@pytest.mark.parametrize("k", sorted(LP_MINIMAX))
def test_sup_error_matches_discretised_lp(k):
    assert remez_minimax(1.0, k).sup_error == pytest.approx(LP_MINIMAX[k], abs=1e-8)


@pytest.mark.parametrize("k", [1, 2, 5, 8, 12])
def test_equioscillation(k):
    p = remez_minimax(1.0, k)
    assert len(p.alternation) == k + 2
    e = p.error(p.alternation)
    assert np.all(np.sign(e[1:]) == -np.sign(e[:-1]))
    assert np.allclose(np.abs(e), p.sup_error, rtol=1e-7)
    assert p.sup_error - p.dvp_lower <= 1e-8


@pytest.mark.parametrize("k", [1, 3, 8, 16])
@pytest.mark.parametrize("delta", [0.5, 0.1, 1e-3])
def test_scaling_identity(k, delta):
    # -t ln t on [0, delta] equals delta * (-u ln u) - (delta ln delta) u, and the linear term is
    # absorbed exactly by any degree >= 1 polynomial
    assert remez_minimax(delta, k).sup_error == pytest.approx(
        delta * remez_minimax(1.0, k).sup_error, rel=1e-8)


def test_eval_at_zero_is_b0():
    p = remez_minimax(0.3, 6)
    assert eval_poly(p, 0.0) == p.coeffs[0]


def test_constant_poly_is_flat():
    p = remez_minimax(2.0, 0)
    assert np.all(eval_poly(p, np.linspace(0, 2, 7)) == p.coeffs[0])


def test_value_at_inverse_e():
    p = remez_minimax(1.0, 8)
    assert abs(p(1 / math.e) - 1 / math.e) <= p.sup_error * (1 + 1e-9)


@given(st.floats(min_value=0.0, max_value=1.0))
@settings(max_examples=60, deadline=None)
def test_error_bounded_everywhere(u):
    p = cached_minimax(0.25, 6)
    assert abs(float(p.error(0.25 * u))) <= p.sup_error * (1 + 1e-9)


@pytest.mark.parametrize("k", [1, 4, 10])
def test_horner_agrees_with_chebyshev_form(k):
    p = remez_minimax(0.7, k)
    t = np.linspace(0, 0.7, 101)
    neg = np.where(t > 0, -t * np.log(np.where(t > 0, t, 1)), 0.0)
    assert np.allclose(eval_poly(p, t), neg - p.error(t), atol=1e-12)


def test_unscaled_coefficients():
    p = remez_minimax(0.1, 3)
    assert np.allclose(p.unscaled * 0.1 ** np.arange(4), p.coeffs)


def test_invalid_arguments():
    with pytest.raises(ValueError):
        remez_minimax(0.0, 3)
    with pytest.raises(ValueError):
        remez_minimax(1.0, -1)
    with pytest.raises(ValueError):
        remez(np.sin, 2, 1.0, 1.0)


def test_generic_remez_on_smooth_function():
    # best linear fit of exp on [0, 1]: slope e - 1, interior touch point ln(e - 1)
    slope = math.e - 1
    x1 = math.log(slope)
    intercept = (1 + slope - slope * x1) / 2
    r = remez(np.exp, 1, 0.0, 1.0)
    assert r.sup_error == pytest.approx(1 - intercept, rel=1e-9)


def test_coefficient_csv_roundtrip(tmp_path):
    polys = [remez_minimax(1.0, 3), remez_minimax(0.5, 5)]
    path = tmp_path / "coeffs.csv"
    write_coefficients_csv(polys, path)
    table = read_coefficients_csv(path)
    for p in polys:
        b, err = table[(p.delta, p.degree)]
        assert np.array_equal(b, p.coeffs)
        assert err == p.sup_error


def test_remez_error_type():
    assert issubclass(RemezError, RuntimeError)
    assert isinstance(remez_minimax(1.0, 2), PolyApprox)
