"""Tests for the plug-in, discretisation and resubstitution estimators."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from entroscope.baselines import (
    Histogram,
    discrete_bandwidth,
    discrete_reduction_entropy,
    plugin_bandwidth,
    plugin_entropy,
    resubstitution_entropy,
)
from entroscope.densities import beta_product
from entroscope.poly_approx import cached_minimax

from .frozen import BETA22_ENTROPY


# ---------------------------------------------------------------------------
# kernel plug-in


def test_plugin_single_sample():
    assert plugin_entropy([0.5], h=0.2) == pytest.approx(-math.log(5), rel=1e-14)


@pytest.mark.parametrize("n,h", [(1, 0.1), (7, 0.1), (50, 0.05), (3, 0.25)])
def test_plugin_colocated_samples(n, h):
    # n points at one location give the constant 1/h on a width-h cell
    assert plugin_entropy(np.full(n, 0.5), h=h) == pytest.approx(math.log(h), rel=1e-12)


def test_plugin_exact_matches_fine_grid(rng):
    X = rng.random(40)
    h = 0.07
    exact = plugin_entropy(X, h=h)
    # straight-line midpoint rule on a fine grid
    step = 1e-6
    grid = np.arange(-h / 2 + step / 2, 1 + h / 2, step)
    Xs = np.sort(X)
    f = (np.searchsorted(Xs, grid + h / 2, "right") - np.searchsorted(Xs, grid - h / 2, "left"))
    f = f / (len(X) * h)
    pos = f > 0
    assert exact == pytest.approx(-np.sum(f[pos] * np.log(f[pos])) * step, abs=1e-4)


def test_plugin_triangle_grid_runs(rng):
    X = beta_product(2, 2, 1).sample(2000, rng)
    val = plugin_entropy(X, kernel="triangle_product", h=0.05, resolution=8)
    assert abs(val - BETA22_ENTROPY) < 0.1


def test_plugin_rejects_bad_bandwidth():
    with pytest.raises(ValueError):
        plugin_entropy([0.5], h=0.0)


def test_plugin_uniform_negative_bias(rng):
    # on the torus there is no edge ramp; second-order expansion of -f ln f
    # around f = 1 gives the bias -Var(fhat) / 2 = -(1 - h) / (2 n h)
    n, reps = 5000, 200
    h = plugin_bandwidth(n, 1.0, 1)
    vals = [plugin_entropy(rng.random(n), h=h, boundary="periodic") for _ in range(reps)]
    se = np.std(vals, ddof=1) / math.sqrt(reps)
    assert np.mean(vals) < 0
    assert np.mean(vals) == pytest.approx(-(1 - h) / (2 * n * h), abs=4 * se)


@settings(max_examples=30, deadline=None)
@given(shift=st.floats(0.0, 1.0), seed=st.integers(0, 2**32 - 1))
def test_plugin_periodic_translation_equivariant(shift, seed):
    X = np.random.default_rng(seed).random(60)
    a = plugin_entropy(X, h=0.1, boundary="periodic")
    b = plugin_entropy((X + shift) % 1.0, h=0.1, boundary="periodic")
    assert a == pytest.approx(b, abs=1e-9)


def test_plugin_bandwidth_formula():
    assert plugin_bandwidth(1000, 2.0, 1, L=2.0, c0=0.5) == pytest.approx(0.5 * 2000 ** (-1 / 3))


# ---------------------------------------------------------------------------
# discretisation


@pytest.mark.parametrize("m", [1, 2, 5, 10, 16])
@pytest.mark.parametrize("per_bin", [1, 3])
def test_discrete_uniform_counts_is_zero(m, per_bin):
    h = 1.0 / m
    X = np.repeat((np.arange(m) + 0.5) * h, per_bin)
    assert discrete_reduction_entropy(X, h, mode="plugin") == pytest.approx(0.0, abs=1e-12)
    # Miller-Madow adds (S_+ - 1) / (2n) on top of the plug-in
    mm = discrete_reduction_entropy(X, h, mode="miller_madow")
    assert mm == pytest.approx((m - 1) / (2 * m * per_bin), abs=1e-12)


@pytest.mark.parametrize("m", [2, 4, 10])
def test_discrete_uniform_counts_two_dims(m):
    h = 1.0 / m
    c = (np.arange(m) + 0.5) * h
    X = np.stack(np.meshgrid(c, c), -1).reshape(-1, 2)
    assert discrete_reduction_entropy(X, h, mode="plugin") == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("h", [0.5, 0.1, 0.05])
def test_discrete_single_bin(h):
    X = np.full(30, 0.01)
    for mode in ("plugin", "miller_madow"):
        assert discrete_reduction_entropy(X, h, mode=mode) == pytest.approx(math.log(h), rel=1e-12)


def test_discrete_rejects_non_tiling():
    with pytest.raises(ValueError):
        discrete_reduction_entropy([0.2, 0.4], 0.3)


def test_discrete_unknown_mode():
    with pytest.raises(ValueError):
        discrete_reduction_entropy([0.2, 0.4, 0.5, 0.6], 0.5, mode="bogus")


def test_histogram_counts():
    H = Histogram([0.0, 0.24, 0.25, 0.99, 1.0], 0.25)
    assert H.counts.tolist() == [2, 1, 0, 2]
    assert H.S == 4
    assert H.frequencies.sum() == pytest.approx(1.0)


def test_discrete_bandwidth_tiles():
    h = discrete_bandwidth(10_000, 1.0, 1)
    assert abs(round(1 / h) * h - 1) < 1e-12
    raw = (10_000 * math.log(10_000)) ** -0.5
    assert abs(1 / h - 1 / raw) <= 0.5


def test_poly_mode_all_smooth_bins():
    # 4 bins with 100 samples each per half: every bin is above the threshold
    c = np.repeat([0.125, 0.375, 0.625, 0.875], 100)
    X = np.concatenate([c, c])
    n = 400
    want = math.log(4) + 4 * (1 - 0.25) / (2 * n) + math.log(0.25)
    assert discrete_reduction_entropy(X, 0.25, mode="poly") == pytest.approx(want, rel=1e-12)


def test_poly_mode_empty_bins_use_constant_term():
    X = np.full(200, 0.05)
    n = 100
    tau = 2.0 * math.log(n) / n
    poly = cached_minimax(2 * tau, math.ceil(math.log(n)))
    want = 9 * poly.coeffs[0] + math.log(0.1)
    assert discrete_reduction_entropy(X, 0.1, mode="poly") == pytest.approx(want, rel=1e-12)


def test_poly_mode_needs_four_samples():
    with pytest.raises(ValueError):
        discrete_reduction_entropy([0.1, 0.2, 0.3], 0.5, mode="poly")


@pytest.mark.parametrize("mode", ["miller_madow", "poly"])
def test_discrete_beta22_reasonable(rng, mode):
    n = 16_000
    h = discrete_bandwidth(n, 1.0, 1)
    X = beta_product(2, 2, 1).sample(n, rng)
    assert abs(discrete_reduction_entropy(X, h, mode=mode) - BETA22_ENTROPY) < 0.05


# ---------------------------------------------------------------------------
# resubstitution


def test_resub_single_sample_rejected():
    with pytest.raises(ValueError):
        resubstitution_entropy([0.5])


@pytest.mark.parametrize("h", [0.1, 0.3])
def test_resub_two_colocated(h):
    # each leave-one-out density is 1/h
    assert resubstitution_entropy([0.4, 0.4], h=h) == pytest.approx(math.log(h), rel=1e-12)


def test_resub_isolated_samples_hit_floor():
    X = [0.1, 0.5, 0.9]
    h = 0.1
    assert resubstitution_entropy(X, h=h) == pytest.approx(math.log(3 * h), rel=1e-12)


def test_resub_matches_loop(rng):
    X = rng.random(80)
    h = 0.08
    want = 0.0
    for i, xi in enumerate(X):
        others = np.delete(X, i)
        f = np.sum(np.abs(others - xi) <= h / 2) / ((len(X) - 1) * h)
        want -= math.log(max(f, 1 / (len(X) * h)))
    assert resubstitution_entropy(X, h=h) == pytest.approx(want / len(X), rel=1e-12)


def test_resub_uniform_near_zero(rng):
    n = 20_000
    assert abs(resubstitution_entropy(rng.random(n), h=plugin_bandwidth(n, 1.0, 1))) < 0.05
