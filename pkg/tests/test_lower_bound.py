"""Tests for the moment-matched prior construction and the two-point bound."""

from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import integrate

from entroscope.densities import LipschitzSpec
from entroscope.lower_bound import (
    MomentMatchedPriors,
    build_priors,
    default_eta,
    entropy_gap,
    lipschitz_membership_check,
    poisson_mixture_tv,
    tv_bound,
    two_point_demo,
)

from .frozen import LOG_MINIMAX_K3_ETA005, POISSON_TV_1_2, POISSON_TV_3_3p5, TWO_ATOM_K1_ETA005


# ---------------------------------------------------------------------------
# linear program


def test_lp_equals_twice_minimax_of_log():
    pri = build_priors(q=1, k=3, eta=0.05, grid_m=4000)
    assert pri.lp_objective == pytest.approx(2 * LOG_MINIMAX_K3_ETA005, rel=1e-6)


def test_lp_matches_two_atom_bruteforce():
    pri = build_priors(q=1, k=1, eta=0.05, grid_m=60)
    assert pri.lp_objective >= TWO_ATOM_K1_ETA005 * (1 - 1e-9)
    assert pri.lp_objective == pytest.approx(TWO_ATOM_K1_ETA005, rel=1e-8)


def test_mass_only_pushes_to_extremes():
    eta = 0.05
    pri = build_priors(q=1, k=0, eta=eta, grid_m=40)
    assert pri.lp_objective == pytest.approx(-math.log(eta), rel=1e-10)
    assert pri.gap > 0


@pytest.mark.parametrize("k", [2, 5, 8])
def test_lp_not_below_two_atom_lower_bound(k):
    grid_m = 10 * (k + 1)
    pri = build_priors(q=1, k=k, eta=0.05, grid_m=grid_m)
    brute = build_priors(q=1, k=1, eta=0.05, grid_m=grid_m).lp_objective
    # matching more moments can only shrink the feasible set
    assert pri.lp_objective <= brute * (1 + 1e-9)
    assert pri.lp_objective > 0


@pytest.mark.parametrize("q", [1, 2, 3])
@pytest.mark.parametrize("k", [3, 12])
def test_moment_invariants(q, k):
    pri = build_priors(q=q, k=k, eta=0.05, dilation=math.log(1e4) / 1e4)
    r = pri.residuals
    assert r["base"] <= 1e-8
    assert r["tilted"] <= 1e-8
    assert r["q_moment"] <= 1e-8
    for w in (pri.nu0, pri.nu1, pri.mu0, pri.mu1):
        assert np.all(w >= 0)
        assert w.sum() == pytest.approx(1.0, abs=1e-9)
    assert pri.atoms[0] == 0.0
    assert pri.gap > 0


def test_residuals_recomputed_independently():
    pri = build_priors(q=2, k=6, eta=0.05)
    t = pri.grid
    for l in range(-1, 7):
        assert abs(np.sum((pri.nu1 - pri.nu0) * t ** float(l))) <= 1e-8
    x = pri.tilted_atoms
    for l in range(0, 9):
        xl = np.where(x > 0, x, 0.0) ** l if l else np.ones_like(x)
        assert abs(np.sum((pri.mu1 - pri.mu0) * xl)) <= 1e-8
    assert np.sum(pri.mu0 * x**2) == pytest.approx(0.05**2, abs=1e-8)


def test_force_equal_has_zero_gap():
    pri = build_priors(q=1, k=4, eta=0.05, force_equal=True)
    assert pri.gap == pytest.approx(0.0, abs=1e-15)
    assert max(pri.residuals.values()) <= 1e-12


@pytest.mark.parametrize("kwargs", [dict(eta=0.0), dict(eta=1.0), dict(k=12, grid_m=100),
                                    dict(q=0), dict(k=-1)])
def test_invalid_arguments(kwargs):
    with pytest.raises(ValueError):
        build_priors(**kwargs)


def test_default_eta():
    assert default_eta(10_000) == pytest.approx((1 / 16) / math.log(10_000) ** 2)
    assert default_eta(10_000, d1=0.5) == pytest.approx(0.5 / math.log(10_000) ** 2)


# ---------------------------------------------------------------------------
# entropy gap


def test_gap_identical_priors_zero():
    p = MomentMatchedPriors.from_atoms([0.1, 0.3], [0.5, 0.5], [0.1, 0.3], [0.5, 0.5])
    assert entropy_gap(p) == 0.0


@pytest.mark.parametrize("a,b", [(0.2, 0.7), (1e-5, 0.3), (0.0, 0.5)])
def test_gap_point_masses(a, b):
    p = MomentMatchedPriors.from_atoms([b], [1.0], [a], [1.0])
    tlt = (lambda t: t * math.log(t) if t > 0 else 0.0)
    assert entropy_gap(p) == pytest.approx(tlt(a) - tlt(b), rel=1e-14, abs=1e-300)


@pytest.mark.parametrize("n", [1_000, 10_000, 100_000])
def test_gap_scaling_band(n):
    ln = math.log(n)
    pri = build_priors(q=1, k=math.ceil(4 * ln), eta=default_eta(n), dilation=ln / n)
    # recorded regression band for gap * n ln n (measured 0.0057 .. 0.0059)
    assert 0.005 <= pri.gap * n * ln <= 0.007


# ---------------------------------------------------------------------------
# Poisson mixtures


def test_tv_identical_zero():
    p = MomentMatchedPriors.from_atoms([0.1, 0.3], [0.5, 0.5], [0.1, 0.3], [0.5, 0.5])
    assert poisson_mixture_tv(p, 50) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("a,b,want", [(1.0, 2.0, POISSON_TV_1_2), (3.0, 3.5, POISSON_TV_3_3p5)])
def test_tv_two_poissons(a, b, want):
    p = MomentMatchedPriors.from_atoms([a], [1.0], [b], [1.0])
    assert poisson_mixture_tv(p, 1) == pytest.approx(want, rel=1e-12)


def test_tv_truncation_bound_is_conservative():
    p = MomentMatchedPriors.from_atoms([1.0], [1.0], [2.0], [1.0])
    coarse = poisson_mixture_tv(p, 1, truncation=3)
    assert coarse >= POISSON_TV_1_2 - 1e-12


def test_tv_bound_formula():
    assert tv_bound(10_000, 1, 12) == pytest.approx((2 * math.e * math.log(1e4) / 13) ** 13)


@pytest.mark.parametrize("eta", [0.05, default_eta(10_000)])
def test_tv_built_priors_below_bound(eta):
    n = 10_000
    pri = build_priors(q=1, k=12, eta=eta, dilation=math.log(n) / n)
    tv = poisson_mixture_tv(pri, n)
    assert tv <= tv_bound(n, 1, 12)
    assert tv <= 1e-3


def test_tv_non_increasing_in_k():
    n = 10_000
    tvs = [poisson_mixture_tv(build_priors(q=1, k=k, eta=0.05, dilation=math.log(n) / n), n)
           for k in (2, 4, 8, 12)]
    assert all(b <= a for a, b in zip(tvs, tvs[1:]))


# ---------------------------------------------------------------------------
# membership


def test_membership_zero_prior_passes():
    p = MomentMatchedPriors.from_atoms([0.0], [1.0], [0.0], [1.0])
    rep = lipschitz_membership_check(p, LipschitzSpec(1, 2, 1, 10.0), S=50, h=0.01, n=1000,
                                     draws=100)
    assert rep.pass_both == (1.0, 1.0)


@pytest.mark.parametrize("a,expect", [(1e-4, 1.0), (1e-1, 0.0)])
def test_membership_single_draw(a, expect):
    # S = 1 with a point prior: the moment check is a^p <= (2 C1 / (n ln n))^p
    n = 1000
    C1 = 1e-3 * n * math.log(n)
    p = MomentMatchedPriors.from_atoms([a], [1.0], [a], [1.0])
    rep = lipschitz_membership_check(p, LipschitzSpec(1, 2, 1, 10.0), S=1, h=0.01, n=n,
                                     draws=20, C1=C1)
    assert rep.pass_moment == (expect, expect)
    # the mass perturbation is zero for a point prior
    assert rep.pass_mass == (1.0, 1.0)


def test_membership_reference_regime():
    n = 10_000
    ln = math.log(n)
    spec = LipschitzSpec(1.0, 2.0, 1, 1e4)
    pri = build_priors(q=2, k=math.ceil(4 * ln), eta=default_eta(n), dilation=ln / n)
    h = (spec.L * n * ln) ** (-1.0 / (spec.s + spec.d))
    S = round(1 / (2 * h))
    rep = lipschitz_membership_check(pri, spec, S, h, n, draws=2000,
                                     rng=np.random.default_rng(11))
    assert min(rep.pass_both) >= 0.95


# ---------------------------------------------------------------------------
# two-point construction


def _mix_pdf(x, lo, hi):
    u = (x - lo) / (hi - lo)
    inside = (u >= 0) & (u <= 1)
    return np.where(inside, 0.5 / (hi - lo) + 0.5 * 30 * u**2 * (1 - u) ** 2 / (hi - lo), 0.0)


def _two_point_oracle(A, eps):
    half = 0.25 / A
    f = (lambda x: _mix_pdf(x, 0.25, 0.75))
    g = (lambda x: _mix_pdf(x, 0.5 - half, 0.5 + half))
    f0 = (lambda x: 0.5 * (f(x) + g(x)))
    f1 = (lambda x: 0.5 * (1 - eps) * f(x) + 0.5 * (1 + eps) * g(x))
    pts = sorted({0.25, 0.5 - half, 0.5 + half, 0.75})
    opts = dict(epsabs=1e-14, epsrel=1e-12, limit=200)

    def integral(fn):
        return sum(integrate.quad(fn, a, b, **opts)[0] for a, b in zip(pts, pts[1:]))

    chi2 = integral(lambda x: (f1(x) - f0(x)) ** 2 / f0(x))
    ent = (lambda v: (lambda x: -v(x) * math.log(v(x)) if v(x) > 0 else 0.0))
    return chi2, integral(ent(f0)), integral(ent(f1))


def test_two_point_reference_case():
    rep = two_point_demo(1e4, 10_000)
    assert rep.A == pytest.approx(10.0)
    assert rep.chi2 <= 1e-4
    assert rep.ok
    assert rep.separation > 0
    chi2, H0, H1 = _two_point_oracle(rep.A, rep.eps)
    assert rep.chi2 == pytest.approx(chi2, rel=1e-8)
    assert rep.H0 == pytest.approx(H0, abs=1e-10)
    assert rep.H1 == pytest.approx(H1, abs=1e-10)


@pytest.mark.parametrize("L,n", [(1e2, 1e4), (1e6, 1e4), (1e4, 1e6)])
def test_two_point_chi2_within_bound(L, n):
    rep = two_point_demo(L, int(n))
    assert rep.chi2 <= 1 / n + 1e-10
    # separation of order ln A / sqrt(n)
    assert 0.1 <= rep.normalised_separation <= 2.0


def test_two_point_zero_eps():
    rep = two_point_demo(1e4, 10_000, eps=0.0)
    assert rep.chi2 == 0.0
    assert rep.separation == 0.0


def test_two_point_no_dilation():
    rep = two_point_demo(1e4, 10_000, A=1.0)
    assert rep.separation == pytest.approx(0.0, abs=1e-14)


def test_two_point_rejects_shrinking():
    with pytest.raises(ValueError):
        two_point_demo(1e4, 10_000, A=0.5)


def test_two_point_two_dims():
    rep = two_point_demo(1e4, 10_000, d=2)
    assert rep.ok
    assert rep.separation > 0
