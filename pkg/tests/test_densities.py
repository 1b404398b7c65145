import math

import numpy as np
import pytest
from scipy import integrate, stats

from entroscope.densities import (BUMP_ENTROPY_1D, BumpMixtureSpec, DensityError, LipschitzSpec,
                                  SamplingError, background_entropy, beta_product, bump_mixture,
                                  cosine_bump, density_id, gaussian, hard_bump_mixture,
                                  make_density, rejection_sample, rescaled, sample, scaled_bump,
                                  uniform_cube)
from entroscope.oracle import quadrature_entropy
from tests.frozen import BETA22_ENTROPY, BETA33_ENTROPY

ZOO_1D = [
    uniform_cube(1),
    beta_product(2, 2, 1),
    beta_product(3, 3, 1),
    cosine_bump(0.5, 1),
    scaled_bump(0.25),
    hard_bump_mixture(),
    bump_mixture(BumpMixtureSpec((0.1, 0.2, 0.05, 0.15), 0.125, 0.125, 1)),
    rescaled(beta_product(2, 2, 1), 0.5),
]


def test_uniform_entropy_is_zero():
    assert uniform_cube(1).entropy_truth == 0.0


def test_beta_closed_forms():
    assert beta_product(2, 2, 1).entropy_truth == pytest.approx(BETA22_ENTROPY, abs=1e-13)
    assert beta_product(3, 3, 1).entropy_truth == pytest.approx(BETA33_ENTROPY, abs=1e-13)
    assert BUMP_ENTROPY_1D == pytest.approx(BETA33_ENTROPY, abs=1e-13)
    assert beta_product(2, 2, 3).entropy_truth == pytest.approx(3 * BETA22_ENTROPY, abs=1e-12)


@pytest.mark.parametrize("dm", ZOO_1D, ids=lambda m: m.name)
def test_truth_matches_quadrature(dm):
    q = quadrature_entropy(dm, resolution=2**15)
    assert q.value == pytest.approx(dm.entropy_truth, abs=1e-5)


@pytest.mark.parametrize("dm", [beta_product(2, 3, 2), cosine_bump(0.3, 2),
                                bump_mixture(BumpMixtureSpec((0.1, 0.0, 0.2, 0.05), 0.25, 0.0875,
                                                             2))],
                         ids=lambda m: m.name)
def test_truth_matches_quadrature_2d(dm):
    q = quadrature_entropy(dm, resolution=2**9)
    assert q.value == pytest.approx(dm.entropy_truth, abs=1e-5)


@pytest.mark.parametrize("dm", ZOO_1D, ids=lambda m: m.name)
def test_unit_mass(dm):
    mass, _ = integrate.quad(lambda x: float(dm.pdf(np.array([x]))), dm.lo, dm.hi, limit=400,
                             points=np.linspace(dm.lo, dm.hi, 17)[1:-1])
    assert mass == pytest.approx(1.0, abs=1e-8)


def test_equal_weight_bump_identity():
    # disjoint pieces: H = sum p_i (H(g) + ln h - ln p_i) + b (H(w) - ln b), b the frame weight
    P = (0.1,) * 4
    spec = BumpMixtureSpec(P, 0.125, 0.1, 1)
    dm = bump_mixture(spec)
    b = spec.background_weight
    expected = sum(p * (BUMP_ENTROPY_1D + math.log(0.125) - math.log(p)) for p in P)
    expected += b * (background_entropy(1) - math.log(b))
    q = quadrature_entropy(dm, resolution=2**15)
    assert q.value == pytest.approx(expected, abs=1e-6)


def test_zero_weights_reduce_to_background():
    spec = BumpMixtureSpec((0.0,) * 4, 0.125, 0.2, 1)
    dm = bump_mixture(spec)
    ref = bump_mixture(BumpMixtureSpec((0.0,) * 4, 0.125, 0.0, 1))
    x = np.linspace(0, 1, 257)
    assert np.allclose(dm.pdf(x), (1 - 4 * 0.2) * ref.pdf(x), rtol=1e-14, atol=0)


def test_uniform_sample_in_support(rng):
    X = sample(uniform_cube(2), 4, rng)
    assert X.shape == (4, 2)
    assert np.all((X >= 0) & (X <= 1))


def test_beta_sample_mean(rng):
    X = sample(beta_product(2, 2, 1), 100_000, rng)[:, 0]
    se = math.sqrt(0.05 / len(X))  # Beta(2,2) variance is 1/20
    assert abs(X.mean() - 0.5) <= 3 * se


@pytest.mark.parametrize("dm", ZOO_1D + [beta_product(2, 3, 2), cosine_bump(0.3, 2)],
                         ids=lambda m: m.name)
def test_sampler_bin_frequencies(dm, rng):
    n = 100_000
    X = dm.sample(n, rng)
    m = 16 if dm.d == 1 else 6
    edges = np.linspace(dm.lo, dm.hi, m + 1)
    idx = np.minimum(((X - dm.lo) / (dm.hi - dm.lo) * m).astype(int), m - 1)
    flat = np.ravel_multi_index(idx.T, (m,) * dm.d)
    counts = np.bincount(flat, minlength=m**dm.d)
    cells = np.stack(np.meshgrid(*([np.arange(m)] * dm.d), indexing="ij"), -1).reshape(-1, dm.d)
    masses = dm.box_mass(edges[cells], edges[cells + 1])
    assert masses.sum() == pytest.approx(1.0, abs=1e-12)
    for c, p in zip(counts, masses):
        pval = stats.binomtest(int(c), n, float(min(max(p, 0.0), 1.0))).pvalue
        assert pval >= 1e-4


def test_bump_subcube_frequencies(rng):
    P = (0.1, 0.2, 0.05, 0.15)
    dm = bump_mixture(BumpMixtureSpec(P, 0.125, 0.125, 1))
    X = dm.sample(100_000, rng)[:, 0]
    for i, p in enumerate(P):
        lo = 0.25 + i * 0.125
        mass = float(dm.box_mass(np.array([lo]), np.array([lo + 0.125])))
        oracle, _ = integrate.quad(lambda x: float(dm.pdf(np.array([x]))), lo, lo + 0.125)
        assert mass == pytest.approx(oracle, abs=1e-10)
        assert mass == pytest.approx(p, abs=1e-12)
        freq = np.mean((X >= lo) & (X < lo + 0.125))
        assert abs(freq - p) <= 4 * math.sqrt(p * (1 - p) / len(X))


def test_rejection_sampler(rng):
    dm = beta_product(2, 2, 1)
    X = rejection_sample(dm.pdf, 1, 0.0, 1.0, 1.5, 20_000, rng)
    assert X.shape == (20_000, 1)
    assert stats.kstest(X[:, 0], stats.beta(2, 2).cdf).pvalue > 1e-4
    with pytest.raises(SamplingError):
        rejection_sample(dm.pdf, 1, 0.0, 1.0, 1e6, 10, rng)


def test_gaussian_and_rescaled():
    g = gaussian(2.0, 1)
    assert not g.bounded_support
    assert g.entropy_truth == pytest.approx(0.5 * math.log(2 * math.pi * math.e * 4.0))
    r = rescaled(beta_product(2, 2, 1), 0.5)
    assert r.entropy_truth == pytest.approx(BETA22_ENTROPY - math.log(2))
    assert (r.lo, r.hi) == (0.0, 0.5)


def test_make_density_roundtrip():
    for dm in ZOO_1D[:5] + [gaussian(1.0, 2)]:
        again = make_density(dm.spec)
        assert again.entropy_truth == pytest.approx(dm.entropy_truth, abs=1e-12)
    assert make_density("uniform_cube").entropy_truth == 0.0
    assert make_density({"kind": "hard_bump_mixture"}).name == "hard_bump_mixture"
    with pytest.raises(DensityError):
        make_density({"kind": "nope"})


def test_density_id_is_stable():
    a = density_id({"kind": "beta_product", "alpha": 2, "beta": 2})
    b = density_id({"beta": 2, "alpha": 2, "kind": "beta_product", "_disjoint": True})
    assert a == b


def test_invalid_specs():
    with pytest.raises(DensityError):
        cosine_bump(1.0)
    with pytest.raises(DensityError):
        bump_mixture(BumpMixtureSpec((0.1, 0.1, 0.1), 0.125, 0.1, 1))
    with pytest.raises(DensityError):
        bump_mixture(BumpMixtureSpec((0.1,) * 4, 0.125, 0.5, 1))
    with pytest.raises(ValueError):
        LipschitzSpec(-1.0, 2.0, 1, 1.0)


def test_hard_density_declares_class():
    dm = hard_bump_mixture()
    assert dm.declared_class == LipschitzSpec(1.0, 2.0, 1, 1.0)
    assert dm.disjoint
    assert dm.sup_norm > 1.0
