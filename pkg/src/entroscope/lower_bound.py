"""Moment-matched prior pairs and two-point constructions.

The central object is a pair of discrete measures on ``[eta, 1]`` with equal
moments ``t^l`` for ``l = -q+1 .. k`` that maximise the gap of
``phi_q(t) = t^{1-q} ln t``; it is obtained from a linear program on a
log-spaced grid.  Tilting by ``(eta/t)^q`` (the lost mass goes to an atom
at zero) shifts the matched range to ``l = 0 .. q+k`` and turns the gap
into a gap of ``t ln t``; a final dilation by ``d3 ln n / n`` maps the
measures to the scale of bin probabilities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import chebyshev as C
from numpy.polynomial.legendre import leggauss
from scipy import stats
from scipy.optimize import linprog

from .densities import Beta1D, DensityModel, LipschitzSpec, Uniform1D

__all__ = [
    "MomentMatchedPriors",
    "LowerBoundError",
    "build_priors",
    "entropy_gap",
    "poisson_mixture_tv",
    "tv_bound",
    "lipschitz_membership_check",
    "MembershipReport",
    "two_point_demo",
    "TwoPointReport",
    "default_eta",
]


class LowerBoundError(RuntimeError):
    """The prior construction failed."""


def default_eta(n: int, d1: float | None = None, d2: float = 4.0, c: float = 1.0) -> float:
    """``eta = d1 / (ln n)^2`` with ``d1 = c / d2^2`` by default."""
    d1 = c / d2**2 if d1 is None else d1
    return d1 / math.log(n) ** 2


@dataclass
class MomentMatchedPriors:
    """Two discrete measures on common atoms, before and after tilt/dilation.

    Attributes
    ----------
    q, k : int
    eta : float
    grid : ndarray
        Base grid on ``[eta, 1]``.
    nu0, nu1 : ndarray
        LP weights on ``grid``.
    lp_objective : float
        ``int phi_q d(nu1 - nu0)``.
    atoms : ndarray
        Support of the final (tilted, dilated) measures; ``atoms[0] == 0``.
    mu0, mu1 : ndarray
        Final weights on ``atoms``.
    dilation : float
    gap : float
        ``int t ln t d(mu1 - mu0)``.
    residuals : dict
        Worst moment mismatches.
    """

    q: int
    k: int
    eta: float
    grid: np.ndarray
    nu0: np.ndarray
    nu1: np.ndarray
    lp_objective: float
    atoms: np.ndarray
    mu0: np.ndarray
    mu1: np.ndarray
    dilation: float
    gap: float = 0.0
    residuals: dict = field(default_factory=dict)

    @classmethod
    def from_atoms(cls, points0, w0, points1, w1) -> "MomentMatchedPriors":
        """Wrap two arbitrary discrete measures (test fixtures, hand examples)."""
        pts = np.union1d(np.asarray(points0, float), np.asarray(points1, float))
        m0 = np.zeros(len(pts))
        m1 = np.zeros(len(pts))
        np.add.at(m0, np.searchsorted(pts, points0), w0)
        np.add.at(m1, np.searchsorted(pts, points1), w1)
        obj = cls(q=0, k=0, eta=float("nan"), grid=pts, nu0=m0, nu1=m1, lp_objective=float("nan"),
                  atoms=pts, mu0=m0, mu1=m1, dilation=1.0)
        obj.gap = entropy_gap(obj)
        return obj

    @property
    def tilted_atoms(self) -> np.ndarray:
        return self.atoms / self.dilation

    def moment(self, l: float, which: int, *, tilted: bool = False) -> float:
        x = self.tilted_atoms if tilted else self.atoms
        w = self.mu1 if which else self.mu0
        return float(math.fsum(w * _pow0(x, l)))

    @property
    def mean(self) -> float:
        return self.moment(1, 0)


def _pow0(x, l):
    """``x^l`` with ``0^0 = 1``."""
    x = np.asarray(x, dtype=float)
    if l == 0:
        return np.ones_like(x)
    return np.where(x > 0, np.abs(x) ** l, 0.0)


def _moment_basis(t, eta, q, k):
    """Well-conditioned basis spanning ``{t^l : l = -q+1 .. k}`` on ``[eta, 1]``."""
    s = 2.0 * (t - eta) / (1.0 - eta) - 1.0
    cols = [C.chebvander(s, k)]
    if q > 1:
        # unscaled negative powers so the LP tolerance bounds the raw moments
        cols.append(np.column_stack([t ** (-j) for j in range(1, q)]))
    return np.concatenate(cols, axis=1)


def build_priors(q: int = 1, k: int = 12, eta: float = 0.05, grid_m: int | None = None,
                 dilation: float = 1.0, *, force_equal: bool = False,
                 tol: float = 1e-10) -> MomentMatchedPriors:
    """Moment-matched prior pair from the discretised dual linear program.

    Parameters
    ----------
    q : int
        Order of the negative powers (``q >= 1``).
    k : int
        Highest matched positive power.
    eta : float
        Left end of the base interval, in ``(0, 1)``.
    grid_m : int, optional
        Grid size, at least ``10 (k + q)``; default ``max(400, 40 (k + q))``.
    dilation : float
        Final scale factor, typically ``d3 ln n / n``.
    force_equal : bool
        Constrain ``nu0 = nu1`` (degenerate check: gap and residuals vanish).
    """
    if q < 1 or k < 0:
        raise ValueError("need q >= 1 and k >= 0")
    if not 0 < eta < 1:
        raise ValueError("eta must lie in (0, 1)")
    if grid_m is None:
        grid_m = max(400, 40 * (k + q))
    if grid_m < 10 * (k + q):
        raise ValueError(f"grid_m must be at least 10 (k + q) = {10 * (k + q)}")
    t = np.geomspace(eta, 1.0, grid_m)
    phi = t ** (1 - q) * np.log(t)
    B = _moment_basis(t, eta, q, k)  # (m, nb)
    m = grid_m
    # variables [nu0, nu1]; maximise phi . (nu1 - nu0)
    cost = np.concatenate([phi, -phi])
    A_eq = [np.concatenate([np.ones(m), np.zeros(m)]), np.concatenate([np.zeros(m), np.ones(m)])]
    b_eq = [1.0, 1.0]
    D = np.concatenate([-B.T, B.T], axis=1)  # moments of nu1 - nu0
    A_ub = np.concatenate([D, -D], axis=0)
    b_ub = np.full(2 * D.shape[0], tol)
    if force_equal:
        A_eq += list(np.concatenate([-np.eye(m), np.eye(m)], axis=1))
        b_eq += [0.0] * m
    res = linprog(cost, A_ub=A_ub, b_ub=b_ub, A_eq=np.array(A_eq), b_eq=np.array(b_eq),
                  bounds=(0, None), method="highs",
                  options={"primal_feasibility_tolerance": 1e-10,
                           "dual_feasibility_tolerance": 1e-10})
    if res.status != 0:
        raise LowerBoundError(f"moment-matching LP failed: {res.message}")
    w0, w1 = _polish(res.x[:m], res.x[m:], B)
    obj = float(math.fsum(phi * (w1 - w0)))
    if not force_equal and not obj > 0:
        raise LowerBoundError("non-positive LP objective; refine the grid")
    return _finish(q, k, eta, t, w0, w1, obj, dilation)


def _polish(w0, w1, B, thresh=1e-13):
    """Least-squares correction on the active support so constraints hold to rounding.

    Falls back to the unmodified weights when the correction is not non-negative.
    """
    active = (w0 > thresh) | (w1 > thresh)
    a0 = np.where(w0 > thresh, w0, 0.0)
    a1 = np.where(w1 > thresh, w1, 0.0)
    idx = np.flatnonzero(active)
    m = len(idx)
    # unknown corrections (x0, x1) on active support
    M = np.zeros((2 + B.shape[1], 2 * m))
    M[0, :m] = 1.0
    M[1, m:] = 1.0
    M[2:, :m] = -B[idx].T
    M[2:, m:] = B[idx].T
    r = np.concatenate([[1.0 - a0.sum(), 1.0 - a1.sum()], -(B.T @ (a1 - a0))])
    for _ in range(2):
        x, *_ = np.linalg.lstsq(M, r, rcond=None)
        a0[idx] += x[:m]
        a1[idx] += x[m:]
        r = np.concatenate([[1.0 - a0.sum(), 1.0 - a1.sum()], -(B.T @ (a1 - a0))])
    if np.any(a0 < 0) or np.any(a1 < 0):
        # the correction would leave the positive cone; the LP weights already
        # satisfy the constraints to the solver tolerance
        return w0, w1
    return a0, a1


def _finish(q, k, eta, t, w0, w1, obj, dilation):
    tilt = (eta / t) ** q
    m0 = w0 * tilt
    m1 = w1 * tilt
    atom0 = 1.0 - math.fsum(m0)
    atom1 = 1.0 - math.fsum(m1)
    support = (w0 > 0) | (w1 > 0)
    base = t[support]
    atoms = np.concatenate([[0.0], base * dilation])
    mu0 = np.concatenate([[atom0], m0[support]])
    mu1 = np.concatenate([[atom1], m1[support]])
    pri = MomentMatchedPriors(q=q, k=k, eta=eta, grid=t, nu0=w0, nu1=w1, lp_objective=obj,
                              atoms=atoms, mu0=mu0, mu1=mu1, dilation=float(dilation))
    pri.gap = entropy_gap(pri)
    pri.residuals = _residuals(pri)
    return pri


def _residuals(p: MomentMatchedPriors) -> dict:
    t = p.grid
    base = max((abs(math.fsum((p.nu1 - p.nu0) * t ** float(l))) for l in range(-p.q + 1, p.k + 1)),
               default=0.0)
    x = p.tilted_atoms
    tilted = max(abs(math.fsum((p.mu1 - p.mu0) * _pow0(x, l))) for l in range(0, p.q + p.k + 1))
    qmom = max(abs(math.fsum(w * _pow0(x, p.q)) - p.eta**p.q) for w in (p.mu0, p.mu1))
    return {"base": base, "tilted": tilted, "q_moment": qmom}


def entropy_gap(priors: MomentMatchedPriors) -> float:
    """``int t ln t d(mu1 - mu0)`` by exact weighted summation."""
    x = np.asarray(priors.atoms, dtype=float)
    tlt = np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0)), 0.0)
    return float(math.fsum(tlt * priors.mu1) - math.fsum(tlt * priors.mu0))


def tv_bound(n: int, q: int, k: int, d3: float = 1.0) -> float:
    """``(2 e d3 ln n / (q + k))^{q + k}``."""
    return (2.0 * math.e * d3 * math.log(n) / (q + k)) ** (q + k)


def poisson_mixture_tv(priors: MomentMatchedPriors, n: int, truncation: int | None = None) -> float:
    """Total variation between ``int Poi(n lambda) mu_i(d lambda)``, ``i = 0, 1``.

    Half the l1 distance of the mixed pmfs on ``{0 .. cutoff}`` plus the
    larger of the two tail masses beyond the cutoff.
    """
    lam = n * np.asarray(priors.atoms, dtype=float)
    lmax = float(lam.max()) if len(lam) else 0.0
    if truncation is None:
        truncation = int(stats.poisson.isf(1e-13, max(lmax, 1e-12))) + 10
    j = np.arange(truncation + 1)
    pmf = stats.poisson.pmf(j[:, None], lam[None, :])
    g0 = pmf @ priors.mu0
    g1 = pmf @ priors.mu1
    tail0 = float(priors.mu0 @ stats.poisson.sf(truncation, lam))
    tail1 = float(priors.mu1 @ stats.poisson.sf(truncation, lam))
    return 0.5 * math.fsum(np.abs(g1 - g0)) + max(tail0, tail1)


# ---------------------------------------------------------------------------
# parameter-space membership


@dataclass
class MembershipReport:
    """Empirical pass rates of the parameter-set conditions under each prior."""

    draws: int
    S: int
    moment_threshold: float
    mass_threshold: float
    alpha: float
    pass_moment: tuple
    pass_mass: tuple
    pass_both: tuple

    def __str__(self):
        return (f"draws={self.draws} S={self.S} alpha={self.alpha:.4g}\n"
                f"  moment condition pass rate (mu0, mu1): {self.pass_moment}\n"
                f"  mass condition pass rate   (mu0, mu1): {self.pass_mass}\n"
                f"  both                       (mu0, mu1): {self.pass_both}")


def lipschitz_membership_check(priors: MomentMatchedPriors, spec: LipschitzSpec, S: int,
                               h: float, n: int, *, draws: int = 2000,
                               rng: np.random.Generator | None = None,
                               C1: float | None = None) -> MembershipReport:
    """Monte Carlo pass rates for the bump-weight vector conditions.

    Draws ``P ~ mu_i^{(x) S}`` and checks

    * ``(1/S) sum p_j^p <= (2 C1 / (n ln n))^p`` with
      ``C1 = (int t^q d mu)^{1/q} n ln n`` unless given, and
    * ``|sum (p_j - alpha)| <= 1 / (n h^d (ln n)^3 ln L)`` with
      ``alpha = int t d mu``.
    """
    rng = rng or np.random.default_rng(0)
    ln = math.log(n)
    p = spec.p
    d = spec.d
    if C1 is None:
        q = max(priors.q, 1)
        C1 = max(priors.moment(q, i) ** (1.0 / q) for i in (0, 1)) * n * ln
    mom_thr = (2.0 * C1 / (n * ln)) ** p
    lnL = math.log(spec.L)
    mass_thr = math.inf if lnL <= 0 else 1.0 / (n * h**d * ln**3 * lnL)
    alpha = priors.moment(1, 0)
    rates_m, rates_s, rates_b = [], [], []
    # P ~ mu^{(x) S} enters both conditions only through the atom counts,
    # which are multinomial; sampling those is exact and O(atoms) per draw
    xp = _pow0(priors.atoms, p)
    for w in (priors.mu0, priors.mu1):
        counts = rng.multinomial(S, w / w.sum(), size=draws)
        ok_m = counts @ xp / S <= mom_thr * (1 + 1e-12)
        ok_s = np.abs(counts @ priors.atoms - S * alpha) <= mass_thr
        rates_m.append(float(ok_m.mean()))
        rates_s.append(float(ok_s.mean()))
        rates_b.append(float((ok_m & ok_s).mean()))
    return MembershipReport(draws, S, mom_thr, mass_thr, alpha, tuple(rates_m), tuple(rates_s),
                            tuple(rates_b))


# ---------------------------------------------------------------------------
# two-point construction


@dataclass
class TwoPointReport:
    A: float
    eps: float
    chi2: float
    chi2_bound: float
    H0: float
    H1: float
    separation: float
    reference: float

    @property
    def ok(self) -> bool:
        return self.chi2 <= self.chi2_bound + 1e-10

    @property
    def normalised_separation(self) -> float:
        """Separation over ``ln A / sqrt(n)``-type reference (0 when A = 1)."""
        return self.separation / self.reference if self.reference > 0 else 0.0

    def __str__(self):
        return (f"A={self.A:.6g} eps={self.eps:.3g} chi2={self.chi2:.6g} (bound {self.chi2_bound:.3g}) "
                f"|H0-H1|={self.separation:.6g} ref={self.reference:.6g}")


def _base_and_dilation(A, d):
    """``f``: half uniform, half bump on ``[1/4, 3/4]^d``; ``g``: centred A-dilation."""
    def model(lo, hi):
        comps = (tuple(Uniform1D(lo, hi) for _ in range(d)),
                 tuple(Beta1D(3.0, 3.0, lo, hi) for _ in range(d)))
        return DensityModel(name="two_point", d=d, weights=np.array([0.5, 0.5]), components=comps)

    f = model(0.25, 0.75)
    half = 0.25 / A
    g = model(0.5 - half, 0.5 + half)
    return f, g


def _gl_tensor(breaks, d, nodes=24):
    xg, wg = leggauss(nodes)
    pts, wts = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        pts.append(0.5 * (b - a) * xg + 0.5 * (a + b))
        wts.append(0.5 * (b - a) * wg)
    p1 = np.concatenate(pts)
    w1 = np.concatenate(wts)
    if d == 1:
        return p1[:, None], w1
    P = np.stack(np.meshgrid(*([p1] * d), indexing="ij"), -1).reshape(-1, d)
    W = np.prod(np.stack(np.meshgrid(*([w1] * d), indexing="ij"), -1).reshape(-1, d), axis=1)
    return P, W


def two_point_demo(L: float, n: int, *, s: float = 1.0, d: int = 1, eps: float | None = None,
                   A: float | None = None) -> TwoPointReport:
    """Two nearby mixtures ``f0 = (f+g)/2`` and ``f1 = ((1-eps) f + (1+eps) g)/2``.

    ``A = min(L^{1/(s+d)}, n^{1/(4d)})`` and ``eps = 1/sqrt(n)`` unless given.
    Chi-square divergence and both entropies are computed by piecewise
    Gauss-Legendre quadrature on the breakpoints of ``f`` and ``g``.
    """
    if A is None:
        A = min(L ** (1.0 / (s + d)), n ** (1.0 / (4 * d)))
    if A < 1:
        raise ValueError("dilation factor must be at least 1")
    eps = 1.0 / math.sqrt(n) if eps is None else float(eps)
    f, g = _base_and_dilation(A, d)
    half = 0.25 / A
    breaks = np.unique([0.25, 0.5 - half, 0.5 + half, 0.75])
    P, W = _gl_tensor(breaks, d)
    fv, gv = f.pdf(P), g.pdf(P)
    f0 = 0.5 * (fv + gv)
    f1 = 0.5 * (1 - eps) * fv + 0.5 * (1 + eps) * gv
    chi2 = float(math.fsum(W * (f1 - f0) ** 2 / f0))

    def ent(v):
        return -math.fsum(W * np.where(v > 0, v * np.log(np.where(v > 0, v, 1.0)), 0.0))

    H0, H1 = ent(f0), ent(f1)
    ref = math.log(A) / math.sqrt(n)
    return TwoPointReport(A=float(A), eps=eps, chi2=chi2, chi2_bound=eps**2, H0=H0, H1=H1,
                          separation=abs(H0 - H1), reference=ref)
