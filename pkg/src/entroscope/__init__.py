"""Differential entropy estimation over Lipschitz balls."""

from .baselines import (discrete_reduction_entropy, plugin_bandwidth, plugin_entropy,
                        resubstitution_entropy)
from .bench import fit_rate, load_config, run_bench
from .densities import (DensityModel, LipschitzSpec, beta_product, bump_mixture, cosine_bump,
                        gaussian, hard_bump_mixture, make_density, uniform_cube)
from .estimator import (EstimateResult, EstimatorConfig, OrliczTail, estimate_entropy,
                        estimate_entropy_unbounded, select_parameters)
from .kernels import BoundaryMode, Kernel, kde
from .lower_bound import build_priors, poisson_mixture_tv, two_point_demo
from .oracle import fisher_information, fisher_probe, quadrature_entropy
from .poly_approx import PolyApprox, remez_minimax

__version__ = "0.1.0"

__all__ = [
    "BoundaryMode", "DensityModel", "EstimateResult", "EstimatorConfig", "Kernel",
    "LipschitzSpec", "OrliczTail", "PolyApprox", "beta_product", "build_priors", "bump_mixture",
    "cosine_bump", "discrete_reduction_entropy", "estimate_entropy", "estimate_entropy_unbounded",
    "fisher_information", "fisher_probe", "fit_rate", "gaussian", "hard_bump_mixture", "kde",
    "load_config", "make_density", "plugin_bandwidth", "plugin_entropy", "poisson_mixture_tv",
    "quadrature_entropy", "remez_minimax", "resubstitution_entropy", "run_bench",
    "select_parameters", "two_point_demo", "uniform_cube",
]
