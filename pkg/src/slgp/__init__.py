"""Density-field estimation with finite-rank spatial logistic Gaussian processes."""

from .density import (DensitySlice, QuadratureGrid, build_grid, normalize_log_density,
                      slogt_field, slogt_values, summarize)
from .inference import (Dataset, HyperGrid, MCMCConfig, PosteriorSamples, hyper_grid_search,
                        log_posterior_and_grad, map_estimate, pcn_sample, predict_density)
from .kernels import (DomainSpec, KernelSpec, canonical_semidistance, eval_kernel,
                      increment_kernel, spectral_sample)
from .metrics import MetricKind, check_hellinger_bound, divergence, integrated_hellinger
from .rates import (RateExperiment, fit_rate_slope, simulate_mean_power, theoretical_rate)
from .rff import RFFBasis, approx_kernel, build_basis, eval_features, gp_eval

__version__ = "0.1.0"
