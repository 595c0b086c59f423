"""Stationary determinantal point processes on bounded windows:
simulation, approximate maximum-likelihood inference, and exact lattice
oracles."""

from .errors import (DegeneratePattern, DppError, EigenFailure,
                     EmptyInteriorPool, ExistenceViolated,
                     NoFiniteObjective, PointOutsideWindow,
                     QuadratureFailure, RejectionStall, SaturatedSpectrum,
                     SingularL0Matrix, SpectrumAtOne, TruncationOverflow,
                     WindowNotRect)
from .families import (FAMILIES, GridKernel, KernelModel, alpha_max,
                       bessel_support_radius, discretize, kernel,
                       kernel_radial, max_intensity, spectral_density,
                       spectral_density_radial)
from .geometry import (CompositeWindow, DistanceMatrix, ObservationWindow,
                       PointPattern, Rect, boundary_distance, pairwise,
                       pairwise_torus, parse_window_spec, read_pattern,
                       rshape, write_pattern)
from .likelihood import (LikelihoodEvaluation, edge_correct_distances,
                         fredholm_integral, loglik_edge_corrected,
                         loglik_fourier, loglik_plain, loglik_torus)
from .sampling import (GridProjectionSampler, SpectralSampler,
                       sample_binomial, sample_dpp, sample_dpp_window,
                       sample_grid_dpp, sample_poisson)
from .inference import (ContrastSettings, FitResult, Undefined,
                        confidence_interval_alpha, estimate_rho, fit_alpha,
                        fit_mce, model_pcf, model_ripley_k,
                        observed_information, pcf_estimate,
                        ripley_k_estimate)
from .discrete import (FiniteOperator, box_sites, exact_loglik,
                       fredholm_convergence, lattice_l0_matrix,
                       lattice_l0_table, stochastic_convergence)
from .bench import BenchSpec, emit_plotdata, likelihood_curve, run_bench

__version__ = "0.1.0"

__all__ = [
    "BenchSpec",
    "CompositeWindow",
    "ContrastSettings",
    "DegeneratePattern",
    "DistanceMatrix",
    "DppError",
    "EigenFailure",
    "EmptyInteriorPool",
    "ExistenceViolated",
    "FAMILIES",
    "FiniteOperator",
    "FitResult",
    "GridKernel",
    "GridProjectionSampler",
    "KernelModel",
    "LikelihoodEvaluation",
    "NoFiniteObjective",
    "ObservationWindow",
    "PointOutsideWindow",
    "PointPattern",
    "QuadratureFailure",
    "Rect",
    "RejectionStall",
    "SaturatedSpectrum",
    "SingularL0Matrix",
    "SpectralSampler",
    "SpectrumAtOne",
    "TruncationOverflow",
    "Undefined",
    "WindowNotRect",
    "alpha_max",
    "bessel_support_radius",
    "boundary_distance",
    "box_sites",
    "confidence_interval_alpha",
    "discretize",
    "edge_correct_distances",
    "emit_plotdata",
    "estimate_rho",
    "exact_loglik",
    "fit_alpha",
    "fit_mce",
    "fredholm_convergence",
    "fredholm_integral",
    "kernel",
    "kernel_radial",
    "lattice_l0_matrix",
    "lattice_l0_table",
    "likelihood_curve",
    "loglik_edge_corrected",
    "loglik_fourier",
    "loglik_plain",
    "loglik_torus",
    "max_intensity",
    "model_pcf",
    "model_ripley_k",
    "observed_information",
    "pairwise",
    "pairwise_torus",
    "parse_window_spec",
    "pcf_estimate",
    "read_pattern",
    "ripley_k_estimate",
    "rshape",
    "run_bench",
    "sample_binomial",
    "sample_dpp",
    "sample_dpp_window",
    "sample_grid_dpp",
    "sample_poisson",
    "spectral_density",
    "spectral_density_radial",
    "stochastic_convergence",
    "write_pattern",
]
