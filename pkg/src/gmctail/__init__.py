"""Simulation and estimation tools for tails of subcritical Gaussian multiplicative chaos."""
__version__ = "0.1.0"

from .field import (DomainSpec, Grid, KernelSpec, CovarianceMatrix, Factor, FieldEnsemble,
                    SpectralDecomposition, JitterPolicy, evaluate_kernel_matrix, pd_probe, factorize,
                    sample_fields, decompose_kernel, cameron_martin_mean)
from .chaos import (GmcEnsemble, RegionMask, WeightFunction, gmc_weights, region_mass,
                    singular_mass, rooted_mass_samples, moment_estimate, stream_masses)
from .tails import TailEstimate, hill_estimator, tail_coefficient_fit, product_tail_constant
from .renewal import GoldieProblem, goldie_constant, goldie_condition_report
from .tauberian import laplace_tail_coefficient, log_laplace_coefficient, lap_co_asymptote
from .reflection import (ReflectionEstimate, TailPrediction, scaling_transport,
                         reflection_coeff_scaling, reflection_coeff_log_laplace,
                         closed_form_coefficient, fyodorov_bouchard_coefficient, tail_prefactor,
                         localised_laplace_probe, compare_empirical_vs_predicted)
from .diagnostics import KsReport, ks_two_sample, kahane_convex_order_check, seiberg_moment_scan
from ._validation import IndefiniteCovarianceError, DegenerateSampleError, InsufficientTailError
