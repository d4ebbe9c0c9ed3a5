"""Multivariate fractional Brownian motion: exact synthesis and full
parameter identification from one discretely sampled path."""

__version__ = "0.1.0"

from .asymptotics import (ConfidenceIntervals, HCltCovariance, SigmaMatrix,
                          confidence_intervals, h_clt_covariance,
                          sigma_matrix)
from .errors import (AdmissibilityError, DegenerateFilterError,
                     DimensionError, EstimationError, InsufficientDataError,
                     MfbmError, SynthesisError, UnsupportedCaseError)
from .estimation import (EstimationConfig, EstimationResult, MomentVector,
                         compute_moment_vector, default_config, empirical_cov,
                         estimate_all, estimate_from_moments,
                         theoretical_moment_vector, theta_from_params)
from .filtering import (DilatedFilter, Filter, FilteredSeries, apply_filter,
                        dilate, filter_from_taps, make_filter, pi_a,
                        summability_order, theoretical_filtered_cov)
from .model import (MfbmParams, ValidityReport, cross_cov, existence_matrix,
                    increment_cov, increment_cov_asymptote, validate, w_func)
from .networks import (GraphSpec, correlation_from_graph, partial_correlation,
                       watts_strogatz)
from .synthesis import (CirculantSampler, ExactSampler, SamplePath,
                        build_path_covariance, read_path, read_path_binary,
                        read_path_csv, replication_seed, sample_exact,
                        sample_increments_circulant, write_path_binary,
                        write_path_csv)

__all__ = [name for name in dir() if not name.startswith("_")]
