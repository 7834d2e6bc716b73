"""Wavelet log-scale-spectrum estimation of the Hurst parameter."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigurationError, DataError, DegenerateInputError, DomainError, FitError,
    HurstScaleError, InputError, NumericError,
)
from .estimator import EstimatorConfig, HurstEstimate, estimate_batch, estimate_segment, gls_fit, hurst_from_slope  # noqa: E402
from .segmentation import (  # noqa: E402
    apply_filter, build_filter, empirical_variogram, filter_slopes, fit_variogram,
    multi_resolution_comparison, segment_series, slope_series,
)
from .series import TimeSeries  # noqa: E402
from .spectrum import K, covariance_model, expected_log_spectrum, scale_spectrum  # noqa: E402
from .synth import FbmSpec, VolatilityEnvelope, fgn_covariance, generate_fbm, geometric_fbm_path  # noqa: E402
from .wavelet import (  # noqa: E402
    daubechies_filters, decompose_step, direct_detail_oracle, full_decomposition,
    initialize_approximation, reconstruct_step, scaling_samples,
)

__all__ = [
    "__version__",
    "ConfigurationError",
    "DataError",
    "DegenerateInputError",
    "DomainError",
    "FitError",
    "HurstScaleError",
    "InputError",
    "NumericError",
    "EstimatorConfig",
    "HurstEstimate",
    "estimate_batch",
    "estimate_segment",
    "gls_fit",
    "hurst_from_slope",
    "apply_filter",
    "build_filter",
    "empirical_variogram",
    "filter_slopes",
    "fit_variogram",
    "multi_resolution_comparison",
    "segment_series",
    "slope_series",
    "TimeSeries",
    "K",
    "covariance_model",
    "expected_log_spectrum",
    "scale_spectrum",
    "FbmSpec",
    "VolatilityEnvelope",
    "fgn_covariance",
    "generate_fbm",
    "geometric_fbm_path",
    "daubechies_filters",
    "decompose_step",
    "direct_detail_oracle",
    "full_decomposition",
    "initialize_approximation",
    "reconstruct_step",
    "scaling_samples",
]
