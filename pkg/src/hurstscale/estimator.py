"""
Generalised-least-squares fit of the log-scale spectrum and the Hurst estimate.
"""

import logging
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from . import spectrum as spec_mod
from .errors import ConfigurationError, InputError
from .series import as_array
from .wavelet import daubechies_filters, full_decomposition, max_levels, scaling_samples

logger = logging.getLogger(__name__)

LN2 = np.log(2.0)


class HurstRangeWarning(UserWarning):
    """Slope maps to a Hurst value outside (0, 1]."""


@dataclass
class EstimatorConfig:
    """Knobs of the single-segment estimator.

    ``detrend`` subtracts the chord through the first and last samples before
    the periodic transform. That removes the wrap-around jump (which would
    otherwise dominate the coarse scales) and, with p >= 2, leaves interior
    detail coefficients untouched.

    ``j_min = 4``: on sampled data the scaling-sum initialisation inflates the
    three finest scales and biases the slope low.

    ``variance_inflation`` multiplies the GLS covariance in the reported
    variance. ``Var(S_j)/E(S_j)**2 = l/N_j`` with ``l = 2`` for Gaussian,
    uncorrelated coefficients; the bare ``(X' D^-1 X)^-1`` assumes ``l = 1``.
    """

    p: int = 2
    j_min: int = spec_mod.DEFAULT_J_MIN
    j_max: int = None
    min_coeffs: int = spec_mod.DEFAULT_MIN_COEFFS
    boundary: str = "periodic"
    covariance: str = "diagonal"
    c_d: float = 2.0
    detrend: bool = True
    variance_inflation: float = 2.0

    def validate(self):
        daubechies_filters(self.p)
        if self.boundary not in ("periodic", "valid"):
            raise ConfigurationError(f"unknown boundary {self.boundary!r}")
        if self.covariance not in ("diagonal", "full"):
            raise ConfigurationError(f"unknown covariance mode {self.covariance!r}")
        if self.covariance == "full" and not self.c_d > 1.0:
            raise ConfigurationError(f"full covariance needs c_d > 1, got {self.c_d}")
        if self.j_min < 1 or (self.j_max is not None and self.j_max < self.j_min + 1):
            raise ConfigurationError(f"scale range ({self.j_min}, {self.j_max}) needs at least two scales")
        if self.variance_inflation <= 0:
            raise ConfigurationError("variance_inflation must be positive")
        if self.min_coeffs < 1:
            raise ConfigurationError("min_coeffs must be positive")
        return self


@dataclass
class DesignMatrix:
    X: np.ndarray

    @classmethod
    def from_scales(cls, scales):
        scales = np.asarray(scales, dtype=float)
        if np.unique(scales).size < 2:
            raise InputError("design matrix needs at least two distinct scales")
        return cls(np.column_stack([np.ones_like(scales), scales]))


@dataclass
class HurstEstimate:
    c: float
    h: float
    H: float
    variance: float
    scale_range: tuple
    n_points: int
    var_h: float = None

    def to_dict(self):
        d = asdict(self)
        d["scale_range"] = list(self.scale_range)
        return d


def gls_fit(M, D, X):
    """GLS estimate ``b = (X' D^-1 X)^-1 X' D^-1 M`` of ``(c, h)``.

    Parameters
    ----------
    M : array, shape (n_scales,) or (batch, n_scales)
        log2 spectrum values.
    D : CovarianceModel or array
    X : DesignMatrix or array

    Returns
    -------
    c, h, cov
        ``cov = (X' D^-1 X)^-1 / ln(2)**2``, the parameter covariance.
    """
    D = np.asarray(D.D if isinstance(D, spec_mod.CovarianceModel) else D, dtype=float)
    X = np.asarray(X.X if isinstance(X, DesignMatrix) else X, dtype=float)
    M = np.asarray(M, dtype=float)
    if X.ndim != 2 or X.shape[1] != 2 or D.shape != (X.shape[0], X.shape[0]) or M.shape[-1] != X.shape[0]:
        raise InputError(f"shape mismatch: M {M.shape}, D {D.shape}, X {X.shape}")
    Dinv_X = np.linalg.solve(D, X)
    info = X.T @ Dinv_X
    if np.linalg.matrix_rank(info) < 2:
        raise InputError("X' D^-1 X is singular (fewer than two distinct scales)")
    beta = np.linalg.solve(info, Dinv_X.T @ M.T).T
    cov = np.linalg.inv(info) / LN2 ** 2
    return beta[..., 0], beta[..., 1], cov


def hurst_from_slope(h, var_h=None):
    """``H = (h - 1)/2`` and, if given, ``Var(H) = Var(h)/4``.

    Values of ``h`` outside (1, 3) are reported unchanged with a warning.
    """
    h_arr = np.asarray(h, dtype=float)
    if np.any((h_arr <= 1.0) | (h_arr > 3.0)):
        warnings.warn(f"slope {h} maps to H outside (0, 1]", HurstRangeWarning, stacklevel=2)
    H = (h_arr - 1.0) / 2.0
    H = float(H) if H.ndim == 0 else H
    if var_h is None:
        return H
    return H, var_h / 4.0


def _chord_detrend(f):
    n = f.shape[-1]
    ramp = np.arange(n) / (n - 1)
    return f - f[..., :1] - (f[..., -1:] - f[..., :1]) * ramp


def _degeneracy_floor(f):
    return (1e-10 * np.max(np.abs(f))) ** 2


def log_spectrum(series, config=None):
    """Run initialisation, pyramid and scale spectrum for one segment (or a stack)."""
    config = (config or EstimatorConfig()).validate()
    f = as_array(series)
    if f.shape[-1] < 2:
        raise InputError("segment too short")
    floor = _degeneracy_floor(f)
    if config.detrend:
        f = _chord_detrend(f)
    filters = daubechies_filters(config.p)
    phi = scaling_samples(filters)
    n0 = f.shape[-1] if config.boundary == "periodic" else f.shape[-1] - len(phi.values) + 1
    levels = max_levels(n0, filters, config.boundary)
    j_max = config.j_max
    if j_max is None:
        pyramid = full_decomposition(f, filters, levels, config.boundary, phi)
        j_lo, j_hi = spec_mod.default_scale_range(pyramid.counts, config.min_coeffs, config.j_min)
    else:
        if j_max > levels:
            raise ConfigurationError(f"j_max={j_max} exceeds the {levels} levels available")
        pyramid = full_decomposition(f, filters, j_max, config.boundary, phi)
        j_lo, j_hi = config.j_min, j_max
    if j_hi - j_lo < 1:
        raise ConfigurationError(f"scale range ({j_lo}, {j_hi}) needs at least two scales")
    return spec_mod.scale_spectrum(pyramid, (j_lo, j_hi), config.min_coeffs, floor=floor)


def fit_spectrum(spectrum, config=None):
    """GLS fit of a :class:`ScaleSpectrum`; returns ``(c, h, cov)``."""
    config = config or EstimatorConfig()
    D = spec_mod.covariance_model(spectrum.counts, config.covariance, config.c_d)
    X = DesignMatrix.from_scales(spectrum.scales)
    return gls_fit(spectrum.logS, D, X)


def estimate_segment(series, config=None):
    """Hurst estimate for one segment.

    Chains the scaling-sum initialisation, the periodic pyramid, the scale
    spectrum over the configured scale band, the GLS fit and the slope-to-H
    map.

    Raises
    ------
    DegenerateInputError
        If some used scale has (numerically) zero detail variance.
    """
    config = (config or EstimatorConfig()).validate()
    f = as_array(series)
    if f.ndim != 1:
        raise InputError("estimate_segment takes a single series; use estimate_batch for stacks")
    spectrum = log_spectrum(f, config)
    c, h, cov = fit_spectrum(spectrum, config)
    var_h = config.variance_inflation * float(cov[1, 1])
    H, var_H = hurst_from_slope(float(h), var_h)
    return HurstEstimate(
        c=float(c), h=float(h), H=H, variance=var_H,
        scale_range=spectrum.scale_range, n_points=int(f.shape[-1]), var_h=var_h,
    )


def estimate_batch(paths, config=None):
    """Vectorised estimates for a ``(batch, N)`` stack of equal-length series.

    Returns a dict of arrays ``c, h, H`` plus the shared ``var_H`` and
    ``scale_range``.
    """
    config = (config or EstimatorConfig()).validate()
    f = np.atleast_2d(np.asarray(paths, dtype=float))
    spectrum = log_spectrum(f, config)
    c, h, cov = fit_spectrum(spectrum, config)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", HurstRangeWarning)
        H = hurst_from_slope(h)
    return {"c": c, "h": h, "H": H, "var_H": config.variance_inflation * cov[1, 1] / 4.0, "scale_range": spectrum.scale_range}
