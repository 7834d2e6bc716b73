"""
Scale spectrum of a detail pyramid and the fBm reference quantities.

``S_j`` is the mean of the squared detail coefficients at scale ``j``. For fBm
``log2 S_j`` is affine in ``j`` with slope ``2H + 1`` and intercept
``log2(sigma**2 K(H))``.
"""

import csv
import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DegenerateInputError, DomainError, InputError

DEFAULT_MIN_COEFFS = 8
DEFAULT_J_MIN = 4


@dataclass
class ScaleSpectrum:
    S: np.ndarray
    logS: np.ndarray
    counts: np.ndarray
    scale_range: tuple

    @property
    def scales(self):
        return np.arange(self.scale_range[0], self.scale_range[1] + 1)

    def rows(self):
        """Plot-ready rows ``(j, N_j, S_j, log2_S_j)``."""
        return [
            {"j": int(j), "N_j": int(n), "S_j": float(s), "log2_S_j": float(ls)}
            for j, n, s, ls in zip(self.scales, self.counts, self.S, self.logS)
        ]


@dataclass
class CovarianceModel:
    mode: str
    D: np.ndarray
    diag_factor: float = 1.0


def default_scale_range(counts, min_coeffs=DEFAULT_MIN_COEFFS, j_min=DEFAULT_J_MIN):
    """``(j_min, j_max)`` with ``j_max`` the coarsest scale holding ``min_coeffs`` coefficients."""
    usable = [j for j, n in enumerate(counts, start=1) if n >= min_coeffs]
    if not usable or max(usable) < j_min:
        raise ConfigurationError(
            f"no scale >= {j_min} has {min_coeffs} coefficients (counts {list(counts)})"
        )
    return j_min, max(usable)


def scale_spectrum(pyramid, scale_range=None, min_coeffs=DEFAULT_MIN_COEFFS, floor=0.0):
    """Per-scale empirical variances of the detail coefficients.

    Parameters
    ----------
    pyramid : DetailPyramid
    scale_range : (int, int), optional
        Inclusive ``(j_min, j_max)``; defaults to :func:`default_scale_range`.
    min_coeffs : int
        Smallest admissible number of coefficients at a used scale.
    floor : float
        Variances at or below this level count as zero (rounding noise of an
        annihilated polynomial).
    """
    counts = pyramid.counts
    if scale_range is None:
        scale_range = default_scale_range(counts, min_coeffs)
    j_lo, j_hi = int(scale_range[0]), int(scale_range[1])
    if not 1 <= j_lo <= j_hi <= len(counts):
        raise ConfigurationError(f"scale range {scale_range} outside 1..{len(counts)}")
    used = counts[j_lo - 1:j_hi]
    if min(used) < min_coeffs:
        raise ConfigurationError(
            f"scale range {scale_range} includes scales with fewer than {min_coeffs} coefficients: {used}"
        )
    S = np.array([np.mean(pyramid.detail(j) ** 2, axis=-1) for j in range(j_lo, j_hi + 1)])
    S = np.moveaxis(S, 0, -1)
    if np.any(~(S > floor)) or not np.all(np.isfinite(S)):
        raise DegenerateInputError("zero or non-finite detail variance at some scale (constant or polynomial input?)")
    return ScaleSpectrum(S=S, logS=np.log2(S), counts=np.array(used), scale_range=(j_lo, j_hi))


def K(H):
    """Second-moment constant of fBm detail coefficients, ``E d_j^2 = K(H) 2**((2H+1) j)``."""
    if not 0.0 < H <= 1.0:
        raise DomainError(f"K(H) needs H in (0, 1], got {H}")
    return (1.0 - 2.0 ** (-2.0 * H)) / ((2.0 * H + 1.0) * (2.0 * H + 2.0))


def expected_log_spectrum(H, sigma, j):
    """Asymptotic mean ``log2(sigma**2 K(H)) + j (2H + 1)``."""
    if sigma <= 0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    return np.log2(sigma ** 2 * K(H)) + np.asarray(j, dtype=float) * (2.0 * H + 1.0)


def covariance_model(counts, mode="diagonal", c_d=2.0):
    """Normalised covariance of ``log2 S_j`` across the used scales.

    ``diagonal`` uses ``D_jj = 1/N_j``. ``full`` uses ``1/sqrt(N_j N_i)``
    off the diagonal and ``c_d/N_j`` on it; with ``c_d = 1`` that matrix is a
    rank-one outer product, so ``c_d`` must exceed 1.
    """
    n = np.asarray(counts, dtype=float)
    if n.ndim != 1 or n.size == 0 or np.any(n <= 0):
        raise InputError("coefficient counts must be a non-empty vector of positive numbers")
    if mode == "diagonal":
        return CovarianceModel("diagonal", np.diag(1.0 / n), 1.0)
    if mode != "full":
        raise ConfigurationError(f"covariance mode must be 'diagonal' or 'full', got {mode!r}")
    if not c_d > 1.0:
        raise ConfigurationError(f"full covariance needs a diagonal factor c_d > 1, got {c_d}")
    v = 1.0 / np.sqrt(n)
    D = np.outer(v, v)
    D[np.diag_indices_from(D)] = c_d / n
    try:
        np.linalg.cholesky(D)
    except np.linalg.LinAlgError:
        raise ConfigurationError(f"full covariance with c_d={c_d} is not positive definite") from None
    if np.linalg.eigvalsh(D).min() <= 1e-14 * np.abs(D).max():
        raise ConfigurationError(f"full covariance with c_d={c_d} is numerically singular")
    return CovarianceModel("full", D, float(c_d))


def write_spectrum_csv(path, spectrum):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["j", "N_j", "S_j", "log2_S_j"])
        writer.writeheader()
        for row in spectrum.rows():
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})


def read_spectrum_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    j = np.array([int(r["j"]) for r in rows])
    return ScaleSpectrum(
        S=np.array([float(r["S_j"]) for r in rows]),
        logS=np.array([float(r["log2_S_j"]) for r in rows]),
        counts=np.array([int(r["N_j"]) for r in rows]),
        scale_range=(int(j.min()), int(j.max())),
    )


def spectrum_to_json(spectrum):
    return json.dumps({"scale_range": list(spectrum.scale_range), "rows": spectrum.rows()})
