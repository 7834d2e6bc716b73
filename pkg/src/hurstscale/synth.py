"""
Synthetic test data: exact fractional Gaussian noise by circulant embedding,
fBm paths, and geometric-fBm price paths with volatility envelopes.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DomainError, NumericError
from .series import TimeSeries

logger = logging.getLogger(__name__)

ENVELOPE_KINDS = ("constant", "periodic", "log_shift", "xlogx", "quadratic", "wiener")
TRADING_DAY_MINUTES = 390


@dataclass(frozen=True)
class FbmSpec:
    H: float
    N: int
    seed: int = 0
    dt: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.H < 1.0:
            raise DomainError(f"Hurst parameter must lie in (0, 1), got {self.H}")
        if self.N < 2:
            raise ConfigurationError(f"path length must be >= 2, got {self.N}")
        if self.dt <= 0:
            raise ConfigurationError(f"sample spacing must be positive, got {self.dt}")


@dataclass(frozen=True)
class VolatilityEnvelope:
    """Multiplicative volatility envelope ``g(x)``.

    ``x`` is the sample index divided by ``scale``; ``offset`` is the shift
    ``b`` of the ``(x+b)`` family. Kinds:

    - ``constant``:  ``A``
    - ``periodic``:  ``A (b + u**2)`` with ``u = 2 frac(x/P) - 1``, a U-shape
      repeating every ``period`` samples (one trading day by default)
    - ``log_shift``: ``A log(x+b)``
    - ``xlogx``:     ``A (x+b) log(x+b)``
    - ``quadratic``: ``A (x+b)**2``
    - ``wiener``:    ``A (b + W(x) - min W)``, a seeded Brownian path shifted positive
    """

    kind: str = "constant"
    amplitude: float = 1.0
    period: float = TRADING_DAY_MINUTES
    offset: float = 2.0
    scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ENVELOPE_KINDS:
            raise ConfigurationError(f"envelope kind must be one of {ENVELOPE_KINDS}, got {self.kind!r}")
        if self.amplitude <= 0 or self.scale <= 0 or self.period <= 0:
            raise ConfigurationError("envelope amplitude, scale and period must be positive")


@dataclass
class PricePath:
    """``log_path`` is ``Y_t = log(P_t / P_0)``; prices are derived on demand.

    Extreme envelopes can push ``exp(Y)`` past the float range, so estimation
    should always work from ``log_path``.
    """

    log_path: np.ndarray
    p0: float = 1.0
    meta: dict = field(default_factory=dict)

    @property
    def prices(self):
        with np.errstate(over="ignore"):
            return self.p0 * np.exp(self.log_path)


def fgn_covariance(k, H):
    """Autocovariance of unit-variance fractional Gaussian noise at lag ``k``."""
    if not 0.0 < H < 1.0:
        raise DomainError(f"Hurst parameter must lie in (0, 1), got {H}")
    k = np.abs(np.asarray(k, dtype=float))
    two_h = 2.0 * H
    return 0.5 * (np.abs(k + 1) ** two_h - 2.0 * k ** two_h + np.abs(k - 1) ** two_h)


def fbm_covariance(t, s, H):
    """Covariance ``E[B(t) B(s)]`` of standard fBm."""
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    two_h = 2.0 * H
    return 0.5 * (np.abs(t) ** two_h + np.abs(s) ** two_h - np.abs(t - s) ** two_h)


def _embedding_eigenvalues(n, H, size):
    # first row of a circulant of length 2*size containing the fGn covariance
    lags = np.arange(size + 1)
    gamma = fgn_covariance(lags, H)
    row = np.concatenate([gamma, gamma[-2:0:-1]])
    return np.fft.fft(row).real


def generate_fgn(H, n, rng, size=None, max_doublings=4, tol=1e-10):
    """Exact fractional Gaussian noise of length ``n`` (Davies-Harte).

    The fGn covariance is embedded in a circulant matrix of size ``2*m``
    with ``m >= n``; its eigenvalues come from one FFT, and the noise is the
    real part of the FFT of complex Gaussian weights scaled by their square
    roots. If an eigenvalue is negative beyond ``tol`` the embedding is
    doubled, up to ``max_doublings`` times.
    """
    m = n if size is None else size
    for _ in range(max_doublings + 1):
        lam = _embedding_eigenvalues(n, H, m)
        if lam.min() >= -tol * lam.max():
            break
        logger.debug("circulant embedding of size %d not PSD, doubling", 2 * m)
        m *= 2
    else:
        raise NumericError(f"circulant embedding has negative eigenvalues (min {lam.min():.3e})")
    lam = np.clip(lam, 0.0, None)
    size2 = lam.shape[0]
    z = rng.standard_normal(size2) + 1j * rng.standard_normal(size2)
    w = np.fft.fft(np.sqrt(lam / size2) * z)
    # real and imaginary parts are independent exact draws; the real part is used
    return w.real[:n]


def generate_fbm(spec):
    """Exact fBm path ``B(0)=0, B(1), ..., B(N-1)`` as a :class:`TimeSeries`.

    Increments are unit-variance fGn scaled by ``dt**H``.
    """
    rng = np.random.default_rng(spec.seed)
    inc = generate_fgn(spec.H, spec.N - 1, rng) * spec.dt ** spec.H
    path = np.concatenate([[0.0], np.cumsum(inc)])
    return TimeSeries(path, dt=spec.dt, meta={"H": spec.H, "seed": spec.seed, "kind": "fbm"})


def _wiener_levels(env, x):
    grid_max = int(np.ceil(x.max())) + 1 if x.size else 1
    rng = np.random.default_rng(env.seed)
    w = np.concatenate([[0.0], np.cumsum(rng.standard_normal(grid_max))])
    # linear interpolation between integer knots of the rescaled time axis
    return np.interp(x, np.arange(grid_max + 1), w), w.min()


def envelope_value(env, x):
    """Evaluate the envelope at (scalar or array) sample offsets ``x >= 0``."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("envelope time must be non-negative")
    u = x / env.scale
    b = env.offset
    A = env.amplitude
    kind = env.kind
    if kind == "constant":
        val = np.full_like(u, A)
    elif kind == "periodic":
        frac = np.mod(x / env.period, 1.0)
        val = A * (b + (2.0 * frac - 1.0) ** 2)
    elif kind == "log_shift":
        val = A * np.log(u + b)
    elif kind == "xlogx":
        val = A * (u + b) * np.log(u + b)
    elif kind == "quadratic":
        val = A * (u + b) ** 2
    else:
        levels, wmin = _wiener_levels(env, u)
        val = A * (b + levels - wmin)
    if np.any(~(val > 0)):
        raise DomainError(f"{kind} envelope is not strictly positive on the requested domain")
    return val if val.ndim else float(val)


def geometric_fbm_path(spec, env=None, mu=0.0, p0=1.0):
    """Price path ``P_t = P_0 exp(Y_t)`` with ``Y_t = mu t + sum_{s<t} g(s) dB_s``.

    The stochastic integral is the left-endpoint Riemann-Stieltjes sum over
    the sample grid: the increment ``B(s+1) - B(s)`` is weighted by ``g(s)``.
    """
    if env is None:
        env = VolatilityEnvelope("constant")
    fbm = generate_fbm(spec).values
    dB = np.diff(fbm)
    t = np.arange(spec.N) * spec.dt
    g = envelope_value(env, np.arange(spec.N - 1, dtype=float))
    y = np.concatenate([[0.0], np.cumsum(g * dB)]) + mu * t
    return PricePath(
        log_path=y,
        p0=p0,
        meta={"H": spec.H, "seed": spec.seed, "envelope": env.kind, "mu": mu},
    )


def switching_fbm(hursts, segment_length, seed=0):
    """Concatenate independent fBm pieces with different H, continuously.

    Each piece has ``segment_length`` samples; piece ``i`` starts where
    piece ``i-1`` ended. Used to build series with a known change point.
    """
    rng = np.random.default_rng(seed)
    pieces = []
    level = 0.0
    for H in hursts:
        if not 0.0 < H < 1.0:
            raise DomainError(f"Hurst parameter must lie in (0, 1), got {H}")
        inc = generate_fgn(H, segment_length, rng)
        pieces.append(level + np.cumsum(inc))
        level = pieces[-1][-1]
    return TimeSeries(np.concatenate(pieces), meta={"kind": "switching_fbm", "hursts": list(hursts)})
