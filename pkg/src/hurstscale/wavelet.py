"""
Daubechies filter banks and the pyramidal (Mallat) transform.

Conventions
-----------
Filters are stored causally on ``0 .. 2p-1``. The high-pass filter is the
conjugate mirror ``g(n) = (-1)**(1-n) h(1-n)`` shifted by the even offset
``2p-2`` so that it lives on the same support as ``h``::

    g[m] = (-1)**(m+1) * h[2p-1-m]

For Haar this gives ``g = [-1/sqrt2, 1/sqrt2]``, so an increasing ramp has
positive detail coefficients.

Analysis is a correlation followed by dyadic subsampling::

    a_{j+1}(k) = sum_m h[m] a_j(2k+m)        d_{j+1}(k) = sum_m g[m] a_j(2k+m)

with indices wrapped modulo the length (``periodic``) or restricted to the
windows that fit inside the array (``valid``). Every routine operates along
the last axis, so a stack of series can be transformed in one call.
"""

from dataclasses import dataclass
from math import comb, sqrt

import numpy as np

from .errors import ConfigurationError, InputError, NumericError
from .series import as_array

BOUNDARY_MODES = ("periodic", "valid")
SUPPORTED_ORDERS = (1, 2, 3, 4)


@dataclass(frozen=True)
class FilterPair:
    h: np.ndarray
    g: np.ndarray
    p: int

    @property
    def support_length(self):
        return len(self.h)


@dataclass(frozen=True)
class ScalingSamples:
    """Scaling function at the integers ``0 .. len(values)-1``.

    The right endpoint of the support (where phi vanishes) is not stored.
    """

    values: np.ndarray

    @property
    def support(self):
        return (0, len(self.values) - 1)


@dataclass
class DetailPyramid:
    details: list
    approx_final: np.ndarray
    boundary_mode: str

    @property
    def counts(self):
        return [d.shape[-1] for d in self.details]

    @property
    def levels(self):
        return len(self.details)

    def detail(self, j):
        """Detail coefficients at scale ``j`` (1-based)."""
        if not 1 <= j <= self.levels:
            raise InputError(f"scale {j} outside 1..{self.levels}")
        return self.details[j - 1]


def _check_boundary(boundary):
    if boundary not in BOUNDARY_MODES:
        raise ConfigurationError(f"boundary must be one of {BOUNDARY_MODES}, got {boundary!r}")


def daubechies_filters(p):
    """Daubechies orthonormal filters with ``p`` vanishing moments.

    The low-pass filter is obtained by spectral factorisation of the
    half-band polynomial ``P(y) = sum_k C(p-1+k, k) y**k`` with
    ``y = (2 - z - 1/z) / 4``, keeping the roots inside the unit circle
    (minimum phase), then multiplying by ``((1 + 1/z)/2)**p``.

    Parameters
    ----------
    p : int
        Number of vanishing moments, 1 (Haar) to 4.

    Returns
    -------
    FilterPair
    """
    if isinstance(p, bool) or not isinstance(p, (int, np.integer)) or int(p) not in SUPPORTED_ORDERS:
        raise ConfigurationError(f"vanishing-moment count must be one of {SUPPORTED_ORDERS}, got {p!r}")
    p = int(p)

    q = np.array([1.0 + 0j])
    if p > 1:
        # np.roots wants highest degree first
        coeffs = [comb(p - 1 + k, k) for k in range(p)][::-1]
        for y in np.roots(coeffs):
            # (2 - z - 1/z)/4 = y  <=>  z**2 - (2 - 4y) z + 1 = 0
            z = np.roots([1.0, -(2.0 - 4.0 * y), 1.0])
            zin = z[np.argmin(np.abs(z))]
            q = np.convolve(q, [1.0, -zin])
    binom = np.array([comb(p, k) for k in range(p + 1)], dtype=float)
    h = np.convolve(binom, q).real
    h *= sqrt(2.0) / h.sum()

    m = np.arange(2 * p)
    g = (-1.0) ** (m + 1) * h[::-1]
    h.setflags(write=False)
    g.setflags(write=False)
    return FilterPair(h=h, g=g, p=p)


def scaling_samples(filters):
    """Scaling function at the integers from the two-scale recursion.

    Restricting ``phi(t) = sqrt2 sum_k h(k) phi(2t-k)`` to integer ``t``
    gives a linear eigenproblem whose eigenvalue-1 eigenvector is phi at the
    integers. Normalised to ``sum phi(n) = 1``.
    """
    h = np.asarray(filters.h)
    length = len(h)
    n = length - 1  # phi(length-1) = 0 (continuity for p >= 2, right-continuity for Haar)
    idx = 2 * np.arange(n)[:, None] - np.arange(n)[None, :]
    valid = (idx >= 0) & (idx < length)
    mat = np.where(valid, sqrt(2.0) * h[np.clip(idx, 0, length - 1)], 0.0)

    w, v = np.linalg.eig(mat)
    near_one = np.abs(w - 1.0) < 1e-8
    if near_one.sum() != 1:
        raise NumericError(f"eigenvalue-1 eigenspace has dimension {near_one.sum()}, expected 1")
    phi = v[:, near_one][:, 0].real
    phi = phi / phi.sum()
    phi[np.abs(phi) < 1e-15] = 0.0
    phi.setflags(write=False)
    return ScalingSamples(values=phi)


def initialize_approximation(samples, phi, boundary="periodic"):
    """Initial approximation coefficients ``a_0(k) = sum_n f(n) phi(n-k)``.

    The sum replaces the projection integral of ``f`` on ``phi(t-k)`` and is
    exact when ``f`` restricted to the support of ``phi(.-k)`` is a polynomial
    of degree below the vanishing-moment count.
    """
    _check_boundary(boundary)
    f = as_array(samples)
    if f.shape[-1] == 0:
        raise InputError("cannot initialise from an empty series")
    w = np.asarray(phi.values if isinstance(phi, ScalingSamples) else phi, dtype=float)
    n = f.shape[-1]
    if n < len(w):
        raise InputError(f"series length {n} shorter than scaling support {len(w)}")

    if boundary == "periodic":
        out = np.zeros_like(f)
        for m, c in enumerate(w):
            if c != 0.0:
                out += c * np.roll(f, -m, axis=-1)
        return out
    size = n - len(w) + 1
    out = np.zeros(f.shape[:-1] + (size,))
    for m, c in enumerate(w):
        if c != 0.0:
            out += c * f[..., m:m + size]
    return out


def _window_index(n, length, boundary):
    if boundary == "periodic":
        if n % 2:
            raise InputError(f"periodic decomposition needs an even length, got {n}")
        if n < 2:
            raise InputError("periodic decomposition needs at least 2 samples")
        half = n // 2
        return (2 * np.arange(half)[:, None] + np.arange(length)[None, :]) % n
    if n < length:
        raise InputError(f"valid decomposition needs at least {length} samples, got {n}")
    count = (n - length) // 2 + 1
    return 2 * np.arange(count)[:, None] + np.arange(length)[None, :]


def decompose_step(a, filters, boundary="periodic"):
    """One analysis step: returns ``(a_next, d_next)``."""
    _check_boundary(boundary)
    a = np.asarray(a, dtype=float)
    idx = _window_index(a.shape[-1], filters.support_length, boundary)
    windows = a[..., idx]
    return windows @ filters.h, windows @ filters.g


def reconstruct_step(a_next, d_next, filters, boundary="periodic"):
    """One synthesis step, the transpose of :func:`decompose_step`.

    Under the periodic boundary this is the exact inverse. Under ``valid`` it
    is only the adjoint (the samples lost at the edges are not recovered).
    """
    _check_boundary(boundary)
    a_next = np.asarray(a_next, dtype=float)
    d_next = np.asarray(d_next, dtype=float)
    if a_next.shape != d_next.shape:
        raise InputError(f"approximation {a_next.shape} and detail {d_next.shape} shapes differ")
    count = a_next.shape[-1]
    if count == 0:
        raise InputError("nothing to reconstruct")
    length = filters.support_length
    n = 2 * count if boundary == "periodic" else 2 * (count - 1) + length
    out = np.zeros(a_next.shape[:-1] + (n,))
    base = 2 * np.arange(count)
    for m in range(length):
        pos = base + m
        if boundary == "periodic":
            pos = pos % n
        out[..., pos] += filters.h[m] * a_next + filters.g[m] * d_next
    return out


def max_levels(n, filters, boundary="periodic"):
    """Largest J for which every scale 1..J has at least one coefficient."""
    levels = 0
    while True:
        if boundary == "periodic":
            if n < 2 or n % 2:
                return levels
            n //= 2
        else:
            if n < filters.support_length:
                return levels
            n = (n - filters.support_length) // 2 + 1
        levels += 1


def full_decomposition(series, filters, levels, boundary="periodic", phi=None):
    """Initialise with the scaling-function sum, then iterate the pyramid ``levels`` times."""
    _check_boundary(boundary)
    f = as_array(series)
    if phi is None:
        phi = scaling_samples(filters)
    a = initialize_approximation(f, phi, boundary)
    if levels < 1 or levels > max_levels(a.shape[-1], filters, boundary):
        raise ConfigurationError(
            f"{levels} levels not available for {a.shape[-1]} approximation coefficients "
            f"({boundary}, filter length {filters.support_length})"
        )
    details = []
    for _ in range(levels):
        a, d = decompose_step(a, filters, boundary)
        details.append(d)
    return DetailPyramid(details=details, approx_final=a, boundary_mode=boundary)


def discrete_wavelet(filters, j, phi=None):
    """Sampled wavelet at scale ``j`` built by cascading the filters.

    Returns ``w`` such that ``d_j(k) = sum_t w[t] f(2**j k + t)``. The
    cascade is ``G_j = up(g, 2**(j-1)) * H_{j-1}`` with
    ``H_j = up(h, 2**(j-1)) * H_{j-1}``, finally convolved with the scaling
    samples that define the initial approximation.
    """
    if j < 1:
        raise InputError(f"scale must be >= 1, got {j}")
    if phi is None:
        phi = scaling_samples(filters)
    low = np.array([1.0])
    for level in range(1, j):
        low = np.convolve(_upsample(filters.h, 2 ** (level - 1)), low)
    band = np.convolve(_upsample(filters.g, 2 ** (j - 1)), low)
    return np.convolve(band, phi.values)


def _upsample(x, factor):
    out = np.zeros((len(x) - 1) * factor + 1)
    out[::factor] = x
    return out


def direct_detail_oracle(series, filters, j, k, boundary="periodic", phi=None):
    """Detail coefficient ``d_j(k)`` as one explicit inner product.

    Test oracle: O(N) per coefficient, no pyramid involved.
    """
    _check_boundary(boundary)
    f = as_array(series)
    n = f.shape[-1]
    w = discrete_wavelet(filters, j, phi)
    start = (2 ** j) * k
    if k < 0:
        raise InputError(f"shift must be non-negative, got {k}")
    if boundary == "periodic":
        if n % (2 ** j) or start >= n:
            raise InputError(f"(j={j}, k={k}) out of range for periodic length {n}")
        idx = (start + np.arange(len(w))) % n
    else:
        if start + len(w) > n:
            raise InputError(f"(j={j}, k={k}) window exceeds series length {n}")
        idx = start + np.arange(len(w))
    return f[..., idx] @ w
