import numpy as np
import pytest

from hurstscale.synth import generate_fgn


def fbm_paths(H, N, count, seed):
    """Stack of ``count`` exact fBm paths of length ``N`` starting at 0."""
    rng = np.random.default_rng(seed)
    inc = np.array([generate_fgn(H, N - 1, rng) for _ in range(count)])
    return np.concatenate([np.zeros((count, 1)), np.cumsum(inc, axis=1)], axis=1)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def exact_detail_covariance(w, H, shift):
    """``Cov(d(0), d(shift))`` for unit fBm, where ``d(s) = sum_t w[t] B(s + t)``.

    Because ``sum w = 0`` only the ``-|t - t'|**2H / 2`` part of the fBm
    covariance survives.
    """
    t = np.arange(len(w))
    lag = np.abs(t[:, None] - t[None, :] - shift)
    return -0.5 * w @ (lag ** (2.0 * H)) @ w
