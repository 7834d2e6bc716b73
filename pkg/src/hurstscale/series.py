from dataclasses import dataclass, field

import numpy as np

from .errors import InputError


@dataclass
class TimeSeries:
    """Uniformly sampled scalar series.

    ``values`` holds a log-price or a synthetic path, ``dt`` the sample spacing
    and ``start`` the index of the first sample within a longer parent series.
    """

    values: np.ndarray
    dt: float = 1.0
    start: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1:
            raise InputError(f"time series must be one-dimensional, got shape {self.values.shape}")

    def __len__(self):
        return self.values.shape[0]


def as_array(series):
    """Return the sample array of a TimeSeries or anything array-like."""
    if isinstance(series, TimeSeries):
        return series.values
    return np.asarray(series, dtype=float)
