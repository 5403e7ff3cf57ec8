"""Uniformly sampled real-valued traces."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError


@dataclass(frozen=True)
class TimeSeries:
    """A uniformly sampled trace.

    Parameters
    ----------
    values : np.ndarray
        Samples, 1D (or 2D with time on the last axis).
    fs : float
        Sample rate in Hz.
    t0 : float
        Time of the first sample in seconds.
    units : str
        Free-form units tag, e.g. ``"V"`` or ``"V/cm"``.
    """

    values: np.ndarray
    fs: float
    t0: float = 0.0
    units: str = ""
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not (np.isfinite(self.fs) and self.fs > 0):
            raise InvalidArgumentError(f"sample rate must be positive, got {self.fs}", "timeseries")
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))

    def __len__(self):
        return self.values.shape[-1]

    @property
    def dt(self) -> float:
        return 1.0 / self.fs

    @property
    def duration(self) -> float:
        return len(self) / self.fs

    @property
    def time(self) -> np.ndarray:
        return self.t0 + np.arange(len(self)) / self.fs

    def with_values(self, values, units=None) -> "TimeSeries":
        return TimeSeries(values, self.fs, self.t0, self.units if units is None else units)

    def slice_time(self, start: float, stop: float | None = None) -> "TimeSeries":
        """Samples with ``start <= t < stop`` (relative to ``t0``)."""
        i0 = int(np.ceil(round(start * self.fs, 9)))
        i1 = len(self) if stop is None else int(np.ceil(round(stop * self.fs, 9)))
        i0 = max(i0, 0)
        return TimeSeries(self.values[..., i0:i1], self.fs, self.t0 + i0 / self.fs, self.units)


def time_axis(fs: float, duration: float) -> np.ndarray:
    """Sample times ``k/fs`` for ``0 <= k < round(duration*fs)``."""
    n = int(round(duration * fs))
    if n <= 0:
        raise InvalidArgumentError(f"duration {duration} s yields no samples at fs={fs}", "timeseries")
    return np.arange(n) / fs
