"""Noise synthesis and spectral-density estimation.

Amplitude spectral densities (V/sqrt(Hz), one-sided) are used throughout;
the PSD is their square. Random streams come from numpy's PCG64 seeded via
``SeedSequence`` so a seed pins the output across runs and platforms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal as sp_signal

from .errors import InvalidArgumentError
from .timeseries import TimeSeries

RNG_ALGORITHM = "numpy.random.PCG64 via SeedSequence"


@dataclass(frozen=True)
class NoiseSpec:
    white_nsd: float = 0.0  # V/sqrt(Hz), PD + laser intensity noise
    flicker_exponent: float = 0.7  # ASD ~ f**-exponent
    flicker_nsd_at_1hz: float = 0.0  # V/sqrt(Hz), LIA input noise anchor
    seed: int = 0

    def __post_init__(self):
        if not self.white_nsd >= 0:
            raise InvalidArgumentError("white_nsd must be >= 0", "noise")
        if not self.flicker_nsd_at_1hz >= 0:
            raise InvalidArgumentError("flicker_nsd_at_1hz must be >= 0", "noise")

    @property
    def is_silent(self) -> bool:
        return self.white_nsd == 0 and self.flicker_nsd_at_1hz == 0


def rng(seed, *stream) -> np.random.Generator:
    """Generator for ``seed`` and an optional stream path (e.g. run index)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *map(int, stream)])))


def derive_seed(seed, *stream) -> int:
    """A 64-bit child seed mixing ``stream`` indices into ``seed``."""
    ss = np.random.SeedSequence([int(seed), *map(int, stream)])
    return int(ss.generate_state(1, np.uint64)[0])


def white_noise(nsd: float, fs: float, n: int, seed) -> TimeSeries:
    """Gaussian noise with flat one-sided ASD ``nsd``: sigma = nsd*sqrt(fs/2)."""
    if not fs > 0 or n <= 0:
        raise InvalidArgumentError("need fs > 0 and n > 0", "noise")
    sigma = nsd * np.sqrt(fs / 2.0)
    x = rng(seed).standard_normal(n) * sigma
    return TimeSeries(x, fs, units="V")


def lia_nsd(f, spec: NoiseSpec):
    """Flicker ASD curve ``flicker_nsd_at_1hz * f**-exponent``."""
    return spec.flicker_nsd_at_1hz * np.asarray(f, dtype=float) ** (-spec.flicker_exponent)


def flicker_noise(spec: NoiseSpec, fs: float, n: int, seed) -> TimeSeries:
    """Gaussian noise shaped in the frequency domain to ASD ``lia_nsd(f)``.

    ``n`` must be a power of two. The DC bin is zeroed.
    """
    if n <= 0 or n & (n - 1):
        raise InvalidArgumentError(f"n must be a power of two, got {n}", "noise")
    if not fs > 0:
        raise InvalidArgumentError("fs must be positive", "noise")
    white = rng(seed).standard_normal(n)
    spec_w = np.fft.rfft(white)
    f = np.fft.rfftfreq(n, 1.0 / fs)
    gain = np.zeros_like(f)
    gain[1:] = spec.flicker_nsd_at_1hz * f[1:] ** (-spec.flicker_exponent) * np.sqrt(fs / 2.0)
    x = np.fft.irfft(spec_w * gain, n)
    return TimeSeries(x, fs, units="V")


def next_pow2(n: int) -> int:
    return 1 << max(int(n) - 1, 0).bit_length()


def estimate_asd(trace: TimeSeries, segment_length: int, overlap: float = 0.5):
    """Welch estimate of the one-sided ASD with a Hann window.

    Returns
    -------
    freqs : np.ndarray
        Frequency axis in Hz.
    asd : np.ndarray
        ASD in ``trace.units``/sqrt(Hz).
    rbw : float
        Equivalent noise bandwidth of one bin, Hz.
    """
    n = len(trace)
    segment_length = int(segment_length)
    if segment_length < 2 or segment_length > n:
        raise InvalidArgumentError(f"segment_length {segment_length} invalid for trace of {n} samples", "noise")
    if not 0 <= overlap < 1:
        raise InvalidArgumentError(f"overlap must be in [0, 1), got {overlap}", "noise")
    noverlap = int(overlap * segment_length)
    freqs, psd = sp_signal.welch(trace.values, fs=trace.fs, window="hann", nperseg=segment_length,
                                 noverlap=noverlap, detrend=False, scaling="density",
                                 return_onesided=True)
    win = sp_signal.get_window("hann", segment_length)
    rbw = trace.fs * np.sum(win**2) / np.sum(win) ** 2
    return freqs, np.sqrt(psd), float(rbw)


def loglog_slope(freqs, asd, fmin, fmax) -> float:
    """Least-squares slope of log(asd) versus log(f) over ``[fmin, fmax]``."""
    sel = (freqs >= fmin) & (freqs <= fmax) & (asd > 0)
    return float(np.polyfit(np.log(freqs[sel]), np.log(asd[sel]), 1)[0])


def nsd_total(nsd_pd, nsd_lia):
    """Root-sum-square of uncorrelated noise densities."""
    if np.any(np.asarray(nsd_pd) < 0) or np.any(np.asarray(nsd_lia) < 0):
        raise InvalidArgumentError("noise densities must be >= 0", "noise")
    return np.hypot(nsd_pd, nsd_lia)


def export_asd(path, freqs, asd):
    from .io import write_csv

    return write_csv(path, ["freq_Hz", "asd_V_per_sqrtHz"], [freqs, asd])
