"""Applied-field sources, plate geometry and the aux/signal coupling rule."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, InvalidArgumentError
from .timeseries import TimeSeries

# Lowest useful modulation frequency: the m_j=1/2, 3/2 ridges reach the
# operating detuning about 0.25 ms after a step.
F_MOD_FLOOR = 4e3


@dataclass(frozen=True)
class PlatePair:
    axis: str  # "vertical" or "horizontal"
    gap: float  # cm
    side: float = 7.0  # cm

    def __post_init__(self):
        if self.axis not in ("vertical", "horizontal"):
            raise ConfigurationError(f"unknown plate axis {self.axis!r}", "waveforms")
        if not (np.isfinite(self.gap) and self.gap > 0):
            raise ConfigurationError(f"plate gap must be positive, got {self.gap}", "waveforms")


VERTICAL_PLATES = PlatePair("vertical", 7.2)
HORIZONTAL_PLATES = PlatePair("horizontal", 7.6)


def plate_field(voltage: float, pair: PlatePair) -> float:
    """Uniform-field approximation ``V / gap`` in V/cm."""
    if not pair.gap > 0:
        raise ConfigurationError("plate gap must be positive", "waveforms")
    return voltage / pair.gap


@dataclass(frozen=True)
class FieldSource:
    kind: str  # "dc_step", "square" or "sine"
    amplitude: float  # V/cm
    frequency: float = 0.0  # Hz
    phase: float = 0.0  # rad
    start_time: float = 0.0  # s

    def __post_init__(self):
        if self.kind not in ("dc_step", "square", "sine"):
            raise ConfigurationError(f"unknown source kind {self.kind!r}", "waveforms")
        if not (np.isfinite(self.amplitude) and self.amplitude >= 0):
            raise ConfigurationError(f"amplitude must be >= 0, got {self.amplitude}", "waveforms")
        if self.kind != "dc_step" and not self.frequency > 0:
            raise ConfigurationError(f"{self.kind} source needs a positive frequency", "waveforms")


def sample_source(src: FieldSource, time_axis) -> np.ndarray:
    """Evaluate a source on the given sample times (s)."""
    t = np.asarray(time_axis, dtype=float)
    if src.kind == "dc_step":
        return np.where(t >= src.start_time, src.amplitude, 0.0)
    if src.kind == "sine":
        return src.amplitude * np.sin(2 * np.pi * src.frequency * t + src.phase)
    # square: positive for the first half of each period when phase == 0
    return src.amplitude * square_sign(src.frequency * t + src.phase / (2 * np.pi))


def square_sign(cycles) -> np.ndarray:
    """+1 on the first half of each cycle, -1 on the second.

    Samples lying on a half-cycle edge are snapped to it; the round-off in
    ``f*t`` grows with the cycle count, so the tolerance does too.
    """
    halves = 2.0 * np.asarray(cycles, dtype=float)
    edge = np.round(halves)
    tol = 64 * np.finfo(float).eps * np.maximum(np.abs(halves), 1.0)
    halves = np.where(np.abs(halves - edge) <= tol, edge, halves)
    return np.where(np.floor(halves) % 2 == 0, 1.0, -1.0)


def sample_source_series(src: FieldSource, fs: float, n: int) -> TimeSeries:
    return TimeSeries(sample_source(src, np.arange(n) / fs), fs, units="V/cm")


@dataclass(frozen=True)
class CouplingModel:
    """How the signal channel enters the scalar field seen by the atoms.

    ``projected``: a fraction ``kappa`` of the (nominally orthogonal) signal
    field projects onto the auxiliary axis, ``E = |aux + kappa*sig|``. This is
    a simulation parameter, not a measured quantity; responsivities scale
    with it.
    ``magnitude``: ideal orthogonal fields, ``E = sqrt(aux^2 + sig^2)``.
    """

    kappa: float = 0.1
    mode: str = "projected"

    def __post_init__(self):
        if not np.isfinite(self.kappa):
            raise ConfigurationError("kappa must be finite", "waveforms")
        if self.mode not in ("projected", "magnitude"):
            raise ConfigurationError(f"unknown coupling mode {self.mode!r}", "waveforms")


def effective_field(aux_internal, sig_internal, c: CouplingModel):
    aux = np.asarray(aux_internal, dtype=float)
    sig = np.asarray(sig_internal, dtype=float)
    if not (np.all(np.isfinite(aux)) and np.all(np.isfinite(sig))):
        raise InvalidArgumentError("fields must be finite", "waveforms")
    if c.mode == "projected":
        out = np.abs(aux + c.kappa * sig)
    else:
        out = np.hypot(aux, sig)
    return float(out) if out.ndim == 0 else out


def default_f_mod(f_signal: float) -> float:
    """Modulation frequency schedule used in the experiment."""
    if f_signal <= 200:
        return 7.9e3
    if f_signal <= 1e3:
        return 27.9e3
    return 87.9e3


def check_f_mod(f_mod: float) -> None:
    if f_mod < F_MOD_FLOOR:
        warnings.warn(
            f"f_mod={f_mod:g} Hz is below the {F_MOD_FLOOR:g} Hz floor set by the screening "
            "time at the operating point", stacklevel=2)
