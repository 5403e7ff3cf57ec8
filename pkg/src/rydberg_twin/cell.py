"""Phenomenological field screening inside the vapor cell.

Surface charges cancel an applied field with first-order dynamics, so the
field reaching the atoms is a high-passed copy of the applied one::

    internal = applied - s,    ds/dt = internal / tau_decay

``tau_decay = t_half / ln 2`` where ``t_half`` is the time for a field step
to be screened to half its height. ``t_half`` depends on the applied
amplitude for paraffin-coated cells; it is held constant within each
half-cycle (a run of same-sign samples), using the largest magnitude seen so
far in that half-cycle.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import numba as nb
import numpy as np

from .errors import ConfigurationError, InvalidArgumentError, PreconditionError
from .timeseries import TimeSeries

LN2 = np.log(2.0)

UNCOATED_TAU_POINTS = ((0.0, 10e-6),)
PARAFFIN_TAU_POINTS = ((0.354, 0.1e-3), (0.833, 0.6e-3))


@dataclass(frozen=True)
class CellModel:
    """Screening calibration of a cell.

    ``tau_points`` holds ``(field amplitude V/cm, half-recovery time s)``
    pairs; amplitudes strictly increasing.
    """

    kind: str = "paraffin"
    tau_points: tuple = PARAFFIN_TAU_POINTS
    radius: float = 1.5  # cm

    def __post_init__(self):
        if self.kind not in ("uncoated", "paraffin"):
            raise ConfigurationError(f"unknown cell kind {self.kind!r}", "cell")
        pts = tuple((float(e), float(t)) for e, t in self.tau_points)
        object.__setattr__(self, "tau_points", pts)
        if not pts:
            raise ConfigurationError("tau_points is empty", "cell")
        amps = np.array([p[0] for p in pts])
        taus = np.array([p[1] for p in pts])
        if np.any(np.diff(amps) <= 0):
            raise ConfigurationError("tau_points amplitudes must be strictly increasing", "cell")
        if np.any(~np.isfinite(taus)) or np.any(taus <= 0):
            raise ConfigurationError("tau_points times must be positive", "cell")

    @classmethod
    def uncoated(cls) -> "CellModel":
        return cls("uncoated", UNCOATED_TAU_POINTS)

    @classmethod
    def paraffin(cls) -> "CellModel":
        return cls("paraffin", PARAFFIN_TAU_POINTS)

    @property
    def min_tau(self) -> float:
        return min(t for _, t in self.tau_points)


def tau_for_amplitude(model: CellModel, E: float) -> float:
    """Half-recovery time (s) at field amplitude ``E`` (V/cm).

    Piecewise-linear in ``E`` between calibration points, clamped outside.
    """
    if not model.tau_points:
        raise ConfigurationError("tau_points is empty", "cell")
    if not np.isfinite(E) or E < 0:
        raise InvalidArgumentError(f"field amplitude must be finite and >= 0, got {E}", "cell")
    amps = np.array([p[0] for p in model.tau_points])
    taus = np.array([p[1] for p in model.tau_points])
    return float(np.interp(E, amps, taus))


@dataclass
class ScreeningState:
    """Accumulated screening field per channel (V/cm), plus the half-cycle tracker."""

    s: dict = field(default_factory=dict)
    magnitude: dict = field(default_factory=dict)
    sign: dict = field(default_factory=dict)

    def preload(self, channel: str, value: float) -> None:
        self.s[channel] = float(value)


@nb.njit(cache=True)
def _screen_kernel(applied, dt, amps, taus, tau_fixed, s0, mag0, sign0):
    n = applied.shape[0]
    internal = np.empty(n)
    s = s0
    mag = mag0
    sgn = sign0
    t_half = tau_fixed if tau_fixed > 0 else np.interp(mag, amps, taus)
    decay = np.exp(-dt * np.log(2.0) / t_half)
    for i in range(n):
        a = applied[i]
        if tau_fixed <= 0:
            cur = 0
            if a > 0:
                cur = 1
            elif a < 0:
                cur = -1
            m = abs(a)
            changed = False
            if cur != 0 and cur != sgn:
                sgn = cur
                mag = m
                changed = True
            elif m > mag:
                mag = m
                changed = True
            if changed:
                t_half = np.interp(mag, amps, taus)
                decay = np.exp(-dt * np.log(2.0) / t_half)
        internal[i] = a - s
        s = a + (s - a) * decay
    return internal, s, mag, sgn


def screen(applied: TimeSeries, model: CellModel, state: ScreeningState | None = None,
           channel: str = "vertical", tau_override: float | None = None) -> TimeSeries:
    """Field inside the cell for an applied field trace.

    ``state`` is advanced in place so consecutive calls continue seamlessly.
    ``tau_override`` fixes the half-recovery time (s), making the map linear.
    """
    if state is None:
        state = ScreeningState()
    tau_min = tau_override if tau_override is not None else model.min_tau
    if not tau_min > 0:
        raise ConfigurationError(f"half-recovery time must be positive, got {tau_min}", "cell")
    tau_decay = tau_min / LN2
    if applied.dt > tau_decay / 10:
        raise PreconditionError(
            f"sample interval {applied.dt:.3g} s exceeds tau_decay/10 for tau={tau_min:.3g} s "
            f"(tau_decay={tau_decay:.3g} s); raise the sample rate above {10 / tau_decay:.3g} Hz",
            "cell",
        )
    amps = np.array([p[0] for p in model.tau_points])
    taus = np.array([p[1] for p in model.tau_points])
    values = np.ascontiguousarray(applied.values, dtype=float)
    if not np.all(np.isfinite(values)):
        raise InvalidArgumentError("applied field must be finite", "cell")
    internal, s, mag, sgn = _screen_kernel(
        values, applied.dt, amps, taus,
        float(tau_override) if tau_override is not None else -1.0,
        state.s.get(channel, 0.0), state.magnitude.get(channel, 0.0), state.sign.get(channel, 0),
    )
    state.s[channel] = float(s)
    state.magnitude[channel] = float(mag)
    state.sign[channel] = int(sgn)
    return applied.with_values(internal, units="V/cm")


def square_wave_steady_state(E0: float, half_period: float, tau_decay: float):
    """Closed-form steady-state internal field just after a flip and at the end of a half-cycle.

    Oracle for a bipolar square wave ``+-E0`` through the first-order high-pass.
    """
    r = np.exp(-half_period / tau_decay)
    peak = 2.0 * E0 / (1.0 + r)
    return peak, peak * r


def high_pass_gain(f, tau_decay):
    """|H(f)| of the screening high-pass at constant tau_decay."""
    w = 2 * np.pi * np.asarray(f) * tau_decay
    return w / np.sqrt(1.0 + w * w)


def export_transient(path, applied: TimeSeries, internal: TimeSeries):
    from .io import write_csv

    return write_csv(path, ["time_s", "applied_V_per_cm", "internal_V_per_cm"],
                     [applied.time, applied.values, internal.values])



def steady_state_screening(kind: str, amplitude: float, frequency: float, phase: float,
                           tau_decay: float) -> float:
    """Screening field at t=0 for a periodic source already in steady state.

    Preloading this avoids the start-up transient of the high-pass.
    """
    if kind == "square":
        # phase 0 starts a positive half-cycle
        r = np.exp(-0.5 / (frequency * tau_decay))
        peak = 2.0 * amplitude / (1.0 + r)
        lag = (phase / (2 * np.pi)) % 1.0
        # internal field decays through the half-cycle; find where phase lands
        half = lag >= 0.5
        frac = (lag - 0.5 if half else lag) / frequency
        internal = peak * np.exp(-frac / tau_decay)
        a = -amplitude if half else amplitude
        return float(a - (-internal if half else internal))
    if kind == "sine":
        wt = 2 * np.pi * frequency * tau_decay
        gain = wt / np.sqrt(1.0 + wt * wt)
        lead = np.arctan2(1.0, wt)
        return float(amplitude * np.sin(phase) - amplitude * gain * np.sin(phase + lead))
    return 0.0
