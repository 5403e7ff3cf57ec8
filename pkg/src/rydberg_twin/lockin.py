"""Software lock-in amplifier and fitting helpers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize
from scipy.signal import lfilter

from .errors import ConfigurationError, FitError, InvalidArgumentError, PreconditionError
from .timeseries import TimeSeries
from .waveforms import square_sign

# Rule used in the experiment: LPF cutoff = 1.265 x signal frequency.
CUTOFF_FACTOR = 1.265
SETTLE_TIME_CONSTANTS = 7.0


@dataclass(frozen=True)
class DemodConfig:
    """Lock-in settings. ``lpf_cutoff`` is the corner of each single-pole stage."""

    f_mod: float
    lpf_cutoff: float
    reference: str = "sine"
    phase: float = 0.0
    lpf_order: int = 4

    def __post_init__(self):
        if not self.f_mod > 0:
            raise ConfigurationError("f_mod must be positive", "lockin")
        if self.reference not in ("sine", "square"):
            raise ConfigurationError(f"unknown reference {self.reference!r}", "lockin")
        if not 0 < self.lpf_cutoff < self.f_mod / 2:
            raise ConfigurationError(
                f"lpf_cutoff {self.lpf_cutoff:g} Hz must lie in (0, f_mod/2 = {self.f_mod / 2:g} Hz)", "lockin")
        if int(self.lpf_order) < 1:
            raise ConfigurationError("lpf_order must be >= 1", "lockin")

    @classmethod
    def for_signal(cls, f_signal: float, f_mod: float, **kw) -> "DemodConfig":
        return cls(f_mod=f_mod, lpf_cutoff=CUTOFF_FACTOR * f_signal, **kw)

    @property
    def settle_time(self) -> float:
        return SETTLE_TIME_CONSTANTS / (2 * np.pi * self.lpf_cutoff)


def _pole_coeff(cutoff, fs):
    return 1.0 - np.exp(-2 * np.pi * cutoff / fs)


def lowpass(x, cutoff: float, fs: float, order: int, warm_head=None) -> np.ndarray:
    """Cascade of ``order`` identical single-pole IIR stages (impulse-invariant).

    ``warm_head`` is one period of a periodic input; each stage then starts in
    the periodic steady state of that input, as if the filter had been running
    on it forever. Otherwise stages start at 0.
    """
    a = _pole_coeff(cutoff, fs)
    b_coef, a_coef = [a], [1.0, -(1.0 - a)]
    y = np.asarray(x, dtype=float)
    head = None if warm_head is None else np.asarray(warm_head, dtype=float)
    for _ in range(int(order)):
        if head is None:
            y = lfilter(b_coef, a_coef, y)
            continue
        # state before the period such that it returns to itself after it
        zs_end = lfilter(b_coef, a_coef, head)[-1]
        y_prev = zs_end / (1.0 - (1.0 - a) ** len(head))
        zi = [(1.0 - a) * y_prev]
        head, _ = lfilter(b_coef, a_coef, head, zi=zi)
        y, _ = lfilter(b_coef, a_coef, y, zi=zi)
    return y


def lowpass_gain(f, cutoff: float, fs: float, order: int):
    """|H| of :func:`lowpass` at frequency ``f`` (discrete-time response)."""
    a = _pole_coeff(cutoff, fs)
    z = np.exp(-2j * np.pi * np.asarray(f, dtype=float) / fs)
    return np.abs(a / (1.0 - (1.0 - a) * z)) ** int(order)


def reference_wave(t, cfg: DemodConfig) -> np.ndarray:
    arg = 2 * np.pi * cfg.f_mod * np.asarray(t) + cfg.phase
    if cfg.reference == "sine":
        return np.sqrt(2.0) * np.sin(arg)
    # +1 on the first half-period, matching the auxiliary square wave
    return square_sign(arg / (2 * np.pi))


def mix(trace: TimeSeries, cfg: DemodConfig) -> np.ndarray:
    if trace.fs < 10 * cfg.f_mod:
        raise PreconditionError(f"sample rate {trace.fs:g} Hz below 10*f_mod = {10 * cfg.f_mod:g} Hz", "lockin")
    return trace.values * reference_wave(trace.time, cfg)


def demodulate(trace: TimeSeries, cfg: DemodConfig, additive=None, warm_start: bool = False,
               warm_trace: TimeSeries | None = None) -> TimeSeries:
    """Multiply by the reference and low-pass.

    A pure in-phase tone of amplitude A at ``f_mod`` gives A/sqrt(2) (sine
    reference) or (2*sqrt(2)/pi)*A/sqrt(2) (square reference).
    ``additive`` is summed after mixing, before filtering (input-referred
    lock-in noise). ``warm_start`` starts the filter in the steady state of
    the first reference period, suppressing the start-up transient; that
    period is taken from ``warm_trace`` when given (e.g. the noiseless
    trace, so noise does not seed the filter state).
    """
    mixed = mix(trace, cfg)
    if additive is not None:
        mixed = mixed + np.asarray(additive)
    head = None
    if warm_start:
        period = int(round(trace.fs / cfg.f_mod))
        src = trace if warm_trace is None else warm_trace
        head = mix(src, cfg)[:period] if warm_trace is not None else mixed[:period]
    out = lowpass(mixed, cfg.lpf_cutoff, trace.fs, cfg.lpf_order, warm_head=head)
    return trace.with_values(out, units=trace.units)


@dataclass(frozen=True)
class ToneFit:
    frequencies: np.ndarray
    amplitudes: np.ndarray
    phases: np.ndarray
    offset: float
    residual_rms: float
    amplitude_sigma: np.ndarray


@dataclass(frozen=True)
class SineFit:
    amplitude: float
    phase: float
    offset: float
    residual_rms: float
    amplitude_sigma: float
    frequency: float


def correlation_factor(resid) -> float:
    """Variance inflation ``1 + 2 sum rho_k`` for serially correlated residuals.

    The autocorrelation is summed (Bartlett-weighted) up to its first
    non-positive lag; white residuals give ~1, low-passed ones much more.
    """
    r = np.asarray(resid, dtype=float) - np.mean(resid)
    n = r.size
    if n < 2 or not np.any(r):
        return 1.0
    spec = np.fft.rfft(r, 2 * n)
    acf = np.fft.irfft(spec.real**2 + spec.imag**2)[:n]
    acf /= acf[0]
    stop = np.flatnonzero(acf[1:] <= 0)
    k = stop[0] + 1 if stop.size else n
    lags = np.arange(1, k)
    return float(max(1.0 + 2.0 * np.sum(acf[1:k] * (1.0 - lags / n)), 1.0))


def fit_tones(trace: TimeSeries, freqs) -> ToneFit:
    """Linear least squares of ``c + sum_k a_k sin(w_k t) + b_k cos(w_k t)``.

    Parameter uncertainties use the residual variance inflated by
    :func:`correlation_factor`, so they stay honest on filtered traces.
    """
    freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
    t = trace.time
    y = trace.values
    cols = [np.ones_like(t)]
    for f in freqs:
        w = 2 * np.pi * f * t
        cols += [np.sin(w), np.cos(w)]
    X = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    dof = max(len(y) - X.shape[1], 1)
    var = float(resid @ resid) / dof * correlation_factor(resid)
    cov = var * np.linalg.pinv(X.T @ X)
    a, b = coef[1::2], coef[2::2]
    amp = np.hypot(a, b)
    sig = np.empty_like(amp)
    for k in range(len(freqs)):
        ia, ib = 1 + 2 * k, 2 + 2 * k
        if amp[k] > 0:
            g = np.array([a[k], b[k]]) / amp[k]
            c2 = cov[np.ix_([ia, ib], [ia, ib])]
            sig[k] = np.sqrt(max(g @ c2 @ g, 0.0))
        else:
            sig[k] = np.sqrt(max(0.5 * (cov[ia, ia] + cov[ib, ib]), 0.0))
    return ToneFit(freqs, amp, np.arctan2(b, a), float(coef[0]),
                   float(np.sqrt(np.mean(resid**2))), sig)


def tone_noise_sigma(trace: TimeSeries, f: float, psd, phase: float = 0.0) -> float:
    """Standard deviation of the fitted amplitude at ``f`` for stationary noise.

    ``psd(nu)`` is the one-sided noise PSD (V^2/Hz) of ``trace``. The
    estimator of :func:`fit_sine` is linear in the data, so its variance is
    the PSD weighted by the squared spectrum of the estimator's weights.
    ``phase`` picks the direction of a nonzero tone; the amplitude of a
    pure-noise fit is Rayleigh with this sigma per quadrature.
    """
    n = len(trace)
    w = 2 * np.pi * f * trace.time
    X = np.column_stack([np.ones(n), np.sin(w), np.cos(w)])
    rows = np.linalg.pinv(X)[1:]
    m = 1 << int(np.ceil(np.log2(2 * n)))
    W = np.fft.rfft(rows, m, axis=1)
    nu = np.fft.rfftfreq(m, 1.0 / trace.fs)
    # two-sided PSD times fs, with the doubled interior bins of a real spectrum
    s2 = 0.5 * np.asarray(psd(nu), dtype=float) * trace.fs
    fold = np.full(nu.size, 2.0)
    fold[0] = 1.0
    if m % 2 == 0:
        fold[-1] = 1.0
    k = fold * s2 / m
    caa = np.sum(k * np.abs(W[0]) ** 2)
    cbb = np.sum(k * np.abs(W[1]) ** 2)
    cab = np.sum(k * (W[0] * np.conj(W[1])).real)
    g = np.array([np.cos(phase), np.sin(phase)])
    return float(np.sqrt(max(g @ np.array([[caa, cab], [cab, cbb]]) @ g, 0.0)))


def fit_sine(trace: TimeSeries, f: float) -> SineFit:
    """Fit ``A sin(2 pi f t + phase) + offset``; trace must span two periods of ``f``."""
    if not f > 0:
        raise InvalidArgumentError("frequency must be positive", "lockin")
    if len(trace) < 4 or trace.duration * f < 2.0 - (1.0 + 1e-9) * f / trace.fs:
        raise InvalidArgumentError(
            f"trace spans {trace.duration * f:.3g} periods of {f:g} Hz; need >= 2", "lockin")
    tf = fit_tones(trace, [f])
    return SineFit(float(tf.amplitudes[0]), float(tf.phases[0]), tf.offset, tf.residual_rms,
                   float(tf.amplitude_sigma[0]), float(f))


def refine_frequency(trace: TimeSeries, f0: float) -> SineFit:
    """Nonlinear least-squares sine fit with free frequency, seeded at ``f0``."""
    lin = fit_sine(trace, f0)
    t = trace.time - trace.t0
    y = trace.values
    scale = max(np.max(np.abs(y - lin.offset)), 1e-300)
    phase0 = lin.phase + 2 * np.pi * f0 * trace.t0

    def resid(p):
        a, ph, c, f = p
        return (a * np.sin(2 * np.pi * f * t + ph) + c - y) / scale

    sol = optimize.least_squares(resid, [lin.amplitude, phase0, lin.offset, f0],
                                 x_scale=[scale, 1.0, scale, f0 * 0.01], method="lm")
    a, ph, c, f = sol.x
    if a < 0:
        a, ph = -a, ph + np.pi
    res = resid(sol.x) * scale
    return SineFit(float(a), float(ph), float(c), float(np.sqrt(np.mean(res**2))), lin.amplitude_sigma, float(f))


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    r_squared: float
    linear_range_max: float
    n_points: int


def _linfit(x, y):
    A = np.column_stack([x, np.ones_like(x)])
    (m, c), *_ = np.linalg.lstsq(A, y, rcond=None)
    yhat = m * x + c
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(y != 0, np.abs(y - yhat) / np.abs(y), np.where(y == yhat, 0.0, np.inf))
    return m, c, yhat, rel


def fit_responsivity(points, max_rel_residual: float = 0.05, min_points: int = 4) -> LinearFit:
    """Slope of output vs input over the largest low-amplitude linear prefix.

    A prefix qualifies when a straight-line fit (intercept allowed) leaves
    every point within ``max_rel_residual`` relative error. Points beyond the
    prefix are treated as saturated.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise InvalidArgumentError("points must be (input, output) pairs", "lockin")
    x, y = pts[:, 0], pts[:, 1]
    if len(x) < min_points:
        raise FitError(f"need >= {min_points} points, got {len(x)}", "lockin", {"n_points": len(x)})
    if np.any(np.diff(x) <= 0):
        raise InvalidArgumentError("inputs must be strictly increasing", "lockin")
    worst = {}
    for k in range(len(x), min_points - 1, -1):
        m, c, yhat, rel = _linfit(x[:k], y[:k])
        worst[k] = float(np.max(rel))
        if m != 0 and np.all(rel < max_rel_residual):
            ss_res = float(np.sum((y[:k] - yhat) ** 2))
            ss_tot = float(np.sum((y[:k] - y[:k].mean()) ** 2))
            r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
            return LinearFit(float(m), float(c), float(np.clip(r2, 0.0, 1.0)), float(x[k - 1]), k)
    raise FitError(f"no prefix of >= {min_points} points is linear within {max_rel_residual:.0%}",
                   "lockin", {"worst_relative_residual_by_prefix": worst})


def export_demodulated(path, trace: TimeSeries):
    from .io import write_csv

    return write_csv(path, ["time_s", "output_V"], [trace.time, trace.values])
