"""End-to-end sensing runs: lock-in chain, direct detection, sweeps and grid scans."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from ..cell import LN2, ScreeningState, screen, steady_state_screening, tau_for_amplitude
from ..errors import PreconditionError, RydbergTwinError
from ..lockin import (LinearFit, SineFit, demodulate, fit_responsivity, fit_sine, fit_tones,
                      lowpass_gain, reference_wave, refine_frequency, tone_noise_sigma)
from ..noise import derive_seed, flicker_noise, lia_nsd, next_pow2, white_noise
from ..spectroscopy import transmission
from ..timeseries import TimeSeries
from ..waveforms import FieldSource, effective_field, sample_source
from .scenario import Scenario, default_scenario

CHUNK = 1 << 20  # fine samples per block

# Noise stream indices under the scenario seed.
PD_STREAM, LIA_STREAM = 1, 2


def _preloaded_state(s: Scenario, vertical=None, horizontal=None) -> ScreeningState:
    st = ScreeningState()
    for channel, src in (("vertical", vertical), ("horizontal", horizontal)):
        if src is None or src.kind == "dc_step":
            continue
        tau_d = tau_for_amplitude(s.cell, src.amplitude) / LN2
        st.preload(channel, steady_state_screening(src.kind, src.amplitude, src.frequency, src.phase, tau_d))
    return st


def pd_trace(s: Scenario, n: int, fs: float, vertical, horizontal=None, sig_on_vertical=False) -> np.ndarray:
    """Noiseless PD voltage, ``n`` samples at ``fs``.

    The physics runs at ``oversample*fs``; each PD sample is the mean over
    its interval (integrate-and-dump). Sources are preloaded in their
    screening steady state.
    """
    K = int(s.oversample)
    fine_fs = fs * K
    st = _preloaded_state(s, vertical, horizontal)
    out = np.empty(n)
    step = max(CHUNK // K, 1)
    for i0 in range(0, n, step):
        i1 = min(i0 + step, n)
        t = np.arange(i0 * K, i1 * K) / fine_fs
        v = screen(TimeSeries(sample_source(vertical, t), fine_fs), s.cell, st, "vertical").values
        if horizontal is not None:
            h = screen(TimeSeries(sample_source(horizontal, t), fine_fs), s.cell, st, "horizontal").values
        else:
            h = np.zeros_like(v)
        E = effective_field(v, h, s.coupling)
        out[i0:i1] = transmission(s.delta_p, E, s.eit).reshape(-1, K).mean(axis=1)
    return out


def calibrate_phase(s: Scenario, eps: float = 1e-6) -> float:
    """Reference phase that puts the signal sideband fully in the output.

    Differentiates one steady-state carrier period of the PD voltage with
    respect to a small static signal field and picks the reference phase
    maximising the projection. Done once per operating point, like a
    lock-in's auto-phase; nothing is tracked during the run.
    """
    fs = s.sample_rate
    n = int(round(fs / s.f_mod))
    t = np.arange(n) / fs

    plus = pd_trace(s, n, fs, s.aux, FieldSource("dc_step", eps))
    minus = pd_trace(replace(s, coupling=replace(s.coupling, kappa=-s.coupling.kappa)), n, fs, s.aux,
                     FieldSource("dc_step", eps))
    deriv = (plus - minus) / (2 * eps)
    phases = np.linspace(-np.pi, np.pi, 3600, endpoint=False)
    cfg = s.demod_config(0.0)
    proj = [np.mean(deriv * reference_wave(t, replace(cfg, phase=p))) for p in phases]
    return float(phases[int(np.argmax(proj))])


@dataclass(frozen=True)
class SensingResult:
    pd: TimeSeries
    demodulated: TimeSeries
    fit: SineFit
    fitted_frequency: float
    phase: float
    settle_time: float
    noise_sigma: float = 0.0  # amplitude std expected from the noise model

    @property
    def amplitude(self) -> float:
        return self.fit.amplitude


def output_noise_psd(s: Scenario, cfg) -> callable:
    """One-sided PSD of the demodulated noise (V^2/Hz) versus frequency.

    White PD noise keeps its level through an RMS-normalized reference; the
    lock-in flicker enters after the mixer. Both then see the low-pass.
    """
    fs = s.sample_rate

    def psd(nu):
        nu = np.asarray(nu, dtype=float)
        flick = np.zeros_like(nu)
        if s.noise.flicker_nsd_at_1hz > 0:
            pos = nu > 0
            flick[pos] = lia_nsd(nu[pos], s.noise) ** 2
        return (s.noise.white_nsd**2 + flick) * lowpass_gain(nu, cfg.lpf_cutoff, fs, cfg.lpf_order) ** 2

    return psd


def run_sensing(s: Scenario, refine: bool = True) -> SensingResult:
    """Sources -> screening -> Stark/EIT -> PD noise -> lock-in -> sine fit."""
    s.validate()
    fs = s.sample_rate
    n = int(round(s.resolved_duration() * fs))
    clean = pd_trace(s, n, fs, s.aux, s.signal)
    pd = clean
    if s.noise.white_nsd > 0:
        pd = clean + white_noise(s.noise.white_nsd, fs, n, derive_seed(s.seed, PD_STREAM)).values
    lia = None
    if s.noise.flicker_nsd_at_1hz > 0:
        lia = flicker_noise(s.noise, fs, next_pow2(n), derive_seed(s.seed, LIA_STREAM)).values[:n]
    phase = s.demod_phase if s.demod_phase is not None else calibrate_phase(s)
    cfg = s.demod_config(phase)
    trace = TimeSeries(pd, fs, units="V")
    out = demodulate(trace, cfg, additive=lia, warm_start=True, warm_trace=TimeSeries(clean, fs))
    window = out.slice_time(cfg.settle_time)
    fit = fit_sine(window, s.f_signal)
    f_hat = s.f_signal
    if refine and fit.amplitude > 0:
        f_hat = refine_frequency(window, s.f_signal).frequency
    sigma = 0.0
    if not s.noise.is_silent:
        sigma = tone_noise_sigma(window, s.f_signal, output_noise_psd(s, cfg), fit.phase)
    return SensingResult(trace, out, fit, f_hat, phase, cfg.settle_time, sigma)


def responsivity_sweep(f: float, amplitudes, base: Scenario, threads: int | None = None,
                       min_duration: float = 0.0) -> tuple[LinearFit, np.ndarray]:
    """Fitted output amplitude per input amplitude, then the linear-prefix fit.

    Each amplitude runs with its own derived seed. Runs last at least
    ``min_duration`` seconds, which averages down noise on weak inputs.
    Returns the fit and the ``(input, output)`` points.
    """
    amps = np.asarray(amplitudes, dtype=float)
    probe = base.with_signal(amplitude=float(amps[0]), frequency=f)
    if min_duration > probe.resolved_duration():
        probe = replace(probe, duration=float(min_duration))
    scenarios = [replace(probe.with_signal(amplitude=a, frequency=f), seed=derive_seed(base.seed, k))
                 for k, a in enumerate(amps)]
    if base.demod_phase is None:
        ph = calibrate_phase(scenarios[0])
        scenarios = [replace(sc, demod_phase=ph) for sc in scenarios]
    outs = _map(_sensing_amplitude, scenarios, threads)
    pts = np.column_stack([amps, outs])
    return fit_responsivity(pts), pts


def _sensing_amplitude(s: Scenario) -> float:
    return run_sensing(s, refine=False).amplitude


@dataclass(frozen=True)
class DirectResult:
    frequency: float
    amplitude: float
    residual_rms: float
    snr: float
    harmonic_amplitudes: np.ndarray


def direct_sensing(f: float, amplitude: float, delta_p: float = -7.0, base: Scenario | None = None,
                   fs: float = 200e3, min_duration: float = 0.02, harmonics: int = 16) -> DirectResult:
    """Detection without auxiliary field or lock-in.

    The signal drives the vertical plates; the PD trace is fitted with the
    first ``harmonics`` multiples of ``f`` (the Stark response is quadratic,
    so most of the tone lands on 2f). The detected amplitude is the
    root-sum-square over harmonics; SNR divides it by the residual RMS.
    """

    base = base or default_scenario()
    s = replace(base, delta_p=float(delta_p), aux=None)
    src = FieldSource("sine", float(amplitude), float(f))
    duration = max(2.0 / f, min_duration)
    n = int(round(duration * fs))
    pd = pd_trace(s, n, fs, src)
    if s.noise.white_nsd > 0:
        pd = pd + white_noise(s.noise.white_nsd, fs, n, derive_seed(s.seed, PD_STREAM)).values
    tf = fit_tones(TimeSeries(pd, fs), f * np.arange(1, harmonics + 1))
    amp = float(np.sqrt(np.sum(tf.amplitudes**2)))
    snr = amp / tf.residual_rms if tf.residual_rms > 0 else float("inf")
    return DirectResult(float(f), amp, tf.residual_rms, snr, tf.amplitudes)


@dataclass(frozen=True)
class OperatingGrid:
    e_aux_axis: np.ndarray
    delta_p_axis: np.ndarray
    metric: np.ndarray  # (n_e_aux, n_delta_p), V; nan where a cell failed
    errors: dict

    @property
    def argmax(self) -> tuple[float, float]:
        i, j = np.unravel_index(np.nanargmax(self.metric), self.metric.shape)
        return float(self.e_aux_axis[i]), float(self.delta_p_axis[j])


def _grid_cell(args):
    scenario, chain = args
    try:
        return float(chain(scenario)), None
    except RydbergTwinError as exc:
        return float("nan"), str(exc)


def grid_scan(e_aux_axis, delta_p_axis, probe: Scenario, threads: int | None = None,
              chain=_sensing_amplitude) -> OperatingGrid:
    """Fitted output amplitude over an (E_aux, delta_p) grid.

    Each cell uses a seed derived from the probe seed and the cell's grid
    index, so results do not depend on evaluation order or worker count.
    """
    ea = np.asarray(e_aux_axis, dtype=float)
    dp = np.asarray(delta_p_axis, dtype=float)
    tasks = []
    for i, e in enumerate(ea):
        for j, d in enumerate(dp):
            sc = probe.with_operating_point(e_aux=e, delta_p=d)
            tasks.append((replace(sc, seed=derive_seed(probe.seed, i, j)), chain))
    results = _map(_grid_cell, tasks, threads)
    metric = np.array([r[0] for r in results]).reshape(len(ea), len(dp))
    errors = {f"{k // len(dp)},{k % len(dp)}": r[1] for k, r in enumerate(results) if r[1]}
    return OperatingGrid(ea, dp, metric, errors)


def worker_count(threads: int | None = None) -> int:
    if threads is not None:
        return max(int(threads), 1)
    env = os.environ.get("RYDBERG_TWIN_THREADS")
    if env:
        try:
            return max(int(env), 1)
        except ValueError as exc:
            raise PreconditionError(f"RYDBERG_TWIN_THREADS must be an integer, got {env!r}",
                                    "experiments") from exc
    return max(os.cpu_count() or 1, 1)


def _map(fn, items, threads):
    workers = min(worker_count(threads), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
