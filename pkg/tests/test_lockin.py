import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rydberg_twin import io
from rydberg_twin.errors import ConfigurationError, FitError, InvalidArgumentError, PreconditionError
from rydberg_twin.lockin import (CUTOFF_FACTOR, DemodConfig, correlation_factor, demodulate, export_demodulated,
                                 fit_responsivity, fit_sine, fit_tones, lowpass, lowpass_gain, refine_frequency,
                                 tone_noise_sigma)
from rydberg_twin.timeseries import TimeSeries

F_MOD = 7.9e3
FS = 20 * F_MOD


def tone(f, A=1.0, phase=0.0, duration=0.1, fs=FS):
    t = np.arange(int(round(duration * fs))) / fs
    return TimeSeries(A * np.sin(2 * np.pi * f * t + phase), fs)


def settled(out: TimeSeries, cfg: DemodConfig):
    return out.slice_time(cfg.settle_time).values


CFG = DemodConfig(F_MOD, 100.0)


def test_config_validation():
    with pytest.raises(ConfigurationError):
        DemodConfig(F_MOD, F_MOD / 2)
    with pytest.raises(ConfigurationError):
        DemodConfig(F_MOD, 10.0, lpf_order=0)
    with pytest.raises(ConfigurationError):
        DemodConfig(F_MOD, 10.0, reference="triangle")
    cfg = DemodConfig.for_signal(10.0, F_MOD)
    assert cfg.lpf_cutoff == pytest.approx(12.65) and CUTOFF_FACTOR == 1.265
    assert cfg.lpf_order == 4 and cfg.reference == "sine"
    assert cfg.settle_time == pytest.approx(7 / (2 * np.pi * 12.65))


def test_sample_rate_precondition():
    with pytest.raises(PreconditionError):
        demodulate(tone(F_MOD, fs=5 * F_MOD), CFG)


def test_in_phase_rms():
    y = settled(demodulate(tone(F_MOD), CFG), CFG)
    assert np.mean(y) == pytest.approx(1 / np.sqrt(2), rel=0.01)


def test_square_reference_scale():
    # continuous-limit convention; needs fine sampling of the square edges
    cfg = DemodConfig(F_MOD, 100.0, reference="square")
    y = settled(demodulate(tone(F_MOD, fs=200 * F_MOD), cfg), cfg)
    assert np.mean(y) == pytest.approx(2 * np.sqrt(2) / np.pi / np.sqrt(2), rel=0.01)


def test_quadrature_rejected():
    y = settled(demodulate(tone(F_MOD, phase=np.pi / 2), CFG), CFG)
    assert abs(np.mean(y)) < 0.01 * (1 / np.sqrt(2))


def test_third_harmonic_rejected():
    cfg = DemodConfig(F_MOD, 0.01 * F_MOD)
    y = settled(demodulate(tone(3 * F_MOD), cfg), cfg)
    assert np.max(np.abs(y)) < 1e-3 / np.sqrt(2)
    # the mixer puts it at 2 and 4 f_mod; the cascade predicts far below -60 dB
    assert lowpass_gain(2 * F_MOD, cfg.lpf_cutoff, FS, 4) < 1e-3


@pytest.mark.parametrize("offset", [200.0, 400.0, 800.0])
def test_off_band_matches_transfer_function(offset):
    # the tone sits up to 72 dB down, so wait out the start-up far beyond 7 time constants
    out = demodulate(tone(F_MOD + offset, duration=0.25), CFG)
    fit = fit_sine(out.slice_time(40 / (2 * np.pi * CFG.lpf_cutoff)), offset)
    expected = lowpass_gain(offset, CFG.lpf_cutoff, FS, CFG.lpf_order) / np.sqrt(2)
    assert 20 * np.log10(fit.amplitude / expected) == pytest.approx(0.0, abs=1.0)


def test_off_band_monotone():
    amps = []
    for off in (150, 250, 400, 700, 1200, 2000):
        out = demodulate(tone(F_MOD + off, duration=0.25), CFG)
        amps.append(fit_sine(out.slice_time(40 / (2 * np.pi * CFG.lpf_cutoff)), off).amplitude)
    assert np.all(np.diff(amps) <= 0)


@pytest.mark.parametrize("dphi", np.linspace(-np.pi, np.pi, 9))
def test_phase_sweep(dphi):
    cfg = DemodConfig(F_MOD, 100.0, phase=dphi)
    y = settled(demodulate(tone(F_MOD), cfg), cfg)
    assert np.mean(y) == pytest.approx(np.cos(dphi) / np.sqrt(2), abs=0.01 / np.sqrt(2))


@settings(max_examples=20, deadline=None)
@given(a=st.floats(-10, 10), b=st.floats(-10, 10), seed=st.integers(0, 2**32 - 1))
def test_demod_linearity(a, b, seed):
    rng = np.random.default_rng(seed)
    x = TimeSeries(rng.standard_normal(4000), FS)
    y = TimeSeries(rng.standard_normal(4000), FS)
    lhs = demodulate(x.with_values(a * x.values + b * y.values), CFG).values
    rhs = a * demodulate(x, CFG).values + b * demodulate(y, CFG).values
    np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-9 * (1 + abs(a) + abs(b)))


def test_lowpass_gain_matches_impulse_response():
    n = 1 << 16
    x = np.zeros(n); x[0] = 1.0
    h = lowpass(x, 50.0, 1e4, 3)
    H = np.abs(np.fft.rfft(h))
    f = np.fft.rfftfreq(n, 1e-4)
    np.testing.assert_allclose(H[1:2000], lowpass_gain(f[1:2000], 50.0, 1e4, 3), rtol=1e-6)


def test_warm_start_removes_startup():
    x = tone(F_MOD, duration=0.02)
    cold = demodulate(x, CFG).values
    warm = demodulate(x, CFG, warm_start=True).values
    target = 1 / np.sqrt(2)
    assert abs(cold[0] - target) > 0.5
    assert np.max(np.abs(warm - np.mean(warm))) < 1e-6


def test_warm_start_from_clean_trace():
    x = tone(F_MOD, duration=0.02)
    noisy = x.with_values(x.values + np.random.default_rng(1).standard_normal(len(x)))
    out = demodulate(noisy, CFG, warm_start=True, warm_trace=x).values
    ref = demodulate(x, CFG, warm_start=True).values
    assert out[0] == pytest.approx(ref[0], abs=0.05)


def test_fit_sine_exact():
    x = tone(10.0, A=0.3, phase=0.4, duration=0.5, fs=1e4)
    x = x.with_values(x.values + 0.05)
    fit = fit_sine(x, 10.0)
    assert fit.amplitude == pytest.approx(0.3, abs=1e-9)
    assert fit.phase == pytest.approx(0.4, abs=1e-9)
    assert fit.offset == pytest.approx(0.05, abs=1e-9)
    assert fit.residual_rms < 1e-12


@given(phase=st.floats(-np.pi, np.pi), A=st.floats(1e-3, 1e3))
def test_fit_sine_any_phase(phase, A):
    x = tone(3.0, A=A, phase=phase, duration=1.0, fs=200.0)
    assert fit_sine(x, 3.0).amplitude == pytest.approx(A, rel=1e-6)


def test_fit_sine_dc():
    assert fit_sine(TimeSeries(np.full(1000, 2.5), 1e3), 5.0).amplitude < 1e-12


def test_fit_sine_span():
    with pytest.raises(InvalidArgumentError):
        fit_sine(tone(10.0, duration=0.15, fs=1e3), 10.0)
    fit_sine(tone(10.0, duration=0.2, fs=1e3), 10.0)


def test_fit_sine_monte_carlo():
    A, sigma = 1.0, 0.1  # SNR 10
    amps, sig = [], []
    base = tone(7.0, A=A, phase=0.3, duration=1.0, fs=500.0).values
    for seed in range(200):
        noise = np.random.default_rng(seed).standard_normal(base.size) * sigma
        fit = fit_sine(TimeSeries(base + noise, 500.0), 7.0)
        amps.append(fit.amplitude); sig.append(fit.amplitude_sigma)
    amps, sig = np.array(amps), np.array(sig)
    assert np.mean(np.abs(amps - A) > 3 * sig) <= 0.02
    assert np.std(amps) == pytest.approx(np.mean(sig), rel=0.15)


def test_correlation_factor():
    rng = np.random.default_rng(0)
    white = rng.standard_normal(20000)
    assert correlation_factor(white) == pytest.approx(1.0, abs=0.1)
    # AR(1) with coefficient r: 1 + 2 r/(1-r)
    r = 0.9
    ar = lowpass(white, 1e4 * -np.log(r) / (2 * np.pi), 1e4, 1)
    assert correlation_factor(ar) == pytest.approx((1 + r) / (1 - r), rel=0.2)


def test_tone_noise_sigma_white():
    x = TimeSeries(np.zeros(3000), 1000.0)
    nsd = 2e-3
    sigma = nsd * np.sqrt(1000.0 / 2)
    # white noise, whole periods: each quadrature has variance 2 sigma^2 / n
    assert tone_noise_sigma(x, 5.0, lambda nu: np.full_like(nu, nsd**2)) == pytest.approx(
        sigma * np.sqrt(2 / 3000), rel=1e-3)


def test_tone_noise_sigma_filtered_monte_carlo():
    fs, f = 2000.0, 10.0
    n = 4000
    cut = 20.0
    x = TimeSeries(np.zeros(n), fs)
    psd = lambda nu: lowpass_gain(nu, cut, fs, 2) ** 2  # unit-density input
    model = tone_noise_sigma(x, f, psd)
    coefs = []
    for seed in range(300):
        w = np.random.default_rng(seed).standard_normal(n + 4000) * np.sqrt(fs / 2)
        y = lowpass(w, cut, fs, 2)[4000:]
        fit = fit_tones(TimeSeries(y, fs), [f])
        coefs.append(fit.amplitudes[0] * np.cos(fit.phases[0]))
    assert np.std(coefs) == pytest.approx(model, rel=0.12)


def test_refine_frequency():
    x = tone(10.03, A=0.2, phase=1.0, duration=0.5, fs=2e3)
    fit = refine_frequency(x, 10.0)
    assert fit.frequency == pytest.approx(10.03, rel=1e-6)
    assert fit.amplitude == pytest.approx(0.2, rel=1e-6)


def test_responsivity_exact_line():
    x = np.array([0.1, 0.2, 0.5, 1.0, 2.0])
    fit = fit_responsivity(np.column_stack([x, 2 * x]))
    assert fit.slope == pytest.approx(2.0) and fit.linear_range_max == 2.0 and fit.n_points == 5
    assert fit.r_squared == pytest.approx(1.0)


def test_responsivity_clipped():
    x = np.arange(1.0, 13.0)
    y = np.minimum(2 * x, 12.0)
    fit = fit_responsivity(np.column_stack([x, y]))
    assert fit.linear_range_max == 6.0
    assert fit.slope == pytest.approx(2.0)


def test_responsivity_soft_saturation():
    x = np.logspace(-2, 1, 16)
    y = 3 * x / (1 + (x / 0.5) ** 2)
    fit = fit_responsivity(np.column_stack([x, y]))
    assert fit.slope == pytest.approx(3.0, rel=0.05)
    assert 0.0 < fit.linear_range_max < 0.5
    assert 0.0 <= fit.r_squared <= 1.0


def test_responsivity_failures():
    x = np.array([0.1, 0.2, 0.3, 0.4, 0.5])
    with pytest.raises(FitError) as err:
        fit_responsivity(np.column_stack([x, np.zeros(5)]))
    assert err.value.record()["error"] == "fit_failure"
    assert "worst_relative_residual_by_prefix" in err.value.diagnostics
    with pytest.raises(FitError):
        fit_responsivity([[0.1, 1.0], [0.2, 2.0], [0.3, 3.0]])
    with pytest.raises(InvalidArgumentError):
        fit_responsivity([[0.2, 1.0], [0.1, 2.0], [0.3, 3.0], [0.4, 4.0]])


def test_export(tmp_path):
    x = tone(10.0, duration=0.1, fs=1e3)
    header, data = io.read_csv(export_demodulated(tmp_path / "d.csv", x))
    assert header == ["time_s", "output_V"]
    np.testing.assert_array_equal(data[:, 1], x.values)
