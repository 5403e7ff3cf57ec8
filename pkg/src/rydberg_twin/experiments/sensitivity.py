"""Noise budget, field sensitivity and the classical dipole baseline."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError, InvalidArgumentError
from ..noise import nsd_total
from ..waveforms import default_f_mod

# Measured field sensitivities, uV/cm/sqrt(Hz), by signal frequency (Hz).
TABLE_I = {
    0.5: 2636.0, 1.0: 819.0, 2.0: 395.0, 5.0: 82.0, 10.0: 33.0,
    20.0: 17.0, 100.0: 10.0, 200.0: 5.0, 1000.0: 2.0, 10000.0: 5.0,
}

# PD + laser intensity noise at each modulation frequency, V/sqrt(Hz).
NSD_PD = {7.9e3: 0.9e-6, 27.9e3: 2.57e-6, 87.9e3: 7.54e-6}


@dataclass(frozen=True)
class SensitivityRow:
    f: float
    f_mod: float
    m: float  # V per V/cm
    nsd_pd: float
    nsd_lia: float
    nsd_total: float
    s_e: float  # V/cm/sqrt(Hz)
    tag: str = "model-relative"


@dataclass(frozen=True)
class SensitivityReport:
    rows: tuple[SensitivityRow, ...]

    def as_dict(self) -> dict:
        return {"rows": [row.__dict__ for row in self.rows]}

    def columns(self) -> dict:
        keys = ["f", "f_mod", "m", "nsd_pd", "nsd_lia", "nsd_total", "s_e"]
        return {k: np.array([getattr(r, k) for r in self.rows]) for k in keys}


@dataclass(frozen=True)
class LiaNoiseCurve:
    """Lock-in input noise, ``nsd_at_1hz * f**-exponent`` (V/sqrt(Hz))."""

    nsd_at_1hz: float
    exponent: float = 0.7

    def __call__(self, f):
        return self.nsd_at_1hz * np.asarray(f, dtype=float) ** (-self.exponent)


def _lookup_pd(nsd_pd: dict, f_mod: float) -> float:
    for key, val in nsd_pd.items():
        if abs(float(key) - f_mod) <= 1e-6 * f_mod:
            return float(val)
    raise ConfigurationError(f"no NSD_PD configured for f_mod = {f_mod:g} Hz", "experiments")


def noise_budget(f: float, lia: LiaNoiseCurve, nsd_pd: dict = NSD_PD, f_mod: float | None = None,
                 lia_frequency: str = "signal"):
    """``(f_mod, NSD_PD, NSD_LIA, NSD_total)`` at signal frequency ``f``.

    NSD_PD is taken at the modulation frequency. ``lia_frequency`` selects
    where the lock-in flicker curve is read: at ``f`` ("signal") or at
    ``f_mod`` ("modulation").
    """
    f_mod = default_f_mod(f) if f_mod is None else f_mod
    pd = _lookup_pd(nsd_pd, f_mod)
    if lia_frequency == "signal":
        li = float(lia(f))
    elif lia_frequency == "modulation":
        li = float(lia(f_mod))
    else:
        raise ConfigurationError(f"lia_frequency must be 'signal' or 'modulation', got {lia_frequency!r}",
                                 "experiments")
    return f_mod, pd, li, float(nsd_total(pd, li))


def sensitivity_report(frequencies, m_values, lia: LiaNoiseCurve, nsd_pd: dict = NSD_PD,
                       lia_frequency: str = "signal", tag: str = "model-relative") -> SensitivityReport:
    """Rows of ``S_E = NSD_total / m(f)``."""
    freqs = np.asarray(frequencies, dtype=float)
    ms = np.asarray(m_values, dtype=float)
    if freqs.shape != ms.shape:
        raise InvalidArgumentError("frequencies and m_values differ in length", "experiments")
    if np.any(ms <= 0) or np.any(freqs <= 0):
        raise InvalidArgumentError("frequencies and m_values must be positive", "experiments")
    rows = []
    for f, m in zip(freqs, ms):
        f_mod, pd, li, tot = noise_budget(f, lia, nsd_pd, lia_frequency=lia_frequency)
        rows.append(SensitivityRow(float(f), f_mod, float(m), pd, li, tot, tot / float(m), tag))
    return SensitivityReport(tuple(rows))


def back_solve_responsivity(sensitivities: dict, lia: LiaNoiseCurve, nsd_pd: dict = NSD_PD,
                            lia_frequency: str = "signal") -> dict:
    """``m(f) = NSD_total / S_E`` for measured sensitivities given in uV/cm/sqrt(Hz)."""
    out = {}
    for f, s_uv in sensitivities.items():
        tot = noise_budget(f, lia, nsd_pd, lia_frequency=lia_frequency)[3]
        out[f] = tot / (s_uv * 1e-6)
    return out


@dataclass(frozen=True)
class DipoleBaseline:
    """Power-law stand-in for a small classical dipole receiver's sensitivity.

    ``S(f) = s0 * (f0/f)**exponent`` in V/cm/sqrt(Hz). The defaults sit one to
    two decades above the measured Rydberg sensitivities below 100 Hz and
    within a factor of a few near 1 kHz; they are not derived from an
    antenna model.
    """

    s0: float = 4.5e-6
    f0: float = 1000.0
    exponent: float = 1.4


def dipole_baseline(f, params: DipoleBaseline = DipoleBaseline()):
    f = np.asarray(f, dtype=float)
    if np.any(f <= 0):
        raise InvalidArgumentError("frequency must be positive", "experiments")
    out = params.s0 * (params.f0 / f) ** params.exponent
    return float(out) if out.ndim == 0 else out
