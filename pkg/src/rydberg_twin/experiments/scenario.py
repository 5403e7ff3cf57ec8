"""Scenario description and TOML config loading.

A config file is a set of sections; every key has a default, unknown keys
are rejected. The fully resolved config (defaults filled in) is what gets
embedded in reports and hashed for output file names.
"""

from __future__ import annotations

import copy
import sys
from dataclasses import dataclass, replace

import numpy as np

from ..cell import LN2, PARAFFIN_TAU_POINTS, UNCOATED_TAU_POINTS, CellModel, tau_for_amplitude
from ..errors import ConfigurationError, PreconditionError
from ..lockin import CUTOFF_FACTOR, DemodConfig
from ..noise import RNG_ALGORITHM, NoiseSpec
from ..spectroscopy import EitModel
from ..stark import ALPHA_60D52, DEFAULT_WEIGHTS, MJ_LABELS, default_branches
from ..waveforms import CouplingModel, FieldSource, check_f_mod, default_f_mod

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

# Section -> key -> default. ``None`` means "derive at run time".
SCHEMA = {
    "": {"seed": 0},
    "cell": {"kind": "paraffin", "tau_points": None, "radius": 1.5},
    "eit": {
        "linewidth_fwhm": 10.0,
        "peak_voltage": 1.0,
        "weights": [DEFAULT_WEIGHTS[m] for m in MJ_LABELS],
        "alphas": [ALPHA_60D52[m] for m in MJ_LABELS],
        "rabi_probe": 2 * np.pi * 29.5e6,
        "rabi_coupling": 2 * np.pi * 1.7e6,
    },
    "operating_point": {"e_aux": 0.354, "delta_p": 243.0, "f_mod": None},
    "signal": {"frequency": 10.0, "amplitude": 0.1, "phase": 0.0},
    "coupling": {"kappa": 0.1, "mode": "projected"},
    "demod": {"reference": "sine", "phase": "auto", "lpf_order": 4,
              "cutoff_factor": CUTOFF_FACTOR, "lpf_cutoff": None},
    "noise": {"white_nsd": 0.9e-6, "flicker_exponent": 0.7, "flicker_nsd_at_1hz": 0.0},
    "timing": {"fs": None, "duration": None, "oversample": 4},
    "stark_map": {"field_max": 0.38, "n_points": 381},
    "transient": {"amplitude": 0.833, "duration": 3e-3, "fs": None},
    "detuning_map": {"detuning_min": 0.0, "detuning_max": 320.0, "detuning_step": 1.0,
                     "step_field": 0.354, "duration": 1.0e-3, "fs": None},
    "grid_scan": {"e_aux_axis": [0.25, 0.3, 0.354, 0.4, 0.45, 0.5],
                  "delta_p_axis": [160.0, 180.0, 200.0, 220.0, 243.0, 255.0, 270.0],
                  "signal_frequency": 10.0, "signal_amplitude": 0.1},
    "responsivity": {"frequency": 10.0, "amplitudes": None, "amp_min": 0.05, "amp_max": 50.0,
                     "n_amplitudes": 25, "min_duration": 1.0},
    "direct_sense": {"frequencies": [10.0, 500.0, 5000.0], "amplitude": 0.1, "delta_p": -7.0,
                     "fs": 200e3, "min_duration": 0.02, "harmonics": 16, "snr_threshold": 3.0},
    "sensitivity": {"frequencies": None, "m_values": None, "sensitivities": None,
                    "nsd_pd": {"7900": 0.9e-6, "27900": 2.57e-6, "87900": 7.54e-6},
                    "lia_nsd_at_1hz": None, "lia_exponent": 0.7, "lia_frequency": "signal"},
    "noise_gen": {"kind": "flicker", "fs": 1000.0, "n": 2**16, "white_nsd": 1e-6,
                  "flicker_nsd_at_1hz": 1e-6, "flicker_exponent": 0.7, "segment_length": 4096},
    "baseline": {"s0": 4.5e-6, "f0": 1000.0, "exponent": 1.4},
}


def default_config() -> dict:
    cfg = {k: copy.deepcopy(v) for k, v in SCHEMA[""].items()}
    for sec, keys in SCHEMA.items():
        if sec:
            cfg[sec] = copy.deepcopy(keys)
    return cfg


def merge_config(overrides: dict) -> dict:
    """Validate ``overrides`` against the schema and fill in defaults."""
    cfg = default_config()
    for key, value in overrides.items():
        if key in SCHEMA[""]:
            cfg[key] = value
        elif key in SCHEMA:
            if not isinstance(value, dict):
                raise ConfigurationError(f"[{key}] must be a table", "experiments")
            unknown = sorted(set(value) - set(SCHEMA[key]))
            if unknown:
                raise ConfigurationError(f"unknown keys in [{key}]: {', '.join(unknown)}", "experiments")
            cfg[key].update(copy.deepcopy(value))
        else:
            raise ConfigurationError(f"unknown config key or section {key!r}", "experiments")
    return cfg


def load_config(path) -> dict:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigurationError(f"config file not found: {path}", "experiments") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"cannot parse {path}: {exc}", "experiments") from exc
    return merge_config(raw)


@dataclass(frozen=True)
class Scenario:
    cell: CellModel
    eit: EitModel
    aux: FieldSource | None  # square wave on the vertical plates
    signal: FieldSource  # sine on the horizontal plates
    coupling: CouplingModel
    delta_p: float  # MHz
    noise: NoiseSpec
    demod_reference: str = "sine"
    demod_phase: float | None = None  # None: calibrate at the operating point
    lpf_order: int = 4
    cutoff_factor: float = CUTOFF_FACTOR
    lpf_cutoff: float | None = None
    fs: float | None = None
    duration: float | None = None
    oversample: int = 4
    seed: int = 0
    scheduled_f_mod: bool = False  # follow the f_mod schedule when the signal frequency changes

    @property
    def f_signal(self) -> float:
        return self.signal.frequency

    @property
    def f_mod(self) -> float:
        return self.aux.frequency if self.aux is not None else 0.0

    @property
    def e_aux(self) -> float:
        return self.aux.amplitude if self.aux is not None else 0.0

    @property
    def sample_rate(self) -> float:
        return self.fs if self.fs is not None else 20.0 * self.f_mod

    def demod_config(self, phase: float | None = None) -> DemodConfig:
        cutoff = self.lpf_cutoff if self.lpf_cutoff is not None else self.cutoff_factor * self.f_signal
        ph = phase if phase is not None else (self.demod_phase or 0.0)
        return DemodConfig(self.f_mod, cutoff, self.demod_reference, ph, self.lpf_order)

    def screening_settle_time(self) -> float:
        """Seven decay times of the slowest screening constant in play."""
        amps = [self.e_aux, self.signal.amplitude]
        return 7.0 * max(tau_for_amplitude(self.cell, a) for a in amps) / LN2

    def resolved_duration(self) -> float:
        if self.duration is not None:
            return self.duration
        settle = self.demod_config().settle_time
        return max(settle + 2.0 / self.f_signal, 10.0 * self.screening_settle_time())

    def validate(self) -> None:
        if self.aux is None:
            raise PreconditionError("lock-in sensing needs an auxiliary source", "experiments")
        if not np.isfinite(self.delta_p):
            raise PreconditionError("delta_p must be finite", "experiments")
        if self.sample_rate < 10 * self.f_mod:
            raise PreconditionError(
                f"fs={self.sample_rate:g} Hz below 10*f_mod={10 * self.f_mod:g} Hz", "experiments")
        dur = self.resolved_duration()
        need = max(2.0 / self.f_signal, 10.0 * self.screening_settle_time())
        if dur < need * (1 - 1e-12):
            raise PreconditionError(f"duration {dur:g} s shorter than required {need:g} s", "experiments")
        if int(self.oversample) < 1:
            raise PreconditionError("oversample must be >= 1", "experiments")
        self.demod_config()  # raises on a bad cutoff
        check_f_mod(self.f_mod)

    def with_signal(self, amplitude=None, frequency=None) -> "Scenario":
        sig = replace(self.signal,
                      amplitude=self.signal.amplitude if amplitude is None else float(amplitude),
                      frequency=self.signal.frequency if frequency is None else float(frequency))
        out = replace(self, signal=sig)
        if self.scheduled_f_mod and self.aux is not None:
            out = replace(out, aux=replace(self.aux, frequency=default_f_mod(sig.frequency)))
        return out

    def with_operating_point(self, e_aux=None, delta_p=None, f_mod=None) -> "Scenario":
        aux = replace(self.aux,
                      amplitude=self.aux.amplitude if e_aux is None else float(e_aux),
                      frequency=self.aux.frequency if f_mod is None else float(f_mod))
        return replace(self, aux=aux, delta_p=self.delta_p if delta_p is None else float(delta_p),
                       scheduled_f_mod=self.scheduled_f_mod and f_mod is None)

    def describe(self) -> dict:
        """Resolved parameters for provenance."""
        return {
            "cell": {"kind": self.cell.kind, "tau_points": [list(p) for p in self.cell.tau_points],
                     "radius": self.cell.radius},
            "eit": {"linewidth_fwhm": self.eit.linewidth_fwhm, "peak_voltage": self.eit.peak_voltage,
                    "weights": [b.weight for b in self.eit.branches],
                    "alphas": [b.alpha for b in self.eit.branches],
                    "rabi_probe": self.eit.rabi_probe, "rabi_coupling": self.eit.rabi_coupling},
            "operating_point": {"e_aux": self.e_aux, "delta_p": self.delta_p, "f_mod": self.f_mod},
            "signal": {"frequency": self.signal.frequency, "amplitude": self.signal.amplitude,
                       "phase": self.signal.phase},
            "coupling": {"kappa": self.coupling.kappa, "mode": self.coupling.mode},
            "demod": {"reference": self.demod_reference,
                      "phase": "auto" if self.demod_phase is None else self.demod_phase,
                      "lpf_order": self.lpf_order, "cutoff_factor": self.cutoff_factor,
                      "lpf_cutoff": self.demod_config().lpf_cutoff if self.aux is not None else None},
            "noise": {"white_nsd": self.noise.white_nsd, "flicker_exponent": self.noise.flicker_exponent,
                      "flicker_nsd_at_1hz": self.noise.flicker_nsd_at_1hz, "rng": RNG_ALGORITHM},
            "timing": {"fs": self.sample_rate if self.aux is not None else self.fs,
                       "duration": self.resolved_duration() if self.aux is not None else self.duration,
                       "oversample": self.oversample},
            "seed": self.seed,
        }


def cell_from_config(sec: dict) -> CellModel:
    pts = sec.get("tau_points")
    if pts is None:
        pts = UNCOATED_TAU_POINTS if sec["kind"] == "uncoated" else PARAFFIN_TAU_POINTS
    return CellModel(sec["kind"], tuple(tuple(p) for p in pts), float(sec["radius"]))


def eit_from_config(sec: dict) -> EitModel:
    return EitModel(default_branches(sec["weights"], sec["alphas"]), float(sec["linewidth_fwhm"]),
                    float(sec["peak_voltage"]), float(sec["rabi_probe"]), float(sec["rabi_coupling"]))


def scenario_from_config(cfg: dict) -> Scenario:
    op, sig, dm, tm = cfg["operating_point"], cfg["signal"], cfg["demod"], cfg["timing"]
    f_sig = float(sig["frequency"])
    f_mod = float(op["f_mod"]) if op["f_mod"] is not None else default_f_mod(f_sig)
    phase = dm["phase"]
    if isinstance(phase, str):
        if phase != "auto":
            raise ConfigurationError(f"demod.phase must be a number or 'auto', got {phase!r}", "experiments")
        phase = None
    nz = cfg["noise"]
    return Scenario(
        cell=cell_from_config(cfg["cell"]),
        eit=eit_from_config(cfg["eit"]),
        aux=FieldSource("square", float(op["e_aux"]), f_mod),
        signal=FieldSource("sine", float(sig["amplitude"]), f_sig, float(sig["phase"])),
        coupling=CouplingModel(float(cfg["coupling"]["kappa"]), cfg["coupling"]["mode"]),
        delta_p=float(op["delta_p"]),
        noise=NoiseSpec(float(nz["white_nsd"]), float(nz["flicker_exponent"]),
                        float(nz["flicker_nsd_at_1hz"]), int(cfg["seed"])),
        demod_reference=dm["reference"],
        demod_phase=None if phase is None else float(phase),
        lpf_order=int(dm["lpf_order"]),
        cutoff_factor=float(dm["cutoff_factor"]),
        lpf_cutoff=None if dm["lpf_cutoff"] is None else float(dm["lpf_cutoff"]),
        fs=None if tm["fs"] is None else float(tm["fs"]),
        duration=None if tm["duration"] is None else float(tm["duration"]),
        oversample=int(tm["oversample"]),
        seed=int(cfg["seed"]),
        scheduled_f_mod=op["f_mod"] is None,
    )


def default_scenario(**signal) -> Scenario:
    """The experiment's operating point: 354 mV/cm aux, 243 MHz detuning."""
    cfg = default_config()
    cfg["signal"].update(signal)
    return scenario_from_config(cfg)


def noiseless(s: Scenario) -> Scenario:
    return replace(s, noise=replace(s.noise, white_nsd=0.0, flicker_nsd_at_1hz=0.0))

