"""Command-line entry point: ``rydberg-twin <subcommand> --config f.toml --out dir``.

Every subcommand writes its CSV data plus one JSON report embedding the
resolved config. File names are ``<subcommand>-<hash>`` where the hash is
taken over the resolved config, so reruns overwrite identical files.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .. import io
from ..cell import LN2, ScreeningState, export_transient, screen, tau_for_amplitude
from ..errors import ConfigurationError, RydbergTwinError
from ..lockin import export_demodulated
from ..noise import (RNG_ALGORITHM, NoiseSpec, derive_seed, estimate_asd, export_asd, flicker_noise, loglog_slope,
                     white_noise)
from ..spectroscopy import detuning_transient_map, map_ridge_crossing_time, ridge_crossing_time
from ..stark import stark_map
from ..timeseries import TimeSeries
from .scenario import cell_from_config, eit_from_config, load_config, merge_config, scenario_from_config
from .sensing import direct_sensing, grid_scan, responsivity_sweep, run_sensing
from .sensitivity import (TABLE_I, DipoleBaseline, LiaNoiseCurve, back_solve_responsivity,
                          dipole_baseline, sensitivity_report)

PAPER = "PAPER-consistency"
MODEL = "model-relative"


class Output:
    def __init__(self, out_dir, name, cfg):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.stem = f"{name}-{io.content_hash({'subcommand': name, 'config': cfg})}"
        self.files = []

    def path(self, suffix=""):
        p = self.dir / f"{self.stem}{suffix}"
        self.files.append(p.name)
        return p


def cmd_stark_map(cfg, out, args):
    sec = cfg["stark_map"]
    eit = eit_from_config(cfg["eit"])
    smap = stark_map(np.linspace(0.0, sec["field_max"], int(sec["n_points"])), eit.branches)
    smap.to_csv(out.path(".csv"))
    return {"end_shifts_MHz": smap.shifts[:, -1], "tag": PAPER}


def cmd_transient(cfg, out, args):
    sec = cfg["transient"]
    cell = cell_from_config(cfg["cell"])
    E0 = float(sec["amplitude"])
    t_half = tau_for_amplitude(cell, E0)
    fs = sec["fs"] or 200.0 / t_half
    n = int(round(sec["duration"] * fs)) + 1
    applied = TimeSeries(np.full(n, E0), fs, units="V/cm")
    internal = screen(applied, cell, ScreeningState())
    export_transient(out.path(".csv"), applied, internal)
    k = np.nonzero(internal.values <= E0 / 2)[0]
    measured = float(internal.time[k[0]]) if k.size else float("nan")
    return {"half_recovery_time_s": t_half, "measured_half_time_s": measured,
            "tau_decay_s": t_half / LN2, "tag": PAPER}


def cmd_detuning_map(cfg, out, args):
    sec = cfg["detuning_map"]
    axis = np.arange(sec["detuning_min"], sec["detuning_max"] + 0.5 * sec["detuning_step"], sec["detuning_step"])
    eit = eit_from_config(cfg["eit"])
    dmap = detuning_transient_map(axis, sec["step_field"], eit, cell_from_config(cfg["cell"]),
                                  sec["duration"], sec["fs"])
    dmap.to_csv(out.path(".csv"))
    dp = cfg["operating_point"]["delta_p"]
    crossings = {b.mj_label: ridge_crossing_time(dmap.internal_field, dmap.time, b, dp) for b in eit.branches}
    return {"delta_p_MHz": dp, "branch_crossing_times_s": crossings,
            "map_crossing_time_s": map_ridge_crossing_time(dmap, dp), "tag": MODEL}


def cmd_sense(cfg, out, args):
    s = scenario_from_config(cfg)
    res = run_sensing(s)
    export_demodulated(out.path("-demod.csv"), res.demodulated)
    io.write_csv(out.path("-pd.csv"), ["time_s", "pd_V"], [res.pd.time, res.pd.values])
    return {"fitted_amplitude_V": res.fit.amplitude, "amplitude_sigma_V": res.fit.amplitude_sigma,
            "fitted_phase_rad": res.fit.phase, "residual_rms_V": res.fit.residual_rms,
            "fitted_frequency_Hz": res.fitted_frequency, "demod_phase_rad": res.phase,
            "settle_time_s": res.settle_time, "scenario": s.describe(), "tag": MODEL}


def _amplitudes(sec):
    if sec["amplitudes"] is not None:
        return np.asarray(sec["amplitudes"], dtype=float)
    return np.logspace(np.log10(sec["amp_min"]), np.log10(sec["amp_max"]), int(sec["n_amplitudes"]))


def cmd_responsivity(cfg, out, args):
    sec = cfg["responsivity"]
    freqs = np.atleast_1d(np.asarray(sec["frequency"], dtype=float))
    amps = _amplitudes(sec)
    rows = []
    cols = {"f": [], "input": [], "output": []}
    for f in freqs:
        c = dict(cfg)
        c["signal"] = dict(cfg["signal"], frequency=float(f))
        base = scenario_from_config(c)
        fit, pts = responsivity_sweep(f, amps, base, threads=args.threads, min_duration=sec["min_duration"])
        rows.append({"f": float(f), "f_mod": base.f_mod, "m": fit.slope, "intercept": fit.intercept,
                     "r_squared": fit.r_squared, "linear_range_max": fit.linear_range_max,
                     "n_linear": fit.n_points})
        cols["f"] += [float(f)] * len(pts)
        cols["input"] += list(pts[:, 0])
        cols["output"] += list(pts[:, 1])
    io.write_csv(out.path(".csv"), ["f_Hz", "input_V_per_cm", "output_V"], [cols["f"], cols["input"], cols["output"]])
    return {"fits": rows, "tag": MODEL}


def cmd_direct_sense(cfg, out, args):
    sec = cfg["direct_sense"]
    base = scenario_from_config(cfg)
    res = [direct_sensing(f, sec["amplitude"], sec["delta_p"], base, sec["fs"], sec["min_duration"],
                          int(sec["harmonics"])) for f in np.atleast_1d(sec["frequencies"])]
    io.write_csv(out.path(".csv"), ["f_Hz", "amplitude_V", "residual_rms_V", "snr"],
                 [[r.frequency for r in res], [r.amplitude for r in res],
                  [r.residual_rms for r in res], [r.snr for r in res]])
    return {"rows": [{"f": r.frequency, "snr": r.snr, "detected": r.snr >= sec["snr_threshold"]} for r in res],
            "snr_threshold": sec["snr_threshold"], "tag": MODEL}


def cmd_sensitivity_report(cfg, out, args):
    sec = cfg["sensitivity"]
    if sec["lia_nsd_at_1hz"] is None:
        raise ConfigurationError("[sensitivity] lia_nsd_at_1hz must be set (lock-in noise at 1 Hz, V/sqrt(Hz))",
                                 "experiments")
    lia = LiaNoiseCurve(float(sec["lia_nsd_at_1hz"]), float(sec["lia_exponent"]))
    nsd_pd = {float(k): float(v) for k, v in sec["nsd_pd"].items()}
    tag = MODEL
    if sec["m_values"] is not None:
        freqs, ms = sec["frequencies"], sec["m_values"]
        if freqs is None:
            raise ConfigurationError("[sensitivity] m_values given without frequencies", "experiments")
    else:
        meas = TABLE_I if sec["sensitivities"] is None else dict(zip(sec["frequencies"], sec["sensitivities"]))
        m = back_solve_responsivity(meas, lia, nsd_pd, sec["lia_frequency"])
        freqs, ms = list(m), list(m.values())
        tag = PAPER
    rep = sensitivity_report(freqs, ms, lia, nsd_pd, sec["lia_frequency"], tag)
    col = rep.columns()
    bl = DipoleBaseline(**{k: float(v) for k, v in cfg["baseline"].items()})
    base = dipole_baseline(col["f"], bl)
    io.write_csv(out.path(".csv"),
                 ["f_Hz", "f_mod_Hz", "m_V_per_V_per_cm", "nsd_pd_V_per_sqrtHz", "nsd_lia_V_per_sqrtHz",
                  "nsd_total_V_per_sqrtHz", "s_e_V_per_cm_per_sqrtHz", "dipole_baseline_V_per_cm_per_sqrtHz"],
                 [col["f"], col["f_mod"], col["m"], col["nsd_pd"], col["nsd_lia"], col["nsd_total"], col["s_e"], base])
    return {**rep.as_dict(), "tag": tag, "baseline_tag": MODEL}


def cmd_noise_gen(cfg, out, args):
    sec = cfg["noise_gen"]
    fs, n = float(sec["fs"]), int(sec["n"])
    spec = NoiseSpec(float(sec["white_nsd"]), float(sec["flicker_exponent"]),
                     float(sec["flicker_nsd_at_1hz"]), int(cfg["seed"]))
    x = np.zeros(n)
    if sec["kind"] in ("white", "both"):
        x += white_noise(spec.white_nsd, fs, n, derive_seed(spec.seed, 1)).values
    if sec["kind"] in ("flicker", "both"):
        x += flicker_noise(spec, fs, n, derive_seed(spec.seed, 2)).values
    if sec["kind"] not in ("white", "flicker", "both"):
        raise ConfigurationError(f"noise_gen.kind must be white, flicker or both; got {sec['kind']!r}", "experiments")
    trace = TimeSeries(x, fs, units="V")
    freqs, asd, rbw = estimate_asd(trace, int(sec["segment_length"]))
    io.write_csv(out.path("-trace.csv"), ["time_s", "noise_V"], [trace.time, x])
    export_asd(out.path("-asd.csv"), freqs, asd)
    lo, hi = 10 * fs / sec["segment_length"], fs / 20
    return {"rbw_Hz": rbw, "loglog_slope": loglog_slope(freqs, asd, lo, hi),
            "slope_band_Hz": [lo, hi], "tag": MODEL}


COMMANDS = {
    "stark-map": cmd_stark_map,
    "transient": cmd_transient,
    "detuning-map": cmd_detuning_map,
    "grid-scan": None,  # set below
    "sense": cmd_sense,
    "responsivity": cmd_responsivity,
    "direct-sense": cmd_direct_sense,
    "sensitivity-report": cmd_sensitivity_report,
    "noise-gen": cmd_noise_gen,
}


def cmd_grid_scan(cfg, out, args):
    sec = cfg["grid_scan"]
    c = dict(cfg)
    c["signal"] = dict(cfg["signal"], frequency=sec["signal_frequency"], amplitude=sec["signal_amplitude"])
    probe = scenario_from_config(c)
    grid = grid_scan(sec["e_aux_axis"], sec["delta_p_axis"], probe, threads=args.threads)
    io.write_matrix_csv(out.path(".csv"), "e_aux_V_per_cm\\delta_p_MHz", grid.delta_p_axis, grid.e_aux_axis, grid.metric)
    return {"argmax": {"e_aux": grid.argmax[0], "delta_p": grid.argmax[1]}, "failed_cells": grid.errors,
            "tag": MODEL}


COMMANDS["grid-scan"] = cmd_grid_scan


def build_parser():
    p = argparse.ArgumentParser(prog="rydberg-twin", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, help="TOML scenario file (defaults used if omitted)")
        sp.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        sp.add_argument("--seed", type=int, help="override the config seed (unsigned 64-bit)")
        sp.add_argument("--threads", type=int, help="worker processes (overrides RYDBERG_TWIN_THREADS)")
    return p


def run(argv=None) -> dict:
    args = build_parser().parse_args(argv)
    cfg = load_config(args.config) if args.config else merge_config({})
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigurationError("--seed must be an unsigned 64-bit integer", "experiments")
        cfg["seed"] = args.seed
    out = Output(args.out, args.command, cfg)
    results = COMMANDS[args.command](cfg, out, args)
    report_path = out.path(".json")
    report = {"subcommand": args.command, "config": cfg, "rng": RNG_ALGORITHM, "results": results,
              "files": sorted(out.files)}
    io.write_json(report_path, report)
    return report


def main(argv=None) -> int:
    try:
        report = run(argv)
    except RydbergTwinError as exc:
        print(json.dumps(exc.record(), sort_keys=True), file=sys.stderr)
        return 2 if isinstance(exc, ConfigurationError) else 1
    except (OSError, TypeError, ValueError) as exc:
        # malformed config values or unwritable output directory
        print(json.dumps({"error": type(exc).__name__, "module": "cli", "message": str(exc)}, sort_keys=True),
              file=sys.stderr)
        return 1
    print(json.dumps({"ok": True, "files": report["files"]}, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
