"""Scenario engine, sweeps, sensitivity reporting and the CLI."""

from .scenario import Scenario, default_scenario, load_config, merge_config, noiseless, scenario_from_config
from .sensing import (DirectResult, OperatingGrid, SensingResult, calibrate_phase, direct_sensing, grid_scan,
                      responsivity_sweep, run_sensing)
from .sensitivity import (NSD_PD, TABLE_I, DipoleBaseline, LiaNoiseCurve, SensitivityReport,
                          back_solve_responsivity, dipole_baseline, sensitivity_report)

__all__ = [
    "Scenario", "default_scenario", "load_config", "merge_config", "noiseless", "scenario_from_config",
    "DirectResult", "OperatingGrid", "SensingResult", "calibrate_phase", "direct_sensing", "grid_scan",
    "responsivity_sweep", "run_sensing",
    "NSD_PD", "TABLE_I", "DipoleBaseline", "LiaNoiseCurve", "SensitivityReport", "back_solve_responsivity",
    "dipole_baseline", "sensitivity_report",
]
