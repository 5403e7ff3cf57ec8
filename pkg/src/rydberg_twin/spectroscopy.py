"""Parametric Rydberg-EIT lineshape: field and probe detuning to PD voltage.

Each branch contributes a unit-height Lorentzian centred on its Stark shift,
weighted by its population. Balanced detection removes the absorption
background, so the signal is zero far from any resonance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cell import LN2, CellModel, ScreeningState, screen, tau_for_amplitude
from .errors import InvalidArgumentError, PreconditionError
from .stark import RydbergBranch, default_branches, validate_branch_set
from .timeseries import TimeSeries


@dataclass(frozen=True)
class EitModel:
    branches: tuple[RydbergBranch, ...] = default_branches()
    linewidth_fwhm: float = 10.0  # MHz
    peak_voltage: float = 1.0  # V
    # Metadata only; they do not enter the lineshape.
    rabi_probe: float = 2 * np.pi * 29.5e6  # rad/s
    rabi_coupling: float = 2 * np.pi * 1.7e6  # rad/s

    def __post_init__(self):
        object.__setattr__(self, "branches", tuple(self.branches))
        validate_branch_set(self.branches)
        if not self.linewidth_fwhm > 0:
            raise InvalidArgumentError("linewidth_fwhm must be positive", "spectroscopy")
        if not self.peak_voltage > 0:
            raise InvalidArgumentError("peak_voltage must be positive", "spectroscopy")


def lorentzian(x, fwhm):
    """Unit-height Lorentzian."""
    u = 2.0 * np.asarray(x) / fwhm
    return 1.0 / (1.0 + u * u)


def transmission(delta_p, E_eff, model: EitModel):
    """Balanced-PD voltage at probe detuning ``delta_p`` (MHz) and field ``E_eff`` (V/cm).

    Broadcasts over array arguments.
    """
    dp = np.asarray(delta_p, dtype=float)
    E = np.asarray(E_eff, dtype=float)
    if not (np.all(np.isfinite(dp)) and np.all(np.isfinite(E))):
        raise InvalidArgumentError("detuning and field must be finite", "spectroscopy")
    E2 = E * E
    out = np.zeros(np.broadcast(dp, E).shape)
    for b in model.branches:
        if b.weight == 0:
            continue
        center = -0.5 * b.alpha * E2
        out += b.weight * lorentzian(dp - center, model.linewidth_fwhm)
    out *= model.peak_voltage
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class DetuningMap:
    detuning_axis: np.ndarray  # MHz
    time: np.ndarray  # s
    voltage: np.ndarray  # (n_detuning, n_time), V
    internal_field: np.ndarray  # V/cm

    def to_csv(self, path):
        from .io import write_matrix_csv

        return write_matrix_csv(path, "detuning_MHz\\time_s", self.time, self.detuning_axis, self.voltage)


def detuning_transient_map(detuning_axis, step_field: float, model: EitModel, cell: CellModel,
                           duration: float, fs: float | None = None) -> DetuningMap:
    """PD voltage versus probe detuning and time after a field step at t=0.

    The step is screened once; every detuning row sees the same internal field.
    ``fs`` defaults to 50 samples per screening decay time.
    """
    axis = np.asarray(detuning_axis, dtype=float)
    if axis.ndim != 1 or axis.size == 0 or np.any(np.diff(axis) < 0):
        raise InvalidArgumentError("detuning axis must be non-empty and sorted", "spectroscopy")
    tau_decay = tau_for_amplitude(cell, abs(step_field)) / LN2
    if duration < 5 * tau_decay:
        raise PreconditionError(
            f"duration {duration:.3g} s shorter than 5*tau_decay = {5 * tau_decay:.3g} s", "spectroscopy")
    if fs is None:
        fs = 50.0 / (cell.min_tau / LN2)
    n = int(round(duration * fs)) + 1
    applied = TimeSeries(np.full(n, float(step_field)), fs, units="V/cm")
    internal = screen(applied, cell, ScreeningState())
    voltage = transmission(axis[:, None], internal.values[None, :], model)
    return DetuningMap(axis, applied.time, np.atleast_2d(voltage), internal.values)


def ridge_crossing_time(internal_field: np.ndarray, time: np.ndarray, branch: RydbergBranch,
                        delta_p: float) -> float:
    """First time the branch's ridge centre passes ``delta_p``; nan if it never does.

    Linear interpolation between samples.
    """
    center = -0.5 * branch.alpha * np.asarray(internal_field) ** 2
    d = center - delta_p
    idx = np.nonzero(np.sign(d[1:]) != np.sign(d[:-1]))[0]
    if idx.size == 0:
        return float("nan")
    i = idx[0]
    return float(time[i] + (time[i + 1] - time[i]) * d[i] / (d[i] - d[i + 1]))


def map_ridge_crossing_time(dmap: DetuningMap, delta_p: float) -> float:
    """Time at which a ridge passes ``delta_p``, read from the map alone.

    Taken as the time of peak voltage in the detuning row nearest ``delta_p``
    (a ridge sitting on the row maximises it). Returns nan when the row never
    rises above its value at t=0.
    """
    row = dmap.voltage[int(np.argmin(np.abs(dmap.detuning_axis - delta_p)))]
    k = int(np.argmax(row))
    if row[k] <= row[0]:
        return float("nan")
    return float(dmap.time[k])
