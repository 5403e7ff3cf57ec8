"""Static DC Stark shifts of the Cs 60D5/2 sublevels.

Units are fixed: fields in V/cm, shifts in MHz, polarizabilities in
MHz cm^2/V^2. The +mj and -mj sublevels are degenerate and share one branch.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidArgumentError

MJ_LABELS = ("1/2", "3/2", "5/2")

# DC polarizabilities of 60D5/2, MHz cm^2/V^2
ALPHA_60D52 = {"1/2": -4985.0, "3/2": -3624.0, "5/2": 281.0}
DEFAULT_WEIGHTS = {"1/2": 0.4, "3/2": 0.4, "5/2": 0.2}


@dataclass(frozen=True)
class RydbergBranch:
    """One |mj| sublevel: its polarizability and population weight."""

    mj_label: str
    alpha: float
    weight: float = 1.0

    def __post_init__(self):
        if self.mj_label not in MJ_LABELS:
            raise InvalidArgumentError(f"unknown mj label {self.mj_label!r}", "stark")
        if not np.isfinite(self.alpha) or self.alpha == 0:
            raise InvalidArgumentError(f"alpha must be finite and nonzero, got {self.alpha}", "stark")
        if not (0.0 <= self.weight <= 1.0):
            raise InvalidArgumentError(f"weight must lie in [0, 1], got {self.weight}", "stark")


def default_branches(weights=None, alphas=None) -> tuple[RydbergBranch, ...]:
    """The three 60D5/2 branches, optionally with overridden weights/alphas."""
    weights = DEFAULT_WEIGHTS if weights is None else dict(zip(MJ_LABELS, weights))
    alphas = ALPHA_60D52 if alphas is None else dict(zip(MJ_LABELS, alphas))
    branches = tuple(RydbergBranch(mj, float(alphas[mj]), float(weights[mj])) for mj in MJ_LABELS)
    validate_branch_set(branches)
    return branches


def validate_branch_set(branches: Sequence[RydbergBranch]) -> None:
    if len(branches) == 0:
        raise InvalidArgumentError("branch set is empty", "stark")
    total = sum(b.weight for b in branches)
    if abs(total - 1.0) > 1e-12:
        raise InvalidArgumentError(f"branch weights sum to {total!r}, expected 1", "stark")


def stark_shift(E, branch: RydbergBranch):
    """Quadratic Stark shift ``-(alpha/2) E^2`` in MHz for field ``E`` in V/cm.

    ``E`` may be a scalar or an array; the sign of ``E`` is irrelevant.
    """
    E_arr = np.asarray(E, dtype=float)
    if not np.all(np.isfinite(E_arr)):
        raise InvalidArgumentError("field must be finite", "stark")
    shift = -0.5 * branch.alpha * E_arr * E_arr
    return float(shift) if shift.ndim == 0 else shift


@dataclass(frozen=True)
class StarkMap:
    field_axis: np.ndarray
    shifts: np.ndarray  # (n_branches, n_fields), MHz
    branches: tuple[RydbergBranch, ...]

    def to_csv(self, path) -> None:
        from .io import write_csv

        header = ["field_V_per_cm"] + [f"shift_mj{b.mj_label.replace('/', '')}_MHz" for b in self.branches]
        write_csv(path, header, [self.field_axis, *self.shifts])


def stark_map(field_axis, branches: Sequence[RydbergBranch]) -> StarkMap:
    axis = np.asarray(field_axis, dtype=float)
    if axis.ndim != 1 or axis.size == 0:
        raise InvalidArgumentError("field axis must be a non-empty 1D sequence", "stark")
    if not np.all(np.isfinite(axis)):
        raise InvalidArgumentError("field axis must be finite", "stark")
    if np.any(np.diff(axis) < 0):
        raise InvalidArgumentError("field axis must be sorted ascending", "stark")
    shifts = np.vstack([np.atleast_1d(stark_shift(axis, b)) for b in branches])
    return StarkMap(axis, shifts, tuple(branches))
