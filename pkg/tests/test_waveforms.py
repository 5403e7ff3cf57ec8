import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rydberg_twin.errors import ConfigurationError
from rydberg_twin.waveforms import (HORIZONTAL_PLATES, VERTICAL_PLATES, CouplingModel, FieldSource, PlatePair,
                                    check_f_mod, default_f_mod, effective_field, plate_field, sample_source,
                                    sample_source_series, square_sign)

finite = st.floats(-10, 10, allow_nan=False)


def test_plate_defaults():
    assert (VERTICAL_PLATES.gap, HORIZONTAL_PLATES.gap, VERTICAL_PLATES.side) == (7.2, 7.6, 7.0)


@pytest.mark.parametrize("volts, field", [(2.55, 0.354), (6.0, 0.833), (0.0, 0.0)])
def test_plate_field(volts, field):
    assert plate_field(volts, VERTICAL_PLATES) == pytest.approx(field, abs=5e-4)


def test_zero_gap():
    with pytest.raises(ConfigurationError):
        PlatePair("vertical", 0.0)


def test_square_starts_positive():
    src = FieldSource("square", 0.354, 7.9e3)
    assert sample_source(src, [1e-9])[0] == 0.354
    assert sample_source(src, [0.0])[0] == 0.354
    assert sample_source(src, [0.75 / 7.9e3])[0] == -0.354


def test_square_period_integral():
    src = FieldSource("square", 0.354, 7.9e3)
    x = sample_source_series(src, 7.9e3 * 80, 80 * 13)
    assert abs(np.sum(x.values)) < 1e-12


def test_square_edges_stay_periodic_for_long_runs():
    fs = 80 * 7.9e3
    t = np.arange(0, int(3 * fs)) / fs
    x = sample_source(FieldSource("square", 1.0, 7.9e3), t).reshape(-1, 80)
    assert np.all(x == x[0])
    assert np.all(x[0, :40] == 1.0) and np.all(x[0, 40:] == -1.0)


def test_square_sign():
    np.testing.assert_array_equal(square_sign([0.0, 0.25, 0.5, 0.75, 1.0, 1e6 + 0.5]), [1, 1, -1, -1, 1, -1])


def test_sine():
    src = FieldSource("sine", 0.0437, 10.0)
    # 2*pi*f*t = pi at 50 ms; 25 ms is the quarter-period crest
    assert sample_source(src, [0.05])[0] == pytest.approx(0.0, abs=1e-15)
    assert sample_source(src, [0.025])[0] == pytest.approx(0.0437, rel=1e-15)
    assert sample_source(FieldSource("sine", 1.0, 10.0, np.pi / 2), [0.0])[0] == 1.0


def test_dc_step():
    x = sample_source(FieldSource("dc_step", 0.5, start_time=1e-3), [0.0, 0.999e-3, 1e-3, 2e-3])
    np.testing.assert_array_equal(x, [0.0, 0.0, 0.5, 0.5])


@pytest.mark.parametrize("kw", [dict(kind="sine", amplitude=1.0, frequency=0.0),
                                dict(kind="square", amplitude=-1.0, frequency=1.0),
                                dict(kind="ramp", amplitude=1.0, frequency=1.0)])
def test_source_validation(kw):
    with pytest.raises(ConfigurationError):
        FieldSource(**kw)


def test_effective_field_examples():
    assert effective_field(0.354, 0.0, CouplingModel()) == 0.354
    assert effective_field(0.354, 0.0, CouplingModel(mode="magnitude")) == 0.354
    assert effective_field(0.354, 0.1, CouplingModel(0.1)) == pytest.approx(0.364, rel=1e-12)
    assert effective_field(0.3, 0.4, CouplingModel(mode="magnitude")) == pytest.approx(0.5, rel=1e-15)


def test_coupling_defaults():
    c = CouplingModel()
    assert (c.kappa, c.mode) == (0.1, "projected")
    with pytest.raises(ConfigurationError):
        CouplingModel(np.inf)


@given(a=finite, s=finite, k=st.floats(0, 1))
def test_projected_joint_flip(a, s, k):
    c = CouplingModel(k)
    assert effective_field(-a, -s, c) == effective_field(a, s, c)


@given(a=finite, s=finite)
def test_magnitude_sign_invariance(a, s):
    c = CouplingModel(mode="magnitude")
    ref = effective_field(a, s, c)
    assert effective_field(-a, s, c) == ref == effective_field(a, -s, c)


@given(a=finite, s=finite)
def test_kappa_zero_depends_on_aux_only(a, s):
    assert effective_field(a, s, CouplingModel(0.0)) == abs(a)


def test_f_mod_schedule():
    assert [default_f_mod(f) for f in (0.5, 200, 500, 1000, 10000)] == [7.9e3, 7.9e3, 27.9e3, 27.9e3, 87.9e3]


def test_f_mod_floor_warning():
    with pytest.warns(UserWarning, match="floor"):
        check_f_mod(3e3)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        check_f_mod(7.9e3)
