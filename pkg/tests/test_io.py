import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rydberg_twin import io
from rydberg_twin.errors import ConfigurationError, FitError, InvalidArgumentError, RydbergTwinError
from rydberg_twin.timeseries import TimeSeries, time_axis


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=50))
def test_csv_round_trip_exact(values):
    import tempfile, pathlib
    with tempfile.TemporaryDirectory() as d:
        p = io.write_csv(pathlib.Path(d) / "x.csv", ["a"], [values])
        _, data = io.read_csv(p)
    np.testing.assert_array_equal(data[:, 0], values)


def test_csv_length_mismatch(tmp_path):
    with pytest.raises(ValueError):
        io.write_csv(tmp_path / "x.csv", ["a", "b"], [[1.0], [1.0, 2.0]])


def test_json_is_canonical():
    a = io.dumps({"b": np.float64(1.5), "a": [np.int64(2), float("nan")], "c": np.array([1.0, 2.0])})
    b = io.dumps({"c": [1.0, 2.0], "a": [2, None], "b": 1.5})
    assert a == b
    assert json.loads(a)["a"] == [2, None]


def test_content_hash():
    assert io.content_hash({"x": 1, "y": [1.0]}) == io.content_hash({"y": [1.0], "x": 1})
    assert io.content_hash({"x": 1}) != io.content_hash({"x": 2})
    assert len(io.content_hash({})) == 12


def test_matrix_csv(tmp_path):
    p = io.write_matrix_csv(tmp_path / "m.csv", "r\\c", [1.0, 2.0], [10.0], [[0.5, 0.25]])
    assert p.read_text() == "r\\c,1.0,2.0\n10.0,0.5,0.25\n"


def test_timeseries():
    x = TimeSeries(np.arange(10.0), 100.0)
    assert x.duration == pytest.approx(0.1) and x.dt == 0.01 and len(x) == 10
    y = x.slice_time(0.03, 0.07)
    np.testing.assert_array_equal(y.values, [3, 4, 5, 6])
    assert y.t0 == pytest.approx(0.03)
    np.testing.assert_allclose(y.time, [0.03, 0.04, 0.05, 0.06])
    with pytest.raises(InvalidArgumentError):
        TimeSeries([1.0], 0.0)
    assert time_axis(10.0, 0.5).size == 5
    with pytest.raises(InvalidArgumentError):
        time_axis(10.0, 0.0)


def test_error_records():
    err = ConfigurationError("bad", "cell")
    assert err.record() == {"error": "configuration", "module": "cell", "message": "[cell] bad"}
    assert isinstance(err, RydbergTwinError) and isinstance(err, ValueError)
    fit = FitError("nope", "lockin", {"k": 1})
    assert fit.record()["diagnostics"] == {"k": 1}
