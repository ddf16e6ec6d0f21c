import math
import threading
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fluxlat.errors import ValidationError
from fluxlat.sweep import SweepResult, config_hash, default_threads, parallel_map


def _result():
    return SweepResult(
        axes={"g_ghz": [0.0, 0.1, 0.2], "df_ghz": [0.01, 0.02]},
        values={"d": np.array([[1e-3, 2e-3], [np.nan, 4e-3], [5e-3, 1 / 3]])},
        metadata={"scenario": "x", "arr": np.arange(2), "bad": math.nan},
    )


class TestSweepResult:
    def test_shape_checks(self):
        with pytest.raises(ValidationError):
            SweepResult({"a": [1, 2]}, {"v": [1, 2, 3]})
        with pytest.raises(ValidationError):
            SweepResult({"a": [1, 2]}, {"a": [1, 2]})

    def test_rows_in_c_order(self):
        rows = list(_result().rows())
        assert [(r["g_ghz"], r["df_ghz"]) for r in rows[:3]] == [(0.0, 0.01), (0.0, 0.02), (0.1, 0.01)]

    def test_csv_round_trip(self):
        res = _result()
        text = res.to_csv()
        assert text.splitlines()[0] == "g_ghz,df_ghz,d"
        assert text.splitlines()[3] == "0.1,0.01,"
        back = SweepResult.from_csv(text, ["g_ghz", "df_ghz"])
        assert back.equals(res)

    def test_json_round_trip(self):
        res = _result()
        text = res.to_json()
        assert "NaN" not in text
        back = SweepResult.from_json(text)
        assert back.equals(res)
        assert back.metadata["bad"] is None
        assert back.metadata["arr"] == [0, 1]

    def test_serialization_deterministic(self):
        assert _result().to_csv() == _result().to_csv()
        assert _result().to_json() == _result().to_json()

    def test_equals_detects_difference(self):
        other = _result()
        other.values["d"][0, 0] = 0.0
        assert not _result().equals(other)

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.floats(allow_nan=True, allow_infinity=False, width=64), min_size=1, max_size=12))
    def test_csv_round_trip_is_exact(self, xs):
        res = SweepResult({"i": np.arange(len(xs))}, {"v": np.array(xs)})
        back = SweepResult.from_csv(res.to_csv(), ["i"])
        assert back.equals(res)

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.floats(allow_nan=True, allow_infinity=False, width=64), min_size=1, max_size=12))
    def test_json_round_trip_is_exact(self, xs):
        res = SweepResult({"i": np.arange(len(xs))}, {"v": np.array(xs)})
        assert SweepResult.from_json(res.to_json()).equals(res)


class TestParallelMap:
    def test_order_preserved(self):
        def slow(x):
            time.sleep(0.002 * (5 - x))
            return x * x

        assert parallel_map(slow, list(range(6)), threads=3) == [0, 1, 4, 9, 16, 25]

    def test_uses_threads(self):
        seen = set()

        def record(x):
            seen.add(threading.get_ident())
            time.sleep(0.01)
            return x

        parallel_map(record, list(range(8)), threads=4)
        assert len(seen) > 1

    def test_exceptions_returned_in_place(self):
        def f(x):
            if x == 2:
                raise ValueError("bad point")
            return x

        out = parallel_map(f, [1, 2, 3], threads=2)
        assert out[0] == 1 and out[2] == 3
        assert isinstance(out[1], ValueError)

    def test_threads_from_environment(self, monkeypatch):
        monkeypatch.setenv("FLUXLAT_THREADS", "3")
        assert default_threads() == 3
        monkeypatch.setenv("FLUXLAT_THREADS", "zero")
        with pytest.raises(ValidationError):
            default_threads()
        monkeypatch.setenv("FLUXLAT_THREADS", "0")
        with pytest.raises(ValidationError):
            default_threads()


def test_config_hash_ignores_key_order():
    assert config_hash({"a": 1, "b": [1, 2]}) == config_hash({"b": [1, 2], "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})
