import json

import numpy as np
import pandas as pd
import pytest

from regula import hilbert_core as hc
from regula.errors import ConfigError
from regula.iteration import run_mann
from regula.report import TRACE_COLUMNS, load_trace_csv, trace_summary, trace_to_frame, write_json, write_trace_csv
from regula.schema import OperatorKind


@pytest.fixture
def trace(rotation_op, half_schedule):
    return run_mann(rotation_op, half_schedule, hc.as_vector([1.0, 0.0]), 12)


class TestTraceFrame:
    def test_columns(self, trace):
        df = trace_to_frame(trace)
        assert list(df.columns) == TRACE_COLUMNS
        assert len(df) == 13
        assert df["delta_partial"].is_monotonic_increasing

    def test_points(self, trace):
        df = trace_to_frame(trace, include_points=True)
        assert list(df.columns) == TRACE_COLUMNS + ["x_0", "x_1"]
        assert df.loc[1, ["x_0", "x_1"]].tolist() == pytest.approx([0.5, 0.5])


class TestTraceCsv:
    def test_round_trip_is_exact(self, trace, tmp_path):
        path = write_trace_csv(trace, str(tmp_path / "nested" / "trace.csv"), include_points=True)
        loaded = load_trace_csv(path)
        assert np.array_equal(loaded.residuals, trace.residuals)
        assert np.array_equal(loaded.weights, trace.weights[: trace.N + 1])
        assert np.array_equal(loaded.points, trace.points)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_trace_csv(str(tmp_path / "nope.csv"))

    def test_missing_column(self, tmp_path):
        path = tmp_path / "t.csv"
        pd.DataFrame({"n": [0, 1], "residual": [1.0, 0.5]}).to_csv(path, index=False)
        with pytest.raises(ConfigError, match="missing columns"):
            load_trace_csv(str(path))

    def test_gap_in_index(self, tmp_path):
        path = tmp_path / "t.csv"
        pd.DataFrame({"n": [0, 2], "residual": [1.0, 0.5], "weight": [0.25, 0.25]}).to_csv(path, index=False)
        with pytest.raises(ConfigError, match="without gaps"):
            load_trace_csv(str(path))

    def test_negative_residual(self, tmp_path):
        path = tmp_path / "t.csv"
        pd.DataFrame({"n": [0, 1], "residual": [1.0, -0.5], "weight": [0.25, 0.25]}).to_csv(path, index=False)
        with pytest.raises(ConfigError):
            load_trace_csv(str(path))

    def test_rows_are_sorted(self, tmp_path):
        path = tmp_path / "t.csv"
        pd.DataFrame({"n": [1, 0], "residual": [0.5, 1.0], "weight": [0.25, 0.25]}).to_csv(path, index=False)
        assert load_trace_csv(str(path)).residuals.tolist() == [1.0, 0.5]


class TestJson:
    def test_numpy_and_enum_values(self, tmp_path):
        path = write_json({"b": np.float64(1.5), "v": np.arange(3), "kind": OperatorKind.SCALING,
                           "a": (1, 2)}, str(tmp_path / "out.json"))
        text = open(path).read()
        assert text.endswith("}\n")
        assert json.loads(text) == {"a": [1, 2], "b": 1.5, "kind": "scaling", "v": [0, 1, 2]}

    def test_keys_sorted(self, tmp_path):
        path = write_json({"z": 1, "a": 2}, str(tmp_path / "out.json"))
        assert open(path).read().index('"a"') < open(path).read().index('"z"')

    def test_unserializable(self, tmp_path):
        with pytest.raises(TypeError):
            write_json({"x": object()}, str(tmp_path / "out.json"))


def test_trace_summary(trace):
    summary = trace_summary(trace)
    assert summary["N"] == 12
    assert summary["residual_first"] == pytest.approx(2.0 ** 0.5)
    assert summary["delta_total"] == pytest.approx(sum(0.25 * 2.0 * 0.5 ** n for n in range(13)))
    assert summary["operator"] == trace.operator_id
