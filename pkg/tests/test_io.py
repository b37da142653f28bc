"""File formats: data CSV, correlation JSON, deterministic JSON emission."""

import json

import numpy as np
import pytest

from ctfactor.errors import ParseError
from ctfactor.io import (
    dumps_json,
    load_json,
    read_corr_json,
    read_data_csv,
    save_json,
    write_data_csv,
)
from ctfactor.numerics import RngState


class TestDataCsv:
    def test_round_trip_bit_exact(self, tmp_path):
        data = RngState(1).generator.standard_normal((20, 3))
        path = tmp_path / "data.csv"
        write_data_csv(path, data)
        back, header = read_data_csv(path)
        assert header == ["X1", "X2", "X3"]
        assert np.array_equal(back, data)

    def test_headerless_accepted(self, tmp_path):
        path = tmp_path / "plain.csv"
        path.write_text("1.0,2.0\n3.5,4.5\n")
        back, header = read_data_csv(path)
        assert header is None
        assert np.array_equal(back, [[1.0, 2.0], [3.5, 4.5]])

    def test_ragged_rows_rejected(self, tmp_path):
        path = tmp_path / "ragged.csv"
        path.write_text("a,b\n1.0,2.0\n3.0\n")
        with pytest.raises(ParseError, match="row 3"):
            read_data_csv(path)

    def test_non_numeric_cell_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1.0,2.0\n3.0,oops\n")
        with pytest.raises(ParseError):
            read_data_csv(path)

    def test_non_finite_rejected(self, tmp_path):
        path = tmp_path / "inf.csv"
        path.write_text("a,b\n1.0,2.0\n3.0,inf\n")
        with pytest.raises(ParseError):
            read_data_csv(path)

    def test_empty_rejected(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(ParseError):
            read_data_csv(path)


class TestCorrJson:
    def test_round_trip(self, tmp_path):
        corr = np.array([[1.0, 0.25], [0.25, 1.0]])
        path = tmp_path / "corr.json"
        save_json(path, {"correlation": corr, "n": 50})
        back, n = read_corr_json(path)
        assert n == 50
        assert np.array_equal(back, corr)

    def test_missing_keys_rejected(self, tmp_path):
        path = tmp_path / "partial.json"
        path.write_text(json.dumps({"correlation": [[1.0]]}))
        with pytest.raises(ParseError):
            read_corr_json(path)

    def test_malformed_json_rejected(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ParseError):
            load_json(path)


class TestDeterministicJson:
    def test_key_order_canonical(self):
        assert dumps_json({"b": 1, "a": 2}) == dumps_json({"a": 2, "b": 1})

    def test_numpy_values_become_plain(self):
        doc = json.loads(dumps_json({"x": np.float64(0.5), "k": np.int64(3),
                                     "v": np.arange(3), "flag": np.bool_(True)}))
        assert doc == {"x": 0.5, "k": 3, "v": [0, 1, 2], "flag": True}

    def test_non_finite_becomes_null(self):
        doc = json.loads(dumps_json({"a": float("nan"), "b": float("inf")}))
        assert doc == {"a": None, "b": None}

    def test_save_is_byte_stable(self, tmp_path):
        payload = {"z": [1.5, 2.5], "a": {"nested": True}}
        p1, p2 = tmp_path / "one.json", tmp_path / "two.json"
        save_json(p1, dict(payload))
        save_json(p2, {"a": {"nested": True}, "z": [1.5, 2.5]})
        assert p1.read_bytes() == p2.read_bytes()

    def test_trailing_newline(self, tmp_path):
        path = tmp_path / "nl.json"
        save_json(path, {"a": 1})
        assert path.read_bytes().endswith(b"\n")
