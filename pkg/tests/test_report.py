import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from merton_lab.report import digest, dumps, fmt_float, write_atomic, write_csv


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_round_trip(v):
    assert float(fmt_float(v)) == v


def test_special_floats():
    assert fmt_float(-math.inf) == "-Infinity"
    assert fmt_float(math.inf) == "Infinity"
    assert json.loads(dumps({"a": -math.inf}))["a"] == -math.inf


def test_dumps_is_valid_json_and_stable():
    obj = {"x": 0.1, "n": np.int64(3), "arr": np.array([1.5, 2.0]), "nested": [{"b": True}],
           "none": None, "s": "t"}
    text = dumps(obj)
    back = json.loads(text)
    assert back["x"] == 0.1 and back["arr"] == [1.5, 2.0] and back["nested"][0]["b"] is True
    assert "0.10000000000000001" in text
    assert dumps(obj) == text
    assert digest(obj) == digest(dict(obj))


def test_dumps_rejects_unknown():
    with pytest.raises(TypeError):
        dumps({"x": object()})


def test_write_csv(tmp_path):
    path = tmp_path / "sub" / "t.csv"
    write_csv(path, {"x": np.array([0.1, 2.0]), "k": np.array([1, 2])})
    assert path.read_text() == "x,k\n0.10000000000000001,1\n2,2\n"


def test_write_atomic_leaves_no_temp(tmp_path):
    write_atomic(tmp_path / "a.json", "{}\n")
    assert [p.name for p in tmp_path.iterdir()] == ["a.json"]
