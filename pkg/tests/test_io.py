import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from selfcontract import io as sio
from selfcontract.curve import Polyline, check_self_contracted
from selfcontract.errors import ValidationError

finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@given(st.lists(st.tuples(finite, finite), min_size=1, max_size=20))
def test_csv_round_trip_is_lossless(pts):
    pl = Polyline.from_points(pts)
    back = sio.polyline_from_csv(sio.polyline_to_csv(pl))
    assert np.array_equal(back.points, pl.points)
    assert np.array_equal(back.params, pl.params)


def test_csv_header_and_extra_column():
    pl = Polyline(np.array([[0.1, 0.2], [0.3, 0.4]]), np.array([0.0, 0.5]))
    text = sio.polyline_to_csv(pl, {"f": [1.0, 2.0]})
    assert text.splitlines()[0] == "t,x,y,f"
    assert np.array_equal(sio.polyline_from_csv(text).points, pl.points)


def test_csv_rejects_bad_input():
    with pytest.raises(ValidationError):
        sio.polyline_from_csv("t,x\n0,1\n")
    with pytest.raises(ValidationError):
        sio.polyline_from_csv("t,x,y\n0,1,abc\n")
    with pytest.raises(ValidationError):
        sio.polyline_from_csv("t,x,y\n")


def test_json_round_trip(tmp_path):
    pl = Polyline(np.array([[1 / 3, 2 / 7], [0.0, -1e-300]]), np.array([0.0, 1.0]))
    path = tmp_path / "c.json"
    sio.write_polyline(path, pl)
    data = json.loads(path.read_text())
    assert set(data) == {"params", "points"}
    back = sio.read_polyline(path)
    assert np.array_equal(back.points, pl.points)


def test_verdict_json_fields():
    pl = Polyline.from_points([(1, 0), (0, 0), (2, 0)])
    d = json.loads(sio.dumps(check_self_contracted(pl).to_dict()))
    assert d == {"is_self_contracted": False, "witness": [0, 1, 2], "slack": -1.0}


def test_dumps_is_deterministic_and_json_safe():
    obj = {"b": np.float64(1.5), "a": [np.int64(2), np.bool_(True)], "c": float("inf")}
    text = sio.dumps(obj)
    assert text == sio.dumps(dict(reversed(list(obj.items()))))
    assert json.loads(text) == {"a": [2, True], "b": 1.5, "c": "inf"}
