"""CSV / JSON serialization for polylines, verdicts and records.

Floats are written with 17 significant digits so that a CSV round trip
reproduces every coordinate bit for bit.
"""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .curve import Polyline
from .errors import ValidationError


def fmt(value: float) -> str:
    return format(float(value), ".17g")


def polyline_to_csv(curve: Polyline, extra: Optional[dict] = None) -> str:
    """Render ``t,x,y`` rows, plus one column per entry of ``extra``."""
    extra = extra or {}
    cols = list(extra)
    for name, values in extra.items():
        if len(values) != len(curve):
            raise ValidationError(f"column {name!r} has wrong length")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "x", "y"] + cols)
    for k in range(len(curve)):
        t = curve.params[k]
        x, y = curve.points[k]
        w.writerow([fmt(t), fmt(x), fmt(y)] + [fmt(extra[c][k]) for c in cols])
    return buf.getvalue()


def polyline_from_csv(text: str) -> Polyline:
    rows = list(csv.DictReader(io.StringIO(text)))
    if not rows:
        raise ValidationError("CSV contains no samples")
    missing = {"t", "x", "y"} - set(rows[0])
    if missing:
        raise ValidationError(f"CSV header lacks columns: {sorted(missing)}")
    try:
        t = [float(r["t"]) for r in rows]
        pts = [(float(r["x"]), float(r["y"])) for r in rows]
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"malformed CSV number: {exc}") from exc
    return Polyline(np.array(pts), np.array(t))


def polyline_to_json(curve: Polyline) -> str:
    return json.dumps({"params": [float(v) for v in curve.params],
                       "points": [[float(x), float(y)] for x, y in curve.points]})


def polyline_from_json(text: str) -> Polyline:
    try:
        data = json.loads(text)
        return Polyline(np.array(data["points"], dtype=float),
                        np.array(data["params"], dtype=float))
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise ValidationError(f"malformed polyline JSON: {exc}") from exc


def read_polyline(path) -> Polyline:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".json":
        return polyline_from_json(text)
    return polyline_from_csv(text)


def write_polyline(path, curve: Polyline, extra: Optional[dict] = None) -> None:
    path = Path(path)
    if path.suffix.lower() == ".json":
        path.write_text(polyline_to_json(curve), encoding="utf-8")
    else:
        path.write_text(polyline_to_csv(curve, extra), encoding="utf-8")


def _clean(obj):
    """Make ``obj`` JSON-safe: numpy scalars to Python, non-finite to str."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    return obj


def dumps(obj) -> str:
    """Deterministic JSON text (sorted keys, fixed indentation)."""
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj), encoding="utf-8")


def rows_to_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()
