"""CSV and JSON serialization of fields, series and reports."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .lindstedt import LindstedtSeries
from .operators import APRIME, A, ModelSpec, operator_for
from .spectral import SpectralError, SpectralField, Truncation, iter_modes

SCHEMA_VERSION = 1


def _k_columns(d: int):
    return ["k"] if d == 1 else [f"k{i + 1}" for i in range(d)]


def field_to_csv(u: SpectralField, drop_zeros: bool = True) -> str:
    """Columns: k (or k1..kd), n (zero-based basis index), re, im."""
    tr = u.trunc
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(_k_columns(tr.d) + ["n", "re", "im"])
    for k, idx in iter_modes(tr):
        for n in range(tr.N_x):
            val = u.coeffs[idx + (n,)]
            if drop_zeros and val == 0:
                continue
            w.writerow(list(k) + [n, repr(float(val.real)), repr(float(val.imag))])
    return buf.getvalue()


def field_from_csv(text: str, trunc: Truncation) -> SpectralField:
    rows = list(csv.reader(io.StringIO(text)))
    head, body = rows[0], rows[1:]
    d = trunc.d
    if head != _k_columns(d) + ["n", "re", "im"]:
        raise SpectralError(f"unexpected field CSV header {head}")
    modes = []
    for r in body:
        if not r:
            continue
        k = tuple(int(c) for c in r[:d])
        modes.append((k, int(r[d]), complex(float(r[d + 1]), float(r[d + 2]))))
    return SpectralField.from_modes(trunc, modes)


def write_field_csv(u: SpectralField, path) -> Path:
    p = Path(path)
    p.write_text(field_to_csv(u))
    return p


def read_field_csv(path, trunc: Truncation) -> SpectralField:
    return field_from_csv(Path(path).read_text(), trunc)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


def write_json(path, payload: dict) -> Path:
    p = Path(path)
    body = {"schema_version": SCHEMA_VERSION}
    body.update(payload)
    p.write_text(json.dumps(_jsonable(body), indent=2, sort_keys=True) + "\n")
    return p


def write_table_csv(path, rows, columns) -> Path:
    p = Path(path)
    with p.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(r.get(c)) for c in columns])
    return p


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


def series_to_json(series: LindstedtSeries) -> str:
    m = series.model
    tr = m.trunc
    if m.variant in (A, APRIME):
        zeroth = {"kind": "c0", "coeffs": [float(c) for c in series.zeroth]}
    else:
        zeroth = {"kind": "U0", "csv": field_to_csv(series.zeroth, drop_zeros=False)}
    body = {
        "schema_version": SCHEMA_VERSION,
        "model_hash": m.fingerprint(),
        "variant": m.variant,
        "truncation": {"K_theta": tr.K_theta, "N_x": tr.N_x, "bc": tr.bc, "d": tr.d},
        "M": series.M,
        "zeroth": zeroth,
        "coefficients": [field_to_csv(u, drop_zeros=False) for u in series.coeffs],
        "order_checks": list(series.order_checks),
    }
    return json.dumps(body, indent=2)


def series_from_json(text: str, model: ModelSpec) -> LindstedtSeries:
    """Rebuild a saved series; the model hash must match."""
    body = json.loads(text)
    if body.get("schema_version") != SCHEMA_VERSION:
        raise SpectralError(f"unsupported series schema version {body.get('schema_version')}")
    if body["model_hash"] != model.fingerprint():
        raise SpectralError("saved series was built for a different model (hash mismatch)")
    tr = model.trunc
    z = body["zeroth"]
    if z["kind"] == "c0":
        zeroth = np.array(z["coeffs"], dtype=float)
        op = operator_for(model, zeroth)
    else:
        zeroth = field_from_csv(z["csv"], tr)
        op = operator_for(model)
    coeffs = tuple(field_from_csv(c, tr) for c in body["coefficients"])
    return LindstedtSeries(model, zeroth, coeffs, op, tuple(body.get("order_checks", ())))


def save_series(series: LindstedtSeries, path) -> Path:
    p = Path(path)
    p.write_text(series_to_json(series) + "\n")
    return p


def load_series(path, model: ModelSpec) -> LindstedtSeries:
    return series_from_json(Path(path).read_text(), model)
