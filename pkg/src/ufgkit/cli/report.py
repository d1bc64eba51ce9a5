"""Report assembly and output: JSON with sorted keys and CSV decay series."""

from __future__ import annotations

import csv
import json
import math
import os

import numpy as np

from ..liealg import index_label
from ..symexpr import Expr
from ..ufgcheck import expand_in_basis


def jsonable(obj):
    """Plain JSON data; non-finite floats become the strings ``inf``/``-inf``/``nan``."""
    if isinstance(obj, dict):
        return {str(k) if not isinstance(k, tuple) else index_label(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else ("nan" if math.isnan(x) else ("inf" if x > 0 else "-inf"))
    if isinstance(obj, Expr):
        return obj.to_string()
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(report: dict) -> str:
    return json.dumps(jsonable(report), sort_keys=True, indent=2) + "\n"


def error_entry(exc: BaseException) -> dict:
    return {"module": getattr(exc, "code", type(exc).__module__.rsplit(".", 1)[-1]),
            "type": type(exc).__name__, "message": str(exc)}


def field_label(alpha) -> str:
    return "V" + index_label(alpha)


def bracket_table(h, cert=None) -> list[dict]:
    """``[V_alpha, V_i]`` for every basis index and field, with its basis expansion when known."""
    rows = []
    for alpha, i, v in h.bracket_table():
        entry = {"bracket": f"[{field_label(alpha)},V{i}]", "alpha": index_label(alpha), "i": i,
                 "components": v.to_strings()}
        if cert is not None:
            try:
                comb = expand_in_basis(h, cert, alpha + (i,))
                entry["expansion"] = {field_label(b): c.to_string() for b, c in sorted(comb.coeffs.items())}
            except Exception as exc:  # expansion is informative only
                entry["expansion_error"] = str(exc)
        rows.append(entry)
    return rows


def certificate_rows(cert) -> dict:
    return {index_label(r): {field_label(b): e.to_string() for b, e in sorted(row.items())}
            for r, row in sorted(cert.rows.items())}


def decay_to_dict(est) -> dict:
    return est.to_dict()


def write_outputs(report: dict, out_dir: str, series: dict) -> list[str]:
    """Write ``report.json`` and one ``decay_<label>.csv`` per series; returns the paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = [os.path.join(out_dir, "report.json")]
    with open(paths[0], "w", encoding="utf-8") as fh:
        fh.write(dumps(report))
    for label, est in sorted(series.items()):
        path = os.path.join(out_dir, f"decay_{label}.csv")
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "value", "stderr"])
            errs = est.stderr or [float("nan")] * len(est.times)
            for t, v, e in zip(est.times, est.values, errs):
                w.writerow([repr(float(t)), repr(float(v)), repr(float(e))])
        paths.append(path)
    return paths
