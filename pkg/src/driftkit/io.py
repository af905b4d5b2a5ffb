"""CSV / JSON serialisation. Floats are written with ``repr`` (shortest
round-trip form), so anything read back is bit-identical."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from driftkit.bandwidth import CvReport
from driftkit.estimators import EstimateCurve
from driftkit.sde import ObservationGrid, PathEnsemble


def fmt(x) -> str:
    return repr(float(x))


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def dumps(obj) -> str:
    return json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(dumps(obj))
    return path


def write_ensemble_csv(ens: PathEnsemble, path) -> Path:
    """Header row of observation times, then one row per path."""
    lines = [",".join(fmt(t) for t in ens.grid.times)]
    lines += [",".join(fmt(v) for v in row) for row in ens.values]
    path = Path(path)
    path.write_text("\n".join(lines) + "\n")
    return path


def read_ensemble_csv(path) -> PathEnsemble:
    """Inverse of :func:`write_ensemble_csv`; raises ``ValueError`` on
    malformed input."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if len(rows) < 2:
        raise ValueError(f"{path}: need a header row of times and at least one path")
    try:
        times = np.array([float(t) for t in rows[0]])
        values = np.array([[float(v) for v in r] for r in rows[1:]])
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric entry ({exc})") from None
    if values.ndim != 2 or values.shape[1] != times.size:
        raise ValueError(f"{path}: rows must all have {times.size} columns")
    return PathEnsemble(ObservationGrid.from_times(times), values)


def ensemble_envelope(ens: PathEnsemble) -> dict:
    g = ens.grid
    return {
        "model": ens.meta.get("model"),
        "parameters": {
            "model_params": ens.meta.get("model_params", {}),
            "x0": ens.meta.get("x0"),
            "substeps": ens.meta.get("substeps"),
            "N": ens.N,
        },
        "seed": ens.meta.get("seed"),
        "grid": {"t0": g.t0, "T": g.T, "n": g.n},
    }


def write_curve_csv(curve: EstimateCurve, path) -> Path:
    lines = ["x,value"] + [f"{fmt(x)},{fmt(v)}" for x, v in zip(curve.xs, curve.values)]
    path = Path(path)
    path.write_text("\n".join(lines) + "\n")
    return path


def read_curve_csv(path, kind: str = "drift") -> EstimateCurve:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["x", "value"]:
        raise ValueError(f"{path}: expected header 'x,value'")
    data = np.array([[float(a), float(b)] for a, b in rows[1:]])
    return EstimateCurve(data[:, 0], data[:, 1], kind)


def curve_metadata(curve: EstimateCurve) -> dict:
    return {"kind": curve.kind, "points": len(curve), **curve.meta}


def write_cv_csv(report: CvReport, path) -> Path:
    lines = ["h,cv"] + [f"{fmt(h)},{fmt(c)}" for h, c in zip(report.hs, report.criteria)]
    path = Path(path)
    path.write_text("\n".join(lines) + "\n")
    return path


def write_table1_csv(summaries: dict, path) -> Path:
    """Rows ``100xMSE`` / ``100xStD``, one column per model."""
    ids = sorted(summaries)
    lines = ["statistic," + ",".join(f"Model {k}" for k in ids)]
    lines.append("100xMSE," + ",".join(fmt(100 * summaries[k].mean_mse) for k in ids))
    lines.append("100xStD," + ",".join(fmt(100 * summaries[k].std_mse) for k in ids))
    path = Path(path)
    path.write_text("\n".join(lines) + "\n")
    return path
