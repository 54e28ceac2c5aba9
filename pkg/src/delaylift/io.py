"""CSV and metadata serialization.

Floats are written with ``repr`` (shortest round-trip form), so identical
inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

__all__ = ["trajectory_rows", "write_trajectory", "write_metadata", "write_results", "read_trajectory"]


def _num(v):
    return repr(float(v))


def _cols(prefix, values, count):
    if np.iscomplexobj(values):
        return [f"{prefix}{i}_{part}" for i in range(count) for part in ("re", "im")]
    return [f"{prefix}{i}" for i in range(count)]


def _flat(values):
    values = np.asarray(values).ravel()
    if np.iscomplexobj(values):
        return [_num(p) for z in values for p in (z.real, z.imag)]
    return [_num(z) for z in values]


def trajectory_rows(traj):
    """Header plus one row per time: t, x nodes, history nodes, outputs ("NA" for gaps)."""
    n = traj.x.shape[1]
    hcount = traj.h.shape[1] * traj.h.shape[2]
    ycount = traj.outputs.shape[1]
    header = ["t"] + _cols("x", traj.x, n) + _cols("h", traj.h, hcount) + _cols("y", traj.outputs, ycount)
    rows = [header]
    for k in range(len(traj.times)):
        if traj.gaps[k] or np.any(np.isnan(traj.outputs[k])):
            y = ["NA"] * (2 * ycount if np.iscomplexobj(traj.outputs) else ycount)
        else:
            y = _flat(traj.outputs[k])
        rows.append([_num(traj.times[k])] + _flat(traj.x[k]) + _flat(traj.h[k]) + y)
    return rows


def write_trajectory(traj, path):
    with open(path, "w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(trajectory_rows(traj))


def read_trajectory(path):
    """Header and a float array (NaN for "NA")."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    data = np.array([[np.nan if v == "NA" else float(v) for v in row] for row in rows[1:]])
    return rows[0], data


def write_metadata(record, path):
    Path(path).write_text(json.dumps(record, sort_keys=True, indent=2, default=_jsonable) + "\n")


def _jsonable(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, complex):
        return [v.real, v.imag]
    return str(v)


def write_results(results, path):
    """One row per measured quantity of each VerificationResult."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["check", "passed", "quantity", "value", "threshold"])
        for res in sorted(results, key=lambda r: r.name):
            for key, value in res.measured.items():
                thr = res.threshold.get(key, "")
                w.writerow([res.name, res.passed, key, _cell(value), _cell(thr)])


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return _num(v)
    if isinstance(v, (list, tuple)):
        return ";".join(_cell(x) for x in v)
    return str(v)
