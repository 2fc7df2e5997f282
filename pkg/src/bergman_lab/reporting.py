"""CSV and JSON output shared by the command line tools."""
from __future__ import annotations

import csv
import json
import math
import os
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

SCHEMA = "bergman-lab/1"
OUTDIR_ENV = "BERGMAN_LAB_OUTDIR"


def fmt(value) -> str:
    """17 significant digits for floats; complex as ``a+bj``."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (complex, np.complexfloating)):
        return f"{value.real:.17g}{value.imag:+.17g}j"
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    return path


def jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, (complex, np.complexfloating)):
        return [jsonable(float(obj.real)), jsonable(float(obj.imag))]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    return obj


def write_json(path, payload: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {"schema": SCHEMA, **payload}
    with open(path, "w") as fh:
        json.dump(jsonable(doc), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")
    return path


def default_outdir() -> Path:
    return Path(os.environ.get(OUTDIR_ENV, "."))


def series_rows(series) -> tuple[list[str], list[list]]:
    """Coefficient table of a kernel series: alpha columns then ``log_coeff``."""
    n = series.spec.dim
    header = [f"alpha_{k + 1}" for k in range(n)] + ["log_coeff"]
    rows = [[*map(int, a), float(c)] for a, c in zip(series.alphas, series.log_coeffs)]
    return header, rows
