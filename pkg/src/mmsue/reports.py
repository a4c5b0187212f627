"""Report tables written by the command-line front end.

Every CSV has a fixed header and writes floats with six significant
digits, so repeated runs with the same inputs give identical files.

========================  =============================================================
file                      columns
========================  =============================================================
``equilibrium.csv``       link, f, cost, profit
``incentive.csv``         link, J, f, cost, profit
``sharing.csv``           provider, before, after, compensation, final, increase
``trace.csv``             iteration, delta_f, delta_J, profit
``run.json``              config echo, residuals, convergence flags, profits (full precision)
``timings.json``          wall-clock seconds per stage (varies between runs)
========================  =============================================================
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

EQUILIBRIUM_COLUMNS = ("link", "f", "cost", "profit")
INCENTIVE_COLUMNS = ("link", "J", "f", "cost", "profit")
SHARING_COLUMNS = ("provider", "before", "after", "compensation", "final", "increase")
TRACE_COLUMNS = ("iteration", "delta_f", "delta_J", "profit")


def fmt(x) -> str:
    """Six significant digits; integers and strings pass through unchanged."""
    if isinstance(x, (str, bool)):
        return str(x)
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if x == 0:
        return "0"  # folds -0.0 so signs of exact zeros never differ between runs
    return f"{x:.6g}"


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_csv(path: str | Path) -> dict[str, list]:
    """Columns of a report CSV; numeric columns come back as floats."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    cols: dict[str, list] = {}
    for j, name in enumerate(header):
        raw = [r[j] for r in body]
        try:
            cols[name] = [float(v) for v in raw]
        except ValueError:
            cols[name] = raw
    return cols


def write_equilibrium(path, link_ids, f, cost, profit) -> Path:
    return write_csv(path, EQUILIBRIUM_COLUMNS, zip(link_ids, f, cost, profit))


def write_incentive(path, link_ids, J, f, cost, profit) -> Path:
    return write_csv(path, INCENTIVE_COLUMNS, zip(link_ids, J, f, cost, profit))


def write_sharing(path, names, sharing) -> Path:
    rows = zip(names, sharing.t, sharing.post, sharing.compensation, sharing.R_star, sharing.increase)
    return write_csv(path, SHARING_COLUMNS, rows)


def write_trace(path, delta_f, delta_J=None, profit=None) -> Path:
    n = len(delta_f)
    nan = [math.nan] * n
    dj = nan if delta_J is None else delta_J
    pr = nan if profit is None else profit
    return write_csv(path, TRACE_COLUMNS, zip(range(1, n + 1), delta_f, dj, pr))


def _plain(x):
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_plain(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


def write_json(path, data: dict) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_plain(data), indent=1, sort_keys=True) + "\n")
    return path


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())
