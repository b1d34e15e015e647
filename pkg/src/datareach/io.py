"""CSV / JSON emission and ingestion for trajectories, tubes and run reports."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import List, Tuple

import numpy as np

from .errors import ConfigError
from .knowledge import Sample
from .reach import ReachTube
from .systems import RunReport


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def read_trajectory_csv(path) -> Tuple[List[Sample], int, int]:
    """Read samples from a CSV with header t, x1..xn, xdot1..xdotn, u1..um."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = [c.strip() for c in next(reader)]
        n = sum(1 for c in header if c.startswith("x") and not c.startswith("xdot"))
        m = sum(1 for c in header if c.startswith("u"))
        expected = ["t"] + [f"x{i+1}" for i in range(n)] \
            + [f"xdot{i+1}" for i in range(n)] + [f"u{i+1}" for i in range(m)]
        if header != expected:
            raise ConfigError(f"bad trajectory header {header}; expected {expected}")
        samples = []
        for row in reader:
            if not row:
                continue
            vals = [float(v) for v in row]
            t, rest = vals[0], vals[1:]
            samples.append(
                Sample(rest[:n], rest[n : 2 * n], rest[2 * n : 2 * n + m], t)
            )
    return samples, n, m


def write_trajectory_csv(path, samples: List[Sample]) -> None:
    n = samples[0].x.shape[0]
    m = samples[0].u.shape[0]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["t"] + [f"x{i+1}" for i in range(n)]
            + [f"xdot{i+1}" for i in range(n)] + [f"u{i+1}" for i in range(m)]
        )
        for s in samples:
            t = 0.0 if s.t is None else s.t
            writer.writerow([_fmt(v) for v in [t, *s.x, *s.xdot, *s.u]])


def write_tube_csv(path, tube: ReachTube) -> None:
    n = len(tube.steps[0].R)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["i", "t"]
            + [f"lo_{k+1}" for k in range(n)] + [f"hi_{k+1}" for k in range(n)]
            + [f"S_lo_{k+1}" for k in range(n)] + [f"S_hi_{k+1}" for k in range(n)]
            + ["beta"]
        )
        for i, rec in enumerate(tube.steps):
            writer.writerow(
                [i, _fmt(rec.t)]
                + [_fmt(v) for v in rec.R.lo] + [_fmt(v) for v in rec.R.hi]
                + [_fmt(v) for v in rec.S.lo] + [_fmt(v) for v in rec.S.hi]
                + [_fmt(rec.beta)]
            )


def read_tube_csv(path):
    """Read back a tube CSV as (times, R_lo, R_hi, S_lo, S_hi, beta) arrays."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        n = sum(1 for c in header if c.startswith("lo_"))
        rows = [[float(v) for v in row] for row in reader if row]
    arr = np.array(rows)
    ts = arr[:, 1]
    R_lo = arr[:, 2 : 2 + n]
    R_hi = arr[:, 2 + n : 2 + 2 * n]
    S_lo = arr[:, 2 + 2 * n : 2 + 3 * n]
    S_hi = arr[:, 2 + 3 * n : 2 + 4 * n]
    beta = arr[:, -1]
    return ts, R_lo, R_hi, S_lo, S_hi, beta


def write_steps_csv(path, report: RunReport) -> None:
    m = report.logs[0].u.shape[0] if report.logs else 0
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["i", "t"] + [f"u_{l+1}" for l in range(m)]
            + ["cost", "bound", "solver_iters", "micros"]
        )
        for log in report.logs:
            writer.writerow(
                [log.i, _fmt(log.t)] + [_fmt(v) for v in log.u]
                + [_fmt(log.realized_cost), _fmt(log.bound), log.iters,
                   _fmt(log.micros)]
            )


def read_steps_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader if row]
    return header, np.array(rows)


def write_predicted_boxes_csv(path, report: RunReport) -> None:
    """Per-step predicted next-state boxes of a reach-recording run."""
    logs = [log for log in report.logs if log.box_lo is not None]
    n = logs[0].box_lo.shape[0] if logs else 0
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["i", "t"]
            + [f"lo_{k+1}" for k in range(n)] + [f"hi_{k+1}" for k in range(n)]
        )
        for log in logs:
            writer.writerow(
                [log.i, _fmt(log.t)]
                + [_fmt(v) for v in log.box_lo] + [_fmt(v) for v in log.box_hi]
            )


def write_run_json(path, report: RunReport) -> None:
    with open(path, "w") as fh:
        json.dump(report.to_dict(), fh, indent=2)


def write_benchmark_csv(path, rows: List[dict]) -> None:
    if not rows:
        Path(path).write_text("")
        return
    keys = list(rows[0].keys())
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=keys)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
