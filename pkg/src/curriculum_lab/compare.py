"""Aggregate several runs onto one step grid with bootstrap confidence intervals."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

import numpy as np

BOOTSTRAP_RESAMPLES = 1000


def read_curve(run_dir: str | Path, column: str = "return") -> tuple[np.ndarray, np.ndarray]:
    with open(Path(run_dir) / "metrics.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    steps = np.array([float(r["step"]) for r in rows])
    values = np.array([float(r[column]) for r in rows])
    return steps, values


def common_grid(step_grids: Sequence[np.ndarray]) -> np.ndarray:
    """The coarsest grid (fewest points), clipped to the range every run covers."""
    coarsest = min(step_grids, key=len)
    lo = max(g[0] for g in step_grids)
    hi = min(g[-1] for g in step_grids)
    return coarsest[(coarsest >= lo) & (coarsest <= hi)]


def bootstrap_ci(samples: np.ndarray, rng: np.random.Generator, resamples: int = BOOTSTRAP_RESAMPLES, level: float = 0.95):
    """Percentile bootstrap CI of the mean along axis 0 (runs) for each column."""
    n = samples.shape[0]
    idx = rng.integers(n, size=(resamples, n))
    means = samples[idx].mean(axis=1)
    alpha = (1 - level) / 2
    return np.quantile(means, alpha, axis=0), np.quantile(means, 1 - alpha, axis=0)


def aggregate(curves: Sequence[tuple[np.ndarray, np.ndarray]], seed: int = 0) -> dict[str, np.ndarray]:
    """Interpolate each curve onto the common grid, then mean and CI per step.

    A single run gets only a mean column.
    """
    grid = common_grid([s for s, _ in curves])
    stacked = np.stack([np.interp(grid, s, v) for s, v in curves])
    out = {"step": grid, "mean": stacked.mean(axis=0)}
    if len(curves) > 1:
        lo, hi = bootstrap_ci(stacked, np.random.default_rng(seed))
        out["ci_low"], out["ci_high"] = lo, hi
    return out


def write_aggregate(table: dict[str, np.ndarray], path: str | Path | None = None) -> str:
    cols = list(table)
    lines = [",".join(cols)]
    for i in range(len(table["step"])):
        lines.append(",".join(repr(float(table[c][i])) for c in cols))
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text
