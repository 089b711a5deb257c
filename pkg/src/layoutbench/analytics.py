"""Cell-level error-rate heatmaps, condition differences and report export."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
from matplotlib import colormaps
from PIL import Image

from .evaluate import EvalRecord, GroupAccuracy

RATE_CMAP = "Greys"  # white = never wrong, black = always wrong
DIFF_CMAP = "RdBu_r"  # red where the first condition errs more
CELL_PX = 16


@dataclass(frozen=True, eq=False)
class ErrorHeatmap:
    task: str
    size: int
    conditions: tuple[str, ...]
    rates: np.ndarray
    sample_count: np.ndarray

    @property
    def is_difference(self) -> bool:
        return len(self.conditions) == 2

    @property
    def label(self) -> str:
        return f"{self.task}_{self.size}_" + "_minus_".join(self.conditions)


def cell_error_heatmap(records: Iterable[EvalRecord]) -> ErrorHeatmap:
    """Mean error mask over records of one task, size and condition.

    Records without a mask (malformed answers) are skipped.
    """
    records = list(records)
    keys = {(r.task, r.size, r.condition) for r in records}
    if len(keys) > 1:
        raise ValueError(f"records mix several task/size/condition groups: {sorted(keys)}")
    masks = [r.cell_errors for r in records if r.cell_errors is not None]
    if not masks:
        raise ValueError("no records with a cell error mask")
    stack = np.stack([np.asarray(m, dtype=np.float64) for m in masks])
    task, size, cond = keys.pop()
    counts = np.full(stack.shape[1:], len(masks), dtype=np.int64)
    return ErrorHeatmap(task, size, (cond,), stack.mean(axis=0), counts)


def heatmaps_by_group(records: Iterable[EvalRecord]) -> dict[tuple, ErrorHeatmap]:
    groups: dict[tuple, list[EvalRecord]] = {}
    for r in records:
        groups.setdefault((r.task, r.size, r.condition), []).append(r)
    out = {}
    for key, recs in sorted(groups.items()):
        if any(r.cell_errors is not None for r in recs):
            out[key] = cell_error_heatmap(recs)
    return out


def heatmap_difference(a: ErrorHeatmap, b: ErrorHeatmap) -> ErrorHeatmap:
    """``a - b`` per cell; positive where ``a``'s condition errs more."""
    if (a.task, a.size) != (b.task, b.size):
        raise ValueError(f"cannot compare {a.task}@{a.size} with {b.task}@{b.size}")
    if a.rates.shape != b.rates.shape:
        raise ValueError(f"shape mismatch {a.rates.shape} vs {b.rates.shape}")
    return ErrorHeatmap(a.task, a.size, (a.conditions[0], b.conditions[0]),
                        a.rates - b.rates, np.minimum(a.sample_count, b.sample_count))


def heatmap_rgb(h: ErrorHeatmap, cell_px: int = CELL_PX) -> np.ndarray:
    """Colormapped image, ``cell_px`` pixels per cell, fixed color scale."""
    if h.is_difference:
        cmap, norm = colormaps[DIFF_CMAP], (h.rates + 1.0) / 2.0
    else:
        cmap, norm = colormaps[RATE_CMAP], h.rates
    rgba = cmap(np.clip(norm, 0.0, 1.0), bytes=True)
    rgb = np.ascontiguousarray(rgba[..., :3])
    return np.repeat(np.repeat(rgb, cell_px, axis=0), cell_px, axis=1)


def write_table(h: ErrorHeatmap, path: str | Path) -> Path:
    path = Path(path)
    np.savetxt(path, h.rates, delimiter=",", fmt="%.17g")
    return path


def read_table(path: str | Path) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, delimiter=",", dtype=np.float64))


def export_report(heatmaps: Iterable[ErrorHeatmap],
                  accuracy_table: Mapping[tuple, GroupAccuracy] | None,
                  out_dir: str | Path,
                  group_by: tuple[str, ...] = ("task", "size", "condition")) -> list[Path]:
    """Write a PNG and a CSV per heatmap, plus ``accuracy.csv``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for h in heatmaps:
        stem = ("diff_" if h.is_difference else "heatmap_") + h.label
        png = out / f"{stem}.png"
        Image.fromarray(heatmap_rgb(h), mode="RGB").save(png, format="PNG")
        written += [png, write_table(h, out / f"{stem}.csv")]
    if accuracy_table:
        path = out / "accuracy.csv"
        with path.open("w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow([*group_by, "correct", "total", "accuracy"])
            for key, acc in accuracy_table.items():
                w.writerow([*key, acc.correct, acc.total, repr(acc.accuracy)])
        written.append(path)
    return written
