"""Exact-match and functional scoring with per-cell error masks."""
from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .tasks import LUPair, Tolerances, lu_verify
from .textio import ParseError

CORRECT = "correct"
INCORRECT = "incorrect"
MALFORMED = "malformed"

SHAPE_MISMATCH = "shape"
NO_RESPONSE = "no-response"


@dataclass
class EvalRecord:
    instance_id: str
    condition: str
    verdict: str
    cell_errors: np.ndarray | None = None
    failure_category: str | None = None
    task: str = ""
    size: int = 0

    @property
    def correct(self) -> bool:
        return self.verdict == CORRECT

    def to_json(self) -> dict:
        return {"instance_id": self.instance_id, "condition": self.condition,
                "task": self.task, "size": self.size, "verdict": self.verdict,
                "failure_category": self.failure_category,
                "cell_errors": None if self.cell_errors is None else self.cell_errors.tolist()}

    @classmethod
    def from_json(cls, d: dict) -> "EvalRecord":
        mask = d.get("cell_errors")
        return cls(instance_id=d["instance_id"], condition=d["condition"], verdict=d["verdict"],
                   cell_errors=None if mask is None else np.array(mask, dtype=np.uint8),
                   failure_category=d.get("failure_category"), task=d.get("task", ""),
                   size=int(d.get("size", 0)))


def malformed(category: str, **meta) -> EvalRecord:
    return EvalRecord(verdict=MALFORMED, failure_category=category, **meta)


def _meta(instance_id, condition, task, size):
    return {"instance_id": instance_id, "condition": condition, "task": task, "size": size}


def _score_exact(pred, target: np.ndarray, meta: dict) -> EvalRecord:
    if isinstance(pred, ParseError):
        return malformed(pred.category, **meta)
    pred = np.asarray(pred)
    if pred.shape != target.shape:
        return malformed(SHAPE_MISMATCH, **meta)
    mask = (pred != target).astype(np.uint8)
    return EvalRecord(verdict=INCORRECT if mask.any() else CORRECT, cell_errors=mask, **meta)


def score_transpose(pred, target: np.ndarray, instance_id: str = "", condition: str = "text",
                    size: int | None = None) -> EvalRecord:
    target = np.asarray(target)
    return _score_exact(pred, target, _meta(instance_id, condition, "transpose",
                                            size or target.shape[0]))


def score_life(pred, target: np.ndarray, instance_id: str = "", condition: str = "text",
               size: int | None = None) -> EvalRecord:
    target = np.asarray(target)
    meta = _meta(instance_id, condition, "life", size or target.shape[0])
    if not isinstance(pred, ParseError) and not np.isin(np.asarray(pred), (0, 1)).all():
        return malformed("non-numeric-token", **meta)
    return _score_exact(pred, target, meta)


def lu_error_mask(a: np.ndarray, pair: LUPair, tol: Tolerances = Tolerances()) -> np.ndarray:
    """Cells where L@U misses A by more than the tolerance, plus triangularity leaks.

    Assumes shapes already agree.
    """
    a = np.asarray(a, dtype=np.float64)
    l = np.asarray(pair.l, dtype=np.float64)
    u = np.asarray(pair.u, dtype=np.float64)
    with np.errstate(invalid="ignore", over="ignore"):
        mask = ~(np.abs(l @ u - a) <= tol.reconstruction_abs)
    mask |= np.triu(~(np.abs(l) <= tol.triangular_abs), 1)
    mask |= np.tril(~(np.abs(u) <= tol.triangular_abs), -1)
    return mask.astype(np.uint8)


def score_lu(pred, target_input: np.ndarray, tol: Tolerances = Tolerances(),
             instance_id: str = "", condition: str = "text", size: int | None = None) -> EvalRecord:
    a = np.asarray(target_input)
    meta = _meta(instance_id, condition, "lu", size or a.shape[0])
    if isinstance(pred, ParseError):
        return malformed(pred.category, **meta)
    verdict = lu_verify(a, pred, tol)
    if verdict.reason == "shape":
        return malformed(SHAPE_MISMATCH, **meta)
    mask = lu_error_mask(a, pred, tol)
    return EvalRecord(verdict=CORRECT if verdict.accepted else INCORRECT, cell_errors=mask,
                      failure_category=verdict.reason, **meta)


def score_instance(instance, pred, condition: str, tol: Tolerances = Tolerances()) -> EvalRecord:
    if instance.task == "transpose":
        return score_transpose(pred, instance.target, instance.id, condition, instance.size)
    if instance.task == "life":
        return score_life(pred, instance.target, instance.id, condition, instance.size)
    if instance.task == "lu":
        return score_lu(pred, instance.input, tol, instance.id, condition, instance.size)
    raise ValueError(f"unknown task {instance.task!r}")


class GroupAccuracy(NamedTuple):
    correct: int
    total: int
    accuracy: float


def aggregate_accuracy(records: Iterable[EvalRecord],
                       group_by: Sequence[str] = ("task", "size", "condition"),
                       ) -> dict[tuple, GroupAccuracy]:
    """Accuracy per group; malformed records count in the denominator."""
    counts: dict[tuple, list[int]] = defaultdict(lambda: [0, 0])
    for r in records:
        c = counts[tuple(getattr(r, k) for k in group_by)]
        c[0] += r.correct
        c[1] += 1
    if not counts:
        raise ValueError("no records to aggregate")
    return {k: GroupAccuracy(c, n, c / n) for k, (c, n) in sorted(counts.items())}


def write_records(records: Iterable[EvalRecord], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(json.dumps(r.to_json(), sort_keys=True) + "\n" for r in records))
    return path


def read_records(path: str | Path) -> list[EvalRecord]:
    return [EvalRecord.from_json(json.loads(line))
            for line in Path(path).read_text().splitlines() if line.strip()]
