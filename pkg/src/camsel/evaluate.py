"""Thresholded-mask mIoU scoring and the pairwise Top-k matrix analysis.

Aggregation order: IoU per image, mean per class over defined IoUs, then an
unweighted mean over classes.  Images where both masks are empty are treated
as undefined and excluded; classes without any defined IoU are absent from
the report rather than scored zero.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .cam import fuse_classes
from .tensorio import ActivationMap, BinaryMask

AVG_ROW_KEY = "__avg__"


def threshold_map(m: ActivationMap, threshold: float) -> BinaryMask:
    """Foreground wherever the map value is >= threshold (inclusive)."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {threshold}")
    return BinaryMask(m.values >= threshold)


def iou(pred: BinaryMask, gt: BinaryMask) -> float | None:
    """Intersection over union; None when both masks are empty (undefined)."""
    if pred.bits.shape != gt.bits.shape:
        raise ValueError(f"mask dims differ: {pred.bits.shape} vs {gt.bits.shape}")
    inter = int(np.logical_and(pred.bits, gt.bits).sum())
    union = int(np.logical_or(pred.bits, gt.bits).sum())
    if union == 0:
        return None
    return inter / union


@dataclass(frozen=True)
class EvalReport:
    """Per-class mIoU plus the unweighted class average."""

    per_class: dict[str, float]
    average: float
    threshold: float
    counts: dict[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.per_class:
            raise ValueError("report has no classes")
        vals = np.array(list(self.per_class.values()), dtype=np.float64)
        if vals.min() < 0.0 or vals.max() > 1.0:
            raise ValueError("mIoU values must lie in [0, 1]")
        if abs(self.average - float(vals.mean())) > 1e-9:
            raise ValueError("average must equal the mean of per-class values")


def _aggregate(
    ious_by_class: Mapping[str, list[float]], threshold: float
) -> EvalReport:
    per_class = {}
    counts = {}
    for name in sorted(ious_by_class):
        defined = ious_by_class[name]
        if not defined:
            continue
        per_class[name] = float(np.mean(defined))
        counts[name] = len(defined)
    if not per_class:
        raise ValueError("no class produced a defined IoU")
    average = float(np.mean(list(per_class.values())))
    return EvalReport(per_class=per_class, average=average, threshold=threshold, counts=counts)


def miou_per_class(
    maps: Mapping[str, ActivationMap],
    gts: Mapping[str, BinaryMask],
    class_of: Mapping[str, int],
    threshold: float,
    class_names: Sequence[str],
) -> EvalReport:
    """Score thresholded maps against groundtruth masks of equal dims."""
    ious_by_class: dict[str, list[float]] = {}
    for image_id in sorted(maps):
        if image_id not in gts:
            raise KeyError(f"missing groundtruth for image {image_id!r}")
        name = class_names[class_of[image_id]]
        value = iou(threshold_map(maps[image_id], threshold), gts[image_id])
        if value is not None:
            ious_by_class.setdefault(name, []).append(value)
    return _aggregate(ious_by_class, threshold)


@dataclass(frozen=True, eq=False)
class PairMatrix:
    """mIoU of target class (column) scored with comparison class (row)."""

    values: np.ndarray
    class_names: tuple[str, ...]

    def __post_init__(self) -> None:
        arr = np.array(self.values, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError(f"pair matrix must be square, got {arr.shape}")
        names = tuple(self.class_names)
        if len(names) != arr.shape[0]:
            raise ValueError(f"{len(names)} class names for a {arr.shape[0]}-class matrix")
        np.fill_diagonal(arr, np.nan)
        off = arr[~np.eye(arr.shape[0], dtype=bool)]
        if not np.all(np.isfinite(off)):
            raise ValueError("off-diagonal entries must be finite")
        if off.min() < 0.0 or off.max() > 1.0:
            raise ValueError("mIoU entries must lie in [0, 1]")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "class_names", names)

    @property
    def n(self) -> int:
        return int(self.values.shape[0])


def topk_select_from_matrix(pm: PairMatrix, target: int, k: int) -> list[int]:
    """The k comparison rows with the largest mIoU in the target's column."""
    if not 0 <= target < pm.n:
        raise IndexError(f"class index {target} out of range for n={pm.n}")
    if not 1 <= k <= pm.n - 1:
        raise ValueError(f"k must lie in 1..{pm.n - 1}, got {k}")
    column = pm.values[:, target]
    rows = sorted(
        (r for r in range(pm.n) if r != target), key=lambda r: (-column[r], r)
    )
    return rows[:k]


def top1_report(pm: PairMatrix, threshold: float = 0.15) -> EvalReport:
    """Column maxima of the pair matrix: the best single comparison class each."""
    per_class = {
        pm.class_names[c]: float(np.nanmax(pm.values[:, c])) for c in range(pm.n)
    }
    average = float(np.mean(list(per_class.values())))
    return EvalReport(per_class=per_class, average=average, threshold=threshold)


def topk_fused_eval(
    k: int,
    pm: PairMatrix,
    pair_maps: Mapping[tuple[str, int], ActivationMap],
    gts: Mapping[str, BinaryMask],
    class_of: Mapping[str, int],
    threshold: float,
) -> EvalReport:
    """Fuse each class's k best comparison maps (per the matrix), then score.

    ``pair_maps`` is keyed by (image_id, comparison_class).
    """
    ious_by_class: dict[str, list[float]] = {}
    for image_id in sorted(class_of):
        target = class_of[image_id]
        selected = topk_select_from_matrix(pm, target, k)
        maps = []
        for comparison in selected:
            key = (image_id, comparison)
            if key not in pair_maps:
                raise KeyError(
                    f"missing pair map for image {image_id!r} vs class {comparison}"
                )
            maps.append(pair_maps[key])
        if image_id not in gts:
            raise KeyError(f"missing groundtruth for image {image_id!r}")
        value = iou(threshold_map(fuse_classes(maps), threshold), gts[image_id])
        if value is not None:
            ious_by_class.setdefault(pm.class_names[target], []).append(value)
    return _aggregate(ious_by_class, threshold)


def write_report_csv(report: EvalReport, path) -> None:
    """Rows of class,miou,count followed by the __avg__ row."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["class", "miou", "count"])
        total = 0
        for name in sorted(report.per_class):
            count = report.counts.get(name, 0)
            total += count
            writer.writerow([name, repr(report.per_class[name]), count])
        writer.writerow([AVG_ROW_KEY, repr(report.average), total])


def write_report_json(report: EvalReport, path) -> None:
    doc = {
        "threshold": report.threshold,
        "average": report.average,
        "per_class": report.per_class,
        "counts": report.counts,
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_pair_matrix_csv(pm: PairMatrix, path) -> None:
    """Class-name header row and column; diagonal cells left empty."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([""] + list(pm.class_names))
        for r, name in enumerate(pm.class_names):
            row = [name]
            for c in range(pm.n):
                row.append("" if r == c else repr(float(pm.values[r, c])))
            writer.writerow(row)


def read_pair_matrix_csv(path) -> PairMatrix:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        rows = [row for row in reader if row]
    if not rows or len(rows[0]) < 2:
        raise ValueError(f"{path}: empty pair matrix CSV")
    names = tuple(rows[0][1:])
    n = len(names)
    if len(rows) != n + 1:
        raise ValueError(f"{path}: expected {n} value rows, got {len(rows) - 1}")
    values = np.full((n, n), np.nan)
    for r, row in enumerate(rows[1:]):
        if len(row) != n + 1:
            raise ValueError(f"{path}: row {r} has {len(row) - 1} cells, expected {n}")
        if row[0] != names[r]:
            raise ValueError(f"{path}: row label {row[0]!r} does not match header {names[r]!r}")
        for c, cell in enumerate(row[1:]):
            if r == c:
                if cell not in ("", "-"):
                    raise ValueError(f"{path}: diagonal cell ({r},{c}) must be empty")
                continue
            values[r, c] = float(cell)
    return PairMatrix(values, names)
