"""Class-similarity matrix built from classifier probability logs.

The similarity of class j to class i is the total probability mass that
images whose true class is i assign to j, accumulated over all records.
Self-similarity is discarded: the diagonal is stored as zero and never
consulted downstream.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

PROB_SUM_TOL = 1e-4


class EmptyClassWarning(UserWarning):
    """A class had no records; its similarity row is all-zero."""


def default_class_names(n: int) -> tuple[str, ...]:
    return tuple(f"class_{i}" for i in range(n))


@dataclass(frozen=True, eq=False)
class ProbabilityRecord:
    """One image's softmax vector together with its true class."""

    image_id: str
    true_class: int
    probs: np.ndarray

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(self.probs, dtype=np.float64)
        if arr.ndim != 1 or arr.size < 2:
            raise ValueError(f"{self.image_id}: probs must be a vector of >= 2 classes")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError(f"{self.image_id}: probabilities must lie in [0, 1]")
        if abs(float(arr.sum()) - 1.0) > PROB_SUM_TOL:
            raise ValueError(
                f"{self.image_id}: probabilities sum to {arr.sum():.6f}, expected 1"
            )
        if not 0 <= self.true_class < arr.size:
            raise ValueError(f"{self.image_id}: true_class {self.true_class} out of range")
        arr.setflags(write=False)
        object.__setattr__(self, "probs", arr)


@dataclass(frozen=True, eq=False)
class SimilarityMatrix:
    """n x n nonnegative inter-class confusion mass; diagonal stored as zero."""

    values: np.ndarray
    class_names: tuple[str, ...]

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(self.values, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError(f"similarity matrix must be square, got {arr.shape}")
        names = tuple(self.class_names)
        if len(names) != arr.shape[0]:
            raise ValueError(
                f"{len(names)} class names for a {arr.shape[0]}-class matrix"
            )
        if not np.all(np.isfinite(arr)):
            raise ValueError("similarity matrix contains NaN or Inf")
        off = arr[~np.eye(arr.shape[0], dtype=bool)]
        if off.size and off.min() < 0.0:
            raise ValueError("off-diagonal similarity values must be nonnegative")
        if np.any(np.diag(arr) != 0.0):
            raise ValueError("similarity diagonal must be stored as zero")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "class_names", names)

    @property
    def n(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True)
class ClassRanking:
    """All classes except the target, ordered by descending similarity."""

    target: int
    order: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.target in self.order:
            raise ValueError("ranking order must not contain the target")
        if len(set(self.order)) != len(self.order):
            raise ValueError("ranking order must be distinct")


def build_similarity(
    records: list[ProbabilityRecord], n: int, class_names=None
) -> SimilarityMatrix:
    """Accumulate confusion mass: B[i, j] = sum of probs[j] over records of class i.

    The diagonal is forced to zero.  Classes without any record keep an
    all-zero row and raise an EmptyClassWarning each.
    """
    if not records:
        raise ValueError("empty record list")
    names = tuple(class_names) if class_names is not None else default_class_names(n)
    b = np.zeros((n, n), dtype=np.float64)
    seen = np.zeros(n, dtype=bool)
    for rec in records:
        if rec.probs.size != n:
            raise ValueError(
                f"{rec.image_id}: record has {rec.probs.size} probs, expected {n}"
            )
        if rec.true_class >= n:
            raise ValueError(f"{rec.image_id}: true_class {rec.true_class} >= {n}")
        b[rec.true_class] += rec.probs
        seen[rec.true_class] = True
    np.fill_diagonal(b, 0.0)
    for i in np.flatnonzero(~seen):
        warnings.warn(
            EmptyClassWarning(f"class {i} ({names[i]}) has no records; row is all-zero"),
            stacklevel=2,
        )
    return SimilarityMatrix(b, names)


def rank_classes(sim: SimilarityMatrix, target: int) -> ClassRanking:
    """Sort all other classes by descending B[target, j]; ties by ascending index."""
    if not 0 <= target < sim.n:
        raise IndexError(f"class index {target} out of range for n={sim.n}")
    row = sim.values[target]
    order = sorted(
        (j for j in range(sim.n) if j != target), key=lambda j: (-row[j], j)
    )
    return ClassRanking(target=target, order=tuple(order))


def symmetrize(sim: SimilarityMatrix) -> SimilarityMatrix:
    """Arithmetic-mean symmetrization, (B + B^T) / 2, with a zero diagonal."""
    sym = (sim.values + sim.values.T) / 2.0
    np.fill_diagonal(sym, 0.0)
    return SimilarityMatrix(sym, sim.class_names)


def write_probability_log(records: list[ProbabilityRecord], path) -> None:
    """CSV with header image_id,true_class,p_0,...,p_{n-1}."""
    if not records:
        raise ValueError("empty record list")
    n = records[0].probs.size
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["image_id", "true_class"] + [f"p_{j}" for j in range(n)])
        for rec in records:
            writer.writerow([rec.image_id, rec.true_class] + [repr(float(p)) for p in rec.probs])


def read_probability_log(path) -> list[ProbabilityRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[:2] != ["image_id", "true_class"]:
            raise ValueError(f"{path}: bad probability log header")
        n = len(header) - 2
        if n < 2 or header[2:] != [f"p_{j}" for j in range(n)]:
            raise ValueError(f"{path}: bad probability columns in header")
        records = []
        for row in reader:
            if not row:
                continue
            if len(row) != n + 2:
                raise ValueError(f"{path}: row for {row[0]!r} has {len(row) - 2} probs, expected {n}")
            records.append(
                ProbabilityRecord(
                    image_id=row[0],
                    true_class=int(row[1]),
                    probs=np.array([float(v) for v in row[2:]]),
                )
            )
    if not records:
        raise ValueError(f"{path}: no records")
    return records


def write_similarity_csv(sim: SimilarityMatrix, path) -> None:
    """First row class names, then n rows of n floats."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(sim.class_names)
        for row in sim.values:
            writer.writerow([repr(float(v)) for v in row])


def read_similarity_csv(path) -> SimilarityMatrix:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        rows = [row for row in reader if row]
    if not rows:
        raise ValueError(f"{path}: empty similarity CSV")
    names = tuple(rows[0])
    n = len(names)
    if len(rows) != n + 1:
        raise ValueError(f"{path}: expected {n} value rows, got {len(rows) - 1}")
    values = np.zeros((n, n), dtype=np.float64)
    for i, row in enumerate(rows[1:]):
        if len(row) != n:
            raise ValueError(f"{path}: row {i} has {len(row)} values, expected {n}")
        values[i] = [float(v) for v in row]
    return SimilarityMatrix(values, names)
