"""Representative-class selection: random, fixed rank positions, and clustering.

The clustering variant replaces the centroid distance of plain k-means with
the average pairwise similarity between a class and the members of each
cluster, and keeps every cluster at or above a minimum size while moving.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

from .similarity import ClassRanking, SimilarityMatrix

# Preset 1-based rank positions; position 1 is the most similar class.
RANK_A_POSITIONS = (3, 9, 14, 17)
RANK_B_POSITIONS = (3, 8, 13, 18)


@dataclass(frozen=True)
class Clustering:
    """Partition of class indices into n_clusters groups of >= min_size each."""

    assignment: tuple[int, ...]
    n_clusters: int
    min_size: int

    def __post_init__(self) -> None:
        if self.min_size < 1:
            raise ValueError("min_size must be positive")
        counts = [0] * self.n_clusters
        for cid in self.assignment:
            if not 0 <= cid < self.n_clusters:
                raise ValueError(f"cluster id {cid} out of range")
            counts[cid] += 1
        small = [j for j, c in enumerate(counts) if c < self.min_size]
        if small:
            raise ValueError(f"clusters {small} below min_size {self.min_size}")

    @property
    def n(self) -> int:
        return len(self.assignment)

    def members(self, cluster_id: int) -> tuple[int, ...]:
        return tuple(i for i, cid in enumerate(self.assignment) if cid == cluster_id)


@dataclass(frozen=True)
class RepresentativeSet:
    """Comparison classes selected for one target, with selection provenance."""

    target: int
    members: tuple[int, ...]
    strategy: Mapping = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.members:
            raise ValueError("representative set must not be empty")
        if self.target in self.members:
            raise ValueError("representative set must not contain the target")
        if len(set(self.members)) != len(self.members):
            raise ValueError("representative members must be distinct")


def select_random(n: int, target: int, count: int, seed: int) -> RepresentativeSet:
    """Draw ``count`` distinct non-target classes from a seeded generator."""
    if not 0 <= target < n:
        raise IndexError(f"target {target} out of range for n={n}")
    if not 1 <= count <= n - 1:
        raise ValueError(f"cannot pick {count} classes out of {n - 1} candidates")
    rng = random.Random(seed)
    candidates = [j for j in range(n) if j != target]
    members = tuple(rng.sample(candidates, count))
    return RepresentativeSet(
        target=target, members=members, strategy={"mode": "random", "seed": seed}
    )


def select_by_rank(ranking: ClassRanking, positions: Sequence[int]) -> RepresentativeSet:
    """Pick classes at fixed 1-based positions of a similarity ranking."""
    if len(set(positions)) != len(positions):
        raise ValueError(f"rank positions must be distinct, got {list(positions)}")
    members = []
    for pos in positions:
        if not 1 <= pos <= len(ranking.order):
            raise ValueError(
                f"rank position {pos} out of range 1..{len(ranking.order)}"
            )
        members.append(ranking.order[pos - 1])
    return RepresentativeSet(
        target=ranking.target,
        members=tuple(members),
        strategy={"mode": "rank", "positions": list(positions)},
    )


def _initial_assignment(n: int, n_clusters: int, seed: int) -> list[int]:
    # Seeded shuffle then round-robin: every cluster starts with floor(n/N)
    # or ceil(n/N) members, so min_size holds whenever N * min_size <= n.
    order = list(range(n))
    random.Random(seed).shuffle(order)
    assignment = [0] * n
    for slot, cls in enumerate(order):
        assignment[cls] = slot % n_clusters
    return assignment


def _descend(
    values,
    assignment: list[int],
    n_clusters: int,
    min_size: int,
    max_iter: int,
    on_move: Callable[[tuple[int, ...]], None] | None,
) -> list[int]:
    n = len(assignment)
    clusters = [set() for _ in range(n_clusters)]
    for cls, cid in enumerate(assignment):
        clusters[cid].add(cls)
    for _ in range(max_iter):
        moved = False
        for i in range(n):
            cur = assignment[i]
            best_id = 0
            best_mean = None
            means = []
            for j in range(n_clusters):
                others = clusters[j] - {i}
                mean = sum(values[i][m] for m in others) / len(others) if others else 0.0
                means.append(mean)
                if best_mean is None or mean > best_mean:
                    best_mean = mean
                    best_id = j
            if (
                best_id != cur
                and means[best_id] > means[cur]
                and len(clusters[cur]) - 1 >= min_size
            ):
                clusters[cur].remove(i)
                clusters[best_id].add(i)
                assignment[i] = best_id
                moved = True
                if on_move is not None:
                    on_move(tuple(assignment))
        if not moved:
            break
    return assignment


def _partition_score(values, assignment: list[int], n_clusters: int) -> float:
    """Sum over classes of their mean similarity to own-cluster members."""
    clusters = [set() for _ in range(n_clusters)]
    for cls, cid in enumerate(assignment):
        clusters[cid].add(cls)
    score = 0.0
    for i, cid in enumerate(assignment):
        others = clusters[cid] - {i}
        if others:
            score += sum(values[i][m] for m in others) / len(others)
    return score


def cluster_classes(
    sim: SimilarityMatrix,
    n_clusters: int,
    min_size: int,
    seed: int,
    max_iter: int = 100,
    restarts: int = 8,
    on_move: Callable[[tuple[int, ...]], None] | None = None,
) -> Clustering:
    """Group classes by average pairwise similarity to each cluster's members.

    ``sim`` should be symmetrized.  Each descent starts from a seeded shuffle
    assigned round-robin and visits classes in ascending index order.  A class
    moves to the cluster with the highest mean similarity to its members, self
    excluded and ties broken by lowest cluster id, but only when that mean
    strictly beats its current cluster's and the source cluster stays
    >= min_size; a descent stops after a pass without moves or max_iter
    passes.  Because blocked moves can strand a descent in a poor local
    partition, ``restarts`` descents run from distinct seeded starts (the
    first from ``seed`` itself) and the partition with the largest summed
    own-cluster mean similarity wins, earliest restart on ties.  The result
    is deterministic given (inputs, seed).

    ``on_move`` receives a snapshot of the assignment after every move.
    """
    n = sim.n
    if n_clusters < 2:
        raise ValueError("need at least 2 clusters")
    if min_size < 1:
        raise ValueError("min_size must be positive")
    if restarts < 1:
        raise ValueError("restarts must be positive")
    if n_clusters * min_size > n:
        raise ValueError(
            f"infeasible: {n_clusters} clusters of >= {min_size} need more than {n} classes"
        )

    values = sim.values
    best: list[int] | None = None
    best_score = float("-inf")
    for attempt in range(restarts):
        start_seed = seed if attempt == 0 else seed * 1000003 + attempt
        assignment = _descend(
            values,
            _initial_assignment(n, n_clusters, start_seed),
            n_clusters,
            min_size,
            max_iter,
            on_move,
        )
        score = _partition_score(values, assignment, n_clusters)
        if score > best_score:
            best = assignment
            best_score = score
    assert best is not None
    return Clustering(assignment=tuple(best), n_clusters=n_clusters, min_size=min_size)


def select_from_clusters(
    clustering: Clustering, sim: SimilarityMatrix, target: int, k: int
) -> RepresentativeSet:
    """Pick the k-th most target-similar class from every cluster.

    Within each cluster the target itself is excluded and candidates are
    sorted by B[target][.] descending (ties by ascending index).  Clusters
    with fewer than k candidates yield their last, least similar one.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not 0 <= target < clustering.n:
        raise IndexError(f"target {target} out of range for n={clustering.n}")
    row = sim.values[target]
    members = []
    for cid in range(clustering.n_clusters):
        candidates = [c for c in clustering.members(cid) if c != target]
        if not candidates:
            raise ValueError(f"cluster {cid} contains only the target class")
        candidates.sort(key=lambda c: (-row[c], c))
        members.append(candidates[min(k, len(candidates)) - 1])
    return RepresentativeSet(
        target=target, members=tuple(members), strategy={"mode": "cluster", "k": k}
    )


def write_clustering_json(
    clustering: Clustering, path, seed: int, class_names: Sequence[str]
) -> None:
    doc = {
        "n": clustering.n,
        "N": clustering.n_clusters,
        "min_size": clustering.min_size,
        "seed": seed,
        "assignment": list(clustering.assignment),
        "class_names": list(class_names),
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_clustering_json(path) -> tuple[Clustering, int, tuple[str, ...]]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    clustering = Clustering(
        assignment=tuple(doc["assignment"]),
        n_clusters=int(doc["N"]),
        min_size=int(doc["min_size"]),
    )
    return clustering, int(doc["seed"]), tuple(doc["class_names"])


def write_selection_json(
    rs: RepresentativeSet, path, class_names: Sequence[str] | None = None
) -> None:
    doc = {
        "target": rs.target,
        "members": list(rs.members),
        "strategy": dict(rs.strategy),
    }
    if class_names is not None:
        doc["target_name"] = class_names[rs.target]
        doc["member_names"] = [class_names[m] for m in rs.members]
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_selection_json(path) -> RepresentativeSet:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return RepresentativeSet(
        target=int(doc["target"]),
        members=tuple(doc["members"]),
        strategy=dict(doc["strategy"]),
    )
