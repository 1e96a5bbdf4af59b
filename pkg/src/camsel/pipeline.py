"""Configuration, orchestration, and report/manifest persistence.

The full run chains selection, per-pair map generation, multi-class fusion,
and mIoU scoring over every target class found in the probability log.  All
artifacts land under the configured output directory together with a
manifest; reruns with the same config and seed are byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from . import cam, evaluate, selection, similarity
from .tensorio import read_mask_pgm, write_map_pgm, write_tensor

SELECTION_MODES = ("random", "rank-a", "rank-b", "rank", "cluster")
LAYER_MODES = ("multi", "final")

# Offset distinct per-target random draws derived from one run seed.
_TARGET_SEED_STRIDE = 100003


@dataclass
class PipelineConfig:
    """Run parameters; defaults follow the reference evaluation protocol."""

    class_names: list[str] = field(default_factory=list)
    num_clusters: int = 4
    min_cluster_size: int = 4
    cluster_k: int = 1
    rank_positions: list[int] = field(default_factory=lambda: list(selection.RANK_A_POSITIONS))
    selection_mode: str = "cluster"
    threshold: float = 0.15
    seed: int = 0
    probability_log: str = ""
    dump_dir: str = ""
    groundtruth_dir: str = ""
    output_dir: str = ""
    layer_mode: str = "multi"
    targets: list[str] | None = None

    def __post_init__(self) -> None:
        if len(set(self.class_names)) != len(self.class_names):
            raise ValueError("class_names must be distinct")
        if self.selection_mode not in SELECTION_MODES:
            raise ValueError(f"selection_mode must be one of {SELECTION_MODES}")
        if self.layer_mode not in LAYER_MODES:
            raise ValueError(f"layer_mode must be one of {LAYER_MODES}")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError("threshold must lie in [0, 1]")
        if self.num_clusters < 1 or self.min_cluster_size < 1 or self.cluster_k < 1:
            raise ValueError("cluster parameters must be positive")

    @classmethod
    def from_dict(cls, doc: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def from_json(cls, path) -> "PipelineConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def with_overrides(self, **overrides) -> "PipelineConfig":
        """Apply non-None flag overrides on top of the file config; flags win."""
        effective = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **effective) if effective else self

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def write_config_json(config: PipelineConfig, path) -> None:
    Path(path).write_text(
        json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def write_manifest(out_dir, command: str, config_doc: dict, inputs: dict, outputs) -> Path:
    """manifest.json listing inputs, the config hash, and relative outputs."""
    canonical = json.dumps(config_doc, sort_keys=True, separators=(",", ":"))
    doc = {
        "command": command,
        "config": config_doc,
        "config_hash": hashlib.sha256(canonical.encode("utf-8")).hexdigest(),
        "inputs": inputs,
        "outputs": sorted(str(o) for o in outputs),
    }
    path = Path(out_dir) / "manifest.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def select_representatives(
    config: PipelineConfig,
    sim: similarity.SimilarityMatrix,
    clustering: selection.Clustering | None,
    target: int,
) -> selection.RepresentativeSet:
    """Dispatch one target's selection according to the configured mode."""
    mode = config.selection_mode
    if mode == "random":
        return selection.select_random(
            sim.n, target, config.num_clusters, config.seed * _TARGET_SEED_STRIDE + target
        )
    if mode in ("rank-a", "rank-b", "rank"):
        positions = {
            "rank-a": selection.RANK_A_POSITIONS,
            "rank-b": selection.RANK_B_POSITIONS,
            "rank": tuple(config.rank_positions),
        }[mode]
        return selection.select_by_rank(similarity.rank_classes(sim, target), positions)
    if clustering is None:
        raise ValueError("cluster mode requires a clustering")
    return selection.select_from_clusters(clustering, sim, target, config.cluster_k)


def _collect_build_warnings(records, n, class_names):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", similarity.EmptyClassWarning)
        sim = similarity.build_similarity(records, n, class_names)
    return sim, [str(w.message) for w in caught]


def run_pipeline(config: PipelineConfig) -> dict:
    """Full chain: similarity, selection, per-pair maps, fusion, evaluation.

    Returns the report document (also written to report.json/report.csv).
    """
    if not config.class_names:
        raise ValueError("config.class_names must be set")
    if not (config.probability_log and config.dump_dir and config.groundtruth_dir):
        raise ValueError("probability_log, dump_dir and groundtruth_dir must be set")
    if not config.output_dir:
        raise ValueError("output_dir must be set")
    names = list(config.class_names)
    n = len(names)
    out = Path(config.output_dir)
    (out / "selections").mkdir(parents=True, exist_ok=True)
    (out / "maps" / "pairs").mkdir(parents=True, exist_ok=True)
    (out / "maps" / "fused").mkdir(parents=True, exist_ok=True)
    outputs: list[str] = []

    records = similarity.read_probability_log(config.probability_log)
    sim, build_warnings = _collect_build_warnings(records, n, names)
    similarity.write_similarity_csv(sim, out / "similarity.csv")
    outputs.append("similarity.csv")

    clustering = None
    if config.selection_mode == "cluster":
        clustering = selection.cluster_classes(
            similarity.symmetrize(sim),
            config.num_clusters,
            config.min_cluster_size,
            config.seed,
        )
        selection.write_clustering_json(clustering, out / "clusters.json", config.seed, names)
        outputs.append("clusters.json")

    if config.targets is None:
        target_indices = list(range(n))
    else:
        target_indices = [names.index(t) for t in config.targets]

    images_by_class: dict[int, list[str]] = {i: [] for i in range(n)}
    for rec in records:
        images_by_class[rec.true_class].append(rec.image_id)

    per_class: dict[str, dict] = {}
    fused_values: list[float] = []
    for target in target_indices:
        rset = select_representatives(config, sim, clustering, target)
        sel_path = out / "selections" / f"{names[target]}.json"
        selection.write_selection_json(rset, sel_path, names)
        outputs.append(f"selections/{names[target]}.json")

        fused_ious: list[float] = []
        pair_ious: dict[int, list[float]] = {m: [] for m in rset.members}
        count = 0
        for image_id in sorted(images_by_class[target]):
            gt = read_mask_pgm(Path(config.groundtruth_dir) / f"{image_id}.pgm")
            pair_maps = []
            for member in rset.members:
                pair = cam.read_pair_dump(config.dump_dir, image_id, target, member)
                pmap = cam.generate_pair_map(
                    pair, target_size=(gt.height, gt.width), mode=config.layer_mode
                )
                pair_maps.append(pmap)
                stem = f"{image_id}__{target}_vs_{member}"
                write_tensor(cam.map_to_tensor(pmap), out / "maps" / "pairs" / f"{stem}.camt")
                write_map_pgm(pmap, out / "maps" / "pairs" / f"{stem}.pgm")
                outputs.extend([f"maps/pairs/{stem}.camt", f"maps/pairs/{stem}.pgm"])
                value = evaluate.iou(evaluate.threshold_map(pmap, config.threshold), gt)
                if value is not None:
                    pair_ious[member].append(value)

            fused = cam.fuse_classes(pair_maps)
            write_tensor(cam.map_to_tensor(fused), out / "maps" / "fused" / f"{image_id}.camt")
            write_map_pgm(fused, out / "maps" / "fused" / f"{image_id}.pgm")
            outputs.extend([f"maps/fused/{image_id}.camt", f"maps/fused/{image_id}.pgm"])
            value = evaluate.iou(evaluate.threshold_map(fused, config.threshold), gt)
            if value is not None:
                fused_ious.append(value)
                count += 1

        if not fused_ious:
            continue
        fused_miou = sum(fused_ious) / len(fused_ious)
        fused_values.append(fused_miou)
        per_class[names[target]] = {
            "count": count,
            "fused_miou": fused_miou,
            "members": [names[m] for m in rset.members],
            "pair_miou": {
                names[m]: (sum(v) / len(v) if v else None) for m, v in pair_ious.items()
            },
        }

    if not per_class:
        raise ValueError("no target class produced a defined fused IoU")
    average = sum(fused_values) / len(fused_values)
    report_doc = {
        "threshold": config.threshold,
        "selection_mode": config.selection_mode,
        "layer_mode": config.layer_mode,
        "seed": config.seed,
        "warnings": build_warnings,
        "average_fused_miou": average,
        "per_class": per_class,
    }
    (out / "report.json").write_text(
        json.dumps(report_doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    outputs.append("report.json")

    eval_report = evaluate.EvalReport(
        per_class={name: doc["fused_miou"] for name, doc in per_class.items()},
        average=average,
        threshold=config.threshold,
        counts={name: doc["count"] for name, doc in per_class.items()},
    )
    evaluate.write_report_csv(eval_report, out / "report.csv")
    outputs.append("report.csv")

    outputs.append("manifest.json")
    write_manifest(
        out,
        "run",
        config.to_dict(),
        {
            "probability_log": config.probability_log,
            "dump_dir": config.dump_dir,
            "groundtruth_dir": config.groundtruth_dir,
        },
        outputs,
    )
    return report_doc
