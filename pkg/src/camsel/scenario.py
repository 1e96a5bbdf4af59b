"""Synthetic desk-scale scenarios with analytically known activation maps.

Each class owns a rectangular object region partitioned into parts.  A part
is discriminative against a chosen set of comparison classes: the exported
feature/gradient pair for (target vs comparison) lights up exactly the union
of parts discriminative against that comparison.  Groundtruth masks cover
the full object region, so fusing maps across a representative set that hits
every part recovers the object exactly.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cam import LayerDump, PairDump, write_pair_dump
from .similarity import ProbabilityRecord, write_probability_log
from .tensorio import BinaryMask, Tensor, write_mask_pgm

Rect = tuple[int, int, int, int]  # top, left, bottom, right (half-open)


@dataclass(frozen=True)
class PartSpec:
    rect: Rect
    against: tuple[int, ...]


@dataclass(frozen=True)
class ClassSpec:
    name: str
    object_rects: tuple[Rect, ...]
    parts: tuple[PartSpec, ...]
    confusion: dict[int, float]


@dataclass(frozen=True)
class SyntheticScenario:
    image_height: int
    image_width: int
    images_per_class: int
    layers: int
    classes: tuple[ClassSpec, ...]

    @property
    def n(self) -> int:
        return len(self.classes)

    @property
    def class_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.classes)


def _rect_mask(height: int, width: int, rects) -> np.ndarray:
    mask = np.zeros((height, width), dtype=bool)
    for top, left, bottom, right in rects:
        if not (0 <= top < bottom <= height and 0 <= left < right <= width):
            raise ValueError(f"rectangle {(top, left, bottom, right)} outside {height}x{width}")
        mask[top:bottom, left:right] = True
    return mask


def scenario_from_json(path) -> SyntheticScenario:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    classes = []
    for spec in doc["classes"]:
        classes.append(
            ClassSpec(
                name=spec["name"],
                object_rects=tuple(tuple(r) for r in spec["object"]),
                parts=tuple(
                    PartSpec(rect=tuple(p["rect"]), against=tuple(p["against"]))
                    for p in spec["parts"]
                ),
                confusion={int(k): float(v) for k, v in spec.get("confusion", {}).items()},
            )
        )
    height, width = doc["image_size"]
    return SyntheticScenario(
        image_height=int(height),
        image_width=int(width),
        images_per_class=int(doc.get("images_per_class", 1)),
        layers=int(doc.get("layers", 1)),
        classes=tuple(classes),
    )


def scenario_to_json(scenario: SyntheticScenario, path) -> None:
    doc = {
        "image_size": [scenario.image_height, scenario.image_width],
        "images_per_class": scenario.images_per_class,
        "layers": scenario.layers,
        "classes": [
            {
                "name": spec.name,
                "object": [list(r) for r in spec.object_rects],
                "parts": [
                    {"rect": list(p.rect), "against": list(p.against)} for p in spec.parts
                ],
                "confusion": {str(k): v for k, v in sorted(spec.confusion.items())},
            }
            for spec in scenario.classes
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def validate_scenario(scenario: SyntheticScenario) -> None:
    if scenario.n < 2:
        raise ValueError("scenario needs at least 2 classes")
    if scenario.images_per_class < 1 or scenario.layers < 1:
        raise ValueError("images_per_class and layers must be positive")
    h, w = scenario.image_height, scenario.image_width
    for idx, spec in enumerate(scenario.classes):
        obj = _rect_mask(h, w, spec.object_rects)
        if not obj.any():
            raise ValueError(f"class {spec.name}: empty object region")
        coverage = np.zeros((h, w), dtype=np.int32)
        for part in spec.parts:
            if not part.against:
                raise ValueError(f"class {spec.name}: part with empty 'against' set")
            for other in part.against:
                if other == idx or not 0 <= other < scenario.n:
                    raise ValueError(f"class {spec.name}: bad comparison class {other}")
            coverage += _rect_mask(h, w, [part.rect]).astype(np.int32)
        if (coverage > 1).any():
            raise ValueError(f"class {spec.name}: overlapping parts")
        if not np.array_equal(coverage > 0, obj):
            raise ValueError(f"class {spec.name}: parts do not exactly cover the object")
        off = sum(spec.confusion.values())
        if off > 1.0 + 1e-12:
            raise ValueError(f"class {spec.name}: confusion mass {off} exceeds 1")
        for other, mass in spec.confusion.items():
            if other == idx or not 0 <= other < scenario.n:
                raise ValueError(f"class {spec.name}: bad confusion class {other}")
            if mass < 0.0:
                raise ValueError(f"class {spec.name}: negative confusion mass")


def pair_activation(scenario: SyntheticScenario, target: int, comparison: int) -> np.ndarray:
    """Union of the target's parts discriminative against the comparison class."""
    h, w = scenario.image_height, scenario.image_width
    rects = [p.rect for p in scenario.classes[target].parts if comparison in p.against]
    return _rect_mask(h, w, rects) if rects else np.zeros((h, w), dtype=bool)


def image_ids(scenario: SyntheticScenario, class_index: int) -> list[str]:
    name = scenario.classes[class_index].name
    return [f"{name}_{t:02d}" for t in range(scenario.images_per_class)]


def generate_scenario(scenario: SyntheticScenario, seed: int, out_dir) -> dict:
    """Emit a probability log, pair dumps, and groundtruth masks under out_dir.

    The seed only jitters the confusion masses (down-scaling each nonzero
    entry by up to 10%), so zero entries stay exactly zero and the planted
    similarity structure survives.  Dumps and masks are analytic: features
    carry the part-union indicator, gradients are all ones, so each
    per-layer map is exactly that indicator.
    """
    validate_scenario(scenario)
    out = Path(out_dir)
    (out / "gt").mkdir(parents=True, exist_ok=True)
    (out / "dumps").mkdir(parents=True, exist_ok=True)
    rng = random.Random(seed)
    h, w = scenario.image_height, scenario.image_width

    records = []
    n_dumps = 0
    for idx, spec in enumerate(scenario.classes):
        obj = _rect_mask(h, w, spec.object_rects)
        for image_id in image_ids(scenario, idx):
            probs = np.zeros(scenario.n, dtype=np.float64)
            for other, mass in sorted(spec.confusion.items()):
                probs[other] = mass * (1.0 - 0.1 * rng.random())
            probs[idx] = 1.0 - probs.sum()
            records.append(ProbabilityRecord(image_id=image_id, true_class=idx, probs=probs))

            write_mask_pgm(BinaryMask(obj), out / "gt" / f"{image_id}.pgm")

            for comparison in range(scenario.n):
                if comparison == idx:
                    continue
                indicator = pair_activation(scenario, idx, comparison).astype(np.float32)
                layers = tuple(
                    LayerDump(
                        layer_id=layer,
                        features=Tensor(indicator[np.newaxis, :, :]),
                        gradients=Tensor(np.ones((1, h, w), dtype=np.float32)),
                    )
                    for layer in range(1, scenario.layers + 1)
                )
                write_pair_dump(
                    PairDump(
                        image_id=image_id,
                        target_class=idx,
                        comparison_class=comparison,
                        layers=layers,
                    ),
                    out / "dumps",
                )
                n_dumps += 1

    write_probability_log(records, out / "probs.csv")
    return {
        "classes": scenario.n,
        "images": len(records),
        "pair_dumps": n_dumps,
        "probability_log": str(out / "probs.csv"),
        "dump_dir": str(out / "dumps"),
        "groundtruth_dir": str(out / "gt"),
    }
