"""On-disk toy dataset layout and loading.

Layout:
    root/labels.json            {"classes": [...], "images": {id: {"class": int,
                                 "annotation": "annotations/<id>.pgm"?}}}
    root/images/<id>.pgm        grayscale image
    root/annotations/<id>.pgm   label map: 0 = background, c + 1 = class c

Annotations are optional per image; they feed mask export and the
single-label filter.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .formats import read_pgm, write_pgm


@dataclass(frozen=True)
class Sample:
    image_id: str
    class_index: int
    image: np.ndarray  # uint8 H x W
    annotation: np.ndarray | None  # uint8 label map or None


@dataclass(frozen=True)
class Dataset:
    root: Path
    class_names: tuple[str, ...]
    samples: tuple[Sample, ...]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def annotation_classes(self, sample: Sample) -> list[int]:
        """Distinct class indices present in the sample's annotation."""
        if sample.annotation is None:
            raise FileNotFoundError(f"{sample.image_id}: no annotation")
        labels = np.unique(sample.annotation)
        return [int(v) - 1 for v in labels if v > 0]

    def is_single_label(self, sample: Sample) -> bool:
        if sample.annotation is None:
            return True
        return len(self.annotation_classes(sample)) <= 1


def load_dataset(root) -> Dataset:
    root = Path(root)
    doc = json.loads((root / "labels.json").read_text(encoding="utf-8"))
    class_names = tuple(doc["classes"])
    samples = []
    for image_id in sorted(doc["images"]):
        entry = doc["images"][image_id]
        class_index = int(entry["class"])
        if not 0 <= class_index < len(class_names):
            raise ValueError(f"{image_id}: class {class_index} out of range")
        image = read_pgm(root / "images" / f"{image_id}.pgm")
        annotation = None
        if entry.get("annotation"):
            annotation = read_pgm(root / entry["annotation"])
            if annotation.shape != image.shape:
                raise ValueError(f"{image_id}: annotation dims differ from image")
        samples.append(Sample(image_id, class_index, image, annotation))
    return Dataset(root=root, class_names=class_names, samples=tuple(samples))


def make_toy_dataset(
    root,
    class_names=("square", "disk", "stripe"),
    images_per_class: int = 6,
    size: int = 24,
    seed: int = 0,
) -> Dataset:
    """Synthesize a deterministic blob dataset with annotations.

    Each class draws its shape in a class-specific region, bright on a dark
    noisy background, so a small CNN separates them in a few epochs.
    """
    rng = np.random.default_rng(seed)
    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "annotations").mkdir(parents=True, exist_ok=True)
    images_doc = {}
    for class_index, name in enumerate(class_names):
        for t in range(images_per_class):
            image_id = f"{name}_{t:02d}"
            img = rng.integers(0, 60, size=(size, size)).astype(np.uint8)
            ann = np.zeros((size, size), dtype=np.uint8)
            region = _class_region(class_index, size, jitter=int(rng.integers(0, 3)))
            img[region] = rng.integers(190, 256, size=int(region.sum())).astype(np.uint8)
            ann[region] = class_index + 1
            write_pgm(img, root / "images" / f"{image_id}.pgm")
            write_pgm(ann, root / "annotations" / f"{image_id}.pgm")
            images_doc[image_id] = {
                "class": class_index,
                "annotation": f"annotations/{image_id}.pgm",
            }
    (root / "labels.json").write_text(
        json.dumps({"classes": list(class_names), "images": images_doc}, indent=2, sort_keys=True)
        + "\n",
        encoding="utf-8",
    )
    return load_dataset(root)


def _class_region(class_index: int, size: int, jitter: int) -> np.ndarray:
    region = np.zeros((size, size), dtype=bool)
    third = size // 3
    if class_index % 3 == 0:  # square, top-left third
        region[jitter : jitter + third, jitter : jitter + third] = True
    elif class_index % 3 == 1:  # disk, centre
        yy, xx = np.mgrid[0:size, 0:size]
        cy = cx = size // 2 + jitter
        region[(yy - cy) ** 2 + (xx - cx) ** 2 <= (third // 2 + 2) ** 2] = True
    else:  # horizontal stripe, lower part
        row = 2 * third + jitter
        region[row : row + max(2, third // 2), 2:-2] = True
    return region
