"""The three export operations behind the toolkit's file-format boundary:
probability logs, per-layer feature/gradient pair dumps, and masks."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
import torch

from .dataset import Dataset, load_dataset
from .formats import write_camt, write_mask_pgm, write_probability_log
from .models import build_backbone
from .train import batch_tensors, normalize_image, train_all_class, train_binary


@dataclass
class ExportJob:
    """One export task: dataset, backbone, class scope, tap points, output."""

    dataset: str
    backbone: str = "smallres4"
    mode: str = "all"  # "all" or "binary"
    classes: tuple[str, str] | None = None  # binary: (target, comparison)
    tap_points: tuple[int, ...] = ()  # block indices; empty means every block
    output_dir: str = ""
    input_size: int = 224
    seed: int = 0
    batch_size: int = 24
    learning_rate: float = 1e-4
    epochs: int = 200
    max_epochs: int = 10
    stop_accuracy: float = 0.95

    def __post_init__(self) -> None:
        if self.mode not in ("all", "binary"):
            raise ValueError("mode must be 'all' or 'binary'")
        if self.mode == "binary":
            if not self.classes or len(self.classes) != 2:
                raise ValueError("binary mode requires exactly two classes")
        taps = tuple(self.tap_points)
        if any(b <= a for a, b in zip(taps, taps[1:])):
            raise ValueError(f"tap points must strictly increase, got {list(taps)}")

    def to_dict(self) -> dict:
        doc = {f.name: getattr(self, f.name) for f in fields(self)}
        doc["classes"] = list(self.classes) if self.classes else None
        doc["tap_points"] = list(self.tap_points)
        return doc


def write_jobs_manifest(job: ExportJob, extra: dict, path) -> None:
    doc = dict(job.to_dict())
    doc.update(extra)
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def resolve_taps(job: ExportJob, n_blocks: int) -> tuple[int, ...]:
    taps = tuple(job.tap_points) if job.tap_points else tuple(range(n_blocks))
    if any(not 0 <= t < n_blocks for t in taps):
        raise ValueError(f"tap point outside 0..{n_blocks - 1}: {list(taps)}")
    return taps


def train_job_model(job: ExportJob, data: Dataset):
    """Train the job's classifier; binary jobs see only their two classes."""
    torch.manual_seed(job.seed)
    if job.mode == "binary":
        target, comparison = job.classes
        pair = [data.class_names.index(target), data.class_names.index(comparison)]
        samples = [s for s in data.samples if s.class_index in pair]
        remap = {orig: new for new, orig in enumerate(pair)}
        images, labels = batch_tensors(samples, job.input_size)
        labels = torch.tensor([remap[int(v)] for v in labels], dtype=torch.long)
        model = build_backbone(job.backbone, n_classes=2)
        stats = train_binary(
            model, images, labels,
            max_epochs=job.max_epochs, learning_rate=job.learning_rate,
            batch_size=job.batch_size, stop_accuracy=job.stop_accuracy, seed=job.seed,
        )
    else:
        images, labels = batch_tensors(list(data.samples), job.input_size)
        model = build_backbone(job.backbone, n_classes=data.n_classes)
        stats = train_all_class(
            model, images, labels,
            epochs=job.epochs, learning_rate=job.learning_rate,
            batch_size=job.batch_size, seed=job.seed,
        )
    model.eval()
    return model, stats


def export_probabilities(job: ExportJob, data: Dataset, model) -> Path:
    """Softmax vector per single-label image, columns in dataset class order."""
    if job.mode != "all":
        raise ValueError("probability export needs an all-class model")
    out = Path(job.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    model.eval()
    with torch.no_grad():
        for sample in data.samples:
            if not data.is_single_label(sample):
                continue
            x = normalize_image(sample.image, job.input_size)[None]
            probs = torch.softmax(model(x)[0], dim=0).numpy().astype(np.float64)
            rows.append((sample.image_id, sample.class_index, probs / probs.sum()))
    path = out / "probs.csv"
    write_probability_log(rows, data.n_classes, path)
    return path


def export_pair_dump(job: ExportJob, data: Dataset, model, image_id: str) -> Path:
    """Per tap point: block features and d(target logit)/d(features), one
    backward pass, written as layer<k>_{features,gradients}.camt."""
    if job.mode != "binary":
        raise ValueError("pair dumps need a binary job")
    sample = next((s for s in data.samples if s.image_id == image_id), None)
    if sample is None:
        raise KeyError(f"image {image_id!r} not in dataset")
    target_idx = data.class_names.index(job.classes[0])
    comparison_idx = data.class_names.index(job.classes[1])
    taps = resolve_taps(job, model.n_blocks)

    model.eval()
    x = normalize_image(sample.image, job.input_size)[None]
    logits, feats = model.forward_features(x)
    tapped = [feats[t] for t in taps]
    # target class sits at binary index 0 by construction of train_job_model
    grads = torch.autograd.grad(logits[0, 0], tapped)

    out = Path(job.output_dir) / "dumps" / image_id / f"{target_idx}_vs_{comparison_idx}"
    out.mkdir(parents=True, exist_ok=True)
    for order, (tap, grad) in enumerate(zip(taps, grads), start=1):
        features = feats[tap][0].detach().numpy()
        write_camt(features, out / f"layer{order}_features.camt")
        write_camt(grad[0].detach().numpy(), out / f"layer{order}_gradients.camt")
    return out


def export_masks(data: Dataset, out_dir) -> dict[str, list[str]]:
    """One foreground-255 PGM per (image, present class); the image's labeled
    class additionally lands at <image_id>.pgm, the consumer's layout."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: dict[str, list[str]] = {}
    for sample in data.samples:
        if sample.annotation is None:
            raise FileNotFoundError(f"{sample.image_id}: missing annotation")
        files = []
        for class_index in data.annotation_classes(sample):
            bits = sample.annotation == class_index + 1
            name = f"{sample.image_id}__c{class_index}.pgm"
            write_mask_pgm(bits, out / name)
            files.append(name)
            if class_index == sample.class_index:
                write_mask_pgm(bits, out / f"{sample.image_id}.pgm")
                files.append(f"{sample.image_id}.pgm")
        if not files:
            # empty-object image: emit an all-background mask for its label
            bits = np.zeros(sample.annotation.shape, dtype=bool)
            write_mask_pgm(bits, out / f"{sample.image_id}.pgm")
            files.append(f"{sample.image_id}.pgm")
        written[sample.image_id] = files
    return written


def run_probability_job(job: ExportJob) -> dict:
    data = load_dataset(job.dataset)
    model, stats = train_job_model(job, data)
    path = export_probabilities(job, data, model)
    write_jobs_manifest(job, {"training": stats, "outputs": [path.name]},
                        Path(job.output_dir) / "jobs.json")
    return {"probability_log": str(path), "training": stats}


def run_pair_dump_job(job: ExportJob, image_ids=None) -> dict:
    data = load_dataset(job.dataset)
    model, stats = train_job_model(job, data)
    target = data.class_names.index(job.classes[0])
    if image_ids is None:
        image_ids = [s.image_id for s in data.samples if s.class_index == target]
    dirs = [str(export_pair_dump(job, data, model, image_id)) for image_id in image_ids]
    write_jobs_manifest(job, {"training": stats, "outputs": dirs},
                        Path(job.output_dir) / "jobs.json")
    return {"dump_dirs": dirs, "training": stats}
