"""Grad-CAM maps from exported feature/gradient tensors, plus the two fusions.

Layer fusion resizes every per-layer map to a common resolution, sums them,
and multiplies the sum by the final layer's map.  Class fusion averages the
per-pair maps of the representative set.  Every stage ends with a min-max
normalization to [0, 1]; an all-constant map normalizes to all-zero.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .tensorio import ActivationMap, Tensor, read_tensor, resize_bilinear, write_tensor

_FEATURES_RE = re.compile(r"^layer(\d+)_features\.camt$")


@dataclass(frozen=True, eq=False)
class LayerDump:
    """Feature and gradient tensors [C, H, W] tapped at one network layer."""

    layer_id: int
    features: Tensor
    gradients: Tensor

    def __post_init__(self) -> None:
        if len(self.features.dims) != 3:
            raise ValueError(
                f"layer {self.layer_id}: expected [C,H,W] tensors, got dims {self.features.dims}"
            )
        if self.features.dims != self.gradients.dims:
            raise ValueError(
                f"layer {self.layer_id}: features {self.features.dims} vs "
                f"gradients {self.gradients.dims}"
            )


@dataclass(frozen=True, eq=False)
class PairDump:
    """All layer dumps of one image under one (target, comparison) binary model."""

    image_id: str
    target_class: int
    comparison_class: int
    layers: tuple[LayerDump, ...]

    def __post_init__(self) -> None:
        if not self.layers:
            raise ValueError(f"{self.image_id}: pair dump needs at least one layer")
        ids = [d.layer_id for d in self.layers]
        if any(b <= a for a, b in zip(ids, ids[1:])):
            raise ValueError(f"{self.image_id}: layer ids must strictly increase, got {ids}")
        if self.target_class == self.comparison_class:
            raise ValueError(f"{self.image_id}: target equals comparison class")


def minmax_normalize(raw: np.ndarray) -> np.ndarray:
    """Rescale to [0, 1]; any all-constant input collapses to all-zero."""
    lo = float(raw.min())
    hi = float(raw.max())
    if hi - lo <= 0.0:
        return np.zeros_like(raw, dtype=np.float64)
    return (raw - lo) / (hi - lo)


def grad_cam_layer(dump: LayerDump) -> ActivationMap:
    """Gradient-weighted channel sum, rectified and min-max normalized.

    Channel weights are the spatial means of the gradients.
    """
    feats = dump.features.values.astype(np.float64)
    grads = dump.gradients.values.astype(np.float64)
    alpha = grads.mean(axis=(1, 2))
    raw = np.tensordot(alpha, feats, axes=(0, 0))
    rectified = np.maximum(raw, 0.0)
    return ActivationMap(minmax_normalize(rectified))


def fuse_layers(
    maps: Sequence[ActivationMap], target_height: int, target_width: int
) -> ActivationMap:
    """Sum per-layer maps, multiply by the final layer's map, normalize."""
    if not maps:
        raise ValueError("no layer maps to fuse")
    resized = [resize_bilinear(m, target_height, target_width).values for m in maps]
    total = np.sum(resized, axis=0)
    fused = total * resized[-1]
    return ActivationMap(minmax_normalize(fused))


def fuse_classes(maps: Sequence[ActivationMap]) -> ActivationMap:
    """Elementwise mean over the representative classes' maps, normalized."""
    if not maps:
        raise ValueError("no class maps to fuse")
    shape = maps[0].values.shape
    for m in maps[1:]:
        if m.values.shape != shape:
            raise ValueError(f"map dims differ: {m.values.shape} vs {shape}")
    mean = np.mean([m.values for m in maps], axis=0)
    return ActivationMap(minmax_normalize(mean))


def default_fusion_size(pair: PairDump) -> tuple[int, int]:
    """Largest layer resolution (the earliest layer wins ties)."""
    best = max(pair.layers, key=lambda d: d.features.dims[1] * d.features.dims[2])
    return best.features.dims[1], best.features.dims[2]


def generate_pair_map(
    pair: PairDump,
    target_size: tuple[int, int] | None = None,
    mode: str = "multi",
) -> ActivationMap:
    """Per-pair map: multi-layer fusion, or the final layer alone.

    mode "multi" runs grad_cam_layer on every layer and fuses them; mode
    "final" resizes the final layer's map only (no self-multiplication),
    the single-layer ablation path.
    """
    if mode not in ("multi", "final"):
        raise ValueError(f"unknown layer mode {mode!r}")
    height, width = target_size if target_size is not None else default_fusion_size(pair)
    if mode == "final":
        return resize_bilinear(grad_cam_layer(pair.layers[-1]), height, width)
    maps = [grad_cam_layer(d) for d in pair.layers]
    return fuse_layers(maps, height, width)


def pair_dump_dir(root, image_id: str, target: int, comparison: int) -> Path:
    return Path(root) / image_id / f"{target}_vs_{comparison}"


def write_pair_dump(pair: PairDump, root) -> Path:
    """Lay the dump out as <root>/<image>/<t>_vs_<c>/layer<k>_{features,gradients}.camt."""
    folder = pair_dump_dir(root, pair.image_id, pair.target_class, pair.comparison_class)
    folder.mkdir(parents=True, exist_ok=True)
    for dump in pair.layers:
        write_tensor(dump.features, folder / f"layer{dump.layer_id}_features.camt")
        write_tensor(dump.gradients, folder / f"layer{dump.layer_id}_gradients.camt")
    return folder


def read_pair_dump(root, image_id: str, target: int, comparison: int) -> PairDump:
    folder = pair_dump_dir(root, image_id, target, comparison)
    if not folder.is_dir():
        raise FileNotFoundError(f"no pair dump directory {folder}")
    layer_ids = []
    for entry in folder.iterdir():
        match = _FEATURES_RE.match(entry.name)
        if match:
            layer_ids.append(int(match.group(1)))
    if not layer_ids:
        raise FileNotFoundError(f"{folder}: no layer*_features.camt files")
    layers = []
    for layer_id in sorted(layer_ids):
        grad_path = folder / f"layer{layer_id}_gradients.camt"
        if not grad_path.exists():
            raise FileNotFoundError(f"{grad_path}: gradients file missing")
        layers.append(
            LayerDump(
                layer_id=layer_id,
                features=read_tensor(folder / f"layer{layer_id}_features.camt"),
                gradients=read_tensor(grad_path),
            )
        )
    return PairDump(
        image_id=image_id,
        target_class=target,
        comparison_class=comparison,
        layers=tuple(layers),
    )


def map_to_tensor(m: ActivationMap) -> Tensor:
    """2-D float32 tensor for CAMT export of a map."""
    return Tensor(m.values.astype(np.float32))


def tensor_to_map(t: Tensor) -> ActivationMap:
    if len(t.dims) != 2:
        raise ValueError(f"expected a 2-D map tensor, got dims {t.dims}")
    return ActivationMap(np.clip(t.values.astype(np.float64), 0.0, 1.0))


def read_map(path) -> ActivationMap:
    return tensor_to_map(read_tensor(path))
