"""Input normalization and the two training loops.

All-class models train for a fixed epoch budget with plateau-halved learning
rate; binary pair models stop early once train accuracy clears the
configured bar (default 0.95) or the epoch cap (default 10) is hit.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F

from .dataset import Sample


def normalize_image(image, input_size: int) -> torch.Tensor:
    """Resize the short border to input_size, then centre-crop a square."""
    x = torch.as_tensor(image, dtype=torch.float32)[None, None] / 255.0
    h, w = x.shape[-2:]
    scale = input_size / min(h, w)
    new_h, new_w = max(input_size, round(h * scale)), max(input_size, round(w * scale))
    x = F.interpolate(x, size=(new_h, new_w), mode="bilinear", align_corners=False)
    top = (new_h - input_size) // 2
    left = (new_w - input_size) // 2
    return x[0, :, top : top + input_size, left : left + input_size]


def batch_tensors(samples: list[Sample], input_size: int) -> tuple[torch.Tensor, torch.Tensor]:
    images = torch.stack([normalize_image(s.image, input_size) for s in samples])
    labels = torch.tensor([s.class_index for s in samples], dtype=torch.long)
    return images, labels


def _epoch(model, images, labels, optimizer, batch_size: int, generator) -> float:
    model.train()
    order = torch.randperm(len(images), generator=generator)
    total = 0.0
    for start in range(0, len(order), batch_size):
        idx = order[start : start + batch_size]
        optimizer.zero_grad()
        loss = F.cross_entropy(model(images[idx]), labels[idx])
        loss.backward()
        optimizer.step()
        total += float(loss.detach()) * len(idx)
    return total / len(images)


@torch.no_grad()
def accuracy(model, images, labels) -> float:
    model.eval()
    predicted = model(images).argmax(dim=1)
    return float((predicted == labels).float().mean())


def train_all_class(
    model,
    images: torch.Tensor,
    labels: torch.Tensor,
    *,
    epochs: int = 200,
    learning_rate: float = 1e-4,
    batch_size: int = 24,
    plateau_patience: int = 5,
    plateau_factor: float = 0.5,
    seed: int = 0,
) -> dict:
    optimizer = torch.optim.Adam(model.parameters(), lr=learning_rate)
    scheduler = torch.optim.lr_scheduler.ReduceLROnPlateau(
        optimizer, factor=plateau_factor, patience=plateau_patience
    )
    generator = torch.Generator().manual_seed(seed)
    history = []
    for _ in range(epochs):
        loss = _epoch(model, images, labels, optimizer, batch_size, generator)
        scheduler.step(loss)
        history.append(loss)
    return {"epochs": len(history), "final_loss": history[-1] if history else None,
            "train_accuracy": accuracy(model, images, labels)}


def train_binary(
    model,
    images: torch.Tensor,
    labels: torch.Tensor,
    *,
    max_epochs: int = 10,
    learning_rate: float = 1e-4,
    batch_size: int = 24,
    stop_accuracy: float = 0.95,
    seed: int = 0,
) -> dict:
    optimizer = torch.optim.Adam(model.parameters(), lr=learning_rate)
    generator = torch.Generator().manual_seed(seed)
    epochs_run = 0
    acc = accuracy(model, images, labels)
    while epochs_run < max_epochs and acc <= stop_accuracy:
        _epoch(model, images, labels, optimizer, batch_size, generator)
        epochs_run += 1
        acc = accuracy(model, images, labels)
    return {"epochs": epochs_run, "train_accuracy": acc, "accuracy_split": "train"}
