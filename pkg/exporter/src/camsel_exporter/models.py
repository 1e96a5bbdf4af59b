"""Small CNN backbones with taggable blocks for feature/gradient export."""

from __future__ import annotations

import torch
from torch import nn


class ConvBlock(nn.Module):
    """3x3 stride-2 conv (+ optional residual 3x3) followed by ReLU."""

    def __init__(self, c_in: int, c_out: int, residual: bool):
        super().__init__()
        self.down = nn.Conv2d(c_in, c_out, 3, stride=2, padding=1)
        self.residual = nn.Conv2d(c_out, c_out, 3, padding=1) if residual else None
        self.act = nn.ReLU()

    def forward(self, x):
        x = self.act(self.down(x))
        if self.residual is not None:
            x = self.act(x + self.residual(x))
        return x


class SeparableBlock(nn.Module):
    """Depthwise 3x3 stride-2 conv plus pointwise 1x1, mobile style."""

    def __init__(self, c_in: int, c_out: int):
        super().__init__()
        self.depthwise = nn.Conv2d(c_in, c_in, 3, stride=2, padding=1, groups=c_in)
        self.pointwise = nn.Conv2d(c_in, c_out, 1)
        self.act = nn.ReLU()

    def forward(self, x):
        return self.act(self.pointwise(self.act(self.depthwise(x))))


class SmallConvNet(nn.Module):
    """Stack of downsampling blocks, global average pooling, linear head.

    Block outputs are the exportable tap points.
    """

    def __init__(
        self,
        n_classes: int,
        channels=(8, 16, 32, 64),
        style: str = "plain",
        in_channels: int = 1,
    ):
        super().__init__()
        blocks = []
        c_prev = in_channels
        for c_out in channels:
            if style == "separable":
                blocks.append(SeparableBlock(c_prev, c_out))
            else:
                blocks.append(ConvBlock(c_prev, c_out, residual=(style == "residual")))
            c_prev = c_out
        self.blocks = nn.ModuleList(blocks)
        self.head = nn.Linear(c_prev, n_classes)

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    def forward_features(self, x: torch.Tensor):
        """Returns (logits, per-block outputs)."""
        feats = []
        for block in self.blocks:
            x = block(x)
            feats.append(x)
        pooled = x.mean(dim=(2, 3))
        return self.head(pooled), feats

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        logits, _ = self.forward_features(x)
        return logits

    def tail(self, tap: int, features: torch.Tensor) -> torch.Tensor:
        """Recompute logits from the tap's block output (for verification)."""
        x = features
        for block in self.blocks[tap + 1 :]:
            x = block(x)
        return self.head(x.mean(dim=(2, 3)))


BACKBONES = {
    "tiny2": dict(channels=(4, 8), style="plain"),
    "smallres4": dict(channels=(8, 16, 32, 64), style="residual"),
    "smallmobile3": dict(channels=(8, 16, 32), style="separable"),
}


def build_backbone(name: str, n_classes: int) -> SmallConvNet:
    if name not in BACKBONES:
        raise ValueError(f"unknown backbone {name!r}; choose from {sorted(BACKBONES)}")
    return SmallConvNet(n_classes=n_classes, **BACKBONES[name])
