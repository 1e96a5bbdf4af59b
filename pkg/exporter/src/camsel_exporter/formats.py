"""Writers for the wire formats the downstream toolkit consumes.

Kept independent of the consumer package on purpose: the cross-component
contract is the bytes, and the test suite round-trips every artifact through
the consumer's readers.
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

CAMT_MAGIC = b"CAMT"
CAMT_VERSION = 1
CAMT_DTYPE_F32 = 1


def write_camt(array: np.ndarray, path) -> None:
    """CAMT: magic, version byte, dtype byte (f32 LE), ndim byte, u32 dims, payload."""
    arr = np.ascontiguousarray(array, dtype=np.float32)
    if not 1 <= arr.ndim <= 4:
        raise ValueError(f"CAMT supports 1..4 dims, got {arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("refusing to write non-finite tensor")
    header = CAMT_MAGIC + struct.pack("<BBB", CAMT_VERSION, CAMT_DTYPE_F32, arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    Path(path).write_bytes(header + arr.astype("<f4", copy=False).tobytes(order="C"))


def write_pgm(gray: np.ndarray, path) -> None:
    """Binary P5 with maxval 255 from a uint8 H x W array."""
    arr = np.ascontiguousarray(gray, dtype=np.uint8)
    if arr.ndim != 2:
        raise ValueError("PGM payload must be 2-D")
    header = f"P5\n{arr.shape[1]} {arr.shape[0]}\n255\n".encode("ascii")
    Path(path).write_bytes(header + arr.tobytes(order="C"))


def write_mask_pgm(bits: np.ndarray, path) -> None:
    write_pgm(np.where(bits, np.uint8(255), np.uint8(0)), path)


def read_pgm(path) -> np.ndarray:
    """Minimal P5 reader for the exporter's own dataset files."""
    raw = Path(path).read_bytes()
    tokens: list[bytes] = []
    i = 0
    while len(tokens) < 4:
        c = raw[i : i + 1]
        if c == b"#":
            while raw[i : i + 1] not in (b"\n", b"\r"):
                i += 1
        elif c.isspace():
            i += 1
        else:
            j = i
            while j < len(raw) and not raw[j : j + 1].isspace():
                j += 1
            tokens.append(raw[i:j])
            i = j
    if tokens[0] != b"P5" or int(tokens[3]) != 255:
        raise ValueError(f"{path}: expected P5 maxval-255 PGM")
    width, height = int(tokens[1]), int(tokens[2])
    pixels = np.frombuffer(raw, dtype=np.uint8, count=width * height, offset=i + 1)
    return pixels.reshape(height, width).copy()


def write_probability_log(rows, n_classes: int, path) -> None:
    """CSV with header image_id,true_class,p_0,...,p_{n-1}.

    ``rows`` yields (image_id, true_class, probability vector).
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["image_id", "true_class"] + [f"p_{j}" for j in range(n_classes)])
        for image_id, true_class, probs in rows:
            if len(probs) != n_classes:
                raise ValueError(f"{image_id}: {len(probs)} probs, expected {n_classes}")
            writer.writerow([image_id, true_class] + [repr(float(p)) for p in probs])
