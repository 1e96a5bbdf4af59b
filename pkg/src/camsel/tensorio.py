"""Dense array types and the on-disk formats shared by every stage.

Two formats are supported:

* CAMT, a minimal binary tensor container: magic ``CAMT``, a version byte
  (1), a dtype byte (1 = float32 little-endian), an ndim byte, ``ndim``
  little-endian uint32 extents, then the row-major float32 payload.
* Binary PGM (``P5``, maxval 255) for groundtruth masks and exported maps.

All multi-byte integers are little-endian.  Values must be finite; readers
reject NaN/Inf payloads.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

CAMT_MAGIC = b"CAMT"
CAMT_VERSION = 1
CAMT_DTYPE_F32 = 1

_MAX_NDIM = 4


class TensorIOError(ValueError):
    """Base class for CAMT decoding failures."""


class BadMagicError(TensorIOError):
    pass


class UnsupportedVersionError(TensorIOError):
    pass


class UnsupportedDtypeError(TensorIOError):
    pass


class TensorShapeError(TensorIOError):
    """Invalid ndim, non-positive extents, or dims/payload length mismatch."""


class NonFiniteError(TensorIOError):
    pass


class PgmError(ValueError):
    """Malformed PGM header, unsupported maxval, or truncated payload."""


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Tensor:
    """Dense float32 array with 1 to 4 dimensions, row-major."""

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(self.values, dtype=np.float32)
        if arr.ndim < 1 or arr.ndim > _MAX_NDIM:
            raise TensorShapeError(f"tensor must have 1..{_MAX_NDIM} dims, got {arr.ndim}")
        if any(d < 1 for d in arr.shape):
            raise TensorShapeError(f"tensor extents must be positive, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise NonFiniteError("tensor contains NaN or Inf")
        object.__setattr__(self, "values", _freeze(arr))

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(int(d) for d in self.values.shape)

    @property
    def data(self) -> np.ndarray:
        """Flat row-major view of the payload."""
        return self.values.ravel()

    @classmethod
    def from_flat(cls, dims: tuple[int, ...], data) -> "Tensor":
        arr = np.asarray(data, dtype=np.float32).reshape(dims)
        return cls(arr)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Tensor):
            return NotImplemented
        return self.dims == other.dims and self.values.tobytes() == other.values.tobytes()


@dataclass(frozen=True, eq=False)
class ActivationMap:
    """H x W map with every value in [0, 1]; the all-zero map means "no activation"."""

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(self.values, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"activation map must be 2-D, got {arr.ndim} dims")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"activation map extents must be positive, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("activation map contains NaN or Inf")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("activation map values must lie in [0, 1]")
        object.__setattr__(self, "values", _freeze(arr))

    @property
    def height(self) -> int:
        return int(self.values.shape[0])

    @property
    def width(self) -> int:
        return int(self.values.shape[1])


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """H x W boolean foreground mask."""

    bits: np.ndarray

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(self.bits, dtype=bool)
        if arr.ndim != 2:
            raise ValueError(f"mask must be 2-D, got {arr.ndim} dims")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"mask extents must be positive, got {arr.shape}")
        object.__setattr__(self, "bits", _freeze(arr))

    @property
    def height(self) -> int:
        return int(self.bits.shape[0])

    @property
    def width(self) -> int:
        return int(self.bits.shape[1])


def write_tensor(t: Tensor, path) -> None:
    """Serialize ``t`` to CAMT. Identical tensors produce identical bytes."""
    dims = t.dims
    header = CAMT_MAGIC + struct.pack("<BBB", CAMT_VERSION, CAMT_DTYPE_F32, len(dims))
    header += struct.pack(f"<{len(dims)}I", *dims)
    payload = t.values.astype("<f4", copy=False).tobytes(order="C")
    Path(path).write_bytes(header + payload)


def read_tensor(path) -> Tensor:
    """Decode a CAMT file; round-trips bit-exactly through write_tensor."""
    raw = Path(path).read_bytes()
    if len(raw) < 7 or raw[:4] != CAMT_MAGIC:
        raise BadMagicError(f"{path}: not a CAMT file")
    version, dtype, ndim = struct.unpack_from("<BBB", raw, 4)
    if version != CAMT_VERSION:
        raise UnsupportedVersionError(f"{path}: unsupported CAMT version {version}")
    if dtype != CAMT_DTYPE_F32:
        raise UnsupportedDtypeError(f"{path}: unsupported dtype code {dtype}")
    if ndim < 1 or ndim > _MAX_NDIM:
        raise TensorShapeError(f"{path}: ndim {ndim} outside 1..{_MAX_NDIM}")
    dims_end = 7 + 4 * ndim
    if len(raw) < dims_end:
        raise TensorShapeError(f"{path}: truncated dims block")
    dims = struct.unpack_from(f"<{ndim}I", raw, 7)
    if any(d < 1 for d in dims):
        raise TensorShapeError(f"{path}: non-positive extent in {dims}")
    count = 1
    for d in dims:
        count *= d
    expected = dims_end + 4 * count
    if len(raw) != expected:
        raise TensorShapeError(
            f"{path}: dims {dims} imply {expected} bytes, file has {len(raw)}"
        )
    flat = np.frombuffer(raw, dtype="<f4", count=count, offset=dims_end)
    if not np.all(np.isfinite(flat)):
        raise NonFiniteError(f"{path}: payload contains NaN or Inf")
    return Tensor(flat.reshape(dims))


def _parse_pgm_header(raw: bytes, path) -> tuple[int, int, int]:
    """Return (width, height, payload offset); tolerates '#' comments."""
    tokens: list[bytes] = []
    i = 0
    while len(tokens) < 4:
        if i >= len(raw):
            raise PgmError(f"{path}: truncated PGM header")
        c = raw[i : i + 1]
        if c == b"#":
            while i < len(raw) and raw[i : i + 1] not in (b"\n", b"\r"):
                i += 1
        elif c.isspace():
            i += 1
        else:
            j = i
            while j < len(raw) and not raw[j : j + 1].isspace() and raw[j : j + 1] != b"#":
                j += 1
            tokens.append(raw[i:j])
            i = j
    if tokens[0] != b"P5":
        raise PgmError(f"{path}: expected binary PGM magic 'P5', got {tokens[0]!r}")
    try:
        width, height, maxval = (int(t) for t in tokens[1:4])
    except ValueError as exc:
        raise PgmError(f"{path}: non-numeric PGM header field") from exc
    if width < 1 or height < 1:
        raise PgmError(f"{path}: non-positive PGM dimensions {width}x{height}")
    if maxval != 255:
        raise PgmError(f"{path}: maxval must be 255, got {maxval}")
    # Exactly one whitespace byte separates the header from the raster.
    if i >= len(raw) or not raw[i : i + 1].isspace():
        raise PgmError(f"{path}: missing separator before PGM payload")
    return width, height, i + 1


def read_mask_pgm(path) -> BinaryMask:
    """Load a P5 PGM as a mask: a pixel is foreground iff its byte is > 127."""
    raw = Path(path).read_bytes()
    width, height, offset = _parse_pgm_header(raw, path)
    if len(raw) - offset < width * height:
        raise PgmError(f"{path}: truncated PGM payload")
    pixels = np.frombuffer(raw, dtype=np.uint8, count=width * height, offset=offset)
    return BinaryMask(pixels.reshape(height, width) > 127)


def write_map_pgm(m: ActivationMap, path) -> None:
    """Export a map as P5 PGM, quantizing each value as round-half-up of v*255."""
    bytes_ = np.floor(m.values * 255.0 + 0.5).astype(np.uint8)
    header = f"P5\n{m.width} {m.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + bytes_.tobytes(order="C"))


def write_mask_pgm(mask: BinaryMask, path) -> None:
    """Export a mask as P5 PGM with foreground 255, background 0."""
    bytes_ = np.where(mask.bits, np.uint8(255), np.uint8(0))
    header = f"P5\n{mask.width} {mask.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + bytes_.tobytes(order="C"))


def _axis_coords(n_src: int, n_out: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # Align-corners: output corner pixels sample source corners exactly.
    if n_out == 1:
        pos = np.zeros(1)
    else:
        pos = np.arange(n_out, dtype=np.float64) * ((n_src - 1) / (n_out - 1))
    lo = np.floor(pos).astype(np.int64)
    np.clip(lo, 0, max(n_src - 2, 0), out=lo)
    hi = np.minimum(lo + 1, n_src - 1)
    return lo, hi, pos - lo


def resize_bilinear(m: ActivationMap, out_height: int, out_width: int) -> ActivationMap:
    """Bilinear resample with the align-corners convention.

    Constant maps stay exactly constant and output values stay in [0, 1].
    Resampling to the source size reproduces the input exactly.
    """
    if out_height < 1 or out_width < 1:
        raise ValueError(f"target size must be positive, got {out_height}x{out_width}")
    src = m.values
    r0, r1, tr = _axis_coords(src.shape[0], out_height)
    c0, c1, tc = _axis_coords(src.shape[1], out_width)
    a = src[np.ix_(r0, c0)]
    b = src[np.ix_(r0, c1)]
    c = src[np.ix_(r1, c0)]
    d = src[np.ix_(r1, c1)]
    # a + t*(b - a) keeps constants bit-exact, unlike the weighted-sum form.
    top = a + tc[None, :] * (b - a)
    bot = c + tc[None, :] * (d - c)
    out = top + tr[:, None] * (bot - top)
    return ActivationMap(np.clip(out, 0.0, 1.0))
