"""Tile grids and their on-disk format.

A design of extent ``W x H`` micrometers is tessellated into ``l x l``
square tiles, giving a ``w x h`` grid with ``w = ceil(W/l)`` and
``h = ceil(H/l)`` (ceiling division so cells at the die edge always land
in a tile). All per-tile quantities in this package (power maps, IR-drop
maps, argmax-instant maps) are carried by :class:`TileGrid`.

Conventions:

* ``data`` has shape ``(w, h)``; axis 0 runs along x (width), axis 1
  along y (height). Flattening is row-major, i.e. x-major.
* In-memory values are float64. The ``.tgrid`` payload is little-endian
  float32 with a 16-byte header: magic ``b"TGR1"``, ``u32 w``, ``u32 h``,
  ``f32 l``. A grid that came off disk therefore round-trips bit-exactly.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, ValidationError

MAGIC = b"TGR1"
_HEADER = struct.Struct("<4sIIf")


@dataclass(frozen=True)
class TileGrid:
    """A ``w x h`` grid of per-tile values over an ``l``-micrometer tessellation."""

    w: int
    h: int
    l: float
    data: np.ndarray

    @classmethod
    def zeros(cls, w: int, h: int, l: float) -> "TileGrid":
        return cls(w, h, l, np.zeros((w, h), dtype=np.float64))

    @classmethod
    def from_array(cls, data: np.ndarray, l: float) -> "TileGrid":
        arr = np.ascontiguousarray(np.asarray(data, dtype=np.float64))
        if arr.ndim != 2:
            raise ValidationError(f"tile grid must be 2-D, got shape {arr.shape}")
        return cls(arr.shape[0], arr.shape[1], float(l), arr)

    def validate(self) -> None:
        if self.w <= 0 or self.h <= 0:
            raise ValidationError(f"tile counts must be positive, got {self.w}x{self.h}")
        if self.l <= 0:
            raise ValidationError(f"tile size must be positive, got {self.l}")
        if self.data.shape != (self.w, self.h):
            raise ValidationError(
                f"data shape {self.data.shape} does not match declared {self.w}x{self.h}"
            )
        if not np.all(np.isfinite(self.data)):
            raise ValidationError("tile grid contains non-finite entries")

    def same_tessellation(self, other: "TileGrid") -> bool:
        return (self.w, self.h) == (other.w, other.h) and self.l == other.l


def tile_counts(W: float, H: float, l: float) -> tuple[int, int]:
    """Grid dimensions for a ``W x H`` die with tile size ``l`` (ceiling division)."""
    return int(np.ceil(W / l)), int(np.ceil(H / l))


def save_map(grid: TileGrid, path: str | Path) -> None:
    """Write ``grid`` as a ``.tgrid`` binary file.

    Rejects non-finite data. The tile size is stored as float32, so it must
    be exactly representable at that precision (all standard sizes are).
    """
    grid.validate()
    if float(np.float32(grid.l)) != grid.l:
        raise ValidationError(
            f"tile size {grid.l!r} is not exactly representable as float32"
        )
    payload = grid.data.astype("<f4").tobytes(order="C")
    header = _HEADER.pack(MAGIC, grid.w, grid.h, np.float32(grid.l))
    Path(path).write_bytes(header + payload)


def load_map(path: str | Path) -> TileGrid:
    """Read a ``.tgrid`` file back into a :class:`TileGrid` (float64 in memory)."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, w, h, l = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    expected = _HEADER.size + 4 * w * h
    if len(raw) != expected:
        raise FormatError(
            f"{path}: payload size mismatch (header says {w}x{h}, "
            f"expected {expected} bytes, file has {len(raw)})"
        )
    data = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).astype(np.float64)
    grid = TileGrid(int(w), int(h), float(l), data.reshape(w, h))
    grid.validate()
    return grid


def export_csv(grid: TileGrid, path: str | Path) -> None:
    """Human-readable CSV export: one row per x index, columns along y."""
    with open(path, "w") as f:
        f.write(f"# w: {grid.w}\n# h: {grid.h}\n# l: {grid.l!r}\n")
        for x in range(grid.w):
            f.write(",".join(repr(float(v)) for v in grid.data[x]) + "\n")
