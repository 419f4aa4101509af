"""Sparse multi-level voxel feature field.

Each level is a sparse map from integer cell coordinates to a C-dim
parameter vector. Evaluation trilinearly interpolates the 8 cells around
a query position per level and sums across levels; absent cells
contribute zero, so the field is defined everywhere.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass
from typing import Dict, Tuple, Union

import numpy as np

from .errors import (
    BadMagic,
    TruncatedPayload,
    UnsupportedVersion,
    ValidationError,
)

COORD_BITS = 21
COORD_OFFSET = 1 << (COORD_BITS - 1)
COORD_MAX = COORD_OFFSET - 1

FIELD_MAGIC = b"OVFF"
FIELD_VERSION = 1

# Corner order: bit 2 -> +x, bit 1 -> +y, bit 0 -> +z.
_CORNERS = np.array(
    [[dx, dy, dz] for dx in (0, 1) for dy in (0, 1) for dz in (0, 1)], dtype=np.int64
)


def pack_coords(ijk: np.ndarray) -> np.ndarray:
    """Pack (n, 3) integer cell coords into sortable uint64 keys."""
    ijk = np.asarray(ijk, dtype=np.int64)
    if np.abs(ijk).max(initial=0) > COORD_MAX:
        raise ValidationError(f"cell coordinate exceeds +-{COORD_MAX}")
    shifted = (ijk + COORD_OFFSET).astype(np.uint64)
    return (shifted[..., 0] << np.uint64(2 * COORD_BITS)) | (
        shifted[..., 1] << np.uint64(COORD_BITS)
    ) | shifted[..., 2]


def unpack_coords(keys: np.ndarray) -> np.ndarray:
    keys = np.asarray(keys, dtype=np.uint64)
    mask = np.uint64((1 << COORD_BITS) - 1)
    i = (keys >> np.uint64(2 * COORD_BITS)) & mask
    j = (keys >> np.uint64(COORD_BITS)) & mask
    k = keys & mask
    return np.stack([i, j, k], axis=-1).astype(np.int64) - COORD_OFFSET


def corner_keys_weights(
    positions: np.ndarray, origin: np.ndarray, voxel_size: float
) -> Tuple[np.ndarray, np.ndarray]:
    """For (m, 3) positions return the 8 surrounding cell keys (m, 8) and
    their trilinear weights (m, 8). Cells far outside the packable range
    clamp to its edge; nothing is stored there, so they interpolate zero."""
    g = (np.asarray(positions, dtype=np.float64) - origin) / voxel_size
    base = np.floor(g)
    frac = g - base
    base = np.clip(base.astype(np.int64), -COORD_MAX, COORD_MAX - 1)
    corners = base[:, None, :] + _CORNERS[None, :, :]
    keys = pack_coords(corners.reshape(-1, 3)).reshape(-1, 8)
    w = np.ones((g.shape[0], 8), dtype=np.float64)
    for axis in range(3):
        hi = (_CORNERS[:, axis] == 1)[None, :]
        f = frac[:, axis : axis + 1]
        w = w * np.where(hi, f, 1.0 - f)
    return keys, w


@dataclass(frozen=True)
class FieldLevel:
    """One resolution level: sorted packed cell keys plus row-aligned
    float32 parameter vectors."""

    voxel_size: float
    keys: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.voxel_size <= 0:
            raise ValidationError("voxel_size must be positive")
        keys = np.asarray(self.keys, dtype=np.uint64).reshape(-1)
        values = np.asarray(self.values, dtype=np.float32)
        if values.ndim != 2 or values.shape[0] != keys.shape[0]:
            raise ValidationError(f"values {values.shape} do not align with {keys.shape[0]} keys")
        if keys.shape[0]:
            order = np.argsort(keys, kind="stable")
            keys = keys[order]
            values = values[order]
            if (keys[1:] == keys[:-1]).any():
                raise ValidationError("duplicate cell coordinates in level")
            if not np.isfinite(values).all():
                raise ValidationError("cell vectors must be finite")
        object.__setattr__(self, "keys", keys)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_cells(cls, voxel_size: float, cells: Dict[tuple, np.ndarray], dim: int) -> "FieldLevel":
        if cells:
            coords = np.array(list(cells.keys()), dtype=np.int64)
            values = np.array([cells[tuple(c)] for c in coords], dtype=np.float32)
            return cls(voxel_size, pack_coords(coords), values)
        return cls(voxel_size, np.zeros(0, dtype=np.uint64), np.zeros((0, dim), dtype=np.float32))

    @property
    def num_cells(self) -> int:
        return self.keys.shape[0]

    def find_rows(self, query_keys: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Map packed keys to value rows: (row_indices, found_mask)."""
        q = np.asarray(query_keys, dtype=np.uint64)
        pos = np.searchsorted(self.keys, q)
        pos_c = np.minimum(pos, max(self.num_cells - 1, 0))
        found = (
            np.zeros(q.shape, dtype=bool)
            if self.num_cells == 0
            else self.keys[pos_c] == q
        )
        return pos_c, found


@dataclass(frozen=True)
class DistilledField:
    """The trained 3D-only feature field: coarse-to-fine sparse levels over
    the training cloud's bounding box."""

    levels: Tuple[FieldLevel, ...]
    bounds: np.ndarray  # (2, 3): row 0 = min corner, row 1 = max corner
    dim: int

    def __post_init__(self):
        levels = tuple(self.levels)
        if not levels:
            raise ValidationError("field needs at least one level")
        sizes = [lv.voxel_size for lv in levels]
        if any(sizes[i + 1] >= sizes[i] for i in range(len(sizes) - 1)):
            raise ValidationError("voxel sizes must strictly decrease across levels")
        for lv in levels:
            if lv.values.shape[1] != self.dim:
                raise ValidationError("level dim disagrees with field dim")
        bounds = np.asarray(self.bounds, dtype=np.float64).reshape(2, 3)
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "bounds", bounds)

    @property
    def origin(self) -> np.ndarray:
        return self.bounds[0]

    def eval64(self, positions: np.ndarray) -> np.ndarray:
        """Evaluate at (m, 3) positions in float64 (training / gradient path)."""
        pos = np.asarray(positions, dtype=np.float64)
        out = np.zeros((pos.shape[0], self.dim), dtype=np.float64)
        for lv in self.levels:
            keys, w = corner_keys_weights(pos, self.origin, lv.voxel_size)
            rows, found = lv.find_rows(keys.ravel())
            gathered = np.zeros((keys.size, self.dim), dtype=np.float64)
            if lv.num_cells:
                gathered[found] = lv.values[rows[found]].astype(np.float64)
            out += np.einsum(
                "bk,bkc->bc", w, gathered.reshape(pos.shape[0], 8, self.dim)
            )
        return out

    def eval(self, positions: np.ndarray) -> np.ndarray:
        return self.eval64(positions).astype(np.float32)


def field_eval(field: DistilledField, positions: np.ndarray) -> np.ndarray:
    """Per level, trilinear interpolation over the 8 surrounding cells
    (absent cells are zero); levels sum. Returns (m, C) float32."""
    return field.eval(positions)


def save_field(path: Union[str, os.PathLike], field: DistilledField) -> None:
    """Serialize: magic, version, JSON header (dim, bounds, level sizes and
    counts), then per level raw coords (count, 3) int64 and values float32."""
    header = {
        "dim": field.dim,
        "bounds": {"min": field.bounds[0].tolist(), "max": field.bounds[1].tolist()},
        "levels": [
            {"voxel_size": lv.voxel_size, "count": lv.num_cells} for lv in field.levels
        ],
    }
    blob = json.dumps(header).encode("utf-8")
    with open(path, "wb") as f:
        f.write(FIELD_MAGIC)
        f.write(struct.pack("<II", FIELD_VERSION, len(blob)))
        f.write(blob)
        for lv in field.levels:
            f.write(unpack_coords(lv.keys).astype("<i8").tobytes())
            f.write(lv.values.astype("<f4", copy=False).tobytes())


def load_field(path) -> DistilledField:
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < 4 or data[:4] != FIELD_MAGIC:
        raise BadMagic(f"{path}: not a field file")
    if len(data) < 12:
        raise TruncatedPayload(f"{path}: file ends inside the header")
    version, blob_len = struct.unpack_from("<II", data, 4)
    if version != FIELD_VERSION:
        raise UnsupportedVersion(f"{path}: version {version}")
    off = 12
    if off + blob_len > len(data):
        raise TruncatedPayload(f"{path}: file ends inside the JSON header")
    try:
        header = json.loads(data[off : off + blob_len])
    except json.JSONDecodeError as e:
        raise TruncatedPayload(f"{path}: bad JSON header") from e
    off += blob_len
    dim = int(header["dim"])
    levels = []
    for spec in header["levels"]:
        count = int(spec["count"])
        coords_bytes = count * 3 * 8
        values_bytes = count * dim * 4
        if off + coords_bytes + values_bytes > len(data):
            raise TruncatedPayload(f"{path}: level table ends early")
        coords = np.frombuffer(data, dtype="<i8", count=count * 3, offset=off).reshape(count, 3)
        off += coords_bytes
        values = np.frombuffer(data, dtype="<f4", count=count * dim, offset=off).reshape(count, dim)
        off += values_bytes
        keys = pack_coords(coords) if count else np.zeros(0, dtype=np.uint64)
        levels.append(FieldLevel(float(spec["voxel_size"]), keys, values.copy()))
    if off != len(data):
        raise TruncatedPayload(f"{path}: trailing bytes after level tables")
    bounds = np.array([header["bounds"]["min"], header["bounds"]["max"]], dtype=np.float64)
    return DistilledField(levels=tuple(levels), bounds=bounds, dim=dim)
