"""Writers for the engine's on-disk formats.

The bridge talks to the engine only through files, so these writers are
self-contained and must stay bit-compatible with the documented contracts:
".feat" tensors (magic OVFT, u32 version 1, u32 ndims, u64 dims, u32 dtype
code 0 = float32, little-endian payload), camera JSON, scene manifest JSON,
and prompt table pairs.
"""

from __future__ import annotations

import json
import os
import struct
from typing import Optional, Sequence

import numpy as np

FEAT_MAGIC = b"OVFT"


def write_feat(path, array: np.ndarray) -> None:
    arr = np.asarray(array, dtype="<f4")
    if not arr.flags.c_contiguous:
        arr = arr.copy(order="C")
    with open(path, "wb") as f:
        f.write(FEAT_MAGIC)
        f.write(struct.pack("<II", 1, arr.ndim))
        f.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        f.write(struct.pack("<I", 0))
        f.write(arr.tobytes())


def write_camera(path, intrinsics, extrinsics, width: int, height: int) -> None:
    doc = {
        "intrinsics": np.asarray(intrinsics, dtype=float).tolist(),
        "extrinsics": np.asarray(extrinsics, dtype=float).tolist(),
        "width": int(width),
        "height": int(height),
    }
    with open(path, "w") as f:
        json.dump(doc, f, indent=1)


def write_manifest(
    path,
    cloud_path: str,
    images: Sequence[dict],
    dataset_mode: str,
    occlusion_sigma_ratio: float,
) -> None:
    doc = {
        "cloud_path": cloud_path,
        "dataset_mode": dataset_mode,
        "occlusion_sigma_ratio": occlusion_sigma_ratio,
        "images": list(images),
    }
    with open(path, "w") as f:
        json.dump(doc, f, indent=1)


def write_table(json_path, prompts: Sequence[str], embeddings: np.ndarray) -> None:
    with open(json_path, "w") as f:
        json.dump({"prompts": list(prompts)}, f, indent=1)
    write_feat(os.path.splitext(str(json_path))[0] + ".feat", embeddings)


def read_camera_dims(path) -> tuple[int, int]:
    with open(path) as f:
        doc = json.load(f)
    return int(doc["width"]), int(doc["height"])


def load_depth(path) -> Optional[np.ndarray]:
    """Accept depth as engine ".feat" or numpy ".npy"."""
    p = str(path)
    if p.endswith(".npy"):
        return np.load(p).astype(np.float32)
    with open(p, "rb") as f:
        data = f.read()
    if data[:4] != FEAT_MAGIC:
        raise ValueError(f"{path}: not a .feat depth map")
    _, ndims = struct.unpack_from("<II", data, 4)
    dims = struct.unpack_from(f"<{ndims}Q", data, 12)
    off = 12 + 8 * ndims + 4
    return np.frombuffer(data, dtype="<f4", offset=off).reshape(dims).copy()
