"""Model registry for the exporter.

The stub backends are deterministic hash machines that need no weights:
they exist so the export pipeline and its fixtures run anywhere. Real
backends require their runtimes and local checkpoints; nothing is ever
downloaded here.
"""

from __future__ import annotations

import hashlib
from typing import Optional, Protocol, Sequence

import numpy as np


class ModelUnavailable(RuntimeError):
    pass


class ShapeMismatch(RuntimeError):
    pass


class PixelModel(Protocol):
    dim: int

    def embed_image(self, image_bytes: bytes, width: int, height: int) -> np.ndarray:
        """Return (height, width, dim) float32 per-pixel embeddings."""
        ...


class TextModel(Protocol):
    dim: int

    def embed_texts(self, texts: Sequence[str]) -> np.ndarray:
        """Return (len(texts), dim) float32 embeddings."""
        ...


def _hash_floats(material: bytes, count: int) -> np.ndarray:
    out = np.empty(count, dtype=np.float64)
    produced = 0
    block = 0
    while produced < count:
        digest = hashlib.sha256(material + block.to_bytes(4, "little")).digest()
        take = min((len(digest) // 8), count - produced)
        for i in range(take):
            u = int.from_bytes(digest[i * 8 : i * 8 + 8], "little")
            out[produced] = (u >> 11) * (2.0 ** -52) - 1.0
            produced += 1
        block += 1
    return out


class StubPixelModel:
    """Deterministic per-pixel embeddings derived from the image bytes.

    Pixel (v, u) gets a unit vector seeded by (file digest, v, u), so a
    fixture image yields known output bytes on every platform.
    """

    def __init__(self, dim: int):
        self.dim = dim

    def embed_image(self, image_bytes: bytes, width: int, height: int) -> np.ndarray:
        digest = hashlib.sha256(image_bytes).digest()
        out = np.empty((height, width, self.dim), dtype=np.float32)
        for v in range(height):
            for u in range(width):
                vec = _hash_floats(digest + v.to_bytes(4, "little") + u.to_bytes(4, "little"), self.dim)
                norm = np.linalg.norm(vec)
                out[v, u] = (vec / (norm if norm > 0 else 1.0)).astype(np.float32)
        return out


class StubTextModel:
    def __init__(self, dim: int):
        self.dim = dim

    def embed_texts(self, texts: Sequence[str]) -> np.ndarray:
        rows = []
        for t in texts:
            vec = _hash_floats(hashlib.sha256(t.encode("utf-8")).digest(), self.dim)
            norm = np.linalg.norm(vec)
            rows.append((vec / (norm if norm > 0 else 1.0)).astype(np.float32))
        return np.stack(rows)


class TorchCheckpointModel:
    """Placeholder seam for real encoders (LSeg / OpenSeg / CLIP text).

    Instantiation requires the torch runtime and a local checkpoint path;
    the bridge never fetches weights.
    """

    def __init__(self, name: str, checkpoint: Optional[str], dim: int):
        self.dim = dim
        try:
            import torch  # noqa: F401
        except ImportError as e:
            raise ModelUnavailable(f"{name}: torch runtime not installed") from e
        if not checkpoint:
            raise ModelUnavailable(f"{name}: no local checkpoint provided (downloads are out of scope)")
        import os

        if not os.path.exists(checkpoint):
            raise ModelUnavailable(f"{name}: checkpoint {checkpoint!r} does not exist")
        raise ModelUnavailable(f"{name}: loading real checkpoints is not wired in this environment")


def pixel_model(spec: str, dim: int, checkpoint: Optional[str] = None) -> PixelModel:
    """spec "stub" or a real encoder name; dim is the job's declared C."""
    if spec == "stub":
        return StubPixelModel(dim)
    return TorchCheckpointModel(spec, checkpoint, dim)


def text_model(spec: str, dim: int, checkpoint: Optional[str] = None) -> TextModel:
    if spec == "stub":
        return StubTextModel(dim)
    return TorchCheckpointModel(spec, checkpoint, dim)
