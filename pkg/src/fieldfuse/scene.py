"""Domain types for scenes: point clouds, cameras, feature images, prompts.

Every type validates its invariants on construction and is immutable
afterwards, so instances can be shared freely across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import (
    DimMismatch,
    InconsistentFeatureDim,
    InvalidCamera,
    InvalidPointCloud,
    ValidationError,
)

IGNORE_LABEL = -1


@dataclass(frozen=True)
class PointCloud:
    """World-frame points (M, 3) float64, optionally carrying per-point
    region membership and ground-truth labels for evaluation."""

    positions: np.ndarray
    region_id: Optional[np.ndarray] = None
    gt_label: Optional[np.ndarray] = None

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64)
        if pos.ndim != 2 or pos.shape[1] != 3 or pos.shape[0] < 1:
            raise InvalidPointCloud(f"positions must be (M, 3) with M >= 1, got {pos.shape}")
        if not np.isfinite(pos).all():
            raise InvalidPointCloud("positions contain NaN or Inf")
        object.__setattr__(self, "positions", pos)
        for name in ("region_id", "gt_label"):
            arr = getattr(self, name)
            if arr is None:
                continue
            arr = np.asarray(arr, dtype=np.int64).reshape(-1)
            if arr.shape[0] != pos.shape[0]:
                raise InvalidPointCloud(f"{name} has {arr.shape[0]} entries for {pos.shape[0]} points")
            object.__setattr__(self, name, arr)

    @property
    def num_points(self) -> int:
        return self.positions.shape[0]


@dataclass(frozen=True)
class Camera:
    """Pinhole camera: 3x3 intrinsics, 4x4 world-to-camera extrinsics."""

    intrinsics: np.ndarray
    extrinsics: np.ndarray
    width: int
    height: int

    ROTATION_TOL = 1e-6

    def __post_init__(self):
        K = np.asarray(self.intrinsics, dtype=np.float64)
        E = np.asarray(self.extrinsics, dtype=np.float64)
        if K.shape != (3, 3):
            raise InvalidCamera(f"intrinsics must be 3x3, got {K.shape}")
        if E.shape != (4, 4):
            raise InvalidCamera(f"extrinsics must be 4x4, got {E.shape}")
        if not (np.isfinite(K).all() and np.isfinite(E).all()):
            raise InvalidCamera("camera matrices contain NaN or Inf")
        if K[0, 0] <= 0 or K[1, 1] <= 0:
            raise InvalidCamera(f"focal lengths must be positive, got fx={K[0, 0]}, fy={K[1, 1]}")
        R = E[:3, :3]
        if np.abs(R @ R.T - np.eye(3)).max() > self.ROTATION_TOL:
            raise InvalidCamera("extrinsics rotation block is not orthonormal")
        if np.abs(E[3] - np.array([0.0, 0.0, 0.0, 1.0])).max() > 0:
            raise InvalidCamera("extrinsics bottom row must be (0, 0, 0, 1)")
        if int(self.width) < 1 or int(self.height) < 1:
            raise InvalidCamera("width and height must be positive")
        object.__setattr__(self, "intrinsics", K)
        object.__setattr__(self, "extrinsics", E)
        object.__setattr__(self, "width", int(self.width))
        object.__setattr__(self, "height", int(self.height))

    @property
    def fx(self) -> float:
        return float(self.intrinsics[0, 0])

    @property
    def fy(self) -> float:
        return float(self.intrinsics[1, 1])

    @property
    def cx(self) -> float:
        return float(self.intrinsics[0, 2])

    @property
    def cy(self) -> float:
        return float(self.intrinsics[1, 2])


@dataclass(frozen=True)
class FeatureImage:
    """Per-pixel embedding map (H, W, C) float32 with its camera and an
    optional depth map in meters (0 or NaN marks invalid depth)."""

    features: np.ndarray
    camera: Camera
    depth: Optional[np.ndarray] = None

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float32)
        if feats.ndim != 3 or feats.shape[2] < 1:
            raise ValidationError(f"features must be (H, W, C), got {feats.shape}")
        h, w, _ = feats.shape
        if h != self.camera.height or w != self.camera.width:
            raise ValidationError(
                f"feature map is {h}x{w} but camera says {self.camera.height}x{self.camera.width}"
            )
        object.__setattr__(self, "features", feats)
        if self.depth is not None:
            depth = np.asarray(self.depth, dtype=np.float32)
            if depth.shape != (h, w):
                raise ValidationError(f"depth map is {depth.shape}, expected {(h, w)}")
            finite = np.isfinite(depth)
            if (depth[finite] < 0).any():
                raise ValidationError("depth map contains negative entries")
            object.__setattr__(self, "depth", depth)

    @property
    def feature_dim(self) -> int:
        return self.features.shape[2]


@dataclass(frozen=True)
class PromptSet:
    """Ordered query strings with row-aligned embeddings (N, C) float32."""

    prompts: tuple
    embeddings: np.ndarray

    def __post_init__(self):
        prompts = tuple(self.prompts)
        if len(prompts) < 1:
            raise ValidationError("prompt set must contain at least one prompt")
        if any(not isinstance(p, str) or p == "" for p in prompts):
            raise ValidationError("prompts must be non-empty strings")
        emb = np.asarray(self.embeddings, dtype=np.float32)
        if emb.ndim != 2 or emb.shape[0] != len(prompts):
            raise DimMismatch(
                f"embeddings must be ({len(prompts)}, C), got {emb.shape}"
            )
        norms = np.linalg.norm(emb.astype(np.float64), axis=1)
        if (norms == 0).any():
            raise ValidationError("prompt embeddings must be nonzero")
        object.__setattr__(self, "prompts", prompts)
        object.__setattr__(self, "embeddings", emb)

    def __len__(self) -> int:
        return len(self.prompts)

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]


@dataclass(frozen=True)
class ImageEntry:
    feature_path: str
    camera_path: str
    depth_path: Optional[str] = None


@dataclass(frozen=True)
class SceneManifest:
    """Recipe for assembling a scene from files on disk.

    ``dataset_mode`` is "with-depth" (every image must carry a depth map,
    occlusion testing available) or "no-depth" (Lidar-style capture, every
    in-bounds front-facing projection pairs).
    """

    cloud_path: str
    images: Sequence[ImageEntry]
    dataset_mode: str = "with-depth"
    occlusion_sigma_ratio: float = 0.2

    def __post_init__(self):
        from .errors import BadManifest, MissingDepth

        if self.dataset_mode not in ("with-depth", "no-depth"):
            raise BadManifest(f"unknown dataset_mode {self.dataset_mode!r}")
        if self.occlusion_sigma_ratio < 0:
            raise BadManifest("occlusion_sigma_ratio must be non-negative")
        images = tuple(self.images)
        if self.dataset_mode == "with-depth":
            for entry in images:
                if entry.depth_path is None:
                    raise MissingDepth(
                        f"dataset_mode=with-depth but image {entry.feature_path!r} has no depth_path"
                    )
        object.__setattr__(self, "images", images)


@dataclass(frozen=True)
class Scene:
    """A validated point cloud plus its posed feature images."""

    cloud: PointCloud
    images: tuple = field(default_factory=tuple)

    def __post_init__(self):
        images = tuple(self.images)
        dims = {img.feature_dim for img in images}
        if len(dims) > 1:
            raise InconsistentFeatureDim(f"feature dims differ across images: {sorted(dims)}")
        object.__setattr__(self, "images", images)

    @property
    def feature_dim(self) -> int:
        if not self.images:
            raise ValidationError("scene has no images")
        return self.images[0].feature_dim
