"""Pinhole 2D-3D pairing with depth-based occlusion testing.

Continuous pixel coordinates round to the nearest pixel with half-up
rounding; a coordinate exactly at -0.5 or W-0.5 is out of bounds. Feature
lookups always use the nearest pixel, never interpolation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .errors import MissingDepth
from .scene import Camera, FeatureImage, PointCloud


@dataclass(frozen=True)
class PixelHit:
    """A visible (point, pixel) pair: integer pixel coords plus the point's
    camera-frame z distance in meters."""

    image_index: int
    u: int
    v: int
    cam_distance: float


@dataclass(frozen=True)
class OcclusionConfig:
    """sigma_ratio scales the measured depth D into the acceptance band
    |cam_distance - D| <= sigma_ratio * D. Disabled means every in-bounds,
    front-facing projection pairs (Lidar-style captures without depth)."""

    sigma_ratio: float = 0.2
    enabled: bool = True

    def __post_init__(self):
        if self.sigma_ratio < 0:
            raise ValueError("sigma_ratio must be non-negative")


def project_point(p, camera: Camera) -> Optional[Tuple[float, float, float]]:
    """Project one world point; returns (u, v, z_cam) or None if the point
    lies behind the camera (z_cam <= 0). Coordinates are continuous."""
    u, v, z, _ = project_points(np.asarray(p, dtype=np.float64).reshape(1, 3), camera)
    if not z[0] > 0:
        return None
    return float(u[0]), float(v[0]), float(z[0])


def project_points(positions: np.ndarray, camera: Camera):
    """Vectorized projection of (M, 3) world points.

    Returns (u, v, z_cam, in_front) where u, v are continuous pixel
    coordinates (valid only where in_front) and z_cam is camera-frame depth.
    """
    pos = np.asarray(positions, dtype=np.float64)
    E = camera.extrinsics
    cam = pos @ E[:3, :3].T + E[:3, 3]
    z = cam[:, 2]
    in_front = z > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        u = camera.fx * cam[:, 0] / z + camera.cx
        v = camera.fy * cam[:, 1] / z + camera.cy
    return u, v, z, in_front


def round_half_up(x: np.ndarray) -> np.ndarray:
    return np.floor(x + 0.5)


def pixel_hits_arrays(
    cloud: PointCloud, image: FeatureImage, occ: OcclusionConfig
):
    """Array form of visible_pairs: (point_indices, u, v, z_cam), each 1-D
    and sorted by point index. Used by fusion to avoid per-hit objects."""
    if occ.enabled and image.depth is None:
        raise MissingDepth("occlusion test requested but the image has no depth map")
    camera = image.camera
    u, v, z, in_front = project_points(cloud.positions, camera)
    ui = round_half_up(u)
    vi = round_half_up(v)
    ok = (
        in_front
        & (u > -0.5)
        & (v > -0.5)
        & (ui < camera.width)
        & (vi < camera.height)
    )
    if occ.enabled:
        idx = np.nonzero(ok)[0]
        uu = ui[idx].astype(np.intp)
        vv = vi[idx].astype(np.intp)
        d = image.depth[vv, uu].astype(np.float64)
        valid = np.isfinite(d) & (d > 0)
        keep = valid & (np.abs(z[idx] - d) <= occ.sigma_ratio * d)
        idx = idx[keep]
    else:
        idx = np.nonzero(ok)[0]
    return idx, ui[idx].astype(np.int64), vi[idx].astype(np.int64), z[idx]


def visible_pairs(
    cloud: PointCloud,
    image: FeatureImage,
    occ: OcclusionConfig,
    image_index: int = 0,
) -> List[Tuple[int, PixelHit]]:
    """All visible (point, pixel) pairs for one posed image.

    A pair is included when the projection rounds to an in-bounds pixel,
    the point is in front of the camera, and (with occlusion enabled) the
    pixel's depth D is valid and |cam_distance - D| <= sigma_ratio * D.
    Results are sorted by point index.
    """
    idx, uu, vv, zz = pixel_hits_arrays(cloud, image, occ)
    return [
        (int(i), PixelHit(image_index=image_index, u=int(u), v=int(v), cam_distance=float(z)))
        for i, u, v, z in zip(idx, uu, vv, zz)
    ]
