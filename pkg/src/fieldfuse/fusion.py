"""Multi-view feature pooling: one embedding per 3D point from all the
pixels that see it, plus the per-view label voting baseline.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Sequence

import numpy as np

from .errors import ValidationError
from .projection import OcclusionConfig, pixel_hits_arrays
from .scene import IGNORE_LABEL, Scene

POOL_MODES = ("average", "random", "median")


@dataclass(frozen=True)
class FusedFeatureCloud:
    """Per-point pooled features (M, C) float32 with view counts (M,).

    Points seen by zero views carry an all-zero feature row; every row
    with at least one view is finite.
    """

    features: np.ndarray
    view_count: np.ndarray

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float32)
        counts = np.asarray(self.view_count, dtype=np.int64).reshape(-1)
        if feats.ndim != 2 or feats.shape[0] != counts.shape[0]:
            raise ValidationError(
                f"features {feats.shape} and view_count {counts.shape} disagree"
            )
        if (counts < 0).any():
            raise ValidationError("view counts must be non-negative")
        zero_rows = ~feats.any(axis=1)
        if (zero_rows != (counts == 0)).any():
            raise ValidationError("zero feature rows must match view_count == 0 exactly")
        seen = feats[counts > 0]
        if seen.size and not np.isfinite(seen).all():
            raise ValidationError("fused features of seen points must be finite")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "view_count", counts)

    @property
    def num_points(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


def fuse(
    scene: Scene,
    occ: OcclusionConfig,
    pool: str = "average",
    seed: int = 0,
) -> FusedFeatureCloud:
    """Pool per-pixel features across all views onto the scene's points.

    pool="average": arithmetic mean of the member features (64-bit
    accumulation, stored back as float32).
    pool="random": uniformly pick one member per point, deterministic for
    a given seed; members are ordered by image index.
    pool="median": the member minimizing summed Euclidean distance to all
    other members, ties broken by lowest image index.
    """
    if pool not in POOL_MODES:
        raise ValidationError(f"unknown pool mode {pool!r}; expected one of {POOL_MODES}")
    m = scene.cloud.num_points
    c = scene.feature_dim

    # One pass to gather hits per image; a point hits an image at most once,
    # so per-image scatters never collide.
    hits = []
    counts = np.zeros(m, dtype=np.int64)
    for image in scene.images:
        idx, uu, vv, _ = pixel_hits_arrays(scene.cloud, image, occ)
        hits.append((idx, image.features[vv, uu]))
        counts[idx] += 1

    out = np.zeros((m, c), dtype=np.float32)
    if pool == "average":
        acc = np.zeros((m, c), dtype=np.float64)
        for idx, feats in hits:
            acc[idx] += feats
        seen = counts > 0
        out[seen] = (acc[seen] / counts[seen, None]).astype(np.float32)
    elif pool == "random":
        rng = np.random.default_rng(seed)
        r = rng.random(m)
        choice = np.minimum((r * counts).astype(np.int64), np.maximum(counts - 1, 0))
        cursor = np.zeros(m, dtype=np.int64)
        for idx, feats in hits:
            take = cursor[idx] == choice[idx]
            out[idx[take]] = feats[take]
            cursor[idx] += 1
    else:
        out = _median_pool(m, c, hits)

    return FusedFeatureCloud(features=out, view_count=counts)


def _median_pool(m: int, c: int, hits) -> np.ndarray:
    """Per point, pick the member feature with the smallest summed Euclidean
    distance to the other members (the geometric medoid of the view set)."""
    if hits:
        all_idx = np.concatenate([h[0] for h in hits])
        all_feat = np.concatenate([h[1] for h in hits], axis=0)
    else:
        all_idx = np.zeros(0, dtype=np.int64)
        all_feat = np.zeros((0, c), dtype=np.float32)
    out = np.zeros((m, c), dtype=np.float32)
    order = np.argsort(all_idx, kind="stable")  # keeps image order within a point
    all_idx = all_idx[order]
    all_feat = all_feat[order]
    starts = np.searchsorted(all_idx, np.arange(m), side="left")
    ends = np.searchsorted(all_idx, np.arange(m), side="right")
    for p in range(m):
        s, e = starts[p], ends[p]
        if s == e:
            continue
        group = all_feat[s:e].astype(np.float64)
        if e - s == 1:
            out[p] = all_feat[s]
            continue
        diff = group[:, None, :] - group[None, :, :]
        dist = np.sqrt((diff * diff).sum(axis=2))
        out[p] = all_feat[s + int(np.argmin(dist.sum(axis=1)))]
    return out


def majority_vote_labels(
    per_view_labels: Sequence[Dict[int, int]], num_points: int
) -> np.ndarray:
    """Per-view label voting baseline: each point takes the label seen in
    the most views, ties broken by lowest label id, unseen points get -1."""
    if len(per_view_labels) < 1:
        raise ValidationError("need at least one view of labels")
    tallies: List[Dict[int, int]] = [dict() for _ in range(num_points)]
    for view in per_view_labels:
        for point, label in view.items():
            label = int(label)
            if label < 0:
                raise ValidationError(f"labels must be non-negative, got {label}")
            if not 0 <= point < num_points:
                raise ValidationError(f"point index {point} out of range")
            t = tallies[point]
            t[label] = t.get(label, 0) + 1
    out = np.full(num_points, IGNORE_LABEL, dtype=np.int64)
    for p, t in enumerate(tallies):
        if t:
            out[p] = min(t.items(), key=lambda kv: (-kv[1], kv[0]))[0]
    return out
