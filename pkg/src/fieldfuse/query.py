"""The inference core: prompt similarities, 2D/3D feature ensembling,
zero-shot segmentation, heatmaps, and one-match-per-region retrieval.

All similarity math runs in float64 on whatever float dtype the caller
holds, so cosine's exact scale invariance carries through to outputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import List, Optional, Tuple

import numpy as np

from .errors import DimMismatch, NoRegions, ValidationError, ZeroQuery
from .field import DistilledField
from .fusion import FusedFeatureCloud
from .scene import IGNORE_LABEL, PointCloud, PromptSet

ENSEMBLE_TIE_TOL = 1e-12


class FeatureSource(IntEnum):
    FROM_2D = 0
    FROM_3D = 1
    NONE = 2


@dataclass(frozen=True)
class SimilarityMatrix:
    """Cosines of every (feature row, prompt) pair; all-zero feature rows
    score 0 by convention and are flagged."""

    scores: np.ndarray
    zero_rows: np.ndarray


@dataclass(frozen=True)
class EnsembleResult:
    features: np.ndarray  # (M, C) float32, the winning feature per point
    source: np.ndarray  # (M,) FeatureSource codes
    ensemble_score: np.ndarray  # (M,) float64; -inf where source is NONE


@dataclass(frozen=True)
class RetrievalHit:
    region_id: int
    point_index: int
    score: float


def _as_rows(features: np.ndarray) -> np.ndarray:
    f = np.asarray(features, dtype=np.float64)
    if f.ndim != 2:
        raise DimMismatch(f"features must be 2-D, got shape {f.shape}")
    return f


def _unit_prompts(prompts: PromptSet, dim: int) -> np.ndarray:
    t = prompts.embeddings.astype(np.float64)
    if t.shape[1] != dim:
        raise DimMismatch(f"feature dim {dim} != prompt dim {t.shape[1]}")
    return t / np.linalg.norm(t, axis=1, keepdims=True)


def similarities(features: np.ndarray, prompts: PromptSet) -> SimilarityMatrix:
    """scores[i, n] = cos(feature_i, prompt_n); zero feature rows yield 0."""
    f = _as_rows(features)
    t_unit = _unit_prompts(prompts, f.shape[1])
    norms = np.linalg.norm(f, axis=1)
    zero_rows = norms == 0
    safe = np.where(zero_rows, 1.0, norms)
    scores = (f @ t_unit.T) / safe[:, None]
    scores[zero_rows] = 0.0
    return SimilarityMatrix(scores=scores, zero_rows=zero_rows)


def max_prompt_similarity(features: np.ndarray, prompts: PromptSet) -> np.ndarray:
    """Per row: max cosine over the prompt set, -inf for all-zero rows."""
    sim = similarities(features, prompts)
    best = sim.scores.max(axis=1)
    best[sim.zero_rows] = -np.inf
    return best


def ensemble(
    fused: FusedFeatureCloud,
    field: DistilledField,
    cloud: PointCloud,
    prompts: PromptSet,
) -> EnsembleResult:
    """Pick, per point, the fused 2D feature or the distilled 3D feature,
    whichever scores a higher max similarity against the prompt set.

    Unseen points (view_count 0) and points where the field evaluates to
    zero score -inf on that side; exact ties go to 3D. Points absent on
    both sides come out as source NONE with a zero feature.
    """
    if fused.num_points != cloud.num_points:
        raise ValidationError("fused cloud and point cloud sizes differ")
    f2d = fused.features
    f3d = field.eval(cloud.positions)
    if f3d.shape[1] != f2d.shape[1]:
        raise DimMismatch(f"field dim {f3d.shape[1]} != fused dim {f2d.shape[1]}")

    s2d = max_prompt_similarity(f2d, prompts)
    s2d[fused.view_count == 0] = -np.inf
    s3d = max_prompt_similarity(f3d, prompts)

    none = np.isneginf(s2d) & np.isneginf(s3d)
    with np.errstate(invalid="ignore"):
        tie = np.abs(s2d - s3d) <= ENSEMBLE_TIE_TOL  # inf-inf -> nan -> False
    use3d = ((s3d > s2d) | tie) & ~none

    features = np.where(use3d[:, None], f3d, f2d).astype(np.float32)
    features[none] = 0.0
    source = np.full(cloud.num_points, FeatureSource.FROM_2D, dtype=np.int8)
    source[use3d] = FeatureSource.FROM_3D
    source[none] = FeatureSource.NONE
    score = np.maximum(s2d, s3d)
    score[none] = -np.inf
    return EnsembleResult(features=features, source=source, ensemble_score=score)


def segment(features: np.ndarray, prompts: PromptSet) -> Tuple[np.ndarray, np.ndarray]:
    """Zero-shot segmentation: label = argmax prompt cosine per point (ties
    to the lowest prompt index), confidence = the winning cosine as
    float32. All-zero feature rows get label -1, confidence 0."""
    sim = similarities(features, prompts)
    labels = sim.scores.argmax(axis=1).astype(np.int64)
    confidence = sim.scores[np.arange(sim.scores.shape[0]), labels].astype(np.float32)
    labels[sim.zero_rows] = IGNORE_LABEL
    confidence[sim.zero_rows] = 0.0
    return labels, confidence


def _unit_query(query_embedding: np.ndarray, dim: int) -> np.ndarray:
    q = np.asarray(query_embedding, dtype=np.float64).reshape(-1)
    if q.shape[0] != dim:
        raise DimMismatch(f"query dim {q.shape[0]} != feature dim {dim}")
    if not np.isfinite(q).all():
        raise ZeroQuery("query embedding must be finite")
    norm = np.linalg.norm(q)
    if norm == 0:
        raise ZeroQuery("query embedding is all zeros")
    return q / norm


def heatmap(features: np.ndarray, query_embedding: np.ndarray) -> np.ndarray:
    """Per-point cosine to one query vector (text or image embedding alike);
    all-zero feature rows score 0."""
    f = _as_rows(features)
    q = _unit_query(query_embedding, f.shape[1])
    norms = np.linalg.norm(f, axis=1)
    zero_rows = norms == 0
    safe = np.where(zero_rows, 1.0, norms)
    scores = (f @ q) / safe
    scores[zero_rows] = 0.0
    return scores


def retrieve(
    features: np.ndarray,
    regions: Optional[np.ndarray],
    query_embedding: np.ndarray,
    top_k: int,
) -> List[RetrievalHit]:
    """Ranked object search: per region keep only its best-scoring point,
    order regions by that score descending, return the first top_k.

    Ties order by lowest region id, then lowest point index.
    """
    if top_k < 1:
        raise ValidationError("top_k must be >= 1")
    if regions is None:
        raise NoRegions("retrieval needs per-point region ids")
    regions = np.asarray(regions, dtype=np.int64).reshape(-1)
    f = _as_rows(features)
    if regions.shape[0] != f.shape[0]:
        raise ValidationError("regions must align with features")
    scores = heatmap(f, query_embedding)

    hits = []
    for region in np.unique(regions):
        idx = np.nonzero(regions == region)[0]
        best = idx[int(np.argmax(scores[idx]))]  # first max = lowest point index
        hits.append(RetrievalHit(int(region), int(best), float(scores[best])))
    hits.sort(key=lambda h: (-h.score, h.region_id, h.point_index))
    return hits[:top_k]


def quantize_scores(scores: np.ndarray) -> np.ndarray:
    """Map cosines in [-1, 1] to u8 via round((s + 1) * 127.5), half-up."""
    s = np.clip(np.asarray(scores, dtype=np.float64), -1.0, 1.0)
    return np.floor((s + 1.0) * 127.5 + 0.5).clip(0, 255).astype(np.uint8)


def dequantize_scores(levels: np.ndarray) -> np.ndarray:
    """Inverse of quantize_scores up to the half-step bound of 1/255."""
    return np.asarray(levels, dtype=np.float64) / 127.5 - 1.0
