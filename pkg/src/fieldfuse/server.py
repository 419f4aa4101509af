"""Long-running HTTP/JSON query service over preloaded scenes.

Scenes load once at startup and are immutable afterwards; every response
is a pure function of (loaded scenes, request), so identical requests
produce byte-identical bodies. Scores travel as base64 u8 (the [-1, 1]
range mapped through round((s + 1) * 127.5)), labels as base64 u16
little-endian with 0xFFFF for the unlabeled sentinel.
"""

from __future__ import annotations

import base64
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .embedder import EmbedderSpec, TableEmbedder, embed, engineer_prompt, toy_embedding
from .errors import FieldFuseError, UnknownPrompt, ValidationError, ZeroQuery
from .query import heatmap, quantize_scores, segment
from .scene import PointCloud, PromptSet

LABEL_SENTINEL_U16 = 0xFFFF


@dataclass
class SceneIndex:
    """One served scene: its cloud, the per-point query features (fused or
    ensembled, row-aligned with the cloud), and the embedder that turns
    request text into vectors."""

    scene_id: str
    cloud: PointCloud
    features: np.ndarray
    embedder: EmbedderSpec

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float32)
        if feats.ndim != 2 or feats.shape[0] != self.cloud.num_points:
            raise ValidationError(
                f"features {feats.shape} do not align with {self.cloud.num_points} points"
            )
        self.features = feats
        self._table = (
            TableEmbedder.load(self.embedder.path) if self.embedder.kind == "table" else None
        )

    @property
    def num_points(self) -> int:
        return self.cloud.num_points

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def embed_texts(self, texts: Sequence[str]) -> PromptSet:
        if self._table is not None:
            return PromptSet(prompts=tuple(texts), embeddings=self._table.lookup(texts))
        rows = np.stack([toy_embedding(t, self.embedder.dim, self.embedder.seed) for t in texts])
        return PromptSet(prompts=tuple(texts), embeddings=rows)


class _HttpError(Exception):
    """Carries an explicit HTTP status through to the response layer."""

    def __init__(self, status: int, detail: str):
        super().__init__(detail)
        self.status = status
        self.detail = detail


def _b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def _parse_stride(request: Request) -> int:
    raw = request.query_params.get("stride", "1")
    try:
        stride = int(raw)
    except ValueError:
        raise ValidationError(f"stride must be an integer, got {raw!r}")
    if stride < 1:
        raise ValidationError("stride must be >= 1")
    return stride


def create_app(scenes: Sequence[SceneIndex]) -> FastAPI:
    if not scenes:
        raise ValidationError("the service needs at least one scene")
    index: Dict[str, SceneIndex] = {}
    for s in scenes:
        if s.scene_id in index:
            raise ValidationError(f"duplicate scene id {s.scene_id!r}")
        index[s.scene_id] = s

    app = FastAPI(title="fieldfuse", docs_url=None, redoc_url=None)

    def _scene_or_404(scene_id: str) -> SceneIndex:
        scene = index.get(scene_id)
        if scene is None:
            raise _HttpError(404, f"unknown scene {scene_id!r}")
        return scene

    @app.exception_handler(_HttpError)
    async def _handle_http_error(_req, exc: _HttpError):
        return JSONResponse(status_code=exc.status, content={"detail": exc.detail})

    @app.exception_handler(ZeroQuery)
    async def _handle_zero_query(_req, exc: ZeroQuery):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.exception_handler(FieldFuseError)
    async def _handle_engine_error(_req, exc: FieldFuseError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.get("/v1/scenes")
    async def list_scenes():
        return [
            {"id": s.scene_id, "num_points": s.num_points, "feature_dim": s.feature_dim}
            for s in scenes
        ]

    @app.get("/v1/scenes/{scene_id}/cloud")
    async def get_cloud(scene_id: str, request: Request):
        scene = _scene_or_404(scene_id)
        stride = _parse_stride(request)
        positions = scene.cloud.positions[::stride].astype("<f4")
        return {
            "id": scene.scene_id,
            "num_points": scene.num_points,
            "stride": stride,
            "count": positions.shape[0],
            "positions_b64": _b64(positions.tobytes()),
        }

    async def _json_body(request: Request) -> dict:
        try:
            body = await request.json()
        except Exception:
            raise _HttpError(400, "request body is not valid JSON")
        if not isinstance(body, dict):
            raise _HttpError(400, "request body must be a JSON object")
        return body

    @app.post("/v1/scenes/{scene_id}/query")
    async def post_query(scene_id: str, request: Request):
        scene = _scene_or_404(scene_id)
        stride = _parse_stride(request)
        body = await _json_body(request)
        if ("text" in body) == ("embedding" in body):
            raise _HttpError(400, 'body must carry exactly one of "text" or "embedding"')
        if "text" in body:
            if not isinstance(body["text"], str):
                raise _HttpError(400, '"text" must be a string')
            prompt_set = scene.embed_texts([body["text"]])
            query_vec = prompt_set.embeddings[0]
        else:
            emb = body["embedding"]
            if not isinstance(emb, list) or not all(
                isinstance(x, (int, float)) and not isinstance(x, bool) for x in emb
            ):
                raise _HttpError(400, '"embedding" must be a list of numbers')
            query_vec = np.asarray(emb, dtype=np.float64)
        scores = heatmap(scene.features[::stride], query_vec)
        return {
            "scores_u8": _b64(quantize_scores(scores).tobytes()),
            "min": -1,
            "max": 1,
            "stride": stride,
        }

    @app.post("/v1/scenes/{scene_id}/segment")
    async def post_segment(scene_id: str, request: Request):
        scene = _scene_or_404(scene_id)
        stride = _parse_stride(request)
        body = await _json_body(request)
        labels = body.get("labels")
        if not isinstance(labels, list) or not labels or not all(
            isinstance(x, str) for x in labels
        ):
            raise _HttpError(400, '"labels" must be a non-empty list of strings')
        if len(labels) >= LABEL_SENTINEL_U16:
            raise _HttpError(400, "too many labels for the u16 wire format")
        texts = labels
        if body.get("engineer_prompts", False):
            texts = [engineer_prompt(x) for x in labels]
        prompt_set = scene.embed_texts(texts)
        point_labels, _ = segment(scene.features[::stride], prompt_set)
        wire = point_labels.astype(np.int64)
        wire[wire < 0] = LABEL_SENTINEL_U16
        return {
            "labels_u16": _b64(wire.astype("<u2").tobytes()),
            "legend": labels,
            "stride": stride,
        }

    return app
