"""Export jobs: run an encoder over posed images and write everything the
engine needs (feature images, cameras, depth, manifest, prompt tables) in
its documented formats.
"""

from __future__ import annotations

import os
import shutil
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from . import formats
from .models import PixelModel, ShapeMismatch, TextModel


@dataclass(frozen=True)
class ImageInput:
    image_path: str
    camera_path: str  # engine camera JSON
    depth_path: Optional[str] = None  # .feat or .npy


@dataclass(frozen=True)
class ExportJob:
    inputs: Sequence[ImageInput]
    model_spec: str
    out_dir: str
    feature_dim: int
    cloud_path: str = "cloud.ply"
    occlusion_sigma_ratio: float = 0.2
    checkpoint: Optional[str] = None
    extra: dict = field(default_factory=dict)


def export_pixel_features(job: ExportJob, model: Optional[PixelModel] = None) -> str:
    """Run the encoder over every input image and write the scene files.

    Returns the manifest path. Raises ShapeMismatch when the model's output
    disagrees with the job's declared feature dim or the camera's size.
    """
    if model is None:
        from .models import pixel_model

        model = pixel_model(job.model_spec, job.feature_dim, job.checkpoint)
    os.makedirs(job.out_dir, exist_ok=True)
    entries: List[dict] = []
    mode = "with-depth" if all(i.depth_path for i in job.inputs) else "no-depth"
    for k, item in enumerate(job.inputs):
        width, height = formats.read_camera_dims(item.camera_path)
        with open(item.image_path, "rb") as f:
            image_bytes = f.read()
        feats = np.asarray(model.embed_image(image_bytes, width, height))
        if feats.shape != (height, width, job.feature_dim):
            raise ShapeMismatch(
                f"{item.image_path}: model produced {feats.shape}, "
                f"declared ({height}, {width}, {job.feature_dim})"
            )
        feat_name = f"img{k:04d}.feat"
        cam_name = f"cam{k:04d}.json"
        formats.write_feat(os.path.join(job.out_dir, feat_name), feats.astype(np.float32))
        shutil.copyfile(item.camera_path, os.path.join(job.out_dir, cam_name))
        entry = {"feature_path": feat_name, "camera_path": cam_name}
        if item.depth_path:
            depth = formats.load_depth(item.depth_path)
            if depth.shape != (height, width):
                raise ShapeMismatch(
                    f"{item.depth_path}: depth {depth.shape} does not match ({height}, {width})"
                )
            depth_name = f"depth{k:04d}.feat"
            formats.write_feat(os.path.join(job.out_dir, depth_name), depth)
            entry["depth_path"] = depth_name
        entries.append(entry)
    manifest_path = os.path.join(job.out_dir, "scene.json")
    formats.write_manifest(
        manifest_path, job.cloud_path, entries, mode, job.occlusion_sigma_ratio
    )
    return manifest_path


def export_text_table(
    texts: Sequence[str],
    model: TextModel,
    json_path: str,
    declared_dim: Optional[int] = None,
) -> None:
    """Embed texts and write a table pair the engine's registry can load."""
    emb = np.asarray(model.embed_texts(list(texts)), dtype=np.float32)
    if emb.ndim != 2 or emb.shape[0] != len(texts):
        raise ShapeMismatch(f"model produced {emb.shape} for {len(texts)} texts")
    if declared_dim is not None and emb.shape[1] != declared_dim:
        raise ShapeMismatch(f"model dim {emb.shape[1]} != declared {declared_dim}")
    formats.write_table(json_path, texts, emb)
