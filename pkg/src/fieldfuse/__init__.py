"""fieldfuse: open-vocabulary 3D scene query engine.

Fuses posed per-pixel embedding images onto point clouds, distills them
into a 3D-only sparse voxel feature field, ensembles both feature sets
against text prompts, and serves zero-shot segmentation, heatmap, and
retrieval queries.
"""

from . import errors
from .distill import TrainConfig, TrainResult, cosine_loss, grad_check, train
from .embedder import EmbedderSpec, embed, engineer_prompt, toy_embedding
from .featio import (
    load_camera,
    load_feat,
    load_manifest,
    load_ply,
    load_scene,
    load_scene_file,
    save_camera,
    save_feat,
    save_manifest,
    save_ply,
)
from .field import DistilledField, FieldLevel, field_eval, load_field, save_field
from .fusion import FusedFeatureCloud, fuse, majority_vote_labels
from .metrics import LabelMap, confusion, grouped_macc, miou_macc, remap
from .projection import OcclusionConfig, PixelHit, project_point, visible_pairs
from .query import (
    EnsembleResult,
    FeatureSource,
    RetrievalHit,
    SimilarityMatrix,
    dequantize_scores,
    ensemble,
    heatmap,
    quantize_scores,
    retrieve,
    segment,
    similarities,
)
from .scene import (
    Camera,
    FeatureImage,
    ImageEntry,
    PointCloud,
    PromptSet,
    Scene,
    SceneManifest,
)

__version__ = "0.1.0"
