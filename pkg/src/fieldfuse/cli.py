"""Command-line front door.

Exit codes: 0 success, 1 validation / usage error, 2 IO error. All
randomness is controlled by --seed (default 0).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import List, Optional

import numpy as np

from . import featio
from .distill import TrainConfig, train
from .embedder import EmbedderSpec, embed, engineer_prompt, save_table
from .errors import FieldFuseError, ValidationError
from .field import load_field, save_field
from .fusion import FusedFeatureCloud, fuse
from .metrics import confusion, grouped_macc, load_label_map, miou_macc, remap
from .projection import OcclusionConfig
from .query import ensemble, heatmap, retrieve, segment
from .scene import IGNORE_LABEL

DEFAULT_PORT = 8080


class _UsageError(Exception):
    def __init__(self, parser: argparse.ArgumentParser, message: str):
        super().__init__(message)
        self.parser = parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(self, message)


def _counts_path(features_path: str) -> str:
    stem, _ = os.path.splitext(features_path)
    return stem + ".views.feat"


def _load_fused(features_path: str, counts_path: Optional[str]) -> FusedFeatureCloud:
    counts_path = counts_path or _counts_path(features_path)
    feats = featio.load_feat(features_path)
    counts = featio.load_feat(counts_path).reshape(-1)
    return FusedFeatureCloud(features=feats, view_count=np.rint(counts).astype(np.int64))


def _read_labels_file(path: str) -> List[str]:
    with open(path) as f:
        labels = [line.strip() for line in f if line.strip()]
    if not labels:
        raise ValidationError(f"{path}: no labels")
    return labels


def _prompt_set(args, labels: List[str]):
    texts = [engineer_prompt(x) for x in labels] if args.engineer_prompts else labels
    return embed(EmbedderSpec.parse(args.embedder), texts)


def _occlusion_from_manifest(manifest) -> OcclusionConfig:
    enabled = manifest.dataset_mode == "with-depth"
    return OcclusionConfig(sigma_ratio=manifest.occlusion_sigma_ratio, enabled=enabled)


def _cmd_fuse(args) -> int:
    manifest = featio.load_manifest(args.scene)
    scene = featio.load_scene(manifest, base_dir=os.path.dirname(os.path.abspath(args.scene)))
    fused = fuse(scene, _occlusion_from_manifest(manifest), pool=args.pool, seed=args.seed)
    featio.save_feat(args.out, fused.features)
    featio.save_feat(args.out_counts or _counts_path(args.out), fused.view_count.reshape(-1, 1))
    return 0


def _cmd_distill(args) -> int:
    cloud = featio.load_ply(args.cloud)
    fused = _load_fused(args.fused, args.counts)
    cfg = TrainConfig(
        levels=args.levels,
        base_voxel=args.base_voxel,
        iters=args.iters,
        batch_points=args.batch_points,
        learning_rate=args.lr,
        seed=args.seed,
    )
    result = train(cloud, fused, cfg)
    save_field(args.out, result.field)
    if result.batch_loss.size:
        print(
            json.dumps(
                {
                    "iters": int(result.batch_loss.size),
                    "first_loss": float(result.batch_loss[0]),
                    "last_loss": float(result.batch_loss[-1]),
                }
            )
        )
    return 0


def _cmd_ensemble(args) -> int:
    cloud = featio.load_ply(args.cloud)
    fused = _load_fused(args.fused, args.counts)
    field = load_field(args.field)
    prompts = _prompt_set(args, _read_labels_file(args.labels))
    result = ensemble(fused, field, cloud, prompts)
    featio.save_feat(args.out, result.features)
    if args.out_source:
        featio.save_feat(args.out_source, result.source.reshape(-1, 1))
    return 0


def _cmd_segment(args) -> int:
    features = featio.load_feat(args.features)
    prompts = _prompt_set(args, _read_labels_file(args.labels))
    labels, confidence = segment(features, prompts)
    featio.save_feat(args.out, labels.reshape(-1, 1))
    if args.out_confidence:
        featio.save_feat(args.out_confidence, confidence.reshape(-1, 1))
    return 0


def _cmd_query(args) -> int:
    features = featio.load_feat(args.features)
    if (args.text is None) == (args.embedding is None):
        raise ValidationError("pass exactly one of --text or --embedding")
    if args.text is not None:
        vec = embed(EmbedderSpec.parse(args.embedder), [args.text]).embeddings[0]
    else:
        vec = featio.load_feat(args.embedding).reshape(-1)
    scores = heatmap(features, vec)
    featio.save_feat(args.out, scores.reshape(-1, 1))
    return 0


def _cmd_retrieve(args) -> int:
    features = featio.load_feat(args.features)
    cloud = featio.load_ply(args.cloud)
    vec = embed(EmbedderSpec.parse(args.embedder), [args.text]).embeddings[0]
    hits = retrieve(features, cloud.region_id, vec, args.top_k)
    print(
        json.dumps(
            [
                {"region_id": h.region_id, "point_index": h.point_index, "score": h.score}
                for h in hits
            ]
        )
    )
    return 0


def _load_labels_array(path: str) -> np.ndarray:
    if path.endswith(".ply"):
        cloud = featio.load_ply(path)
        if cloud.gt_label is None:
            raise ValidationError(f"{path}: PLY has no gt_label property")
        return cloud.gt_label
    return np.rint(featio.load_feat(path).reshape(-1)).astype(np.int64)


def _cmd_eval(args) -> int:
    gt = _load_labels_array(args.gt)
    pred = _load_labels_array(args.pred)
    if args.labelmap:
        label_map = load_label_map(args.labelmap)
        pred = remap(pred, label_map)
        num_classes = label_map.num_targets
    else:
        num_classes = args.num_classes or int(max(gt.max(), pred.max())) + 1
    conf = confusion(gt, pred, num_classes)
    miou, macc, iou, acc = miou_macc(conf)
    doc = {
        "num_classes": num_classes,
        "miou": miou,
        "macc": macc,
        "per_class_iou": [None if np.isnan(x) else float(x) for x in iou],
        "per_class_acc": [None if np.isnan(x) else float(x) for x in acc],
    }
    if args.group_size:
        freqs = conf.sum(axis=1)
        groups = grouped_macc(conf, freqs, args.group_size)
        doc["grouped_macc"] = [None if np.isnan(x) else float(x) for x in groups]
    print(json.dumps(doc))
    return 0


def _cmd_embed(args) -> int:
    texts = list(args.texts)
    if args.engineer_prompts:
        texts = [engineer_prompt(t) for t in texts]
    prompt_set = embed(EmbedderSpec.parse(args.embedder), texts)
    if args.out:
        save_table(args.out, prompt_set.prompts, prompt_set.embeddings)
    else:
        print(
            json.dumps(
                {
                    "prompts": list(prompt_set.prompts),
                    "dim": prompt_set.dim,
                    "embeddings": prompt_set.embeddings.tolist(),
                }
            )
        )
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .server import SceneIndex, create_app

    spec = EmbedderSpec.parse(args.embedder)
    scenes = []
    for scene_id, cloud_path, features_path in args.scene:
        scenes.append(
            SceneIndex(
                scene_id=scene_id,
                cloud=featio.load_ply(cloud_path),
                features=featio.load_feat(features_path),
                embedder=spec,
            )
        )
    app = create_app(scenes)
    port = args.port if args.port is not None else int(os.environ.get("FIELDFUSE_PORT", DEFAULT_PORT))
    uvicorn.run(app, host=args.host, port=port, log_level="warning")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="fieldfuse", description="open-vocabulary 3D scene query engine")
    parser.add_argument("--seed", type=int, default=0, help="seed for all randomness")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fuse", help="pool per-pixel features onto the point cloud")
    p.add_argument("--scene", required=True, help="scene manifest JSON")
    p.add_argument("--pool", default="average", choices=("average", "random", "median"))
    p.add_argument("--out", required=True, help="output features .feat [M, C]")
    p.add_argument("--out-counts", help="output view counts .feat [M, 1]")
    p.set_defaults(func=_cmd_fuse)

    p = sub.add_parser("distill", help="train the 3D-only feature field")
    p.add_argument("--fused", required=True)
    p.add_argument("--counts", help="view counts (default: <fused>.views.feat)")
    p.add_argument("--cloud", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--base-voxel", type=float, default=None)
    p.add_argument("--iters", type=int, default=500)
    p.add_argument("--batch-points", type=int, default=20000)
    p.add_argument("--lr", type=float, default=1e-2)
    p.set_defaults(func=_cmd_distill)

    p = sub.add_parser("ensemble", help="pick the better of 2D/3D features per point")
    p.add_argument("--fused", required=True)
    p.add_argument("--counts")
    p.add_argument("--field", required=True)
    p.add_argument("--cloud", required=True)
    p.add_argument("--labels", required=True, help="label file, one prompt per line")
    p.add_argument("--embedder", required=True, help="toy:<dim>:<seed> or table:<path>")
    p.add_argument("--engineer-prompts", action="store_true")
    p.add_argument("--out", required=True)
    p.add_argument("--out-source", help="optional .feat [M, 1] of source codes (0=2D, 1=3D, 2=none)")
    p.set_defaults(func=_cmd_ensemble)

    p = sub.add_parser("segment", help="zero-shot segmentation against a label list")
    p.add_argument("--features", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--embedder", required=True)
    p.add_argument("--engineer-prompts", action="store_true")
    p.add_argument("--out", required=True)
    p.add_argument("--out-confidence")
    p.set_defaults(func=_cmd_segment)

    p = sub.add_parser("query", help="per-point similarity heatmap for one query")
    p.add_argument("--features", required=True)
    p.add_argument("--embedder", required=True)
    p.add_argument("--text")
    p.add_argument("--embedding", help=".feat holding one C-dim query vector")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_query)

    p = sub.add_parser("retrieve", help="ranked search, at most one hit per region")
    p.add_argument("--features", required=True)
    p.add_argument("--cloud", required=True, help="PLY with region_id")
    p.add_argument("--embedder", required=True)
    p.add_argument("--text", required=True)
    p.add_argument("--top-k", type=int, default=10)
    p.set_defaults(func=_cmd_retrieve)

    p = sub.add_parser("eval", help="segmentation metrics")
    p.add_argument("--gt", required=True, help="labels .feat or PLY with gt_label")
    p.add_argument("--pred", required=True)
    p.add_argument("--labelmap")
    p.add_argument("--num-classes", type=int)
    p.add_argument("--group-size", type=int)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("embed", help="embed texts; write or print a prompt table")
    p.add_argument("--embedder", required=True)
    p.add_argument("--texts", nargs="+", required=True)
    p.add_argument("--engineer-prompts", action="store_true")
    p.add_argument("--out", help="write table pair <out>.json/.feat")
    p.set_defaults(func=_cmd_embed)

    p = sub.add_parser("serve", help="HTTP query service")
    p.add_argument(
        "--scene",
        nargs=3,
        metavar=("ID", "CLOUD", "FEATURES"),
        action="append",
        required=True,
    )
    p.add_argument("--embedder", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=None, help="default: $FIELDFUSE_PORT or 8080")
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        e.parser.print_usage(sys.stderr)
        return 1
    except FieldFuseError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"io error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
