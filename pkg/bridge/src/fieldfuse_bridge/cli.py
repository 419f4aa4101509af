"""Batch CLI for the exporter."""

from __future__ import annotations

import argparse
import json
import sys
from typing import List, Optional

from .export import ExportJob, ImageInput, export_pixel_features, export_text_table
from .models import ModelUnavailable, ShapeMismatch, text_model


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="fieldfuse-bridge")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pixels", help="export per-pixel feature images from a job file")
    p.add_argument("--job", required=True, help="job JSON: model, feature_dim, out_dir, inputs")
    p = sub.add_parser("text", help="export a prompt embedding table")
    p.add_argument("--model", default="stub")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--texts", nargs="+", required=True)
    p.add_argument("--out", required=True, help="table JSON path (sibling .feat is implied)")
    p.add_argument("--checkpoint")

    args = parser.parse_args(argv)
    try:
        if args.command == "pixels":
            with open(args.job) as f:
                doc = json.load(f)
            job = ExportJob(
                inputs=[ImageInput(**item) for item in doc["inputs"]],
                model_spec=doc.get("model", "stub"),
                out_dir=doc["out_dir"],
                feature_dim=int(doc["feature_dim"]),
                cloud_path=doc.get("cloud_path", "cloud.ply"),
                occlusion_sigma_ratio=float(doc.get("occlusion_sigma_ratio", 0.2)),
                checkpoint=doc.get("checkpoint"),
            )
            manifest = export_pixel_features(job)
            print(manifest)
        else:
            model = text_model(args.model, args.dim, args.checkpoint)
            export_text_table(args.texts, model, args.out, declared_dim=args.dim)
            print(args.out)
    except (ModelUnavailable, ShapeMismatch, KeyError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"io error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
