"""File IO for every stored type: ".feat" tensors, PLY point clouds,
camera and manifest JSON.

The ".feat" container is the one tensor format used throughout (feature
maps, depth maps, fused clouds, embeddings, labels): magic ``OVFT``,
u32 little-endian version (=1), u32 ndims, ndims x u64 dims, u32 dtype
code (0 = float32), then the row-major little-endian payload. Round
trips are byte-exact.
"""

from __future__ import annotations

import json
import os
import struct
from typing import Optional, Union

import numpy as np

from .errors import (
    BadMagic,
    BadManifest,
    BadPly,
    InvalidCamera,
    TruncatedPayload,
    UnsupportedDtype,
    UnsupportedVersion,
)
from .scene import Camera, FeatureImage, ImageEntry, PointCloud, Scene, SceneManifest

FEAT_MAGIC = b"OVFT"
FEAT_VERSION = 1
DTYPE_F32 = 0

MAX_NDIMS = 16


def save_feat(path: Union[str, os.PathLike], array: np.ndarray) -> None:
    """Write an n-dim array as a ".feat" file (payload stored as float32)."""
    arr = np.asarray(array, dtype=np.float32)
    if not arr.flags.c_contiguous:
        arr = arr.copy(order="C")
    with open(path, "wb") as f:
        f.write(FEAT_MAGIC)
        f.write(struct.pack("<II", FEAT_VERSION, arr.ndim))
        f.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        f.write(struct.pack("<I", DTYPE_F32))
        f.write(arr.astype("<f4", copy=False).tobytes())


def load_feat(path: Union[str, os.PathLike]) -> np.ndarray:
    """Read a ".feat" file back into a float32 array.

    Raises BadMagic, UnsupportedVersion, UnsupportedDtype, or
    TruncatedPayload when the file is not a well-formed tensor.
    """
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < 4 or data[:4] != FEAT_MAGIC:
        raise BadMagic(f"{path}: not a .feat file")
    off = 4
    (version, ndims), off = _read(data, "<II", off, path)
    if version != FEAT_VERSION:
        raise UnsupportedVersion(f"{path}: version {version}, expected {FEAT_VERSION}")
    if ndims > MAX_NDIMS:
        raise TruncatedPayload(f"{path}: implausible ndims {ndims}")
    dims, off = _read(data, f"<{ndims}Q", off, path)
    (dtype_code,), off = _read(data, "<I", off, path)
    if dtype_code != DTYPE_F32:
        raise UnsupportedDtype(f"{path}: dtype code {dtype_code}")
    count = 1
    for d in dims:
        count *= d
    expected = count * 4
    payload = data[off:]
    if len(payload) != expected:
        raise TruncatedPayload(
            f"{path}: dims {tuple(dims)} need {expected} payload bytes, found {len(payload)}"
        )
    return np.frombuffer(payload, dtype="<f4").reshape(tuple(dims)).copy()


def _read(data: bytes, fmt: str, off: int, path) -> tuple:
    size = struct.calcsize(fmt)
    if off + size > len(data):
        raise TruncatedPayload(f"{path}: file ends inside the header")
    return struct.unpack_from(fmt, data, off), off + size


# --- PLY -------------------------------------------------------------------

_PLY_DTYPES = {
    "float": "<f4", "float32": "<f4",
    "double": "<f8", "float64": "<f8",
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "<i2", "int16": "<i2",
    "ushort": "<u2", "uint16": "<u2",
    "int": "<i4", "int32": "<i4",
    "uint": "<u4", "uint32": "<u4",
}


def save_ply(path: Union[str, os.PathLike], cloud: PointCloud, binary: bool = True) -> None:
    """Write a point cloud as PLY. Positions are stored as doubles so that
    save-then-load is the identity; region_id / gt_label go out as int32."""
    props = [("x", "double"), ("y", "double"), ("z", "double")]
    columns = [cloud.positions[:, 0], cloud.positions[:, 1], cloud.positions[:, 2]]
    for name in ("region_id", "gt_label"):
        arr = getattr(cloud, name)
        if arr is not None:
            props.append((name, "int"))
            columns.append(arr)
    fmt = "binary_little_endian" if binary else "ascii"
    header = ["ply", f"format {fmt} 1.0", f"element vertex {cloud.num_points}"]
    header += [f"property {t} {n}" for n, t in props]
    header.append("end_header")
    with open(path, "wb") as f:
        f.write(("\n".join(header) + "\n").encode("ascii"))
        if binary:
            rec = np.dtype([(n, _PLY_DTYPES[t]) for n, t in props])
            table = np.empty(cloud.num_points, dtype=rec)
            for (n, _), col in zip(props, columns):
                table[n] = col
            f.write(table.tobytes())
        else:
            for row in zip(*columns):
                cells = [
                    ("%d" % v) if isinstance(v, (int, np.integer)) else ("%.17g" % v)
                    for v in row
                ]
                f.write((" ".join(cells) + "\n").encode("ascii"))


def load_ply(path: Union[str, os.PathLike]) -> PointCloud:
    """Read x, y, z (plus optional region_id / gt_label) from an ascii or
    binary little-endian PLY file. Other properties and trailing elements
    are ignored."""
    with open(path, "rb") as f:
        data = f.read()
    end = data.find(b"end_header")
    if not data.startswith(b"ply") or end < 0:
        raise BadPly(f"{path}: missing ply header")
    body_off = data.find(b"\n", end) + 1
    if body_off == 0:
        raise BadPly(f"{path}: header is not newline-terminated")
    try:
        header = data[:end].decode("ascii")
    except UnicodeDecodeError as e:
        raise BadPly(f"{path}: non-ascii header") from e

    fmt = None
    count = None
    props: list[tuple[str, str]] = []
    in_vertex = False
    for line in header.splitlines():
        words = line.split()
        if not words or words[0] == "comment":
            continue
        if words[0] == "format":
            if len(words) < 2 or words[1] not in ("ascii", "binary_little_endian"):
                raise BadPly(f"{path}: unsupported format {' '.join(words[1:])!r}")
            fmt = words[1]
        elif words[0] == "element":
            if words[1] == "vertex":
                in_vertex = True
                count = int(words[2])
            else:
                in_vertex = False
        elif words[0] == "property" and in_vertex:
            if words[1] == "list":
                raise BadPly(f"{path}: list properties on vertices are not supported")
            if words[1] not in _PLY_DTYPES:
                raise BadPly(f"{path}: unknown property type {words[1]!r}")
            props.append((words[2], words[1]))
    if fmt is None or count is None:
        raise BadPly(f"{path}: header lacks format or vertex element")
    names = [n for n, _ in props]
    for axis in ("x", "y", "z"):
        if axis not in names:
            raise BadPly(f"{path}: vertex element lacks property {axis!r}")

    if fmt == "binary_little_endian":
        rec = np.dtype([(n, _PLY_DTYPES[t]) for n, t in props])
        need = rec.itemsize * count
        if len(data) - body_off < need:
            raise BadPly(f"{path}: {count} vertices need {need} bytes, found {len(data) - body_off}")
        table = np.frombuffer(data, dtype=rec, count=count, offset=body_off)
    else:
        lines = data[body_off:].splitlines()
        if len(lines) < count:
            raise BadPly(f"{path}: expected {count} vertex lines, found {len(lines)}")
        try:
            raw = np.array(
                [[float(v) for v in lines[i].split()[: len(props)]] for i in range(count)],
                dtype=np.float64,
            )
        except ValueError as e:
            raise BadPly(f"{path}: unparseable vertex line") from e
        if raw.shape != (count, len(props)):
            raise BadPly(f"{path}: vertex lines do not match declared properties")
        table = {n: raw[:, i] for i, (n, _) in enumerate(props)}

    positions = np.stack(
        [np.asarray(table["x"]), np.asarray(table["y"]), np.asarray(table["z"])], axis=1
    ).astype(np.float64)
    kwargs = {}
    for name in ("region_id", "gt_label"):
        if name in names:
            kwargs[name] = np.asarray(table[name]).astype(np.int64)
    return PointCloud(positions=positions, **kwargs)


# --- cameras & manifests ---------------------------------------------------

def save_camera(path: Union[str, os.PathLike], camera: Camera) -> None:
    doc = {
        "intrinsics": camera.intrinsics.tolist(),
        "extrinsics": camera.extrinsics.tolist(),
        "width": camera.width,
        "height": camera.height,
    }
    with open(path, "w") as f:
        json.dump(doc, f, indent=1)


def load_camera(path: Union[str, os.PathLike]) -> Camera:
    try:
        with open(path) as f:
            doc = json.load(f)
        return Camera(
            intrinsics=np.array(doc["intrinsics"], dtype=np.float64),
            extrinsics=np.array(doc["extrinsics"], dtype=np.float64),
            width=doc["width"],
            height=doc["height"],
        )
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise InvalidCamera(f"{path}: {e}") from e


def save_manifest(path: Union[str, os.PathLike], manifest: SceneManifest) -> None:
    doc = {
        "cloud_path": manifest.cloud_path,
        "dataset_mode": manifest.dataset_mode,
        "occlusion_sigma_ratio": manifest.occlusion_sigma_ratio,
        "images": [
            {
                "feature_path": e.feature_path,
                "camera_path": e.camera_path,
                **({"depth_path": e.depth_path} if e.depth_path is not None else {}),
            }
            for e in manifest.images
        ],
    }
    with open(path, "w") as f:
        json.dump(doc, f, indent=1)


def load_manifest(path: Union[str, os.PathLike]) -> SceneManifest:
    try:
        with open(path) as f:
            doc = json.load(f)
        images = [
            ImageEntry(
                feature_path=e["feature_path"],
                camera_path=e["camera_path"],
                depth_path=e.get("depth_path"),
            )
            for e in doc["images"]
        ]
        return SceneManifest(
            cloud_path=doc["cloud_path"],
            images=images,
            dataset_mode=doc.get("dataset_mode", "with-depth"),
            occlusion_sigma_ratio=float(doc.get("occlusion_sigma_ratio", 0.2)),
        )
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise BadManifest(f"{path}: {e}") from e


def load_scene(manifest: SceneManifest, base_dir: Optional[Union[str, os.PathLike]] = None) -> Scene:
    """Assemble and validate a Scene from a manifest.

    Relative paths resolve against ``base_dir`` (defaults to the current
    directory). Type invariants are enforced by construction; feature
    dimension consistency across images raises InconsistentFeatureDim.
    """
    base = str(base_dir) if base_dir is not None else "."

    def _resolve(p: str) -> str:
        return p if os.path.isabs(p) else os.path.join(base, p)

    cloud = load_ply(_resolve(manifest.cloud_path))
    images = []
    for entry in manifest.images:
        camera = load_camera(_resolve(entry.camera_path))
        features = load_feat(_resolve(entry.feature_path))
        depth = None
        if entry.depth_path is not None:
            depth = load_feat(_resolve(entry.depth_path))
        images.append(FeatureImage(features=features, camera=camera, depth=depth))
    return Scene(cloud=cloud, images=tuple(images))


def load_scene_file(path: Union[str, os.PathLike]) -> Scene:
    """Load a scene from a manifest file; paths resolve against its folder."""
    manifest = load_manifest(path)
    return load_scene(manifest, base_dir=os.path.dirname(os.path.abspath(path)))
