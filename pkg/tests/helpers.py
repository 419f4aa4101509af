"""Synthetic scene builders shared by unit and acceptance tests."""

from __future__ import annotations

import numpy as np

from fieldfuse import Camera, FeatureImage, PointCloud, Scene
from fieldfuse.embedder import toy_embedding
from fieldfuse.projection import OcclusionConfig

import oracles


def look_at_camera(eye, center, width, height, focal, up=(0.0, 0.0, 1.0)) -> Camera:
    eye = np.asarray(eye, dtype=np.float64)
    center = np.asarray(center, dtype=np.float64)
    z = center - eye
    z = z / np.linalg.norm(z)
    up = np.asarray(up, dtype=np.float64)
    x = np.cross(up, z)
    if np.linalg.norm(x) < 1e-9:
        x = np.cross((1.0, 0.0, 0.0), z)
    x = x / np.linalg.norm(x)
    y = np.cross(z, x)
    rot = np.stack([x, y, z])  # world-to-camera rotation rows
    extr = np.eye(4)
    extr[:3, :3] = rot
    extr[:3, 3] = -rot @ eye
    intr = np.array(
        [[focal, 0.0, width / 2.0], [0.0, focal, height / 2.0], [0.0, 0.0, 1.0]]
    )
    return Camera(intrinsics=intr, extrinsics=extr, width=width, height=height)


def random_camera(rng, center, radius, width, height) -> Camera:
    direction = rng.normal(size=3)
    direction /= np.linalg.norm(direction)
    eye = np.asarray(center) + direction * radius
    focal = rng.uniform(0.6, 1.4) * width
    return look_at_camera(eye, center, width, height, focal)


def random_depth_scene(
    rng,
    num_points=300,
    num_images=3,
    width=32,
    height=32,
    dim=8,
    sigma_ratio=0.2,
    enabled=True,
    invalid_frac=0.1,
):
    """Random cloud plus cameras whose depth maps are the cloud's own
    z-buffer render (with a fraction of pixels invalidated)."""
    positions = rng.uniform(-1.0, 1.0, size=(num_points, 3))
    cloud = PointCloud(positions=positions)
    images = []
    for _ in range(num_images):
        camera = random_camera(rng, (0.0, 0.0, 0.0), rng.uniform(2.5, 4.0), width, height)
        depth = oracles.render_zbuffer(positions, camera).astype(np.float32)
        if invalid_frac > 0:
            kill = rng.random(depth.shape) < invalid_frac
            depth[kill] = 0.0
        features = rng.uniform(0.1, 1.0, size=(height, width, dim)).astype(np.float32)
        images.append(FeatureImage(features=features, camera=camera, depth=depth))
    occ = OcclusionConfig(sigma_ratio=sigma_ratio, enabled=enabled)
    return Scene(cloud=cloud, images=tuple(images)), occ


def rotate_towards(vec, rng, max_angle_deg):
    """Rotate a unit vector by a uniform angle <= max_angle_deg towards a
    random perpendicular direction."""
    vec = np.asarray(vec, dtype=np.float64)
    r = rng.normal(size=vec.shape[0])
    perp = r - (r @ vec) * vec
    norm = np.linalg.norm(perp)
    if norm < 1e-12:
        return vec.copy()
    perp /= norm
    angle = np.deg2rad(rng.uniform(0.0, max_angle_deg))
    return np.cos(angle) * vec + np.sin(angle) * perp


def class_scene(
    rng,
    num_classes=5,
    dim=32,
    noise_deg=10.0,
    num_cameras=8,
    width=64,
    height=64,
    floor_side=28,
    blob_points=420,
    embed_seed=0,
):
    """A floor plus (num_classes - 1) separated blobs sitting on it, viewed
    by a ring of oblique cameras so blobs occlude floor points behind them.

    Per-pixel features are the visible point's class embedding rotated by
    at most noise_deg; empty pixels carry invalid depth. Returns
    (scene, occlusion, labels, class_names, class_embeddings).
    """
    names = [f"class{i}" for i in range(num_classes)]
    embeddings = np.stack([toy_embedding(n, dim, embed_seed) for n in names])

    xs = np.linspace(-1.0, 1.0, floor_side)
    gx, gy = np.meshgrid(xs, xs)
    floor = np.stack([gx.ravel(), gy.ravel(), np.zeros(gx.size)], axis=1)
    centers = [(-0.55, -0.55), (0.55, -0.55), (-0.55, 0.55), (0.55, 0.55)]
    # carve the floor under each blob footprint, as a real scan would
    keep = np.ones(floor.shape[0], dtype=bool)
    for ci in range(1, num_classes):
        cx, cy = centers[(ci - 1) % len(centers)]
        keep &= ~(
            (np.abs(floor[:, 0] - cx) < 0.25) & (np.abs(floor[:, 1] - cy) < 0.25)
        )
    floor = floor[keep]
    parts = [floor]
    labels = [np.zeros(floor.shape[0], dtype=np.int64)]
    for ci in range(1, num_classes):
        cx, cy = centers[(ci - 1) % len(centers)]
        blob = _box_surface(rng, (cx, cy, 0.3), (0.2, 0.2, 0.25), blob_points)
        parts.append(blob)
        labels.append(np.full(blob_points, ci, dtype=np.int64))
    positions = np.concatenate(parts)
    labels = np.concatenate(labels)
    cloud = PointCloud(positions=positions, gt_label=labels)

    eyes = [
        np.array([2.6 * np.cos(a), 2.6 * np.sin(a), 2.2])
        for a in 2 * np.pi * np.arange(num_cameras) / num_cameras
    ]
    eyes.append(np.array([0.15, 0.1, 3.6]))  # near-top-down view fills oblique shadows
    images = []
    for eye in eyes:
        camera = look_at_camera(eye, (0.0, 0.0, 0.15), width, height, focal=0.9 * width)
        depth = np.zeros((height, width), dtype=np.float64)
        owner = np.full((height, width), -1, dtype=np.int64)
        u, v, z, in_front = _project_all(positions, camera)
        for i in np.nonzero(in_front)[0]:
            pix = oracles.pixel_of(u[i], v[i], width, height)
            if pix is None:
                continue
            ui, vi = pix
            if depth[vi, ui] == 0 or z[i] < depth[vi, ui]:
                depth[vi, ui] = z[i]
                owner[vi, ui] = i
        features = np.zeros((height, width, dim), dtype=np.float32)
        for vi, ui in zip(*np.nonzero(owner >= 0)):
            cls = labels[owner[vi, ui]]
            features[vi, ui] = rotate_towards(
                embeddings[cls].astype(np.float64), rng, noise_deg
            ).astype(np.float32)
        images.append(
            FeatureImage(features=features, camera=camera, depth=depth.astype(np.float32))
        )
    scene = Scene(cloud=cloud, images=tuple(images))
    occ = OcclusionConfig(sigma_ratio=0.05, enabled=True)
    return scene, occ, labels, names, embeddings


def _box_surface(rng, center, half, count):
    """Points on the surface of an axis-aligned box (top and sides; the
    bottom face is skipped since it cannot be scanned)."""
    cx, cy, cz = center
    hx, hy, hz = half
    areas = np.array([hy * hz, hy * hz, hx * hz, hx * hz, hx * hy])  # +-x, +-y, top
    face = rng.choice(5, size=count, p=areas / areas.sum())
    a = rng.uniform(-1.0, 1.0, count)
    b = rng.uniform(-1.0, 1.0, count)
    pts = np.empty((count, 3))
    for i, f in enumerate(face):
        if f == 0:
            pts[i] = (cx + hx, cy + a[i] * hy, cz + b[i] * hz)
        elif f == 1:
            pts[i] = (cx - hx, cy + a[i] * hy, cz + b[i] * hz)
        elif f == 2:
            pts[i] = (cx + a[i] * hx, cy + hy, cz + b[i] * hz)
        elif f == 3:
            pts[i] = (cx + a[i] * hx, cy - hy, cz + b[i] * hz)
        else:
            pts[i] = (cx + a[i] * hx, cy + b[i] * hy, cz + hz)
    return pts


def _project_all(positions, camera):
    extr = camera.extrinsics
    cam = positions @ extr[:3, :3].T + extr[:3, 3]
    z = cam[:, 2]
    in_front = z > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        u = camera.fx * cam[:, 0] / z + camera.cx
        v = camera.fy * cam[:, 1] / z + camera.cy
    return u, v, z, in_front
