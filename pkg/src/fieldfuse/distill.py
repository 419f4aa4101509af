"""Distill fused per-point features into a 3D-only voxel field.

The field is trained so that its output at each supervised point matches
the fused feature direction under a cosine loss. Gradients are analytic
and updates use per-cell Adam moments; runs are bit-reproducible for a
given config.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse

from .errors import EmptyBatch, NoSupervision, ValidationError
from .field import DistilledField, FieldLevel, corner_keys_weights
from .fusion import FusedFeatureCloud
from .scene import PointCloud

INIT_SCALE = 1e-4  # cells start as tiny noise so the cosine objective has a direction to push


@dataclass(frozen=True)
class TrainConfig:
    levels: int = 3
    base_voxel: Optional[float] = None  # None: coarsest level spans the cloud in <= 32 cells
    iters: int = 500
    batch_points: int = 20000
    learning_rate: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.levels < 1:
            raise ValidationError("levels must be >= 1")
        if self.batch_points < 1:
            raise ValidationError("batch_points must be >= 1")
        if self.iters < 0:
            raise ValidationError("iters must be >= 0")
        if self.base_voxel is not None and self.base_voxel <= 0:
            raise ValidationError("base_voxel must be positive")


@dataclass
class TrainResult:
    field: DistilledField
    batch_loss: np.ndarray
    full_loss: np.ndarray = dc_field(default_factory=lambda: np.zeros(0))
    full_loss_steps: np.ndarray = dc_field(default_factory=lambda: np.zeros(0, dtype=np.int64))


def row_cosines(f: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Row-wise cosine in float64; rows where f is numerically zero get 0."""
    f = np.asarray(f, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    nf = np.linalg.norm(f, axis=1)
    ng = np.linalg.norm(g, axis=1)
    dot = (f * g).sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        cos = np.where(nf > 0, dot / (nf * ng), 0.0)
    return cos


def cosine_loss(f3d: np.ndarray, f2d: np.ndarray) -> float:
    """Mean over rows of 1 - cos(f3d_row, f2d_row).

    Rows where f3d is numerically zero contribute 1 (cos treated as 0 with
    a zero subgradient). Every f2d row must be nonzero.
    """
    f3d = np.atleast_2d(np.asarray(f3d, dtype=np.float64))
    f2d = np.atleast_2d(np.asarray(f2d, dtype=np.float64))
    if f3d.shape[0] == 0:
        raise EmptyBatch("cosine loss over an empty batch")
    if f3d.shape != f2d.shape:
        raise ValidationError(f"shape mismatch {f3d.shape} vs {f2d.shape}")
    if (np.linalg.norm(f2d, axis=1) == 0).any():
        raise ValidationError("target rows must be nonzero")
    return float(np.mean(1.0 - row_cosines(f3d, f2d)))


def _loss_grad_wrt_f(f: np.ndarray, g: np.ndarray) -> Tuple[float, np.ndarray]:
    """Loss plus d(loss)/d(f) for the mean cosine loss; zero-f rows get a
    zero subgradient."""
    b = f.shape[0]
    nf = np.linalg.norm(f, axis=1)
    ng = np.linalg.norm(g, axis=1)
    dot = (f * g).sum(axis=1)
    nonzero = nf > 0
    cos = np.zeros(b)
    cos[nonzero] = dot[nonzero] / (nf[nonzero] * ng[nonzero])
    loss = float(np.mean(1.0 - cos))
    grad = np.zeros_like(f)
    nz = nonzero
    grad[nz] = -(
        g[nz] / (nf[nz] * ng[nz])[:, None]
        - (dot[nz] / (nf[nz] ** 3 * ng[nz]))[:, None] * f[nz]
    ) / b
    return loss, grad


def _hash_unit(keys: np.ndarray, salt: np.ndarray) -> np.ndarray:
    """SplitMix64-style mix of packed keys -> floats in [0, 1); stable
    across platforms (pure 64-bit integer arithmetic)."""
    z = keys.astype(np.uint64) + salt.astype(np.uint64)
    z = z + np.uint64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    z = z ^ (z >> np.uint64(31))
    return (z >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)


def _init_cell_values(keys: np.ndarray, dim: int, level_index: int, seed: int) -> np.ndarray:
    """Deterministic tiny-noise init per cell, independent of insertion order."""
    n = keys.shape[0]
    out = np.empty((n, dim), dtype=np.float64)
    mask = (1 << 64) - 1
    base_salt = ((seed & mask) * 0xD1B54A32D192ED03 + (level_index + 1) * 0x9E6C63D0676A9A99) & mask
    for j in range(dim):
        salt = (base_salt + j * 0xC2B2AE3D27D4EB4F) & mask
        out[:, j] = (_hash_unit(keys, np.full(n, salt, dtype=np.uint64)) * 2.0 - 1.0) * INIT_SCALE
    return out.astype(np.float32)


class _LevelState:
    """Mutable per-level training state: cell parameters plus Adam moments
    and the precomputed corner rows/weights of every supervised point."""

    def __init__(self, voxel_size, origin, positions, level_index, seed, dim):
        self.voxel_size = float(voxel_size)
        keys, weights = corner_keys_weights(positions, origin, voxel_size)
        uniq, inverse = np.unique(keys.ravel(), return_inverse=True)
        self.keys = uniq
        self.rows = inverse.reshape(keys.shape)  # (n_sup, 8) row per corner
        self.weights = weights
        self.values = _init_cell_values(uniq, dim, level_index, seed).astype(np.float64)
        self.m = np.zeros_like(self.values)
        self.v = np.zeros_like(self.values)
        self.steps = np.zeros(uniq.shape[0], dtype=np.int64)

    def gather(self, sample: np.ndarray) -> np.ndarray:
        """(b, C) contribution of this level at the sampled supervised points."""
        return np.einsum("bk,bkc->bc", self.weights[sample], self.values[self.rows[sample]])

    def scatter_grad(self, sample: np.ndarray, dldf: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        c = dldf.shape[1]
        contrib = (self.weights[sample][:, :, None] * dldf[:, None, :]).reshape(-1, c)
        rows = self.rows[sample].ravel()
        n = self.values.shape[0]
        scatter = scipy.sparse.csr_matrix(
            (np.ones(rows.shape[0]), (rows, np.arange(rows.shape[0]))),
            shape=(n, rows.shape[0]),
        )
        grad = scatter @ contrib
        touched = np.nonzero(np.bincount(rows, minlength=n))[0]
        return grad, touched

    def adam_step(self, grad, touched, lr, beta1, beta2, eps):
        self.steps[touched] += 1
        t = self.steps[touched].astype(np.float64)
        g = grad[touched]
        self.m[touched] = beta1 * self.m[touched] + (1 - beta1) * g
        self.v[touched] = beta2 * self.v[touched] + (1 - beta2) * g * g
        m_hat = self.m[touched] / (1 - beta1 ** t)[:, None]
        v_hat = self.v[touched] / (1 - beta2 ** t)[:, None]
        self.values[touched] -= lr * m_hat / (np.sqrt(v_hat) + eps)

    def freeze(self) -> FieldLevel:
        return FieldLevel(self.voxel_size, self.keys, self.values.astype(np.float32))


def default_base_voxel(bounds: np.ndarray, max_cells: int = 32) -> float:
    extent = float((bounds[1] - bounds[0]).max())
    return extent / max_cells if extent > 0 else 1.0


def train(
    cloud: PointCloud,
    fused: FusedFeatureCloud,
    cfg: TrainConfig,
    eval_every: int = 0,
) -> TrainResult:
    """Fit the voxel field to the fused features of all seen points.

    Each step draws batch_points supervised indices uniformly with
    replacement (seeded), evaluates the field, and applies the analytic
    cosine-loss gradient to the touched cells through Adam. When
    eval_every > 0, the loss over the full supervised set is recorded
    before training and after every eval_every steps.
    """
    if fused.num_points != cloud.num_points:
        raise ValidationError("fused cloud and point cloud sizes differ")
    supervised = np.nonzero(fused.view_count >= 1)[0]
    if supervised.size == 0:
        raise NoSupervision("no point has a fused feature to distill from")
    dim = fused.dim
    bounds = np.stack([cloud.positions.min(axis=0), cloud.positions.max(axis=0)])
    base_voxel = cfg.base_voxel if cfg.base_voxel is not None else default_base_voxel(bounds)
    voxel_sizes = [base_voxel / (2 ** l) for l in range(cfg.levels)]

    if cfg.iters == 0:
        levels = tuple(
            FieldLevel(vs, np.zeros(0, dtype=np.uint64), np.zeros((0, dim), dtype=np.float32))
            for vs in voxel_sizes
        )
        return TrainResult(
            field=DistilledField(levels=levels, bounds=bounds, dim=dim),
            batch_loss=np.zeros(0),
        )

    positions = cloud.positions[supervised]
    targets = fused.features[supervised].astype(np.float64)
    states = [
        _LevelState(vs, bounds[0], positions, li, cfg.seed, dim)
        for li, vs in enumerate(voxel_sizes)
    ]

    def eval_at(sample: np.ndarray) -> np.ndarray:
        f = np.zeros((sample.shape[0], dim))
        for st in states:
            f += st.gather(sample)
        return f

    all_idx = np.arange(supervised.size)
    rng = np.random.default_rng(cfg.seed)
    batch_loss = np.empty(cfg.iters)
    full_loss: List[float] = []
    full_steps: List[int] = []

    def record_full(step: int) -> None:
        full_loss.append(cosine_loss(eval_at(all_idx), targets))
        full_steps.append(step)

    if eval_every > 0:
        record_full(0)
    for it in range(cfg.iters):
        sample = rng.integers(0, supervised.size, size=cfg.batch_points)
        f = eval_at(sample)
        loss, dldf = _loss_grad_wrt_f(f, targets[sample])
        batch_loss[it] = loss
        for st in states:
            grad, touched = st.scatter_grad(sample, dldf)
            st.adam_step(grad, touched, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon)
        if eval_every > 0 and (it + 1) % eval_every == 0:
            record_full(it + 1)

    field = DistilledField(
        levels=tuple(st.freeze() for st in states), bounds=bounds, dim=dim
    )
    return TrainResult(
        field=field,
        batch_loss=batch_loss,
        full_loss=np.array(full_loss),
        full_loss_steps=np.array(full_steps, dtype=np.int64),
    )


def grad_check(
    field: DistilledField,
    batch: Tuple[np.ndarray, np.ndarray],
    num_params: int = 100,
    step: float = 1e-3,
    seed: int = 0,
) -> float:
    """Compare the analytic cosine-loss gradient against central finite
    differences on randomly chosen stored cell parameters.

    Rows where the field evaluates to exactly zero are dropped first: the
    loss is non-smooth there and its defined subgradient (zero) is not a
    finite-difference quantity. Returns the max relative error; 0.0 when
    nothing is checkable.
    """
    positions = np.asarray(batch[0], dtype=np.float64)
    targets = np.asarray(batch[1], dtype=np.float64)
    if positions.shape[0] == 0:
        raise EmptyBatch("gradient check needs a nonempty batch")

    per_level = []  # (rows (m,8), found (m,8), weights (m,8), values64 (n,C))
    for lv in field.levels:
        keys, w = corner_keys_weights(positions, field.origin, lv.voxel_size)
        rows, found = lv.find_rows(keys.ravel())
        per_level.append(
            (
                rows.reshape(keys.shape),
                found.reshape(keys.shape),
                w,
                lv.values.astype(np.float64),
            )
        )

    def eval_f(values_list) -> np.ndarray:
        f = np.zeros((positions.shape[0], field.dim))
        for (rows, found, w, _), vals in zip(per_level, values_list):
            gathered = np.where(found[:, :, None], vals[rows], 0.0)
            f += (w[:, :, None] * gathered).sum(axis=1)
        return f

    values_list = [pl[3] for pl in per_level]
    keep = np.linalg.norm(eval_f(values_list), axis=1) > 0
    if not keep.any():
        return 0.0
    positions = positions[keep]
    targets = targets[keep]
    per_level = [(r[keep], fo[keep], w[keep], v) for r, fo, w, v in per_level]

    _, dldf = _loss_grad_wrt_f(eval_f(values_list), targets)
    analytic = []
    candidates = []
    for li, (rows, found, w, vals) in enumerate(per_level):
        grad = np.zeros_like(vals)
        idx = rows[found]
        contrib = (w[found][:, None] * dldf[np.nonzero(found)[0]])
        np.add.at(grad, idx, contrib)
        analytic.append(grad)
        for r in np.unique(idx):
            for c in range(field.dim):
                candidates.append((li, int(r), c))
    if not candidates:
        return 0.0

    rng = np.random.default_rng(seed)
    chosen = [candidates[i] for i in rng.permutation(len(candidates))[:num_params]]
    max_rel = 0.0
    for li, r, c in chosen:
        orig = values_list[li][r, c]
        values_list[li][r, c] = orig + step
        lo_hi = cosine_loss(eval_f(values_list), targets)
        values_list[li][r, c] = orig - step
        lo_lo = cosine_loss(eval_f(values_list), targets)
        values_list[li][r, c] = orig
        fd = (lo_hi - lo_lo) / (2 * step)
        a = analytic[li][r, c]
        denom = max(abs(a), abs(fd))
        if denom > 1e-12:
            max_rel = max(max_rel, abs(a - fd) / denom)
    return max_rel
