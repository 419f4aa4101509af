"""Segmentation metrics: confusion counts, mIoU / mAcc, frequency-grouped
accuracy, and fine-prompt to target-class remapping.

The ignore sentinel -1 never enters any count. A class empty in both
ground truth and predictions is excluded from every mean; a class that
was predicted but has no ground truth keeps IoU 0 and counts as accuracy
0 rather than poisoning means with 0/0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .errors import LabelOutOfRange, UnmappedPrompt, ValidationError
from .scene import IGNORE_LABEL


@dataclass(frozen=True)
class LabelMap:
    """Ordered (target_class, prompt list) entries; each prompt may appear
    in exactly one entry. Predictions over the flattened prompt list remap
    to the entry index."""

    entries: Tuple[Tuple[str, Tuple[str, ...]], ...]

    def __post_init__(self):
        entries = tuple((t, tuple(ps)) for t, ps in self.entries)
        seen = set()
        for target, prompts in entries:
            if not prompts:
                raise ValidationError(f"entry {target!r} has no prompts")
            for p in prompts:
                if p in seen:
                    raise ValidationError(f"prompt {p!r} appears in more than one entry")
                seen.add(p)
        object.__setattr__(self, "entries", entries)

    @property
    def num_targets(self) -> int:
        return len(self.entries)

    def flat_prompts(self) -> List[str]:
        return [p for _, prompts in self.entries for p in prompts]

    def prompt_to_target(self) -> np.ndarray:
        out = []
        for ti, (_, prompts) in enumerate(self.entries):
            out.extend([ti] * len(prompts))
        return np.array(out, dtype=np.int64)


def load_label_map(path) -> LabelMap:
    with open(path) as f:
        doc = json.load(f)
    return LabelMap(entries=tuple((e["target_class"], tuple(e["prompts"])) for e in doc))


def save_label_map(path, label_map: LabelMap) -> None:
    doc = [{"target_class": t, "prompts": list(ps)} for t, ps in label_map.entries]
    with open(path, "w") as f:
        json.dump(doc, f, indent=1)


def remap(pred_prompt_labels: np.ndarray, label_map: LabelMap) -> np.ndarray:
    """Map fine prompt indices to their entry's target index; -1 passes."""
    pred = np.asarray(pred_prompt_labels, dtype=np.int64).reshape(-1)
    lut = label_map.prompt_to_target()
    bad = (pred != IGNORE_LABEL) & ((pred < 0) | (pred >= lut.shape[0]))
    if bad.any():
        raise UnmappedPrompt(
            f"predicted index {int(pred[bad][0])} addresses no prompt in the map"
        )
    out = np.full(pred.shape, IGNORE_LABEL, dtype=np.int64)
    ok = pred != IGNORE_LABEL
    out[ok] = lut[pred[ok]]
    return out


def confusion(gt: np.ndarray, pred: np.ndarray, num_classes: int) -> np.ndarray:
    """counts[i, j] = points with ground truth i predicted j; the -1
    sentinel on either side drops the point."""
    gt = np.asarray(gt, dtype=np.int64).reshape(-1)
    pred = np.asarray(pred, dtype=np.int64).reshape(-1)
    if gt.shape != pred.shape:
        raise ValidationError("gt and pred must align")
    for name, arr in (("gt", gt), ("pred", pred)):
        bad = (arr < IGNORE_LABEL) | (arr >= num_classes)
        if bad.any():
            raise LabelOutOfRange(f"{name} label {int(arr[bad][0])} outside [0, {num_classes})")
    keep = (gt != IGNORE_LABEL) & (pred != IGNORE_LABEL)
    flat = gt[keep] * num_classes + pred[keep]
    return np.bincount(flat, minlength=num_classes * num_classes).reshape(
        num_classes, num_classes
    )


def per_class_iou_acc(conf: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-class IoU and accuracy plus the inclusion mask (classes empty in
    both gt and pred are masked out)."""
    conf = np.asarray(conf, dtype=np.int64)
    if conf.size == 0:
        raise ValidationError("empty confusion matrix")
    tp = np.diag(conf).astype(np.float64)
    gt_total = conf.sum(axis=1).astype(np.float64)
    pred_total = conf.sum(axis=0).astype(np.float64)
    fn = gt_total - tp
    fp = pred_total - tp
    included = (gt_total + pred_total) > 0
    union = tp + fp + fn
    with np.errstate(divide="ignore", invalid="ignore"):
        iou = np.where(union > 0, tp / union, np.nan)
        acc = np.where(gt_total > 0, tp / gt_total, 0.0)
    iou[~included] = np.nan
    acc[~included] = np.nan
    return iou, acc, included


def miou_macc(conf: np.ndarray) -> Tuple[float, float, np.ndarray, np.ndarray]:
    """Unweighted means of per-class IoU and accuracy over included classes."""
    iou, acc, included = per_class_iou_acc(conf)
    if not included.any():
        raise ValidationError("no class present in gt or predictions")
    return (
        float(iou[included].mean()),
        float(acc[included].mean()),
        iou,
        acc,
    )


def grouped_macc(
    conf: np.ndarray, class_frequencies: Sequence[int], group_size: int
) -> List[float]:
    """Mean accuracy per frequency group: classes sort by descending ground
    truth frequency (ties by class index) and partition into consecutive
    groups of group_size (the last may be short). A group whose classes are
    all excluded reports NaN."""
    if group_size < 1:
        raise ValidationError("group_size must be >= 1")
    freqs = np.asarray(class_frequencies, dtype=np.int64)
    conf = np.asarray(conf, dtype=np.int64)
    if freqs.shape[0] != conf.shape[0]:
        raise ValidationError("class_frequencies must match confusion size")
    _, acc, included = per_class_iou_acc(conf)
    order = np.lexsort((np.arange(freqs.shape[0]), -freqs))
    out = []
    for start in range(0, order.shape[0], group_size):
        members = order[start : start + group_size]
        use = members[included[members]]
        out.append(float(acc[use].mean()) if use.size else float("nan"))
    return out
