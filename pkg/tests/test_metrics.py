import numpy as np
import pytest

from fieldfuse.errors import LabelOutOfRange, UnmappedPrompt, ValidationError
from fieldfuse.metrics import (
    LabelMap,
    confusion,
    grouped_macc,
    load_label_map,
    miou_macc,
    per_class_iou_acc,
    remap,
    save_label_map,
)

import oracles


VEHICLE_MAP = LabelMap(entries=(("vehicle", ("car", "truck")), ("plant", ("tree",))))


def test_remap_fine_prompt_to_target():
    # flattened prompts: car=0, truck=1, tree=2
    assert remap(np.array([1]), VEHICLE_MAP).tolist() == [0]
    assert remap(np.array([0, 2, 1]), VEHICLE_MAP).tolist() == [0, 1, 0]


def test_remap_passes_sentinel():
    assert remap(np.array([-1, 2]), VEHICLE_MAP).tolist() == [-1, 1]


def test_remap_unknown_index():
    with pytest.raises(UnmappedPrompt):
        remap(np.array([3]), VEHICLE_MAP)


def test_label_map_validation():
    with pytest.raises(ValidationError):
        LabelMap(entries=(("a", ()),))
    with pytest.raises(ValidationError):
        LabelMap(entries=(("a", ("x",)), ("b", ("x",))))


def test_label_map_file_round_trip(tmp_path):
    p = tmp_path / "map.json"
    save_label_map(p, VEHICLE_MAP)
    assert load_label_map(p) == VEHICLE_MAP


def test_confusion_diagonal():
    gt = np.array([0, 1, 1, 0])
    conf = confusion(gt, gt, 2)
    assert conf.tolist() == [[2, 0], [0, 2]]


def test_confusion_single_off_diagonal():
    gt = np.zeros(7, dtype=int)
    pred = np.ones(7, dtype=int)
    conf = confusion(gt, pred, 2)
    assert conf.tolist() == [[0, 7], [0, 0]]


def test_confusion_ignores_sentinel():
    gt = np.array([0, -1, 1])
    pred = np.array([-1, 1, 1])
    assert confusion(gt, pred, 2).tolist() == [[0, 0], [0, 1]]


def test_confusion_label_out_of_range():
    with pytest.raises(LabelOutOfRange):
        confusion(np.array([2]), np.array([0]), 2)
    with pytest.raises(LabelOutOfRange):
        confusion(np.array([0]), np.array([-4]), 2)


def test_confusion_matches_brute_tally():
    rng = np.random.default_rng(12)
    for _ in range(20):
        m = int(rng.integers(1, 300))
        k = int(rng.integers(2, 7))
        gt = rng.integers(-1, k, m)
        pred = rng.integers(-1, k, m)
        assert np.array_equal(confusion(gt, pred, k), oracles.confusion_brute(gt, pred, k))


def test_miou_macc_hand_fixture():
    miou, macc, iou, acc = miou_macc(np.array([[5, 5], [0, 10]]))
    assert miou == pytest.approx(0.58333, abs=1e-5)
    assert macc == pytest.approx(0.75, abs=1e-12)
    assert iou.tolist() == pytest.approx([0.5, 2 / 3])
    assert acc.tolist() == pytest.approx([0.5, 1.0])


def test_miou_macc_perfect():
    miou, macc, _, _ = miou_macc(np.array([[3, 0], [0, 9]]))
    assert miou == 1.0 and macc == 1.0


def test_empty_class_excluded_from_means():
    conf = np.array([[4, 0, 0], [0, 6, 0], [0, 0, 0]])
    miou, macc, iou, acc = miou_macc(conf)
    assert np.isnan(iou[2]) and np.isnan(acc[2])
    assert miou == 1.0 and macc == 1.0


def test_iou_never_exceeds_acc():
    rng = np.random.default_rng(13)
    for _ in range(20):
        k = int(rng.integers(2, 6))
        gt = rng.integers(0, k, 200)
        pred = rng.integers(0, k, 200)
        iou, acc, included = per_class_iou_acc(confusion(gt, pred, k))
        ok = included & (confusion(gt, pred, k).sum(axis=1) > 0)
        assert (iou[ok] <= acc[ok] + 1e-12).all()


def test_class_permutation_invariance_as_multiset():
    rng = np.random.default_rng(14)
    k = 5
    gt = rng.integers(0, k, 500)
    pred = rng.integers(0, k, 500)
    perm = rng.permutation(k)
    miou_a, macc_a, iou_a, acc_a = miou_macc(confusion(gt, pred, k))
    miou_b, macc_b, iou_b, acc_b = miou_macc(confusion(perm[gt], perm[pred], k))
    assert miou_a == pytest.approx(miou_b)
    assert macc_a == pytest.approx(macc_b)
    assert sorted(iou_a.tolist()) == pytest.approx(sorted(iou_b[np.argsort(np.arange(k))].tolist()))


def test_grouped_macc_partitions_by_frequency():
    # 4 classes; per-class acc 1, 1, 0, 0 in frequency order
    conf = np.array(
        [
            [10, 0, 0, 0],
            [0, 8, 0, 0],
            [6, 0, 0, 0],
            [4, 0, 0, 0],
        ]
    )
    freqs = conf.sum(axis=1)
    groups = grouped_macc(conf, freqs, 2)
    assert groups == [1.0, 0.0]


def test_grouped_macc_single_group_is_overall():
    conf = np.array([[5, 5], [0, 10]])
    groups = grouped_macc(conf, conf.sum(axis=1), group_size=10)
    assert groups[0] == pytest.approx(0.75)


def test_grouped_macc_matches_regrouping_oracle():
    rng = np.random.default_rng(15)
    for _ in range(15):
        k = int(rng.integers(2, 9))
        gt = rng.integers(0, k, 400)
        pred = rng.integers(0, k, 400)
        conf = confusion(gt, pred, k)
        freqs = conf.sum(axis=1)
        gs = int(rng.integers(1, k + 1))
        got = grouped_macc(conf, freqs, gs)
        ref = oracles.grouped_macc_brute(conf, freqs, gs)
        assert got == pytest.approx(ref, nan_ok=True)
