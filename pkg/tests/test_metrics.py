from __future__ import annotations

from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from secvos.core import BinaryMask, ImageFrame
from secvos.errors import DimensionMismatchError, MissingFpsError, MissingSceneListError, ValidationError
from secvos.metrics import (
    BUCKETS,
    VideoEval,
    bucket_of,
    bucket_report,
    contour_accuracy,
    dataset_stats,
    default_tolerance,
    disappearance_rate,
    evaluate_frame,
    evaluate_video,
    object_disappears,
    region_similarity,
)
from secvos.scenedetect import SceneList
from tests.conftest import blob_mask, solid_frame
from tests.oracles import reference as ref


def box(y, x, h, w, W=40, H=40):
    return BinaryMask.from_box(W, H, y, x, h, w)


def test_region_similarity_examples():
    a = box(5, 5, 10, 10)
    assert region_similarity(a, a) == 1.0
    assert region_similarity(BinaryMask.empty(40, 40), BinaryMask.empty(40, 40)) == 1.0
    assert region_similarity(a, box(5, 10, 10, 10)) == pytest.approx(1 / 3, abs=1e-15)


def test_contour_accuracy_examples():
    a = box(5, 5, 20, 20)
    empty = BinaryMask.empty(40, 40)
    assert contour_accuracy(a, a) == 1.0
    assert contour_accuracy(empty, a) == 0.0 and contour_accuracy(a, empty) == 0.0
    assert contour_accuracy(empty, empty) == 1.0
    shifted = box(5, 6, 20, 20)
    got = contour_accuracy(shifted, a, tolerance=1)
    assert got == pytest.approx(ref.f_measure(shifted.bits, a.bits, 1), abs=1e-12)
    # a one pixel shift is fully absorbed by a tolerance of 1
    assert got == 1.0
    assert contour_accuracy(shifted, a, tolerance=0) == pytest.approx(
        ref.f_measure(shifted.bits, a.bits, 0), abs=1e-12)
    with pytest.raises(ValidationError):
        contour_accuracy(a, a, tolerance=-1)
    with pytest.raises(DimensionMismatchError):
        contour_accuracy(a, BinaryMask.empty(3, 3))


def test_default_tolerance():
    assert default_tolerance(160, 120) == 2          # 0.008 * 200 = 1.6
    assert default_tolerance(854, 480) == 8
    assert default_tolerance(10, 10) == 1


def test_metrics_match_oracles_on_random_masks(rng):
    for i in range(20):
        if i % 2:
            p, g = blob_mask(rng, 32, 32), blob_mask(rng, 32, 32)
        else:
            p = BinaryMask(rng.random((32, 32)) < 0.5)
            g = BinaryMask(rng.random((32, 32)) < 0.5)
        tol = int(rng.integers(0, 4))
        fe = evaluate_frame(p, g, tol)
        assert fe.j == pytest.approx(ref.iou(p.bits, g.bits), abs=1e-12)
        assert fe.f == pytest.approx(ref.f_measure(p.bits, g.bits, tol), abs=1e-12)


@settings(max_examples=60)
@given(arrays(np.bool_, (12, 12)), arrays(np.bool_, (12, 12)), st.integers(0, 3))
def test_f_measure_properties(a, b, tol):
    p, g = BinaryMask(a), BinaryMask(b)
    f = contour_accuracy(p, g, tol)
    assert 0.0 <= f <= 1.0
    assert f == pytest.approx(contour_accuracy(g, p, tol), abs=1e-12)
    assert contour_accuracy(p, g, tol + 1) >= f - 1e-12
    assert f == pytest.approx(ref.f_measure(a, b, tol), abs=1e-12)


def test_evaluate_video_examples():
    gt = [box(5, 5, 10, 10), box(6, 6, 10, 10), box(7, 7, 10, 10)]
    perfect = evaluate_video({1: gt}, {1: gt})
    assert perfect.j == perfect.f == perfect.jf == 1.0
    empties = [BinaryMask.empty(40, 40)] * 3
    blank = evaluate_video({1: empties}, {1: gt})
    assert blank.j == blank.f == 0.0
    # missing objects count as empty predictions
    assert evaluate_video({}, {1: gt}).jf == 0.0

    pred = [gt[0], box(6, 8, 10, 10), box(20, 20, 10, 10)]
    ev = evaluate_video({1: pred}, {1: gt}, tolerance=2)
    js = [ref.iou(p.bits, g.bits) for p, g in zip(pred[1:], gt[1:])]
    fs = [ref.f_measure(p.bits, g.bits, 2) for p, g in zip(pred[1:], gt[1:])]
    assert ev.j == pytest.approx(np.mean(js), abs=1e-12)
    assert ev.f == pytest.approx(np.mean(fs), abs=1e-12)
    assert ev.jf == pytest.approx((np.mean(js) + np.mean(fs)) / 2, abs=1e-12)


def test_evaluate_video_frame_zero_ignored_and_objects_averaged():
    gt = [box(5, 5, 10, 10)] * 3
    wrong_first = [BinaryMask.empty(40, 40), *gt[1:]]
    assert evaluate_video({1: wrong_first}, {1: gt}).jf == 1.0
    two = evaluate_video({1: gt, 2: [BinaryMask.empty(40, 40)] * 3}, {1: gt, 2: gt})
    assert two.per_object[1]["J&F"] == 1.0 and two.per_object[2]["J&F"] == 0.0
    assert two.jf == 0.5
    with pytest.raises(ValidationError):
        evaluate_video({1: gt[:2]}, {1: gt})
    with pytest.raises(ValidationError):
        evaluate_video({1: gt[:1]}, {1: gt[:1]})
    with pytest.raises(ValidationError):
        evaluate_video({}, {})


def test_buckets():
    assert [bucket_of(n) for n in (0, 1, 2, 5)] == ["no-change", "single-change", "multi-change", "multi-change"]
    assert BUCKETS == ("no-change", "single-change", "multi-change")


def ve(name, j, f):
    return VideoEval(name, j, f)


def test_bucket_report_examples():
    same = bucket_report([ve("a", .5, .7), ve("b", .9, .1)], [SceneList(), SceneList()])
    assert same.buckets["no-change"] == same.overall
    assert same.buckets["single-change"] is None and same.buckets["multi-change"] is None

    rep = bucket_report([ve("a", 1, 1), ve("b", .5, .5), ve("c", 0, 0)],
                        {"a": SceneList(), "b": SceneList((4,)), "c": SceneList((1, 2, 3, 4, 5))})
    assert [rep.buckets[b]["videos"] for b in BUCKETS] == [1, 1, 1]
    assert rep.videos[2]["bucket"] == "multi-change" and rep.videos[2]["scene_changes"] == 5
    row = rep.summary_row()
    assert list(row)[-1] == "overall J&F" and row["single-change J&F"] == 0.5

    evs = [ve(f"v{i}", j, f) for i, (j, f) in enumerate(
        [(.9, .8), (.7, .6), (.5, .6), (.4, .2), (.3, .5), (.8, .8)])]
    cuts = [(), (3,), (), (2, 9), (7,), (1, 2, 3)]
    rep = bucket_report(evs, [SceneList(c) for c in cuts])
    assert rep.buckets["no-change"]["J&F"] == pytest.approx(((.9 + .8) / 2 + (.5 + .6) / 2) / 2)
    assert rep.buckets["single-change"]["J"] == pytest.approx((.7 + .3) / 2)
    assert rep.buckets["multi-change"]["F"] == pytest.approx((.2 + .8) / 2)
    assert rep.overall["J&F"] == pytest.approx(np.mean([(j + f) / 2 for j, f in
                                                        [(.9, .8), (.7, .6), (.5, .6), (.4, .2), (.3, .5), (.8, .8)]]))
    assert sum(rep.buckets[b]["videos"] for b in BUCKETS) == 6


def test_bucket_report_requires_scene_lists():
    with pytest.raises(MissingSceneListError):
        bucket_report([ve("a", 1, 1)], {})
    with pytest.raises(MissingSceneListError):
        bucket_report([ve("a", 1, 1)], [])


def vis(*flags):
    return [box(1, 1, 3, 3) if f else BinaryMask.empty(40, 40) for f in flags]


def test_disappearance():
    assert not object_disappears(vis(1, 1, 1, 1))
    assert object_disappears(vis(*([1] * 10), 0, 1))
    assert not object_disappears(vis(0, 0, 1, 1))       # late appearance is not a disappearance
    assert disappearance_rate([vis(1, 1), vis(1, 0), vis(1, 1), vis(0, 1)]) == 0.25
    with pytest.raises(ValidationError):
        disappearance_rate([])


def test_dataset_stats_constant_videos():
    frames = [solid_frame((200, 30, 30), 8, 8, i) for i in range(30)]
    gt_a = {1: vis(*([1] * 30))}
    gt_b = {1: vis(*([1] * 10), 0, *([1] * 19))}
    videos = [SimpleNamespace(name="a", frames=frames, gt=gt_a, fps=30.0),
              SimpleNamespace(name="b", frames=frames, gt=gt_b, fps=30.0)]
    assert dataset_stats(videos) == {"video_count": 2, "avg_duration_s": 1.0,
                                     "disappearance_rate": 0.5, "avg_scene_count": 1.0}
    videos[0].fps = None
    with pytest.raises(MissingFpsError):
        dataset_stats(videos)
