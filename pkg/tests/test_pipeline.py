from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest

from secvos.backends import ConceptRequest, LocalEndpoint, PixelRequest, RecordingEndpoint, toy_endpoint
from secvos.core import BinaryMask
from secvos.errors import BackendError, DimensionMismatchError, ValidationError
from secvos.pipeline import RunStats, TrackerConfig, sweep_guidance_ratio, track, track_offline, track_video
from secvos.synth import ObjectTrack, SyntheticSpec, bounce_path, hue_color, late_concept_spec, planted_video, render_synthetic
from tests.conftest import solid_frame


def endpoints(frames):
    return (RecordingEndpoint(toy_endpoint("pixel", frames)),
            RecordingEndpoint(toy_endpoint("concept", frames)))


@pytest.fixture(scope="module")
def one_cut():
    return render_synthetic(planted_video("one_cut", (20,), seed=5, n_frames=40, noise=2))


@pytest.fixture(scope="module")
def late():
    return render_synthetic(late_concept_spec())


def run(frames, gts, cfg=TrackerConfig(), oids=None):
    px, cc = endpoints(frames)
    first = {oid: seq[0] for oid, seq in gts.items() if oids is None or oid in oids}
    return track(frames, first, cfg, px, cc), px, cc


def test_config_defaults_and_validation():
    cfg = TrackerConfig()
    assert (cfg.scene_threshold, cfg.memory_window, cfg.keyframe_capacity) == (0.35, 22, 6)
    assert (cfg.diversity_threshold, cfg.confidence_threshold, cfg.mode) == (0.2, 0.5, "online")
    assert cfg.force_concept_every_frame is False and cfg.memory_reset is True
    assert TrackerConfig.from_mapping({"mode": "offline"}).mode == "offline"
    assert TrackerConfig.from_mapping(cfg.to_dict()) == cfg
    for bad in ({"mode": "batch"}, {"memory_window": 0}, {"confidence_threshold": 2.0},
                {"force_concept_every_frame": True, "disable_concept": True}, {"colour": 1}):
        with pytest.raises(ValidationError):
            TrackerConfig.from_mapping(bad)


def test_constant_scene_never_invokes_concept():
    frames = [solid_frame((30, 200, 30), 24, 16, t) for t in range(12)]
    mask = BinaryMask.from_box(24, 16, 2, 2, 4, 4)
    res, px, cc = run(frames, {1: [mask]})
    assert res.stats.concept_invocations == 0 and res.stats.concept_guidance_ratio == 0.0
    assert res.scenes.cut_indices == () and not cc.requests and len(px.requests) == 11


def test_one_cut_routing(one_cut):
    frames, gts = one_cut
    res, px, cc = run(frames, gts)
    s = res.stats
    assert res.scenes.cut_indices == (20,)
    assert s.frames_total == 39 and s.concept_invocations == 1
    assert s.concept_guidance_ratio == 1 / 39
    assert [r.frame_index for r in cc.requests] == [20]
    # exactly one backend call per (frame, object), never both paths
    assert sorted(r.frame_index for r in px.requests + cc.requests) == list(range(1, 40))
    assert len(s.frame_durations) == 39
    assert s.memory_resets == 1
    # the concept path re-acquires the teleported object and tracking continues
    for t in range(1, 40):
        assert res.records[1][t].mask == gts[1][t]


def test_records_shape_and_frame_zero(one_cut):
    frames, gts = one_cut
    res, _, _ = run(frames, gts)
    assert set(res.records) == {1} and len(res.records[1]) == len(frames)
    r0 = res.records[1][0]
    assert r0.mask == gts[1][0] and r0.presence_score == r0.confidence == 1.0
    assert [r.frame_index for r in res.records[1]] == list(range(len(frames)))


def test_force_and_disable_ablations(one_cut):
    frames, gts = one_cut
    frames, gts = frames[:50], {1: gts[1][:50]}
    forced, px, cc = run(frames, gts, TrackerConfig(force_concept_every_frame=True))
    assert forced.stats.concept_guidance_ratio == 1.0 and not px.requests
    none, px, cc = run(frames, gts, TrackerConfig(disable_concept=True))
    assert none.stats.concept_invocations == 0 and not cc.requests
    assert none.scenes.cut_indices == (20,)


def test_memory_reset_flag(one_cut):
    frames, gts = one_cut
    res, px, _ = run(frames, gts, TrackerConfig(memory_reset=False))
    assert res.stats.memory_resets == 0
    # without the reset the window after the cut still holds pre-cut entries
    after = next(r for r in px.requests if r.frame_index == 21)
    assert any(0 < m.frame_index < 20 for m in after.memory)
    res, px, _ = run(frames, gts)
    after = next(r for r in px.requests if r.frame_index == 21)
    assert [m.frame_index for m in after.memory] == [0, 20]


def test_replay_determinism(one_cut):
    frames, gts = one_cut
    a, _, _ = run(frames, gts)
    b, _, _ = run(frames, gts)
    assert a.masks() == b.masks()
    assert a.stats.to_dict(timings=False) == b.stats.to_dict(timings=False)


def test_offline_without_cuts_equals_online():
    frames, gts = render_synthetic(planted_video("still", (), seed=2, n_frames=25, noise=2))
    on, _, _ = run(frames, gts)
    off, _, cc = run(frames, gts, TrackerConfig(mode="offline"))
    assert off.masks() == on.masks() and not cc.requests
    assert off.stats.frames_total == 2 * on.stats.frames_total
    assert len(off.pass_stats) == 2


def test_offline_bank_is_frozen_across_pass_two(late):
    frames, gts = late
    px, cc = endpoints(frames)
    cfg = TrackerConfig(mode="offline", force_concept_every_frame=True)
    res = track_offline(frames, {1: gts[1][0]}, cfg, px, cc)
    n = len(frames) - 1
    assert len(cc.requests) == 2 * n
    second = [tuple((k.frame_index, k.is_anchor) for k in r.keyframes) for r in cc.requests[n:]]
    assert len(set(second)) == 1
    assert res.banks[1].frozen
    assert second[0] == tuple((k.frame_index, k.is_anchor) for k in res.banks[1].contents())


def test_offline_concept_requests_see_late_keyframes(late):
    frames, gts = late
    first = {1: gts[1][0]}
    px, cc = endpoints(frames)
    online = track_video(frames, first, TrackerConfig(), px, cc)
    online_at_cut = [k.frame_index for k in cc.requests[0].keyframes]
    assert cc.requests[0].frame_index == 30 and online_at_cut == [0]

    px, cc = endpoints(frames)
    offline = track_offline(frames, first, TrackerConfig(mode="offline"), px, cc)
    pass2 = [r for r in cc.requests[len(online.scenes.cut_indices):]]
    at_cut = next(r for r in pass2 if r.frame_index == 30)
    idx = [k.frame_index for k in at_cut.keyframes]
    assert idx[0] == 0 and max(idx) > 30
    assert online.stats.keyframes_admitted == offline.pass_stats[0].keyframes_admitted


def test_sweep_edges(one_cut):
    frames, gts = one_cut
    px, cc = endpoints(frames)
    rows = sweep_guidance_ratio(frames, {1: gts[1][0]}, gts, [1.0, -1e-9, 0.2, 0.35, 0.5], px, cc)
    ratios = [r["ratio"] for r in rows]
    assert ratios[0] == 0.0 and ratios[1] == 1.0
    assert ratios[2] == ratios[3] == ratios[4] == 1 / 39
    assert set(rows[0]) == {"threshold", "ratio", "J&F", "J", "F"}
    assert rows[3]["J&F"] == 1.0


class Failing:
    role = "pixel"

    def __init__(self, fail_at):
        self.fail_at = fail_at

    def segment(self, req):
        if req.frame_index == self.fail_at:
            raise BackendError("model crashed")
        from secvos.backends.echo import echo_segment
        return echo_segment(req)

    def close(self):
        pass


def test_backend_errors_carry_context_or_are_recorded(one_cut):
    frames, gts = one_cut
    frames, first = frames[:10], {1: gts[1][0]}
    cc = toy_endpoint("concept", frames)
    with pytest.raises(BackendError, match="frame 4.*object 1|object 1.*frame 4"):
        track_video(frames, first, TrackerConfig(), Failing(4), cc)
    res = track_video(frames, first, TrackerConfig(keep_going=True), Failing(4), cc)
    assert res.stats.failures[0]["frame_index"] == 4
    assert res.records[1][4].mask.is_empty() and res.records[1][5].mask == gts[1][0]


def test_input_validation(one_cut):
    frames, gts = one_cut
    px, cc = endpoints(frames)
    with pytest.raises(ValidationError):
        track_video(frames, {}, TrackerConfig(), px, cc)
    with pytest.raises(ValidationError):
        track_video(frames, {1: BinaryMask.empty(160, 120)}, TrackerConfig(), px, cc)
    with pytest.raises(DimensionMismatchError):
        track_video(frames, {1: BinaryMask.from_box(10, 10, 0, 0, 2, 2)}, TrackerConfig(), px, cc)
    with pytest.raises(ValidationError):
        track_video([], {1: gts[1][0]}, TrackerConfig(), px, cc)


def test_multi_object_banks_and_per_object_invocations():
    rng = np.random.default_rng(9)
    n, cut = 30, 15
    size, frame = (16, 16), (120, 160)
    tracks = []
    for oid, (start, k) in enumerate([((8, 8), 2), ((80, 120), 8)], start=1):
        pos = bounce_path(rng, cut, start, size, frame) + bounce_path(rng, n - cut, (start[0], 72), size, frame)
        tracks.append(ObjectTrack(oid, 16, 16, tuple(pos), tuple([(hue_color(k), hue_color(k))] * n)))
    spec = SyntheticSpec("two", 160, 120, n, (hue_color(17), hue_color(26)), (cut,), tuple(tracks))
    frames, gts = render_synthetic(spec)
    res, px, cc = run(frames, gts)
    assert res.stats.frames_total == 2 * (n - 1)
    assert res.stats.concept_invocations == 2
    assert sorted(r.object_id for r in cc.requests) == [1, 2]
    assert set(res.banks) == {1, 2} and res.banks[1] is not res.banks[2]
    for oid in (1, 2):
        assert res.records[oid][n - 1].mask == gts[oid][n - 1]


def test_run_stats_combine():
    a = RunStats(10, 2, [0.1], 1, 1)
    b = RunStats(10, 0, [0.2], 0, 2)
    c = RunStats.combine([a, b])
    assert (c.frames_total, c.concept_invocations, c.memory_resets) == (20, 2, 3)
    assert c.concept_guidance_ratio == 0.1
    assert RunStats().concept_guidance_ratio == 0.0
    assert "frame_durations" not in c.to_dict(timings=False)
