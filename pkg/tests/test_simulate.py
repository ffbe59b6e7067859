import itertools
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slicetrack.core import GroundTruth, Point, TrackerConfig, write_detections, write_truth
from slicetrack.evaluation import evaluate
from slicetrack.matching import track
from slicetrack.simulate import (
    ScenarioConfig,
    ScriptedObject,
    generate,
    light_traffic,
    load_config,
    merge_scene,
    occlusion_free,
    save_config,
    scene_margins,
    separable_scene,
)

BASE = ScenarioConfig(
    screen=(100.0, 80.0),
    n_slices=10,
    arrival_rate=0.0,
    speed_range=(1.0, 2.0),
    heading_jitter=0.2,
    min_separation=5.0,
    rng_seed=1,
)


def test_no_arrivals_all_empty():
    det, truth = generate(BASE)
    assert len(det) == 10 and all(len(s) == 0 for s in det)
    assert truth.ids() == set()


def test_single_scripted_object_kinematics():
    cfg = replace(BASE, n_slices=60, scripted=(ScriptedObject(0, 0.0, 40.0, 2.0, 0.0),))
    det, truth = generate(cfg)
    present = [s for s, sl in enumerate(det) if len(sl)]
    assert present == list(range(50))
    assert det[49].points == (Point(98.0, 40.0),)


def test_same_seed_identical_files(tmp_path):
    cfg = replace(BASE, n_slices=200, arrival_rate=0.2)
    out = []
    for k in range(2):
        det, truth = generate(cfg)
        write_detections(det, tmp_path / f"d{k}.csv")
        write_truth(truth, tmp_path / f"t{k}.csv")
        out.append(((tmp_path / f"d{k}.csv").read_bytes(), (tmp_path / f"t{k}.csv").read_bytes()))
    assert out[0] == out[1]
    assert len(out[0][0]) > 100


def test_detections_match_truth_without_noise():
    det, truth = generate(replace(BASE, n_slices=200, arrival_rate=0.2))
    for d, t in zip(det, truth.slices):
        assert d.points == tuple(p for p, _ in t)


def test_kinematic_consistency():
    det, truth = generate(replace(BASE, n_slices=200, arrival_rate=0.2))
    tracks: dict[int, list[tuple[int, Point]]] = {}
    for s, sl in enumerate(truth.slices):
        for p, tid in sl:
            tracks.setdefault(tid, []).append((s, p))
    assert tracks
    for samples in tracks.values():
        slices = [s for s, _ in samples]
        assert slices == list(range(slices[0], slices[0] + len(slices)))
        if len(samples) >= 3:
            v = [(b.x - a.x, b.y - a.y) for (_, a), (_, b) in zip(samples, samples[1:])]
            for u in v[1:]:
                assert u == pytest.approx(v[0], abs=1e-9)


def test_objects_stay_on_screen():
    det, _ = generate(replace(BASE, n_slices=300, arrival_rate=0.3))
    for sl in det:
        for p in sl.points:
            assert 0 <= p.x <= 99 and 0 <= p.y <= 79


def test_jitter_perturbs_detections_only():
    cfg = replace(BASE, n_slices=50, arrival_rate=0.3, jitter_sigma=0.5)
    det, truth = generate(cfg)
    moved = sum(
        1 for d, t in zip(det, truth.slices) for a, (b, _) in zip(d.points, t) if a != b
    )
    assert moved > 0


def test_merge_radius_fuses_points():
    objs = (ScriptedObject(0, 10.0, 10.0, 1.0, 0.0), ScriptedObject(0, 12.0, 10.0, 1.0, 0.0))
    det, truth = generate(replace(BASE, n_slices=3, merge_radius=3.0, scripted=objs))
    assert [len(s) for s in det] == [1, 1, 1]
    assert det[0].points == (Point(11.0, 10.0),)
    assert [len(s) for s in truth.slices] == [2, 2, 2]


@pytest.mark.parametrize(
    "change",
    [
        {"n_slices": 0},
        {"arrival_rate": -1.0},
        {"speed_range": (3.0, 1.0)},
        {"speed_range": (-1.0, 1.0)},
        {"heading_jitter": 2.0},
        {"screen": (0.0, 10.0)},
    ],
)
def test_config_validation(change):
    with pytest.raises(ValueError):
        replace(BASE, **change)


def test_config_json_roundtrip(tmp_path):
    cfg = replace(BASE, scripted=(ScriptedObject(2, 1.0, 2.0, 0.5, 0.0),), merge_radius=2.0)
    save_config(cfg, tmp_path / "c.json")
    assert load_config(tmp_path / "c.json") == cfg


def test_config_missing_field(tmp_path):
    (tmp_path / "c.json").write_text('{"screen": [10, 10]}')
    with pytest.raises(ValueError, match="missing"):
        load_config(tmp_path / "c.json")


# -- occlusion_free ------------------------------------------------------------


def brute_occlusion_free(truth: GroundTruth, T: float) -> bool:
    last = {}
    for sl in truth.slices:
        for (p, a), (q, b) in itertools.combinations(sl, 2):
            if math.dist((p.x, p.y), (q.x, q.y)) <= T:
                return False
        now = {tid: p for p, tid in sl}
        for tid, p in now.items():
            if tid in last and math.dist((p.x, p.y), (last[tid].x, last[tid].y)) > T:
                return False
        last = now
    return True


def test_empty_scene_is_occlusion_free():
    assert occlusion_free(GroundTruth(((), ())), 1.0)


def test_close_pair_is_not_occlusion_free():
    T = 4.0
    truth = GroundTruth((((Point(10, 10), 1), (Point(10 + 0.5 * T, 10), 2)),))
    assert not occlusion_free(truth, T)


def test_fast_object_is_not_occlusion_free():
    truth = GroundTruth((((Point(10, 10), 1),), ((Point(20, 10), 1),)))
    assert not occlusion_free(truth, 5.0)
    assert occlusion_free(truth, 10.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.5, 8.0), st.floats(0.05, 0.6))
def test_occlusion_free_matches_brute_force(seed, T, rate):
    cfg = replace(BASE, n_slices=40, arrival_rate=rate, rng_seed=seed, speed_range=(0.5, 6.0))
    _, truth = generate(cfg)
    assert occlusion_free(truth, T) == brute_occlusion_free(truth, T)


# -- scene builders ------------------------------------------------------------


def test_separable_scene_is_tracked_exactly():
    cfg, det, truth, T = separable_scene(3, n_slices=150)
    assert occlusion_free(truth, T)
    max_step, min_sep = scene_margins(truth)
    assert max_step <= T < min_sep / 2
    trajs, events = track(det, TrackerConfig(T))
    assert events == []
    assert evaluate(trajs, truth, T / 2).error_free


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_error_free_when_well_separated(seed):
    """Any scene whose objects stay more than 2T apart while moving at most
    T per slice is tracked without a single wrong link."""
    det, truth = generate(light_traffic(seed, n_slices=120))
    max_step, min_sep = scene_margins(truth)
    T = max(max_step, 1e-6) * 1.01
    if not min_sep > 2 * T:
        return
    trajs, events = track(det, TrackerConfig(T))
    report = evaluate(trajs, truth, T / 2)
    assert events == [] and report.error_free
    # trajectories equal ground truth up to renaming
    assert len(trajs) == len(truth.ids())


def test_merge_scene_reports_merge_slice():
    cfg, det, truth, T, merge_slice, pair = merge_scene(2)
    trajs, events = track(det, TrackerConfig(T))
    assert any(e.slice_index == merge_slice and e.kind == "merge" for e in events)
    others = truth.restrict(truth.ids() - pair)
    assert evaluate(trajs, others, T / 2).error_free
