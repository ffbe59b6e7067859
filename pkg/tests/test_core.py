import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slicetrack.core import (
    DetectionSlice,
    GroundTruth,
    ParseError,
    Point,
    Sample,
    TrackerConfig,
    Trajectory,
    read_detections,
    read_trajectories,
    read_truth,
    write_detections,
    write_trajectories,
    write_truth,
)


def _write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_point_rejects_bad_coordinates():
    with pytest.raises(ValueError):
        Point(float("nan"), 0.0)
    with pytest.raises(ValueError):
        Point(0.0, math.inf)
    with pytest.raises(ValueError):
        Point(-1.0, 0.0)


def test_read_two_slices(tmp_path):
    slices = read_detections(_write(tmp_path, "slice,x,y\n0,1.0,2.0\n1,1.5,2.0\n"))
    assert [s.slice_index for s in slices] == [0, 1]
    assert slices[0].points == (Point(1.0, 2.0),)
    assert slices[1].points == (Point(1.5, 2.0),)


def test_read_fills_gaps(tmp_path):
    slices = read_detections(_write(tmp_path, "slice,x,y\n0,1,1\n2,1,1\n"))
    assert len(slices) == 3
    assert slices[1].points == ()


def test_read_unsorted_keeps_row_order_within_slice(tmp_path):
    text = "slice,x,y\n1,5,5\n0,1,1\n1,3,3\n"
    slices = read_detections(_write(tmp_path, text))
    assert slices[1].points == (Point(5, 5), Point(3, 3))


@pytest.mark.parametrize(
    "body, line",
    [
        ("0,a,1\n", 2),
        ("0,1,1\n-1,1,1\n", 3),
        ("0,1\n", 2),
        ("0,1,-4\n", 2),
    ],
)
def test_read_errors_name_line(tmp_path, body, line):
    with pytest.raises(ParseError) as exc:
        read_detections(_write(tmp_path, "slice,x,y\n" + body))
    assert exc.value.line == line
    assert f"line {line}" in str(exc.value)


def test_read_bad_header(tmp_path):
    with pytest.raises(ParseError):
        read_detections(_write(tmp_path, "frame,x,y\n0,1,1\n"))


def test_write_trajectories_two_slices(tmp_path):
    traj = Trajectory(1, 0, [(0.0, 0.0), (3.0, 4.0)], [5.0])
    out = tmp_path / "t.csv"
    write_trajectories([traj], out)
    lines = out.read_text().splitlines()
    assert lines[0] == "object_id,slice,x,y,speed"
    assert lines[1] == "1,0,0.0,0.0,5.0"
    assert lines[2] == "1,1,3.0,4.0,"


def test_write_trajectories_empty(tmp_path):
    out = tmp_path / "t.csv"
    write_trajectories([], out)
    assert out.read_text() == "object_id,slice,x,y,speed\n"


def test_write_trajectories_grouped_by_id(tmp_path):
    b = Trajectory(2, 0, [(9.0, 9.0), (9.0, 8.0)], [1.0])
    a = Trajectory(1, 1, [(1.0, 1.0), (2.0, 1.0)], [1.0])
    out = tmp_path / "t.csv"
    write_trajectories([b, a], out)
    ids = [line.split(",")[0] for line in out.read_text().splitlines()[1:]]
    assert ids == ["1", "1", "2", "2"]
    assert read_trajectories(out) == [a, b]


def test_trajectory_from_samples_contract():
    ok = Trajectory.from_samples(3, [Sample(4, Point(1, 1), 2.0), Sample(5, Point(3, 1))])
    assert ok.first_slice == 4 and ok.last_slice == 5
    assert ok.samples[0].speed == 2.0 and ok.samples[-1].speed is None
    with pytest.raises(ValueError):
        Trajectory.from_samples(3, [Sample(4, Point(1, 1)), Sample(6, Point(1, 1))])
    with pytest.raises(ValueError):
        Trajectory.from_samples(3, [Sample(4, Point(1, 1)), Sample(5, Point(1, 1), 1.0)])


def test_tracker_config_validation():
    assert TrackerConfig(2.0).ambiguity_policy == "nearest-neighbor-resolve"
    with pytest.raises(ValueError):
        TrackerConfig(0.0)
    with pytest.raises(ValueError):
        TrackerConfig(1.0, fps=0)
    with pytest.raises(ValueError):
        TrackerConfig(1.0, ambiguity_policy="hungarian")


def test_truth_roundtrip(tmp_path):
    truth = GroundTruth(((( Point(1, 2), 1),), (), ((Point(2, 2), 1), (Point(7, 7), 2))))
    p = tmp_path / "gt.csv"
    write_truth(truth, p)
    assert p.read_text().splitlines()[0] == "slice,x,y,true_id"
    assert read_truth(p) == truth


coords = st.floats(min_value=0, max_value=1e6, allow_nan=False, allow_infinity=False)
slice_lists = st.lists(st.lists(st.tuples(coords, coords), max_size=5), min_size=1, max_size=8)


@settings(max_examples=60, deadline=None)
@given(slice_lists)
def test_detections_roundtrip(tmp_path_factory, raw):
    # trailing empty slices are not representable in the CSV
    while len(raw) > 1 and not raw[-1]:
        raw.pop()
    slices = [DetectionSlice(s, tuple(Point(x, y) for x, y in pts)) for s, pts in enumerate(raw)]
    p = tmp_path_factory.mktemp("rt") / "d.csv"
    write_detections(slices, p)
    back = read_detections(p)
    if not any(raw):
        assert back == []
    else:
        assert back == slices


@settings(max_examples=60, deadline=None)
@given(st.sets(st.integers(min_value=0, max_value=200), min_size=1, max_size=20))
def test_gap_fill_length(tmp_path_factory, indices):
    p = tmp_path_factory.mktemp("gap") / "d.csv"
    p.write_text("slice,x,y\n" + "".join(f"{s},1,1\n" for s in sorted(indices, reverse=True)))
    slices = read_detections(p)
    assert len(slices) == max(indices) + 1
    assert [s.slice_index for s in slices] == list(range(max(indices) + 1))
    assert {s.slice_index for s in slices if s.points} == indices


def test_slice_xy_is_read_only():
    sl = DetectionSlice(0, (Point(1, 2), Point(3, 4)))
    np.testing.assert_array_equal(sl.xy, [[1, 2], [3, 4]])
    with pytest.raises(ValueError):
        sl.xy[0, 0] = 5
