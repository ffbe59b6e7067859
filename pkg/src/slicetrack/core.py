"""Domain types and CSV formats shared by the detection, tracking and
evaluation stages.

Detections travel between stages as a CSV with header ``slice,x,y``;
tracker output as ``object_id,slice,x,y,speed``; simulator ground truth as
``slice,x,y,true_id``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import NamedTuple, Optional, Sequence

import numpy as np

DETECTIONS_HEADER = ("slice", "x", "y")
TRAJECTORIES_HEADER = ("object_id", "slice", "x", "y", "speed")
TRUTH_HEADER = ("slice", "x", "y", "true_id")


class ParseError(ValueError):
    """Raised when an input file does not follow its declared format."""

    def __init__(self, message: str, line: Optional[int] = None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}: "
        if line is not None:
            where += f"line {line}: "
        super().__init__(where + message)


@dataclass(frozen=True, slots=True)
class Point:
    """A blob centroid in pixel coordinates (x = column, y = row)."""

    x: float
    y: float

    def __post_init__(self):
        if type(self.x) is not float or type(self.y) is not float:
            object.__setattr__(self, "x", float(self.x))
            object.__setattr__(self, "y", float(self.y))
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite point ({self.x}, {self.y})")
        if self.x < 0 or self.y < 0:
            raise ValueError(f"negative point coordinate ({self.x}, {self.y})")


@dataclass(frozen=True)
class DetectionSlice:
    """All points detected in one time slice. Point order is significant."""

    slice_index: int
    points: tuple[Point, ...] = ()

    def __post_init__(self):
        if self.slice_index < 0:
            raise ValueError("slice_index must be >= 0")
        if not isinstance(self.points, tuple):
            object.__setattr__(self, "points", tuple(self.points))

    def __len__(self) -> int:
        return len(self.points)

    @cached_property
    def xy(self) -> np.ndarray:
        """Points as a read-only ``(n, 2)`` float array."""
        arr = np.array([(p.x, p.y) for p in self.points], dtype=float).reshape(-1, 2)
        arr.flags.writeable = False
        return arr


def as_xy(points) -> np.ndarray:
    """``(n, 2)`` coordinate array from a slice, an array or a list of points."""
    if isinstance(points, DetectionSlice):
        return points.xy
    if isinstance(points, np.ndarray):
        return points.reshape(-1, 2).astype(float, copy=False)
    return np.array([(p.x, p.y) for p in points], dtype=float).reshape(-1, 2)


class Sample(NamedTuple):
    slice_index: int
    point: Point
    speed: Optional[float] = None


@dataclass(frozen=True, eq=False)
class Trajectory:
    """One object's positions over a contiguous run of slices.

    Positions are held as an ``(n, 2)`` array starting at ``first_slice``.
    ``speeds`` (length ``n - 1``) is the displacement to the next sample, or
    ``None`` when the trajectory has not been speed-annotated; the final
    sample never has a speed.
    """

    object_id: int
    first_slice: int
    xy: np.ndarray
    speeds: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.object_id < 1:
            raise ValueError("object ids are positive integers")
        if self.first_slice < 0:
            raise ValueError("first_slice must be >= 0")
        xy = np.asarray(self.xy, dtype=float).reshape(-1, 2)
        if not np.isfinite(xy).all() or (xy < 0).any():
            raise ValueError(f"trajectory {self.object_id}: invalid coordinates")
        object.__setattr__(self, "xy", xy)
        if self.speeds is not None:
            sp = np.asarray(self.speeds, dtype=float).reshape(-1)
            if len(sp) != max(len(xy) - 1, 0):
                raise ValueError(
                    f"trajectory {self.object_id}: need {len(xy) - 1} speeds, got {len(sp)}"
                )
            object.__setattr__(self, "speeds", sp)

    @classmethod
    def from_samples(cls, object_id: int, samples: Sequence[Sample]) -> "Trajectory":
        if not samples:
            raise ValueError(f"trajectory {object_id}: no samples")
        first = samples[0].slice_index
        for k, smp in enumerate(samples):
            if smp.slice_index != first + k:
                raise ValueError(f"trajectory {object_id}: slice indices not contiguous")
        if samples[-1].speed is not None:
            raise ValueError(f"trajectory {object_id}: last sample cannot carry a speed")
        head = [smp.speed for smp in samples[:-1]]
        if all(v is None for v in head) and len(samples) > 1:
            speeds = None
        elif any(v is None for v in head):
            raise ValueError(f"trajectory {object_id}: speeds partially missing")
        else:
            speeds = np.array(head, dtype=float)
        xy = np.array([(smp.point.x, smp.point.y) for smp in samples], dtype=float)
        return cls(object_id, first, xy, speeds)

    def __len__(self) -> int:
        return len(self.xy)

    @property
    def last_slice(self) -> int:
        return self.first_slice + len(self.xy) - 1

    @property
    def slice_indices(self) -> np.ndarray:
        return np.arange(self.first_slice, self.first_slice + len(self.xy))

    @property
    def samples(self) -> tuple[Sample, ...]:
        speeds = [None] * len(self.xy)
        if self.speeds is not None:
            speeds[:-1] = self.speeds.tolist()
        return tuple(
            Sample(self.first_slice + k, Point(x, y), v)
            for k, ((x, y), v) in enumerate(zip(self.xy.tolist(), speeds))
        )

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        if (self.speeds is None) != (other.speeds is None):
            return False
        return (
            self.object_id == other.object_id
            and self.first_slice == other.first_slice
            and np.array_equal(self.xy, other.xy)
            and (self.speeds is None or np.array_equal(self.speeds, other.speeds))
        )

    __hash__ = None


@dataclass(frozen=True)
class TrackerConfig:
    """Tracker parameters.

    ``threshold`` is the largest inter-slice distance (pixels) at which two
    points may be the same object. Without ``fps`` speeds are reported in
    pixels per slice.
    """

    threshold: float
    fps: Optional[float] = None
    ambiguity_policy: str = "nearest-neighbor-resolve"

    POLICIES = ("flag-only", "nearest-neighbor-resolve")

    def __post_init__(self):
        if not (self.threshold > 0 and math.isfinite(self.threshold)):
            raise ValueError(f"threshold must be > 0, got {self.threshold}")
        if self.fps is not None and not self.fps > 0:
            raise ValueError(f"fps must be > 0, got {self.fps}")
        if self.ambiguity_policy not in self.POLICIES:
            raise ValueError(f"unknown ambiguity policy {self.ambiguity_policy!r}")


def _open_csv(path, expected_header: Sequence[str]):
    path = Path(path)
    fh = path.open(newline="", encoding="utf-8")
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        fh.close()
        raise ParseError("empty file, expected header", line=1, path=path)
    if tuple(h.strip() for h in header) != tuple(expected_header):
        fh.close()
        raise ParseError(
            f"expected header {','.join(expected_header)!r}, got {','.join(header)!r}",
            line=1,
            path=path,
        )
    return fh, reader


def _parse_slice(text: str) -> int:
    value = int(text)
    if value < 0:
        raise ValueError("negative slice index")
    return value


def _parse_point(xs: str, ys: str) -> Point:
    return Point(float(xs), float(ys))


def _group_slices(rows: dict[int, list]) -> list[list]:
    if not rows:
        return []
    n = max(rows) + 1
    return [rows.get(s, []) for s in range(n)]


def read_detections(path) -> list[DetectionSlice]:
    """Read a detections CSV into contiguous slices starting at index 0.

    Missing slice indices become empty slices. Row order within a slice is
    kept.
    """
    fh, reader = _open_csv(path, DETECTIONS_HEADER)
    rows: dict[int, list[Point]] = {}
    with fh:
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ParseError(f"expected 3 fields, got {len(row)}", lineno, path)
            try:
                s = _parse_slice(row[0])
                p = _parse_point(row[1], row[2])
            except ValueError as exc:
                raise ParseError(str(exc), lineno, path) from None
            rows.setdefault(s, []).append(p)
    return [DetectionSlice(s, tuple(pts)) for s, pts in enumerate(_group_slices(rows))]


def write_detections(slices: Sequence[DetectionSlice], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DETECTIONS_HEADER)
        for sl in slices:
            for p in sl.points:
                w.writerow((sl.slice_index, repr(p.x), repr(p.y)))


def write_trajectories(trajectories: Sequence[Trajectory], path) -> None:
    """Write trajectories sorted by (object_id, slice); the last sample of
    each object has an empty speed field."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJECTORIES_HEADER)
        for traj in sorted(trajectories, key=lambda t: t.object_id):
            for smp in traj.samples:
                speed = "" if smp.speed is None else repr(smp.speed)
                w.writerow(
                    (traj.object_id, smp.slice_index, repr(smp.point.x), repr(smp.point.y), speed)
                )


def read_trajectories(path) -> list[Trajectory]:
    fh, reader = _open_csv(path, TRAJECTORIES_HEADER)
    by_id: dict[int, list[Sample]] = {}
    with fh:
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 5:
                raise ParseError(f"expected 5 fields, got {len(row)}", lineno, path)
            try:
                oid = int(row[0])
                if oid < 1:
                    raise ValueError("object_id must be positive")
                s = _parse_slice(row[1])
                p = _parse_point(row[2], row[3])
                speed = float(row[4]) if row[4].strip() else None
            except ValueError as exc:
                raise ParseError(str(exc), lineno, path) from None
            by_id.setdefault(oid, []).append(Sample(s, p, speed))
    out = []
    for oid in sorted(by_id):
        samples = sorted(by_id[oid], key=lambda smp: smp.slice_index)
        try:
            out.append(Trajectory.from_samples(oid, samples))
        except ValueError as exc:
            raise ParseError(str(exc), path=path) from None
    return out


@dataclass(frozen=True)
class GroundTruth:
    """Per-slice ``(Point, true_id)`` pairs produced by the simulator."""

    slices: tuple[tuple[tuple[Point, int], ...], ...]

    def __len__(self) -> int:
        return len(self.slices)

    def ids(self) -> set[int]:
        return {tid for sl in self.slices for _, tid in sl}

    def restrict(self, keep) -> "GroundTruth":
        """Copy holding only the objects whose id is in ``keep``."""
        keep = set(keep)
        return GroundTruth(
            tuple(tuple((p, t) for p, t in sl if t in keep) for sl in self.slices)
        )

    def as_detections(self) -> list[DetectionSlice]:
        return [
            DetectionSlice(s, tuple(p for p, _ in sl))
            for s, sl in enumerate(self.slices)
        ]


def write_truth(truth: GroundTruth, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRUTH_HEADER)
        for s, sl in enumerate(truth.slices):
            for p, tid in sl:
                w.writerow((s, repr(p.x), repr(p.y), tid))


def read_truth(path) -> GroundTruth:
    fh, reader = _open_csv(path, TRUTH_HEADER)
    rows: dict[int, list[tuple[Point, int]]] = {}
    with fh:
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise ParseError(f"expected 4 fields, got {len(row)}", lineno, path)
            try:
                s = _parse_slice(row[0])
                p = _parse_point(row[1], row[2])
                tid = int(row[3])
            except ValueError as exc:
                raise ParseError(str(exc), lineno, path) from None
            rows.setdefault(s, []).append((p, tid))
    return GroundTruth(tuple(tuple(sl) for sl in _group_slices(rows)))
