"""Slice-to-slice point matching with a thresholded distance matrix.

Each pair of consecutive slices yields a q x r binary matrix whose (i, j)
entry is 1 when prev point i and next point j lie within the threshold.
Row and column sums drive the id bookkeeping:

* column sum 0 -> next point j is a newcomer and receives a fresh id;
* row sum 0    -> prev point i left the screen, its id is retired;
* row i and column j both sum to 1 with a 1 at (i, j) -> j inherits i's id.

Anything else (a row or column with two or more 1-entries) is an occlusion:
it is reported as an :class:`OcclusionEvent`, the prev ids involved are
retired and the next points involved start fresh ids.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .core import DetectionSlice, TrackerConfig, Trajectory, as_xy


class ContractError(ValueError):
    """Raised when an operation's preconditions are violated."""


@dataclass(frozen=True, eq=False)
class BinaryDistanceMatrix:
    entries: np.ndarray  # (q, r) bool
    distances: np.ndarray  # (q, r) float, Euclidean

    @property
    def q(self) -> int:
        return self.entries.shape[0]

    @property
    def r(self) -> int:
        return self.entries.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape


@dataclass(frozen=True)
class TrackerState:
    """Ids on screen after the last processed slice.

    ``previous_assignment[i]`` is the id of point i of that slice;
    ``active_ids`` is the set of the same ids.
    """

    active_ids: frozenset = frozenset()
    previous_assignment: tuple[int, ...] = ()
    max_id_ever: int = 0

    @classmethod
    def initial(cls, max_id_ever: int = 0) -> "TrackerState":
        return cls(frozenset(), (), max_id_ever)

    def check(self) -> None:
        ids = self.previous_assignment
        if len(set(ids)) != len(ids):
            raise ContractError("previous_assignment ids are not distinct")
        if set(ids) != set(self.active_ids):
            raise ContractError("active_ids differs from previous_assignment")
        if ids and max(ids) > self.max_id_ever:
            raise ContractError("max_id_ever below an issued id")


@dataclass(frozen=True)
class OcclusionEvent:
    """A row ("split") or column ("merge") with two or more surviving entries.

    ``slice_index`` is the index of the later of the two slices.
    """

    slice_index: int
    kind: str
    prev: tuple[int, ...]
    next: tuple[int, ...]

    def __post_init__(self):
        if self.kind not in ("merge", "split"):
            raise ValueError(f"unknown occlusion kind {self.kind!r}")
        many = self.prev if self.kind == "merge" else self.next
        if len(many) < 2:
            raise ValueError(f"{self.kind} event needs >= 2 indices on the shared side")

    def to_json(self) -> dict:
        return {
            "slice": self.slice_index,
            "kind": self.kind,
            "prev": list(self.prev),
            "next": list(self.next),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "OcclusionEvent":
        return cls(int(obj["slice"]), obj["kind"], tuple(obj["prev"]), tuple(obj["next"]))


@dataclass(frozen=True)
class FrameRateParams:
    free_flow_speed: float  # distance / second
    gradient_b: float  # distance^2 / (second * object)


def build_distance_matrix(prev, next, threshold: float) -> BinaryDistanceMatrix:
    """Pairwise Euclidean distances between two slices and their thresholded
    mask. A distance exactly equal to ``threshold`` counts as a match."""
    if not threshold > 0:
        raise ContractError(f"threshold must be > 0, got {threshold}")
    a = as_xy(prev)
    b = as_xy(next)
    dx = np.subtract.outer(a[:, 0], b[:, 0])
    dy = np.subtract.outer(a[:, 1], b[:, 1])
    dx *= dx
    dy *= dy
    dx += dy
    dist = np.sqrt(dx, out=dx)
    return BinaryDistanceMatrix(dist <= threshold, dist)


def refine_nearest_neighbor(m: BinaryDistanceMatrix) -> BinaryDistanceMatrix:
    """Keep only the closest candidate in every row with two or more entries.

    Equal distances resolve to the lowest column index.
    """
    entries = m.entries
    if entries.size == 0:
        return BinaryDistanceMatrix(entries.copy(), m.distances)
    rows = np.flatnonzero(entries.sum(axis=1) >= 2)
    out = entries.copy()
    if rows.size:
        masked = np.where(entries[rows], m.distances[rows], np.inf)
        best = masked.argmin(axis=1)
        out[rows] = False
        out[rows, best] = True
    return BinaryDistanceMatrix(out, m.distances)


def _occlusions(entries: np.ndarray, rsum: np.ndarray, csum: np.ndarray) -> list:
    events = []
    for j in np.flatnonzero(csum >= 2).tolist():
        events.append(("merge", tuple(np.flatnonzero(entries[:, j]).tolist()), (j,)))
    for i in np.flatnonzero(rsum >= 2).tolist():
        events.append(("split", (i,), tuple(np.flatnonzero(entries[i]).tolist())))
    return events


def step(
    state: TrackerState,
    m: BinaryDistanceMatrix,
    config: TrackerConfig,
    slice_index: int = 0,
) -> tuple[TrackerState, list[OcclusionEvent]]:
    """Propagate ids from one slice to the next.

    ``slice_index`` is the index of the next slice and is only used to stamp
    occlusion events.
    """
    prev_ids = state.previous_assignment
    q, r = m.entries.shape
    if q != len(prev_ids):
        raise ContractError(f"matrix has {q} rows but state holds {len(prev_ids)} points")

    new_ids = [0] * r
    raw_events = []
    if q and r:
        entries = m.entries
        rsum = entries.sum(axis=1)
        if config.ambiguity_policy == "nearest-neighbor-resolve" and rsum.max() >= 2:
            entries = refine_nearest_neighbor(m).entries
            rsum = entries.sum(axis=1)
        csum = entries.sum(axis=0)
        if rsum.max() >= 2 or csum.max() >= 2:
            raw_events = _occlusions(entries, rsum, csum)
            entries = entries & (rsum == 1)[:, None] & (csum == 1)[None, :]
        rows, cols = np.nonzero(entries)
        for i, j in zip(rows.tolist(), cols.tolist()):
            new_ids[j] = prev_ids[i]

    # Unmatched columns (newcomers and occlusion participants) get fresh ids
    # in column order. Rows not carried over (leavers, occlusion
    # participants) drop out of the active set.
    next_id = state.max_id_ever
    for j in range(r):
        if not new_ids[j]:
            next_id += 1
            new_ids[j] = next_id

    new_state = TrackerState(frozenset(new_ids), tuple(new_ids), next_id)
    events = [OcclusionEvent(slice_index, k, p, n) for k, p, n in raw_events]
    return new_state, events


def annotate_speed(traj: Trajectory, fps: Optional[float] = None) -> Trajectory:
    """Per-sample speed as the distance to the next sample's position.

    Speeds are pixels per slice, or pixels per second when ``fps`` is given.
    The final sample has no speed.
    """
    speeds = np.hypot(*np.diff(traj.xy, axis=0).T)
    if fps is not None:
        speeds *= fps
    return Trajectory(traj.object_id, traj.first_slice, traj.xy, speeds)


def track(
    slices: Sequence[DetectionSlice], config: TrackerConfig
) -> tuple[list[Trajectory], list[OcclusionEvent]]:
    """Run the matcher over a contiguous slice sequence.

    The first non-empty slice numbers its points 1..q in point order; every
    later slice goes through :func:`step`. Returns trajectories sorted by id
    and occlusion events in slice order.
    """
    for k, sl in enumerate(slices):
        if sl.slice_index != k:
            raise ContractError(
                f"slices must be contiguous from 0; position {k} holds {sl.slice_index}"
            )

    state = TrackerState.initial()
    prev = None
    events: list[OcclusionEvent] = []
    ids: list[tuple[int, ...]] = []
    slice_of: list[int] = []
    xys: list[np.ndarray] = []
    for sl in slices:
        n = len(sl.points)
        if prev is None or not n or not len(prev.points):
            m = BinaryDistanceMatrix(
                np.zeros((len(state.previous_assignment), n), dtype=bool),
                np.zeros((len(state.previous_assignment), n)),
            )
        else:
            m = build_distance_matrix(prev, sl, config.threshold)
        state, ev = step(state, m, config, sl.slice_index)
        if ev:
            events.extend(ev)
        if n:
            ids.append(state.previous_assignment)
            slice_of.append(np.full(n, sl.slice_index))
            xys.append(sl.xy)
        prev = sl
    if not ids:
        return [], events
    flat_ids = np.fromiter(
        (oid for row in ids for oid in row), dtype=np.int64, count=sum(map(len, ids))
    )
    return (
        _assemble(flat_ids, np.concatenate(slice_of), np.concatenate(xys), config.fps),
        events,
    )


def _assemble(ids, slice_of, xy, fps) -> list[Trajectory]:
    """Group flat (id, slice, position) records into trajectories."""
    if not len(ids):
        return []
    order = np.lexsort((slice_of, ids))
    ids = ids[order]
    firsts = slice_of[order]
    xy = xy[order]
    bounds = np.flatnonzero(np.diff(ids)) + 1
    out = []
    for part_ids, part_first, part_xy in zip(
        np.split(ids, bounds), np.split(firsts, bounds), np.split(xy, bounds)
    ):
        traj = Trajectory(int(part_ids[0]), int(part_first[0]), part_xy)
        out.append(annotate_speed(traj, fps))
    return out


def min_frames_per_second(params: FrameRateParams) -> float:
    """Lower bound on the frame rate for a linear speed-density relation:
    ``free_flow_speed**2 / (4 * gradient_b)``. The chosen rate must be
    strictly greater."""
    b = params.gradient_b
    if not b > 0:
        raise ValueError(f"gradient_b must be > 0, got {b}")
    if params.free_flow_speed < 0:
        raise ValueError("free_flow_speed must be >= 0")
    return params.free_flow_speed**2 / (4.0 * b)


def fps_adequate(fps: float, params: FrameRateParams) -> bool:
    return fps > min_frames_per_second(params)


def assignment_pairs(
    prev_ids: Sequence[int], new_ids: Sequence[int]
) -> set[tuple[int, int]]:
    """(prev index, next index) pairs that share an id between two slices."""
    where = {oid: i for i, oid in enumerate(prev_ids)}
    return {(where[oid], j) for j, oid in enumerate(new_ids) if oid in where}


def events_to_jsonl(events: Iterable[OcclusionEvent]) -> str:
    return "".join(json.dumps(e.to_json()) + "\n" for e in events)
