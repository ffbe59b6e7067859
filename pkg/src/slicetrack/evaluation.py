"""Scoring tracker output against ground truth, plus an exhaustive matching
oracle for small slice pairs."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .core import GroundTruth, Trajectory, as_xy
from .matching import ContractError

ORACLE_MAX_POINTS = 8


@dataclass(frozen=True)
class EvalReport:
    total_links: int
    correct_links: int
    id_switches: int
    fragmentations: int
    spurious_tracks: int

    def to_json(self) -> dict:
        return asdict(self)

    @property
    def error_free(self) -> bool:
        return (
            self.correct_links == self.total_links
            and self.id_switches == 0
            and self.fragmentations == 0
        )


def _greedy_nearest(a: np.ndarray, b: np.ndarray, radius: float) -> dict[int, int]:
    """One-to-one matching of rows of ``a`` to rows of ``b``, closest pairs
    first, ignoring pairs farther apart than ``radius``."""
    if not len(a) or not len(b):
        return {}
    d = np.hypot(a[:, None, 0] - b[None, :, 0], a[:, None, 1] - b[None, :, 1])
    ii, jj = np.nonzero(d <= radius)
    order = np.lexsort((jj, ii, d[ii, jj]))
    used_a, used_b, out = set(), set(), {}
    for k in order.tolist():
        i, j = int(ii[k]), int(jj[k])
        if i in used_a or j in used_b:
            continue
        used_a.add(i)
        used_b.add(j)
        out[i] = j
    return out


def tracker_slices(trajectories: Sequence[Trajectory], n_slices: int):
    """Per-slice ``(xy, ids)`` arrays rebuilt from trajectories."""
    xy = [[] for _ in range(n_slices)]
    ids = [[] for _ in range(n_slices)]
    for traj in trajectories:
        for k, (x, y) in enumerate(traj.xy.tolist()):
            s = traj.first_slice + k
            if s < n_slices:
                xy[s].append((x, y))
                ids[s].append(traj.object_id)
    return [
        (np.array(p, dtype=float).reshape(-1, 2), np.array(i, dtype=np.int64))
        for p, i in zip(xy, ids)
    ]


def evaluate(
    trajectories: Sequence[Trajectory], truth: GroundTruth, match_radius: float
) -> EvalReport:
    """Compare trajectories with ground truth.

    In each slice tracker points are paired with truth points by nearest
    neighbour within ``match_radius``. A ground-truth link (same object in
    two consecutive slices) is correct when both ends are matched to the
    same tracker id. An id switch is a change of matched tracker id along
    one true object; a fragmentation is a true object seen under two or more
    tracker ids; a spurious track is a tracker id never matched to truth.
    """
    if not match_radius > 0:
        raise ValueError("match_radius must be > 0")
    n = len(truth.slices)
    tracked = tracker_slices(trajectories, n)

    # true id -> {slice: tracker id}
    assigned: dict[int, dict[int, int]] = {}
    matched_tracks: set[int] = set()
    for s, sl in enumerate(truth.slices):
        if not sl:
            continue
        t_xy = np.array([(p.x, p.y) for p, _ in sl], dtype=float)
        k_xy, k_ids = tracked[s]
        pairs = _greedy_nearest(t_xy, k_xy, match_radius)
        for i, (_, tid) in enumerate(sl):
            seen = assigned.setdefault(tid, {})
            if i in pairs:
                oid = int(k_ids[pairs[i]])
                seen[s] = oid
                matched_tracks.add(oid)

    present: dict[int, list[int]] = {}
    for s, sl in enumerate(truth.slices):
        for _, tid in sl:
            present.setdefault(tid, []).append(s)

    total = correct = switches = fragments = 0
    for tid, slices in present.items():
        seen = assigned.get(tid, {})
        for s0, s1 in zip(slices, slices[1:]):
            if s1 != s0 + 1:
                continue
            total += 1
            if s0 in seen and s1 in seen and seen[s0] == seen[s1]:
                correct += 1
        history = [seen[s] for s in slices if s in seen]
        switches += sum(1 for a, b in zip(history, history[1:]) if a != b)
        if len(set(history)) >= 2:
            fragments += 1

    all_tracks = {t.object_id for t in trajectories}
    return EvalReport(
        total_links=total,
        correct_links=correct,
        id_switches=switches,
        fragmentations=fragments,
        spurious_tracks=len(all_tracks - matched_tracks),
    )


@dataclass(frozen=True)
class OracleMatch:
    pairs: frozenset  # of (prev index, next index)
    ambiguous: bool
    maximal_matchings: int


def oracle_match(prev, next, threshold: float) -> OracleMatch:
    """Exhaustive reference matcher for small slices.

    Enumerates every partial matching that uses only pairs within
    ``threshold`` and keeps the maximal ones (no feasible pair can be
    added). The returned pairs are those common to every maximal matching,
    which are exactly the pairs whose prev and next point have no other
    feasible partner. The instance is ambiguous when more than one maximal
    matching exists.
    """
    a = as_xy(prev)
    b = as_xy(next)
    q, r = len(a), len(b)
    if q > ORACLE_MAX_POINTS or r > ORACLE_MAX_POINTS:
        raise ContractError(f"oracle limited to {ORACLE_MAX_POINTS} points per slice")
    feasible = [
        [j for j in range(r) if np.hypot(*(a[i] - b[j])) <= threshold] for i in range(q)
    ]

    maximal: list[frozenset] = []

    def extend(i: int, used: frozenset, chosen: tuple):
        if i == q:
            matched_rows = {p for p, _ in chosen}
            for row in range(q):
                if row not in matched_rows and any(j not in used for j in feasible[row]):
                    return
            maximal.append(frozenset(chosen))
            return
        extend(i + 1, used, chosen)
        for j in feasible[i]:
            if j not in used:
                extend(i + 1, used | {j}, chosen + ((i, j),))

    extend(0, frozenset(), ())
    common = frozenset.intersection(*maximal) if maximal else frozenset()
    return OracleMatch(common, len(maximal) > 1, len(maximal))
