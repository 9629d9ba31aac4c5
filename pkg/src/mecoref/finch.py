"""Constrained first-neighbour clustering of box embeddings into video-level tracks.

Level 0 works on individual proposals with a distance matrix where

* two proposals of the same frame are infinitely far apart, and
* two proposals of the same tracklet have their distance scaled down
  (default ``1e-5``) so tracklets merge first.

Every later level clusters the means of the previous level's clusters;
two clusters that both own a box in some frame stay infinitely far apart.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from .errors import DegenerateEmbedding
from .model import ProposalSet, VisualClusterSet

log = logging.getLogger(__name__)

DEFAULT_TRACKLET_SCALE = 1e-5
DEFAULT_LEVELS = 2


@dataclass(frozen=True)
class PartitionHierarchy:
    levels: Tuple[Tuple[int, ...], ...]

    @property
    def counts(self) -> List[int]:
        return [max(lv) + 1 if lv else 0 for lv in self.levels]

    def __len__(self):
        return len(self.levels)


def _cosine(x: np.ndarray, *, strict: bool) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    norms = np.linalg.norm(x, axis=1)
    zero = norms == 0
    if strict and zero.any():
        raise DegenerateEmbedding(int(np.flatnonzero(zero)[0]))
    unit = x / np.where(zero, 1.0, norms)[:, None]
    d = 1.0 - unit @ unit.T
    d = 0.5 * (d + d.T)
    np.clip(d, 0.0, 2.0, out=d)
    if zero.any():
        # no direction: treat as orthogonal to everything
        d[zero, :] = 1.0
        d[:, zero] = 1.0
    np.fill_diagonal(d, 0.0)
    return d


def cosine_distance_matrix(embeddings) -> np.ndarray:
    """``1 - cos`` between every pair of rows; rows must have non-zero norm."""
    return _cosine(embeddings, strict=True)


def apply_constraints(d, proposals: ProposalSet, tracklet_scale: float = DEFAULT_TRACKLET_SCALE) -> np.ndarray:
    """Return a copy of ``d`` with the frame-exclusion and tracklet-scaling rules applied.

    A pair that is both same-frame and same-tracklet (a tracker glitch) stays infinite.
    """
    if not 0 < tracklet_scale <= 1:
        raise ValueError(f"tracklet_scale must be in (0, 1], got {tracklet_scale}")
    d = np.array(d, dtype=np.float64, copy=True)
    frames = np.asarray(proposals.frames)
    tracks = np.asarray(proposals.tracklets)
    if d.shape != (len(frames), len(frames)):
        raise ValueError(f"distance matrix {d.shape} does not match {len(frames)} proposals")
    same_track = tracks[:, None] == tracks[None, :]
    same_frame = frames[:, None] == frames[None, :]
    d[same_track] *= tracklet_scale
    d[same_frame] = np.inf
    np.fill_diagonal(d, 0.0)
    return d


def first_neighbors(d) -> np.ndarray:
    """Index of each row's nearest other point, ``-1`` when every other distance is infinite.

    Ties go to the lowest index.
    """
    d = np.array(d, dtype=np.float64, copy=True)
    n = d.shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    np.fill_diagonal(d, np.inf)
    nn = np.argmin(d, axis=1)
    isolated = ~np.isfinite(d[np.arange(n), nn])
    nn[isolated] = -1
    return nn


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, i):
        root = i
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[i] != root:
            self.parent[i], i = root, self.parent[i]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            # keep the smaller index as root so labelling never depends on merge order
            if rb < ra:
                ra, rb = rb, ra
            self.parent[rb] = ra
        return ra


def _first_appearance(roots: Sequence[int]) -> np.ndarray:
    remap: Dict[int, int] = {}
    return np.array([remap.setdefault(r, len(remap)) for r in roots], dtype=np.int64)


def finch_partition_step(d) -> np.ndarray:
    """One first-neighbour partition: connected components of the links ``i -> nn(i)``.

    Points sharing a first neighbour end up connected through it, so the
    ``nn(i) == nn(j)`` rule needs no separate pass.  Labels are numbered by
    first appearance.
    """
    nn = first_neighbors(d)
    uf = _UnionFind(len(nn))
    for i, j in enumerate(nn):
        if j >= 0:
            uf.union(i, int(j))
    return _first_appearance([uf.find(i) for i in range(len(nn))])


def _constrained_merge(d: np.ndarray, edges: Iterable[Tuple[int, int]], frame_sets: List[frozenset]) -> np.ndarray:
    """Union along ``edges`` cheapest first, skipping any union that would put two boxes of one frame together."""
    uf = _UnionFind(len(frame_sets))
    frames = {i: set(fs) for i, fs in enumerate(frame_sets)}
    ordered = sorted({(min(i, j), max(i, j)) for i, j in edges if i != j}, key=lambda e: (d[e], e))
    for i, j in ordered:
        ri, rj = uf.find(i), uf.find(j)
        if ri == rj or frames[ri] & frames[rj]:
            continue
        keep = uf.union(ri, rj)
        gone = rj if keep == ri else ri
        frames[keep] |= frames.pop(gone)
    return _first_appearance([uf.find(i) for i in range(len(frame_sets))])


def _nn_edges(d: np.ndarray) -> List[Tuple[int, int]]:
    return [(i, int(j)) for i, j in enumerate(first_neighbors(d)) if j >= 0]


def _level0(x: np.ndarray, proposals: ProposalSet, tracklet_scale: float) -> np.ndarray:
    d = apply_constraints(cosine_distance_matrix(x), proposals, tracklet_scale)
    edges = _nn_edges(d)
    # tracklet members are tied together outright; their scaled distances sort them first
    by_track: Dict[int, List[int]] = {}
    for i, t in enumerate(proposals.tracklets):
        by_track.setdefault(t, []).append(i)
    for members in by_track.values():
        edges.extend((a, b) for a in members for b in members if a < b)
    return _constrained_merge(d, edges, [frozenset([f]) for f in proposals.frames])


def _next_level(x: np.ndarray, labels: np.ndarray, frames: Sequence[int]) -> np.ndarray:
    k = int(labels.max()) + 1
    means = np.zeros((k, x.shape[1]))
    np.add.at(means, labels, x)
    means /= np.bincount(labels, minlength=k)[:, None]
    fsets = [set() for _ in range(k)]
    for i, c in enumerate(labels):
        fsets[c].add(frames[i])
    fsets = [frozenset(s) for s in fsets]
    d = _cosine(means, strict=False)
    for a in range(k):
        for b in range(a + 1, k):
            if fsets[a] & fsets[b]:
                d[a, b] = d[b, a] = np.inf
    merged = _constrained_merge(d, _nn_edges(d), fsets)
    return merged[labels]


def finch_hierarchy(embeddings, proposals: ProposalSet, tracklet_scale: float = DEFAULT_TRACKLET_SCALE,
                    levels: int = DEFAULT_LEVELS) -> PartitionHierarchy:
    """Up to ``levels`` partitions of the proposals, finest first; stops early once nothing merges."""
    if levels < 1:
        raise ValueError("levels must be >= 1")
    x = np.asarray(embeddings, dtype=np.float64)
    n = len(proposals)
    if x.shape[0] != n:
        raise ValueError(f"{x.shape[0]} embedding rows for {n} proposals")
    if n == 0:
        return PartitionHierarchy(((),))
    labels = _level0(x, proposals, tracklet_scale)
    out = [tuple(int(v) for v in labels)]
    frames = proposals.frames
    while len(out) < levels:
        nxt = _next_level(x, labels, frames)
        if nxt.max() == labels.max():
            break
        labels = nxt
        out.append(tuple(int(v) for v in labels))
    return PartitionHierarchy(tuple(out))


def clusters_from_hierarchy(h: PartitionHierarchy, level: int) -> VisualClusterSet:
    if level < 0:
        raise ValueError("level must be >= 0")
    if level >= len(h):
        warnings.warn(f"level {level} is past the hierarchy's fixpoint; using level {len(h) - 1}", stacklevel=2)
        level = len(h) - 1
    buckets: Dict[int, List[int]] = {}
    for i, c in enumerate(h.levels[level]):
        buckets.setdefault(c, []).append(i)
    return VisualClusterSet(tuple(tuple(buckets[c]) for c in sorted(buckets)), level)


def cluster_video(embeddings, proposals: ProposalSet, tracklet_scale: float = DEFAULT_TRACKLET_SCALE,
                  levels: int = DEFAULT_LEVELS) -> VisualClusterSet:
    """Clusters from the top requested level of :func:`finch_hierarchy`."""
    h = finch_hierarchy(embeddings, proposals, tracklet_scale, levels)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return clusters_from_hierarchy(h, levels - 1)
