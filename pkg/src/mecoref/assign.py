"""Entity cluster assignment: link each entity role group to one visual cluster.

Attention rows are addressed event-major, role-minor: slot ``(i, k)`` lives
in row ``i * max_roles + k``.  The matrix is used exactly as given; callers
decide whether rows were softmax-normalized.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .errors import DegenerateCluster
from .model import EntityGroupSet, Slot, VisualClusterSet

DEFAULT_MAX_ROLES = 6


def slot_row(slot: Slot, max_roles: int = DEFAULT_MAX_ROLES) -> int:
    i, k = slot
    if i < 0 or not 0 <= k < max_roles:
        raise IndexError(f"role slot {slot} outside an attention layout with {max_roles} roles per event")
    return i * max_roles + k


def _rows(group, n_rows: int, max_roles: int) -> List[int]:
    rows = sorted(slot_row(s, max_roles) for s in group)
    for r in rows:
        if r >= n_rows:
            raise IndexError(f"attention row {r} requested but the matrix has {n_rows} rows")
    return rows


@dataclass(frozen=True)
class Assignment:
    clusters: Tuple[int, ...]
    affinity: Tuple[float, ...]

    def __len__(self):
        return len(self.clusters)


def aggregate_attention(a, groups: EntityGroupSet, clusters: VisualClusterSet,
                        max_roles: int = DEFAULT_MAX_ROLES) -> np.ndarray:
    """``out[j, n]`` = total attention from the roles of group ``j`` to the boxes of cluster ``n``."""
    a = np.asarray(a, dtype=np.float64)
    n_rows, n_cols = a.shape
    col_cluster = np.full(n_cols, -1, dtype=np.int64)
    for c, members in enumerate(clusters.clusters):
        for b in members:
            if not 0 <= b < n_cols:
                raise IndexError(f"cluster {c} references column {b}, matrix has {n_cols}")
            col_cluster[b] = c
    if (col_cluster < 0).any():
        raise ValueError("clusters do not cover every attention column")
    out = np.zeros((len(groups), len(clusters)))
    for j, g in enumerate(groups):
        role_mass = a[_rows(g, n_rows, max_roles)].sum(axis=0)
        out[j] = np.bincount(col_cluster, weights=role_mass, minlength=len(clusters))
    return out


def assign_clusters(aff) -> Assignment:
    """Per-group argmax over clusters (lowest index on ties); clusters may be shared."""
    aff = np.asarray(aff, dtype=np.float64)
    if aff.ndim != 2 or aff.shape[1] == 0:
        raise ValueError(f"affinity must be J x N with N >= 1, got shape {aff.shape}")
    best = np.argmax(aff, axis=1)
    return Assignment(tuple(int(b) for b in best), tuple(float(aff[j, b]) for j, b in enumerate(best)))


def build_fixed_attention(asgn: Assignment, groups: EntityGroupSet, clusters: VisualClusterSet,
                          shape: Tuple[int, int], max_roles: int = DEFAULT_MAX_ROLES) -> np.ndarray:
    """Uniform attention over each role's assigned cluster; rows outside every group stay zero."""
    out = np.zeros(shape)
    for j, g in enumerate(groups):
        members = clusters.clusters[asgn.clusters[j]]
        if not members:
            raise DegenerateCluster(f"group {j} is assigned to empty cluster {asgn.clusters[j]}")
        cols = list(members)
        for r in _rows(g, shape[0], max_roles):
            out[r, cols] = 1.0 / len(cols)
    return out


def pooled_entity_embedding(a_fixed, x, groups: EntityGroupSet, max_roles: int = DEFAULT_MAX_ROLES
                            ) -> Tuple[Dict[Slot, np.ndarray], List[np.ndarray]]:
    """Per-role vectors ``a_fixed[row] @ x`` and their per-group means."""
    a_fixed = np.asarray(a_fixed, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if a_fixed.shape[1] != x.shape[0]:
        raise ValueError(f"attention has {a_fixed.shape[1]} columns but there are {x.shape[0]} embeddings")
    pooled = a_fixed @ x
    per_role: Dict[Slot, np.ndarray] = {}
    per_group = []
    for g in groups:
        vecs = []
        for s in sorted(g):
            v = pooled[slot_row(s, max_roles)]
            per_role[s] = v
            vecs.append(v)
        per_group.append(np.mean(vecs, axis=0))
    return per_role, per_group


def role_boxes(a, groups: EntityGroupSet, clusters: VisualClusterSet, asgn: Assignment,
               slots: Sequence[Slot], max_roles: int = DEFAULT_MAX_ROLES) -> Dict[Slot, int]:
    """One proposal per role: the most attended box of the role's assigned cluster,
    or of the whole row when the role belongs to no group.  Ties go to the lowest index."""
    a = np.asarray(a, dtype=np.float64)
    cluster_of = {s: asgn.clusters[j] for j, g in enumerate(groups) for s in g}
    out = {}
    for s in slots:
        row = a[slot_row(s, max_roles)]
        if s in cluster_of:
            cols = np.array(sorted(clusters.clusters[cluster_of[s]]))
            out[s] = int(cols[np.argmax(row[cols])])
        elif row.size:
            out[s] = int(np.argmax(row))
    return out
