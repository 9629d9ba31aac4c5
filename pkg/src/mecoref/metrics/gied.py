"""Ground-truth intra-entity distance (GIED).

In each frame every ground-truth entity box picks the proposal with the
highest IoU above a floor (lowest index on ties).  For each entity with at
least two picks, average the cosine distance over all pairs of picked
embeddings; GIED is the mean over those entities.
"""
from __future__ import annotations

from typing import Dict, List, Optional

import numpy as np

from ..finch import cosine_distance_matrix
from ..model import ProposalSet
from .boxes import iou

DEFAULT_IOU_FLOOR = 0.3


def match_entities(proposals: ProposalSet, grounding, iou_floor: float = DEFAULT_IOU_FLOOR) -> Dict[str, List[int]]:
    """caption -> matched proposal indices (one per frame at most)."""
    by_frame: Dict[int, List[int]] = {}
    for i, p in enumerate(proposals.proposals):
        by_frame.setdefault(p.frame_index, []).append(i)
    out: Dict[str, List[int]] = {}
    for cap, frames in grounding.tracks().items():
        picks = []
        for t in sorted(frames):
            best, best_iou = None, iou_floor
            for i in by_frame.get(t, ()):
                v = iou(frames[t], proposals.proposals[i].box)
                if v > best_iou:
                    best, best_iou = i, v
            if best is not None:
                picks.append(best)
        out[cap] = picks
    return out


def entity_distances(embeddings, proposals: ProposalSet, grounding,
                     iou_floor: float = DEFAULT_IOU_FLOOR) -> Dict[str, float]:
    """Mean pairwise cosine distance per entity that has two or more matches."""
    x = np.asarray(embeddings, dtype=np.float64)
    out = {}
    for cap, idx in match_entities(proposals, grounding, iou_floor).items():
        n = len(idx)
        if n < 2:
            continue
        d = cosine_distance_matrix(x[idx])
        out[cap] = float(d[np.triu_indices(n, 1)].mean())
    return out


def gied(embeddings, proposals: ProposalSet, grounding, iou_floor: float = DEFAULT_IOU_FLOOR) -> Optional[float]:
    """``None`` when no entity has two matched proposals."""
    per = entity_distances(embeddings, proposals, grounding, iou_floor)
    return sum(per.values()) / len(per) if per else None
