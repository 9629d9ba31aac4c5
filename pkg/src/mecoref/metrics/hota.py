"""HOTA for box trajectories.

Follows the published definition: per frame, detections are matched with
a Hungarian assignment on IoU weighted by a global track-alignment score;
at each localization threshold alpha the matched pairs with IoU >= alpha
are true positives.  DetA, AssA and LocA are averaged over the 19
thresholds 0.05, 0.10, ..., 0.95 and HOTA(alpha) = sqrt(DetA * AssA).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Hashable, Iterable, Mapping, Optional, Tuple

import numpy as np

from ..model import BoundingBox
from .boxes import iou_matrix
from .hungarian import hungarian_match

ALPHAS = tuple(i / 20 for i in range(1, 20))
_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class TrackSet:
    """Trajectories keyed by track id; each maps frame index to its single box."""

    tracks: Mapping[Hashable, Mapping[int, BoundingBox]]

    @classmethod
    def from_entries(cls, entries: Iterable[Tuple[Hashable, int, BoundingBox]]) -> "TrackSet":
        tracks: Dict[Hashable, Dict[int, BoundingBox]] = {}
        for tid, t, box in entries:
            per = tracks.setdefault(tid, {})
            if t in per:
                raise ValueError(f"track {tid!r} has two boxes in frame {t}")
            per[t] = box
        return cls({k: dict(sorted(v.items())) for k, v in tracks.items()})

    @property
    def num_detections(self) -> int:
        return sum(len(v) for v in self.tracks.values())

    def frames(self):
        return sorted({t for v in self.tracks.values() for t in v})

    def at(self, t: int):
        ids = [k for k, v in self.tracks.items() if t in v]
        return ids, [self.tracks[k][t] for k in ids]


@dataclass(frozen=True)
class HotaResult:
    hota: float
    deta: float
    assa: float
    loca: float
    hota_alpha: Tuple[float, ...]
    deta_alpha: Tuple[float, ...]
    assa_alpha: Tuple[float, ...]


def hota(pred: TrackSet, gt: TrackSet, alphas=ALPHAS) -> Optional[HotaResult]:
    """HOTA, DetA, AssA and LocA; ``None`` when the ground truth has no detections."""
    if gt.num_detections == 0:
        return None
    gids = list(gt.tracks)
    pids = list(pred.tracks)
    gpos = {g: i for i, g in enumerate(gids)}
    ppos = {p: i for i, p in enumerate(pids)}
    frames = sorted(set(gt.frames()) | set(pred.frames()))
    A = len(alphas)

    per_frame = []
    gcount = np.zeros(len(gids))
    pcount = np.zeros(len(pids))
    potential = np.zeros((len(gids), len(pids)))
    for t in frames:
        g_ids, g_boxes = gt.at(t)
        p_ids, p_boxes = pred.at(t)
        gi = np.array([gpos[g] for g in g_ids], dtype=np.int64)
        pi = np.array([ppos[p] for p in p_ids], dtype=np.int64)
        sim = iou_matrix(g_boxes, p_boxes)
        gcount[gi] += 1
        pcount[pi] += 1
        if len(gi) and len(pi):
            denom = sim.sum(0)[None, :] + sim.sum(1)[:, None] - sim
            share = np.divide(sim, denom, out=np.zeros_like(sim), where=denom > _EPS)
            potential[np.ix_(gi, pi)] += share
        per_frame.append((gi, pi, sim))
    align = potential / np.maximum(gcount[:, None] + pcount[None, :] - potential, _EPS)

    tp = np.zeros(A)
    fn = np.zeros(A)
    fp = np.zeros(A)
    loc = np.zeros(A)
    matches = np.zeros((A, len(gids), len(pids)))
    for gi, pi, sim in per_frame:
        if not len(pi):
            fn += len(gi)
            continue
        if not len(gi):
            fp += len(pi)
            continue
        score = align[np.ix_(gi, pi)] * sim
        r, c = hungarian_match(-score)
        msim = sim[r, c]
        for a, alpha in enumerate(alphas):
            ok = msim >= alpha - _EPS
            n_ok = int(ok.sum())
            tp[a] += n_ok
            fn[a] += len(gi) - n_ok
            fp[a] += len(pi) - n_ok
            loc[a] += msim[ok].sum()
            matches[a, gi[r[ok]], pi[c[ok]]] += 1

    deta = tp / np.maximum(1.0, tp + fn + fp)
    assa = np.zeros(A)
    for a in range(A):
        m = matches[a]
        denom = np.maximum(gcount[:, None] + pcount[None, :] - m, _EPS)
        assa[a] = (m * (m / denom)).sum() / max(1.0, tp[a])
    loca = np.divide(loc, tp, out=np.zeros(A), where=tp > 0)
    h = np.sqrt(deta * assa)
    return HotaResult(float(h.mean()), float(deta.mean()), float(assa.mean()), float(loca.mean()),
                      tuple(h.tolist()), tuple(deta.tolist()), tuple(assa.tolist()))
