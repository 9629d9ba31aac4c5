"""Box overlap helpers and the role-level IoU@theta score."""
from __future__ import annotations

from typing import Hashable, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..model import BoundingBox


def iou(a: BoundingBox, b: BoundingBox) -> float:
    ix = min(a.x2, b.x2) - max(a.x1, b.x1)
    iy = min(a.y2, b.y2) - max(a.y1, b.y1)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


def iou_matrix(a: Sequence[BoundingBox], b: Sequence[BoundingBox]) -> np.ndarray:
    if not len(a) or not len(b):
        return np.zeros((len(a), len(b)))
    A = np.array([x.as_list() for x in a], dtype=np.float64)
    B = np.array([x.as_list() for x in b], dtype=np.float64)
    ix = np.clip(np.minimum(A[:, None, 2], B[None, :, 2]) - np.maximum(A[:, None, 0], B[None, :, 0]), 0, None)
    iy = np.clip(np.minimum(A[:, None, 3], B[None, :, 3]) - np.maximum(A[:, None, 1], B[None, :, 1]), 0, None)
    inter = ix * iy
    area_a = (A[:, 2] - A[:, 0]) * (A[:, 3] - A[:, 1])
    area_b = (B[:, 2] - B[:, 0]) * (B[:, 3] - B[:, 1])
    return inter / (area_a[:, None] + area_b[None, :] - inter)


def role_ious(pred: Mapping[Hashable, Optional[Tuple[int, BoundingBox]]],
              gt: Mapping[Hashable, Mapping[int, BoundingBox]]) -> dict:
    """IoU per role that has at least one ground-truth box.

    A prediction in a frame where the role's entity has no box scores 0, as
    does a missing prediction.
    """
    out = {}
    for role, frames in gt.items():
        if not frames:
            continue
        p = pred.get(role)
        if p is None:
            out[role] = 0.0
            continue
        t, box = p
        g = frames.get(t)
        out[role] = iou(box, g) if g is not None else 0.0
    return out


def iou_at_theta(pred, gt, theta: float) -> Optional[float]:
    """Fraction of grounded roles whose predicted box reaches IoU >= ``theta``.

    ``None`` when no role has a ground-truth box.
    """
    if not 0 < theta < 1:
        raise ValueError(f"theta must be in (0, 1), got {theta}")
    scores = role_ious(pred, gt)
    if not scores:
        return None
    return sum(v >= theta for v in scores.values()) / len(scores)
