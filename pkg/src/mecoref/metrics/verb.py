from __future__ import annotations

import logging
from typing import Optional, Sequence, Set

log = logging.getLogger(__name__)


def verb_hits(pred_ranked: Sequence[Sequence[str]], gt: Sequence[Set[str]], k: int):
    """(hits, counted events); events with an empty ground-truth set are skipped."""
    if k < 1:
        raise ValueError("k must be >= 1")
    hits = n = 0
    for i, gold in enumerate(gt):
        if not gold:
            log.warning("event %d has no ground-truth verb; excluded from Acc@%d", i, k)
            continue
        n += 1
        top = pred_ranked[i][:k] if i < len(pred_ranked) else ()
        hits += any(v in gold for v in top)
    return hits, n


def verb_accuracy(pred_ranked: Sequence[Sequence[str]], gt: Sequence[Set[str]], k: int) -> Optional[float]:
    """Acc@k: an event counts when any of its top-k predicted verbs is a ground-truth verb."""
    hits, n = verb_hits(pred_ranked, gt, k)
    return hits / n if n else None
