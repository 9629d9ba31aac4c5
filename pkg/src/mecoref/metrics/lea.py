"""LEA link-based entity-aware coreference scores, and the caption-weighted LEA-Soft.

Entity importance is its size; resolution is the share of its links
(``n * (n - 1) / 2``) reproduced by the other partition.  A singleton has
one self-link, resolved only when the other side also keeps the mention
alone.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Hashable, Iterable, List, Mapping, Optional

log = logging.getLogger(__name__)

WEIGHT_SIDES = ("both", "recall", "precision", "none")


def link(n: int) -> int:
    return n * (n - 1) // 2


@dataclass(frozen=True)
class LeaScore:
    precision: float
    recall: float
    f1: float
    p_num: float = 0.0
    p_den: float = 0.0
    r_num: float = 0.0
    r_den: float = 0.0


def _f1(p, r):
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def _side(entities: List[frozenset], other: List[frozenset], weight: Optional[Callable]):
    owner = {}
    for idx, e in enumerate(other):
        for m in e:
            owner[m] = idx
    num = den = 0.0
    for e in entities:
        den += len(e)
        if len(e) == 1:
            (m,) = e
            o = owner.get(m)
            if o is not None and len(other[o]) == 1:
                num += weight(e) if weight else 1.0
            continue
        parts = {}
        for m in e:
            if m in owner:
                parts.setdefault(owner[m], set()).add(m)
        got = 0.0
        for inter in parts.values():
            if len(inter) > 1:
                got += link(len(inter)) * (weight(frozenset(inter)) if weight else 1.0)
        num += len(e) * got / link(len(e))
    return num, den


def _clean(partition) -> List[frozenset]:
    return [frozenset(e) for e in partition if len(e)]


def _score(key, response, wr, wp) -> LeaScore:
    k, r = _clean(key), _clean(response)
    if not k:
        log.warning("empty key partition; LEA is zero")
        return LeaScore(0.0, 0.0, 0.0)
    r_num, r_den = _side(k, r, wr)
    p_num, p_den = _side(r, k, wp)
    rec = r_num / r_den if r_den else 0.0
    prec = p_num / p_den if p_den else 0.0
    return LeaScore(prec, rec, _f1(prec, rec), p_num, p_den, r_num, r_den)


def lea(key: Iterable[Iterable[Hashable]], response: Iterable[Iterable[Hashable]]) -> LeaScore:
    return _score(key, response, None, None)


def lea_soft(key, response, cider_scores: Mapping[Hashable, float], weight_on: str = "both") -> LeaScore:
    """LEA where each credited link counts by caption quality.

    ``cider_scores`` maps every mention to the CIDEr of its predicted caption
    against its reference (0..10); a credited intersection is weighted by
    the mean score of its mentions divided by 10.  ``weight_on`` picks which
    side(s) of the score are weighted.
    """
    if weight_on not in WEIGHT_SIDES:
        raise ValueError(f"weight_on must be one of {WEIGHT_SIDES}")

    def w(mentions):
        return sum(cider_scores.get(m, 0.0) for m in mentions) / (10.0 * len(mentions))

    wr = w if weight_on in ("both", "recall") else None
    wp = w if weight_on in ("both", "precision") else None
    return _score(key, response, wr, wp)
