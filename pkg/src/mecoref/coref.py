"""Gold entity groups from captions, the caption-equality baseline and grouping purity."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Set, Tuple

from .errors import DomainError
from .model import (
    EntityGroupSet,
    Event,
    Slot,
    VideoAnnotation,
    groups_from_buckets,
    is_coref_role,
    normalize_caption,
)


def filter_coref_roles(obj, annotation: Optional[VideoAnnotation] = None):
    """Keep only Arg0, Arg1, Arg2 and location/scene slots.

    Accepts a :class:`VideoAnnotation` (returns one with the other roles
    dropped; role positions are renumbered) or an :class:`EntityGroupSet`
    together with the annotation that labels its slots.
    """
    if isinstance(obj, VideoAnnotation):
        events = tuple(
            Event(ev.index, ev.gt_verbs, tuple(r for r in ev.roles if is_coref_role(r.role_label)))
            for ev in obj.events
        )
        return VideoAnnotation(obj.video_id, events, obj.fps_sampled)
    if isinstance(obj, EntityGroupSet):
        if annotation is None:
            raise TypeError("filtering a group set needs the annotation for role labels")
        return obj.restrict(coref_slots(annotation))
    raise TypeError(f"cannot filter {type(obj).__name__}")


def coref_slots(annotation: VideoAnnotation) -> List[Slot]:
    """Slots, in original (event, role) addressing, that take part in coreference."""
    return [s for s, r in annotation.slots() if is_coref_role(r.role_label) and normalize_caption(r.caption)]


def group_by_caption(captions: Mapping[Slot, str]) -> EntityGroupSet:
    """Slots whose normalized captions are equal share a group; empty captions are left out."""
    buckets: Dict[str, Set[Slot]] = {}
    for slot in sorted(captions):
        c = normalize_caption(captions[slot])
        if c:
            buckets.setdefault(c, set()).add(slot)
    return groups_from_buckets(buckets.values())


def gold_groups(annotation: VideoAnnotation) -> EntityGroupSet:
    caps = {s: r.caption for s, r in annotation.slots() if is_coref_role(r.role_label)}
    return group_by_caption(caps)


def posthoc_groups(pred_captions: Mapping[Slot, str],
                   clusters_per_role: Optional[Mapping[Slot, Iterable[int]]] = None
                   ) -> Tuple[EntityGroupSet, Optional[List[Tuple[int, ...]]]]:
    """Group roles with identical predicted captions and pool their detections.

    Returns the groups and, when per-role detections are given, one sorted
    proposal tuple per group (the union over its members).
    """
    groups = group_by_caption(pred_captions)
    if clusters_per_role is None:
        return groups, None
    merged = []
    for g in groups:
        pool = set()
        for slot in g:
            pool.update(clusters_per_role.get(slot, ()))
        merged.append(tuple(sorted(pool)))
    return groups, merged


@dataclass(frozen=True)
class GroupPurity:
    group_index: int
    correct_roles: int
    wrong_roles: int


@dataclass(frozen=True)
class PurityReport:
    purity: float
    per_group: Tuple[GroupPurity, ...]

    @property
    def correct(self) -> int:
        return sum(g.correct_roles for g in self.per_group)

    @property
    def total(self) -> int:
        return sum(g.correct_roles + g.wrong_roles for g in self.per_group)

    def split_slots(self, pred: EntityGroupSet, gold: EntityGroupSet) -> Tuple[Set[Slot], Set[Slot]]:
        return purity_split(pred, gold)


def _majority(pred_group, gold_of) -> int:
    counts = Counter(gold_of[s] for s in pred_group)
    top = max(counts.values())
    return min(g for g, c in counts.items() if c == top)


def grouping_purity(pred: EntityGroupSet, gold: EntityGroupSet) -> PurityReport:
    """Share of slots agreeing with the majority gold entity of their predicted group.

    A majority tie goes to the gold entity with the lowest index.
    """
    if pred.domain != gold.domain:
        raise DomainError(pred.domain - gold.domain, gold.domain - pred.domain)
    gold_of = gold.to_mention_map()
    rows = []
    for j, g in enumerate(pred.groups):
        best = _majority(g, gold_of)
        ok = sum(1 for s in g if gold_of[s] == best)
        rows.append(GroupPurity(j, ok, len(g) - ok))
    total = sum(r.correct_roles + r.wrong_roles for r in rows)
    purity = sum(r.correct_roles for r in rows) / total if total else 1.0
    return PurityReport(purity, tuple(rows))


def purity_split(pred: EntityGroupSet, gold: EntityGroupSet) -> Tuple[Set[Slot], Set[Slot]]:
    """(correct slots, wrong slots) under the majority rule, e.g. for per-subset caption scoring."""
    if pred.domain != gold.domain:
        raise DomainError(pred.domain - gold.domain, gold.domain - pred.domain)
    gold_of = gold.to_mention_map()
    good, bad = set(), set()
    for g in pred.groups:
        best = _majority(g, gold_of)
        for s in g:
            (good if gold_of[s] == best else bad).add(s)
    return good, bad
