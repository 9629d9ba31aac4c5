"""Domain types and the two deterministic operations on them.

Everything here is immutable. Role slots are addressed by ``(event_index,
role_index)`` pairs where ``role_index`` is the position of the role inside
its event, exactly as given in the input (roles are never reordered).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

from .errors import UnknownVerb

Slot = Tuple[int, int]
MentionMap = Dict[Slot, int]

ARG0, ARG1, ARG2 = "Arg0", "Arg1", "Arg2"

# Labels (case-insensitive) taking part in coreference: Arg0/1/2 plus location/scene.
COREF_ROLE_LABELS = frozenset(
    {"arg0", "arg1", "arg2", "aloc", "argm-loc", "argm-scene", "ascn", "scene", "loc", "location"}
)
# Labels whose entities were boxed by annotators.
VISUAL_ROLE_LABELS = frozenset({"arg0", "arg1", "arg2"})


def normalize_caption(text: str) -> str:
    """Lowercase, collapse internal whitespace and strip."""
    return " ".join(text.lower().split())


def is_coref_role(label: str) -> bool:
    return label.strip().lower() in COREF_ROLE_LABELS


def is_visual_role(label: str) -> bool:
    return label.strip().lower() in VISUAL_ROLE_LABELS


@dataclass(frozen=True)
class RoleSlot:
    role_label: str
    caption: str
    gold_entity_id: Optional[int] = None

    def __post_init__(self):
        if self.gold_entity_id is not None and self.gold_entity_id < 0:
            raise ValueError(f"gold_entity_id must be >= 0, got {self.gold_entity_id}")


@dataclass(frozen=True)
class Event:
    index: int
    gt_verbs: frozenset
    roles: Tuple[RoleSlot, ...] = ()


@dataclass(frozen=True)
class VideoAnnotation:
    video_id: str
    events: Tuple[Event, ...]
    fps_sampled: float = 1.0

    def slots(self) -> Iterator[Tuple[Slot, RoleSlot]]:
        """Yield ``((event, role), slot)`` in event-major, role-minor order."""
        for ev in self.events:
            for k, role in enumerate(ev.roles):
                yield (ev.index, k), role

    @property
    def num_events(self) -> int:
        return len(self.events)


@dataclass(frozen=True)
class BoundingBox:
    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        vals = (self.x1, self.y1, self.x2, self.y2)
        if not all(math.isfinite(v) and v >= 0 for v in vals):
            raise ValueError(f"box coordinates must be finite and >= 0: {vals}")
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise ValueError(f"box must satisfy x1 < x2 and y1 < y2: {vals}")

    @classmethod
    def from_list(cls, xs: Sequence[float]) -> "BoundingBox":
        if len(xs) != 4:
            raise ValueError(f"box needs 4 coordinates, got {len(xs)}")
        return cls(*(float(v) for v in xs))

    def as_list(self) -> List[float]:
        return [self.x1, self.y1, self.x2, self.y2]

    @property
    def area(self) -> float:
        return (self.x2 - self.x1) * (self.y2 - self.y1)


@dataclass(frozen=True)
class BoxProposal:
    frame_index: int
    slot_index: int
    box: BoundingBox
    tracklet_id: int
    shot_id: int


@dataclass(frozen=True)
class ProposalSet:
    video_id: str
    proposals: Tuple[BoxProposal, ...]
    num_frames: int
    max_slots: int

    def __len__(self):
        return len(self.proposals)

    @property
    def frames(self) -> List[int]:
        return [p.frame_index for p in self.proposals]

    @property
    def tracklets(self) -> List[int]:
        return [p.tracklet_id for p in self.proposals]


@dataclass(frozen=True)
class EntityGroupSet:
    """An ordered partition of role slots into entity groups."""

    groups: Tuple[frozenset, ...] = ()

    def __post_init__(self):
        seen = set()
        for g in self.groups:
            if seen & g:
                raise ValueError("entity groups must be pairwise disjoint")
            seen |= g

    def __len__(self):
        return len(self.groups)

    def __iter__(self):
        return iter(self.groups)

    @property
    def domain(self) -> frozenset:
        return frozenset().union(*self.groups) if self.groups else frozenset()

    def to_mention_map(self) -> MentionMap:
        return {slot: j for j, g in enumerate(self.groups) for slot in g}

    def as_partition(self) -> frozenset:
        """Order-free view, handy for equality of partitions."""
        return frozenset(self.groups)

    def restrict(self, slots: Iterable[Slot]) -> "EntityGroupSet":
        keep = frozenset(slots)
        return groups_from_buckets([g & keep for g in self.groups])


@dataclass(frozen=True)
class VisualClusterSet:
    clusters: Tuple[Tuple[int, ...], ...]
    level: int = 0

    def __len__(self):
        return len(self.clusters)

    def labels(self, n: int) -> List[int]:
        out = [-1] * n
        for c, members in enumerate(self.clusters):
            for i in members:
                out[i] = c
        return out

    def check(self, proposals: ProposalSet) -> None:
        """Raise ``ValueError`` unless this is a frame-exclusive partition of ``proposals``."""
        n = len(proposals)
        flat = sorted(i for c in self.clusters for i in c)
        if flat != list(range(n)):
            raise ValueError("clusters do not partition the proposal indices")
        frames = proposals.frames
        for c in self.clusters:
            fs = [frames[i] for i in c]
            if len(set(fs)) != len(fs):
                raise ValueError(f"cluster {c} holds two proposals of one frame")


def derive_roles(verb: str, verb_map: Mapping[str, Sequence[str]]) -> List[str]:
    """Role labels for ``verb`` in their stored order."""
    try:
        roles = verb_map[verb]
    except KeyError:
        raise UnknownVerb(verb) from None
    return list(roles)


def normalize_mention_map(m: Mapping[Slot, int]) -> MentionMap:
    """Renumber entity ids by first appearance in (event, role) order."""
    remap: Dict[int, int] = {}
    out: MentionMap = {}
    for slot in sorted(m):
        eid = m[slot]
        if eid not in remap:
            remap[eid] = len(remap)
        out[slot] = remap[eid]
    return out


def groups_from_buckets(buckets: Iterable[Iterable[Slot]]) -> EntityGroupSet:
    """Drop empty buckets and order groups by their earliest slot."""
    gs = [frozenset(b) for b in buckets]
    gs = [g for g in gs if g]
    gs.sort(key=min)
    return EntityGroupSet(tuple(gs))


def mention_map_to_groups(m: Mapping[Slot, int]) -> EntityGroupSet:
    norm = normalize_mention_map(m)
    buckets: List[set] = []
    for slot in sorted(norm):
        j = norm[slot]
        if j == len(buckets):
            buckets.append(set())
        buckets[j].add(slot)
    return EntityGroupSet(tuple(frozenset(b) for b in buckets))
