"""Per-video jobs (cluster, assign, evaluate) and their deterministic corpus-level drivers."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .assign import Assignment, aggregate_attention, assign_clusters, role_boxes
from .coref import coref_slots, gold_groups, group_by_caption, grouping_purity, posthoc_groups
from .finch import DEFAULT_LEVELS, DEFAULT_TRACKLET_SCALE, cluster_video
from .ingest import RunBundle
from .metrics.boxes import iou_at_theta
from .metrics.cider import DocumentFrequency, cider_pair
from .metrics.gied import DEFAULT_IOU_FLOOR, entity_distances
from .metrics.hota import TrackSet, hota
from .metrics.lea import lea, lea_soft
from .metrics.verb import verb_accuracy
from .model import EntityGroupSet, VisualClusterSet, groups_from_buckets, is_visual_role

UNAVAILABLE = "unavailable"

METRIC_GROUPS: Dict[str, Tuple[str, ...]] = {
    "verb": ("verb_acc@1", "verb_acc@5"),
    "cider": ("cider",),
    "lea": ("lea",),
    "lea_soft": ("lea_soft",),
    "iou": (),  # filled per configured threshold
    "hota": ("hota", "deta", "assa"),
    "grouping_purity": ("grouping_purity",),
    "gied": ("gied",),
}


@dataclass(frozen=True)
class RunConfig:
    levels: int = DEFAULT_LEVELS
    tracklet_scale: float = DEFAULT_TRACKLET_SCALE
    iou_thresholds: Tuple[float, ...] = (0.3, 0.5)
    metrics: frozenset = frozenset(METRIC_GROUPS)
    iou_floor: float = DEFAULT_IOU_FLOOR
    lea_soft_weight: str = "both"
    jobs: int = 1

    def __post_init__(self):
        if self.levels < 1:
            raise ValueError("levels must be >= 1")
        if not 0 < self.tracklet_scale <= 1:
            raise ValueError("tracklet_scale must be in (0, 1]")
        for th in self.iou_thresholds:
            if not 0 < th < 1:
                raise ValueError(f"IoU threshold {th} outside (0, 1)")
        unknown = set(self.metrics) - set(METRIC_GROUPS)
        if unknown:
            raise ValueError(f"unknown metrics {sorted(unknown)}; choose from {sorted(METRIC_GROUPS)}")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")

    def metric_keys(self) -> List[str]:
        keys = []
        for g in sorted(self.metrics):
            if g == "iou":
                keys.extend(iou_key(t) for t in self.iou_thresholds)
            else:
                keys.extend(METRIC_GROUPS[g])
        return sorted(keys)


def iou_key(theta: float) -> str:
    return f"iou@{theta:g}"


def parallel_map(fn: Callable, items: Sequence, jobs: int = 1) -> List:
    """Order-preserving map, in-process for ``jobs == 1``."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))


# --------------------------------------------------------------------------- clustering / assignment


def cluster_bundle(b: RunBundle, cfg: RunConfig = RunConfig()) -> VisualClusterSet:
    return cluster_video(b.embeddings, b.proposals, cfg.tracklet_scale, cfg.levels)


def clusters_json(b: RunBundle, clusters: VisualClusterSet) -> dict:
    return {"video_id": b.video_id, "level": clusters.level, "clusters": [list(c) for c in clusters.clusters]}


def predicted_groups(b: RunBundle) -> EntityGroupSet:
    """Groups from the predicted mention map, or caption-equality groups when no map was given."""
    if b.predictions.pred_mention_map:
        return b.predictions.groups
    caps = {s: b.predictions.caption_for(s) or "" for s, _ in b.annotation.slots()}
    return posthoc_groups(caps)[0]


def assign_bundle(b: RunBundle, cfg: RunConfig = RunConfig(),
                  clusters: Optional[VisualClusterSet] = None
                  ) -> Tuple[EntityGroupSet, VisualClusterSet, Optional[Assignment]]:
    if clusters is None:
        clusters = cluster_bundle(b, cfg)
    groups = predicted_groups(b)
    if not len(groups) or not len(clusters):
        return groups, clusters, None
    aff = aggregate_attention(b.attention, groups, clusters, b.max_roles)
    return groups, clusters, assign_clusters(aff)


def assignment_json(b: RunBundle, groups: EntityGroupSet, clusters: VisualClusterSet,
                    asgn: Optional[Assignment]) -> dict:
    out = []
    for j, g in enumerate(groups):
        entry = {"entity_id": j, "roles": [list(s) for s in sorted(g)], "cluster": [], "affinity": 0.0}
        if asgn is not None:
            entry["cluster"] = list(clusters.clusters[asgn.clusters[j]])
            entry["affinity"] = asgn.affinity[j]
        out.append(entry)
    return {"video_id": b.video_id, "groups": out}


def cluster_job(b: RunBundle, cfg: RunConfig) -> dict:
    return clusters_json(b, cluster_bundle(b, cfg))


def assign_job(b: RunBundle, cfg: RunConfig) -> dict:
    return assignment_json(b, *assign_bundle(b, cfg))


# --------------------------------------------------------------------------- evaluation


def gold_caption_corpus(bundles: Sequence[RunBundle]) -> DocumentFrequency:
    """IDF statistics over every ground-truth role caption of the split."""
    return DocumentFrequency.from_corpus(r.caption for b in bundles for _, r in b.annotation.slots())


def _pred_tracks(b: RunBundle, groups: EntityGroupSet, clusters: VisualClusterSet,
                 asgn: Optional[Assignment]) -> TrackSet:
    if asgn is None:
        return TrackSet({})
    labels = {s: r.role_label for s, r in b.annotation.slots()}
    entries = []
    for j, g in enumerate(groups):
        if not any(is_visual_role(labels.get(s, "")) for s in g):
            continue
        for i in clusters.clusters[asgn.clusters[j]]:
            p = b.proposals.proposals[i]
            entries.append((j, p.frame_index, p.box))
    return TrackSet.from_entries(entries)


def evaluate_bundle(b: RunBundle, cfg: RunConfig, df: DocumentFrequency) -> Dict[str, Any]:
    ann, pred = b.annotation, b.predictions
    want = cfg.metrics
    out: Dict[str, Any] = {"video_id": b.video_id}

    if "verb" in want:
        gt = [ev.gt_verbs for ev in ann.events]
        for k in (1, 5):
            v = verb_accuracy(pred.pred_verbs, gt, k)
            out[f"verb_acc@{k}"] = UNAVAILABLE if v is None else v

    slots = [s for s, _ in ann.slots()]
    gold_cap = {s: r.caption for s, r in ann.slots()}
    pred_cap = {s: pred.caption_for(s) or "" for s in slots}
    cider_of = {s: cider_pair(pred_cap[s], gold_cap[s], df) for s in slots}
    if "cider" in want:
        out["cider"] = sum(cider_of.values()) / len(slots) if slots else UNAVAILABLE

    coref = coref_slots(ann)
    key = gold_groups(ann)
    if {"lea", "lea_soft"} & want:
        resp = group_by_caption({s: pred_cap[s] for s in coref})
        missing = [frozenset([s]) for s in coref if s not in resp.domain]
        resp = groups_from_buckets(list(resp.groups) + missing)
        if not coref:
            out.update({k: UNAVAILABLE for k in ("lea", "lea_soft") if k in want})
        else:
            if "lea" in want:
                out["lea"] = lea(key, resp).f1
            if "lea_soft" in want:
                out["lea_soft"] = lea_soft(key, resp, cider_of, cfg.lea_soft_weight).f1

    groups = predicted_groups(b)
    if "grouping_purity" in want:
        if coref:
            restricted = groups.restrict(coref)
            loose = [frozenset([s]) for s in coref if s not in restricted.domain]
            out["grouping_purity"] = grouping_purity(groups_from_buckets(list(restricted.groups) + loose), key).purity
        else:
            out["grouping_purity"] = UNAVAILABLE

    need_visual = {"iou", "hota", "gied"} & want
    if not need_visual:
        return out
    g = b.grounding
    if g is None:
        for grp in sorted(need_visual):
            keys = [iou_key(t) for t in cfg.iou_thresholds] if grp == "iou" else METRIC_GROUPS[grp]
            out.update({k: UNAVAILABLE for k in keys})
        return out

    tracks = g.tracks()
    if {"iou", "hota"} & want:
        groups, clusters, asgn = assign_bundle(b, cfg)
    if "iou" in want:
        labels = {s: r.role_label for s, r in ann.slots()}
        gt_roles = {s: tracks[gold_cap[s]] for s in slots
                    if is_visual_role(labels[s]) and gold_cap[s] in tracks}
        picks = role_boxes(b.attention, groups, clusters, asgn, list(gt_roles), b.max_roles) \
            if asgn is not None else {}
        pred_roles = {}
        for s in gt_roles:
            if s in picks:
                p = b.proposals.proposals[picks[s]]
                pred_roles[s] = (p.frame_index, p.box)
        for th in cfg.iou_thresholds:
            v = iou_at_theta(pred_roles, gt_roles, th)
            out[iou_key(th)] = UNAVAILABLE if v is None else v
    if "hota" in want:
        gt_tracks = TrackSet.from_entries((c, t, box) for c, fr in tracks.items() for t, box in fr.items())
        res = hota(_pred_tracks(b, groups, clusters, asgn), gt_tracks)
        if res is None:
            out.update({"hota": UNAVAILABLE, "deta": UNAVAILABLE, "assa": UNAVAILABLE})
        else:
            out.update({"hota": res.hota, "deta": res.deta, "assa": res.assa})
    if "gied" in want:
        per = entity_distances(b.embeddings, b.proposals, g, cfg.iou_floor) if len(b.proposals) else {}
        out["gied"] = sum(per.values()) / len(per) if per else UNAVAILABLE
    return out


def aggregate(per_video: Sequence[Mapping[str, Any]], keys: Sequence[str]) -> Dict[str, Any]:
    """Mean of the available per-video values of each metric."""
    agg: Dict[str, Any] = {}
    for k in keys:
        vals = [r[k] for r in per_video if isinstance(r.get(k), (int, float))]
        agg[k] = math.fsum(vals) / len(vals) if vals else UNAVAILABLE
    return agg


def _eval_one(b, cfg, df):
    return evaluate_bundle(b, cfg, df)


def evaluate_corpus(bundles: Sequence[RunBundle], cfg: RunConfig = RunConfig()) -> Dict[str, Any]:
    bundles = sorted(bundles, key=lambda b: b.video_id)
    df = gold_caption_corpus(bundles) if bundles else None
    rows = parallel_map(partial(_eval_one, cfg=cfg, df=df), bundles, cfg.jobs) if bundles else []
    keys = cfg.metric_keys()
    agg = aggregate(rows, keys)
    return {
        "aggregate": agg,
        "aggregate_percent": {k: (100.0 * v if isinstance(v, float) and k != "gied" else v) for k, v in agg.items()},
        "per_video": rows,
    }


# --------------------------------------------------------------------------- GIED over embedding dumps


def gied_for_embeddings(pairs: Sequence[Tuple[RunBundle, np.ndarray]], iou_floor: float = DEFAULT_IOU_FLOOR
                        ) -> Optional[float]:
    """Mean over every entity in every video of its intra-entity distance."""
    dists: List[float] = []
    for b, x in pairs:
        if b.grounding is None or not len(b.proposals):
            continue
        dists.extend(entity_distances(x, b.proposals, b.grounding, iou_floor).values())
    return math.fsum(dists) / len(dists) if dists else None
