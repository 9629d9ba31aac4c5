"""Readers and writers for every on-disk format the toolkit touches.

Formats
-------
annotations.json   ``[{video_id, fps_sampled?, events: [{index, gt_verbs, roles: [...]}]}]``
proposals.json     ``{video_id, num_frames, max_slots, proposals: [...]}``
grounding.json     ``{video_id, entries: [{caption, frame_index, box}]}`` (or a list of those)
predictions.json   ``{video_id, pred_verbs, pred_mention_map, pred_captions}``
*.bin              dense float32 tensors, see :func:`encode_tensor`
manifest.json      names the files above for one video (a *run bundle*)
"""
from __future__ import annotations

import csv
import io
import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    ConsistencyError,
    FormatError,
    IoError,
    NonFiniteTensor,
    ParseError,
    SchemaError,
    TruncationError,
)
from .model import (
    BoundingBox,
    BoxProposal,
    EntityGroupSet,
    Event,
    ProposalSet,
    RoleSlot,
    Slot,
    VideoAnnotation,
    mention_map_to_groups,
    normalize_caption,
)

MAX_ROLES_PER_EVENT = 6

TENSOR_MAGIC = b"MECT"
TENSOR_VERSION = 1
DTYPE_F32 = 0
_HEADER = struct.Struct("<4sBBB")


# --------------------------------------------------------------------------- JSON helpers


def _read_json(path) -> Any:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise IoError(f"cannot read {path}: {e}") from e
    try:
        doc = raw.decode("utf-8")
    except UnicodeDecodeError as e:
        raise ParseError(f"invalid UTF-8: {e.reason}", path=path, offset=e.start) from None
    try:
        return json.loads(doc)
    except json.JSONDecodeError as e:
        offset = len(doc[: e.pos].encode("utf-8"))
        raise ParseError(e.msg, path=path, offset=offset) from None


def _write_json(obj, path) -> None:
    text = json.dumps(obj, sort_keys=True, indent=1, ensure_ascii=False) + "\n"
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e


def _need(obj, key, kind, *, video_id=None, path=None, where=""):
    if not isinstance(obj, dict) or key not in obj:
        raise SchemaError("missing", field=f"{where}{key}", video_id=video_id, path=path)
    val = obj[key]
    if kind is int:
        ok = isinstance(val, int) and not isinstance(val, bool)
    elif kind is float:
        ok = isinstance(val, (int, float)) and not isinstance(val, bool)
    else:
        ok = isinstance(val, kind)
    if not ok:
        raise SchemaError(
            f"expected {getattr(kind, '__name__', kind)}, got {type(val).__name__}",
            field=f"{where}{key}",
            video_id=video_id,
            path=path,
        )
    return val


def _box(raw, *, field_name, video_id, path) -> BoundingBox:
    if not isinstance(raw, list) or len(raw) != 4:
        raise SchemaError("box must be [x1, y1, x2, y2]", field=field_name, video_id=video_id, path=path)
    if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in raw):
        raise SchemaError("box coordinates must be numbers", field=field_name, video_id=video_id, path=path)
    try:
        return BoundingBox.from_list(raw)
    except ValueError as e:
        raise SchemaError(str(e), field=field_name, video_id=video_id, path=path) from None


# --------------------------------------------------------------------------- annotations


def parse_annotation(obj, *, path=None, max_roles=MAX_ROLES_PER_EVENT) -> VideoAnnotation:
    vid = _need(obj, "video_id", str, path=path)
    fps = obj.get("fps_sampled", 1)
    if isinstance(fps, bool) or not isinstance(fps, (int, float)) or not fps > 0:
        raise SchemaError("must be a positive number", field="fps_sampled", video_id=vid, path=path)
    events_raw = _need(obj, "events", list, video_id=vid, path=path)
    events = []
    for pos, ev in enumerate(events_raw):
        w = f"events[{pos}]."
        idx = _need(ev, "index", int, video_id=vid, path=path, where=w)
        if idx != pos:
            raise SchemaError(f"event indices must be contiguous from 0; got {idx} at position {pos}",
                              field=w + "index", video_id=vid, path=path)
        verbs = _need(ev, "gt_verbs", list, video_id=vid, path=path, where=w)
        if not all(isinstance(v, str) for v in verbs):
            raise SchemaError("verbs must be strings", field=w + "gt_verbs", video_id=vid, path=path)
        roles_raw = _need(ev, "roles", list, video_id=vid, path=path, where=w)
        if len(roles_raw) > max_roles:
            raise SchemaError(f"{len(roles_raw)} roles exceeds the maximum of {max_roles}",
                              field=w + "roles", video_id=vid, path=path)
        roles = []
        for k, r in enumerate(roles_raw):
            rw = f"{w}roles[{k}]."
            label = _need(r, "role_label", str, video_id=vid, path=path, where=rw)
            cap = normalize_caption(_need(r, "caption", str, video_id=vid, path=path, where=rw))
            if not cap:
                raise SchemaError("caption is empty", field=rw + "caption", video_id=vid, path=path)
            gid = r.get("gold_entity_id")
            if gid is not None and (isinstance(gid, bool) or not isinstance(gid, int) or gid < 0):
                raise SchemaError("must be a non-negative integer", field=rw + "gold_entity_id",
                                  video_id=vid, path=path)
            roles.append(RoleSlot(label, cap, gid))
        events.append(Event(idx, frozenset(verbs), tuple(roles)))
    return VideoAnnotation(vid, tuple(events), float(fps))


def load_annotations(path, *, max_roles=MAX_ROLES_PER_EVENT) -> List[VideoAnnotation]:
    data = _read_json(path)
    if not isinstance(data, list):
        raise SchemaError("top level must be an array", path=path)
    return [parse_annotation(obj, path=path, max_roles=max_roles) for obj in data]


def annotation_to_json(a: VideoAnnotation) -> dict:
    events = []
    for ev in a.events:
        roles = []
        for r in ev.roles:
            d = {"role_label": r.role_label, "caption": r.caption}
            if r.gold_entity_id is not None:
                d["gold_entity_id"] = r.gold_entity_id
            roles.append(d)
        events.append({"index": ev.index, "gt_verbs": sorted(ev.gt_verbs), "roles": roles})
    return {"video_id": a.video_id, "fps_sampled": a.fps_sampled, "events": events}


def write_annotations(annotations: Sequence[VideoAnnotation], path) -> None:
    _write_json([annotation_to_json(a) for a in annotations], path)


# --------------------------------------------------------------------------- proposals


def parse_proposals(obj, *, path=None) -> ProposalSet:
    vid = _need(obj, "video_id", str, path=path)
    nf = _need(obj, "num_frames", int, video_id=vid, path=path)
    ms = _need(obj, "max_slots", int, video_id=vid, path=path)
    if nf < 1 or ms < 1:
        raise SchemaError("num_frames and max_slots must be >= 1", field="num_frames", video_id=vid, path=path)
    raw = _need(obj, "proposals", list, video_id=vid, path=path)
    if len(raw) > nf * ms:
        raise SchemaError(f"{len(raw)} proposals exceed num_frames*max_slots={nf * ms}",
                          field="proposals", video_id=vid, path=path)
    props = []
    seen = set()
    shot_of: Dict[int, int] = {}
    for n, p in enumerate(raw):
        w = f"proposals[{n}]."
        t = _need(p, "frame_index", int, video_id=vid, path=path, where=w)
        s = _need(p, "slot_index", int, video_id=vid, path=path, where=w)
        if not 0 <= t < nf:
            raise SchemaError(f"frame_index {t} outside [0, {nf})", field=w + "frame_index", video_id=vid, path=path)
        if not 0 <= s < ms:
            raise SchemaError(f"slot_index {s} outside [0, {ms})", field=w + "slot_index", video_id=vid, path=path)
        if (t, s) in seen:
            raise SchemaError(f"duplicate (frame_index, slot_index) = ({t}, {s})", field=w + "slot_index",
                              video_id=vid, path=path)
        seen.add((t, s))
        box = _box(_need(p, "box", list, video_id=vid, path=path, where=w), field_name=w + "box",
                   video_id=vid, path=path)
        tr = _need(p, "tracklet_id", int, video_id=vid, path=path, where=w)
        sh = _need(p, "shot_id", int, video_id=vid, path=path, where=w)
        if shot_of.setdefault(tr, sh) != sh:
            raise SchemaError(f"tracklet {tr} spans shots {shot_of[tr]} and {sh}", field=w + "shot_id",
                              video_id=vid, path=path)
        props.append(BoxProposal(t, s, box, tr, sh))
    return ProposalSet(vid, tuple(props), nf, ms)


def load_proposals(path) -> ProposalSet:
    return parse_proposals(_read_json(path), path=path)


def proposals_to_json(ps: ProposalSet) -> dict:
    return {
        "video_id": ps.video_id,
        "num_frames": ps.num_frames,
        "max_slots": ps.max_slots,
        "proposals": [
            {"frame_index": p.frame_index, "slot_index": p.slot_index, "box": p.box.as_list(),
             "tracklet_id": p.tracklet_id, "shot_id": p.shot_id}
            for p in ps.proposals
        ],
    }


def write_proposals(ps: ProposalSet, path) -> None:
    _write_json(proposals_to_json(ps), path)


# --------------------------------------------------------------------------- grounding


@dataclass(frozen=True)
class GroundingEntry:
    caption: str
    frame_index: int
    box: BoundingBox


@dataclass(frozen=True)
class GroundingSet:
    video_id: str
    entries: Tuple[GroundingEntry, ...]

    def tracks(self) -> Dict[str, Dict[int, BoundingBox]]:
        """caption -> {frame_index: box}, captions in order of first appearance."""
        out: Dict[str, Dict[int, BoundingBox]] = {}
        for e in self.entries:
            out.setdefault(e.caption, {})[e.frame_index] = e.box
        return out

    @property
    def captions(self) -> List[str]:
        return list(self.tracks())


@dataclass(frozen=True)
class GroundingStats:
    num_videos: int
    num_boxes: int
    num_unique_captions: int

    @property
    def boxes_per_caption(self) -> float:
        return self.num_boxes / self.num_unique_captions if self.num_unique_captions else 0.0

    @property
    def boxes_per_video(self) -> float:
        return self.num_boxes / self.num_videos if self.num_videos else 0.0


def parse_grounding(obj, *, path=None, num_frames: Optional[int] = None) -> GroundingSet:
    vid = _need(obj, "video_id", str, path=path)
    raw = _need(obj, "entries", list, video_id=vid, path=path)
    entries = []
    seen = set()
    for n, e in enumerate(raw):
        w = f"entries[{n}]."
        cap = normalize_caption(_need(e, "caption", str, video_id=vid, path=path, where=w))
        if not cap:
            raise SchemaError("caption is empty", field=w + "caption", video_id=vid, path=path)
        t = _need(e, "frame_index", int, video_id=vid, path=path, where=w)
        if t < 0 or (num_frames is not None and t >= num_frames):
            raise SchemaError(f"frame_index {t} out of range", field=w + "frame_index", video_id=vid, path=path)
        if (cap, t) in seen:
            raise SchemaError(f"two boxes for {cap!r} in frame {t}", field=w + "frame_index",
                              video_id=vid, path=path)
        seen.add((cap, t))
        box = _box(_need(e, "box", list, video_id=vid, path=path, where=w), field_name=w + "box",
                   video_id=vid, path=path)
        entries.append(GroundingEntry(cap, t, box))
    return GroundingSet(vid, tuple(entries))


def load_grounding(path, *, num_frames: Optional[int] = None) -> Dict[str, GroundingSet]:
    """Load one grounding object or an array of them, keyed by video id."""
    data = _read_json(path)
    objs = data if isinstance(data, list) else [data]
    out: Dict[str, GroundingSet] = {}
    for obj in objs:
        gs = parse_grounding(obj, path=path, num_frames=num_frames)
        if gs.video_id in out:
            raise SchemaError("duplicate video", field="video_id", video_id=gs.video_id, path=path)
        out[gs.video_id] = gs
    return out


def grounding_to_json(gs: GroundingSet) -> dict:
    return {
        "video_id": gs.video_id,
        "entries": [{"caption": e.caption, "frame_index": e.frame_index, "box": e.box.as_list()}
                    for e in gs.entries],
    }


def write_grounding(sets, path) -> None:
    if isinstance(sets, GroundingSet):
        _write_json(grounding_to_json(sets), path)
    else:
        _write_json([grounding_to_json(g) for g in sets], path)


def grounding_stats(sets: Mapping[str, GroundingSet]) -> GroundingStats:
    """Corpus counts; a caption is unique per video, so totals sum per-video distinct captions."""
    boxes = sum(len(g.entries) for g in sets.values())
    caps = sum(len({e.caption for e in g.entries}) for g in sets.values())
    return GroundingStats(len(sets), boxes, caps)


# --------------------------------------------------------------------------- tensors


def encode_tensor(arr) -> bytes:
    """Serialize to ``MECT`` | version u8 | dtype u8 | ndim u8 | dims u32le* | float32le payload."""
    a = np.asarray(arr)
    if a.ndim > 255:
        raise FormatError("too many dimensions")
    a32 = np.asarray(a, dtype="<f4")
    if not np.isfinite(a32).all():
        raise NonFiniteTensor("tensor contains NaN or infinity")
    header = _HEADER.pack(TENSOR_MAGIC, TENSOR_VERSION, DTYPE_F32, a32.ndim)
    dims = struct.pack(f"<{a32.ndim}I", *a32.shape)
    return header + dims + a32.tobytes(order="C")


def decode_tensor(buf: bytes, *, source="<bytes>") -> np.ndarray:
    if len(buf) < _HEADER.size:
        raise TruncationError(f"{source}: header truncated ({len(buf)} bytes)")
    magic, version, dtype, ndim = _HEADER.unpack_from(buf, 0)
    if magic != TENSOR_MAGIC:
        raise FormatError(f"{source}: bad magic {magic!r}")
    if version != TENSOR_VERSION:
        raise FormatError(f"{source}: unsupported version {version}")
    if dtype != DTYPE_F32:
        raise FormatError(f"{source}: unsupported dtype code {dtype}")
    off = _HEADER.size
    if len(buf) < off + 4 * ndim:
        raise TruncationError(f"{source}: dims truncated")
    dims = struct.unpack_from(f"<{ndim}I", buf, off)
    off += 4 * ndim
    need = 4 * math.prod(dims)
    have = len(buf) - off
    if have < need:
        raise TruncationError(f"{source}: payload has {have} bytes, expected {need}")
    if have > need:
        raise FormatError(f"{source}: {have - need} trailing bytes after payload")
    arr = np.frombuffer(buf, dtype="<f4", count=need // 4, offset=off).reshape(dims)
    if not np.isfinite(arr).all():
        raise NonFiniteTensor(f"{source}: tensor contains NaN or infinity")
    return arr.astype(np.float32)


def load_tensor(path) -> np.ndarray:
    try:
        buf = Path(path).read_bytes()
    except OSError as e:
        raise IoError(f"cannot read {path}: {e}") from e
    return decode_tensor(buf, source=str(path))


def write_tensor(arr, path) -> None:
    data = encode_tensor(arr)
    try:
        Path(path).write_bytes(data)
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e


# --------------------------------------------------------------------------- predictions


@dataclass(frozen=True)
class Predictions:
    video_id: str
    pred_verbs: Tuple[Tuple[str, ...], ...]
    pred_mention_map: Mapping[Slot, int]
    captions_by_role: Mapping[Slot, str] = field(default_factory=dict)
    captions_by_entity: Mapping[int, str] = field(default_factory=dict)

    @property
    def groups(self) -> EntityGroupSet:
        return mention_map_to_groups(self.pred_mention_map)

    def caption_for(self, slot: Slot) -> Optional[str]:
        if slot in self.captions_by_role:
            return self.captions_by_role[slot]
        eid = self.pred_mention_map.get(slot)
        if eid is not None:
            return self.captions_by_entity.get(eid)
        return None


def parse_predictions(obj, *, path=None) -> Predictions:
    vid = _need(obj, "video_id", str, path=path)
    verbs_raw = _need(obj, "pred_verbs", list, video_id=vid, path=path)
    verbs = []
    for i, vs in enumerate(verbs_raw):
        if not isinstance(vs, list) or not all(isinstance(v, str) for v in vs):
            raise SchemaError("must be a list of verb strings", field=f"pred_verbs[{i}]", video_id=vid, path=path)
        verbs.append(tuple(vs))
    for key in ("pred_mention_map", "pred_captions"):
        if not isinstance(obj.get(key, []), list):
            raise SchemaError("must be an array", field=key, video_id=vid, path=path)
    mm: Dict[Slot, int] = {}
    for n, e in enumerate(obj.get("pred_mention_map", [])):
        w = f"pred_mention_map[{n}]."
        i = _need(e, "event", int, video_id=vid, path=path, where=w)
        k = _need(e, "role", int, video_id=vid, path=path, where=w)
        j = _need(e, "entity_id", int, video_id=vid, path=path, where=w)
        if i < 0 or k < 0:
            raise SchemaError("negative index", field=w + "event", video_id=vid, path=path)
        if (i, k) in mm:
            raise SchemaError(f"slot ({i}, {k}) mapped twice", field=w + "role", video_id=vid, path=path)
        mm[(i, k)] = j
    by_role: Dict[Slot, str] = {}
    by_ent: Dict[int, str] = {}
    for n, e in enumerate(obj.get("pred_captions", [])):
        w = f"pred_captions[{n}]."
        cap = normalize_caption(_need(e, "caption", str, video_id=vid, path=path, where=w))
        if isinstance(e, dict) and "entity_id" in e:
            by_ent[_need(e, "entity_id", int, video_id=vid, path=path, where=w)] = cap
        else:
            i = _need(e, "event", int, video_id=vid, path=path, where=w)
            k = _need(e, "role", int, video_id=vid, path=path, where=w)
            by_role[(i, k)] = cap
    return Predictions(vid, tuple(verbs), mm, by_role, by_ent)


def load_predictions(path) -> Predictions:
    return parse_predictions(_read_json(path), path=path)


def predictions_to_json(p: Predictions) -> dict:
    caps = [{"event": i, "role": k, "caption": c} for (i, k), c in sorted(p.captions_by_role.items())]
    caps += [{"entity_id": j, "caption": c} for j, c in sorted(p.captions_by_entity.items())]
    return {
        "video_id": p.video_id,
        "pred_verbs": [list(v) for v in p.pred_verbs],
        "pred_mention_map": [{"event": i, "role": k, "entity_id": j}
                             for (i, k), j in sorted(p.pred_mention_map.items())],
        "pred_captions": caps,
    }


def write_predictions(p: Predictions, path) -> None:
    _write_json(predictions_to_json(p), path)


# --------------------------------------------------------------------------- run bundles

MANIFEST_NAME = "manifest.json"
_BUNDLE_FILES = ("annotations", "proposals", "embeddings", "attention", "predictions")


@dataclass(frozen=True)
class RunBundle:
    annotation: VideoAnnotation
    proposals: ProposalSet
    embeddings: np.ndarray
    attention: np.ndarray
    predictions: Predictions
    grounding: Optional[GroundingSet] = None
    max_roles: int = MAX_ROLES_PER_EVENT
    root: Optional[Path] = None

    @property
    def video_id(self) -> str:
        return self.annotation.video_id


def check_bundle(b: RunBundle) -> None:
    """Cross-file consistency; raises :class:`ConsistencyError` on the first violation."""
    vid = b.annotation.video_id
    for name, other in (("proposals", b.proposals.video_id), ("predictions", b.predictions.video_id)):
        if other != vid:
            raise ConsistencyError(f"{name} video_id mismatch", expected=vid, found=other, video_id=vid)
    if b.grounding is not None and b.grounding.video_id != vid:
        raise ConsistencyError("grounding video_id mismatch", expected=vid, found=b.grounding.video_id,
                               video_id=vid)
    n = len(b.proposals)
    if b.embeddings.ndim != 2 or b.embeddings.shape[0] != n:
        raise ConsistencyError("embeddings shape", expected=f"({n}, d)", found=tuple(b.embeddings.shape),
                               video_id=vid)
    rows = b.annotation.num_events * b.max_roles
    if b.attention.shape != (rows, n):
        raise ConsistencyError("attention shape", expected=(rows, n), found=tuple(b.attention.shape),
                               video_id=vid)
    if (b.attention < 0).any():
        raise ConsistencyError("attention has negative entries", video_id=vid)
    for ev in b.annotation.events:
        if len(ev.roles) > b.max_roles:
            raise ConsistencyError(f"event {ev.index} role count", expected=f"<= {b.max_roles}",
                                   found=len(ev.roles), video_id=vid)
    if len(b.predictions.pred_verbs) != b.annotation.num_events:
        raise ConsistencyError("pred_verbs length", expected=b.annotation.num_events,
                               found=len(b.predictions.pred_verbs), video_id=vid)
    valid = {slot for slot, _ in b.annotation.slots()}
    for slot in list(b.predictions.pred_mention_map) + list(b.predictions.captions_by_role):
        if slot not in valid:
            raise ConsistencyError("prediction references an unknown role slot", expected=sorted(valid),
                                   found=slot, video_id=vid)
    if b.grounding is not None:
        captions = {r.caption for _, r in b.annotation.slots()}
        for e in b.grounding.entries:
            if e.frame_index >= b.proposals.num_frames:
                raise ConsistencyError("grounding frame_index", expected=f"< {b.proposals.num_frames}",
                                       found=e.frame_index, video_id=vid)
            if e.caption not in captions:
                raise ConsistencyError("grounding caption is not a role caption of the video",
                                       found=e.caption, video_id=vid)


def _pick_video(items: Mapping[str, Any], vid: Optional[str], what: str, path):
    if vid is None:
        if len(items) != 1:
            raise SchemaError(f"{what} holds {len(items)} videos; manifest must name video_id", path=path)
        return next(iter(items.values()))
    if vid not in items:
        raise ConsistencyError(f"{what} lacks the bundle's video", expected=vid, found=sorted(items))
    return items[vid]


def load_run_bundle(manifest_path) -> RunBundle:
    manifest_path = Path(manifest_path)
    if manifest_path.is_dir():
        manifest_path = manifest_path / MANIFEST_NAME
    man = _read_json(manifest_path)
    if not isinstance(man, dict):
        raise SchemaError("manifest must be an object", path=manifest_path)
    root = manifest_path.parent
    for key in _BUNDLE_FILES:
        _need(man, key, str, path=manifest_path)
    max_roles = man.get("max_roles", MAX_ROLES_PER_EVENT)
    if isinstance(max_roles, bool) or not isinstance(max_roles, int) or max_roles < 1:
        raise SchemaError("must be a positive integer", field="max_roles", path=manifest_path)
    vid = man.get("video_id")

    def resolve(key):
        p = root / man[key]
        if not p.is_file():
            raise IoError(f"{manifest_path}: {key} file {p} does not exist")
        return p

    anns = load_annotations(resolve("annotations"), max_roles=max_roles)
    ann = _pick_video({a.video_id: a for a in anns}, vid, "annotations", manifest_path)
    props = load_proposals(resolve("proposals"))
    grounding = None
    if man.get("grounding"):
        sets = load_grounding(resolve("grounding"), num_frames=props.num_frames)
        grounding = _pick_video(sets, ann.video_id, "grounding", manifest_path)
    bundle = RunBundle(
        annotation=ann,
        proposals=props,
        embeddings=load_tensor(resolve("embeddings")),
        attention=load_tensor(resolve("attention")),
        predictions=load_predictions(resolve("predictions")),
        grounding=grounding,
        max_roles=max_roles,
        root=root,
    )
    check_bundle(bundle)
    return bundle


def write_run_bundle(b: RunBundle, directory) -> Path:
    """Write ``b`` as a bundle directory with the canonical file names; returns the manifest path."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_annotations([b.annotation], d / "annotations.json")
    write_proposals(b.proposals, d / "proposals.json")
    write_tensor(b.embeddings, d / "embeddings.bin")
    write_tensor(b.attention, d / "attention.bin")
    write_predictions(b.predictions, d / "predictions.json")
    man = {
        "video_id": b.video_id,
        "annotations": "annotations.json",
        "proposals": "proposals.json",
        "embeddings": "embeddings.bin",
        "attention": "attention.bin",
        "predictions": "predictions.json",
        "max_roles": b.max_roles,
    }
    if b.grounding is not None:
        write_grounding(b.grounding, d / "grounding.json")
        man["grounding"] = "grounding.json"
    _write_json(man, d / MANIFEST_NAME)
    return d / MANIFEST_NAME


def find_bundles(path) -> List[Path]:
    """A bundle directory, or a corpus directory whose subdirectories are bundles (sorted by name)."""
    p = Path(path)
    if p.is_file():
        return [p]
    if (p / MANIFEST_NAME).is_file():
        return [p / MANIFEST_NAME]
    if not p.is_dir():
        raise IoError(f"no such bundle directory: {p}")
    found = sorted(c / MANIFEST_NAME for c in p.iterdir() if (c / MANIFEST_NAME).is_file())
    if not found:
        raise IoError(f"{p} contains no {MANIFEST_NAME}")
    return found


# --------------------------------------------------------------------------- reports


def _round_floats(obj):
    if isinstance(obj, float):
        if not math.isfinite(obj):
            raise ValueError(f"non-finite value in report: {obj}")
        return float(f"{obj:.6g}")
    if isinstance(obj, dict):
        return {str(k): _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    if isinstance(obj, np.generic):
        return _round_floats(obj.item())
    return obj


def dump_json(obj) -> str:
    """Canonical JSON text: sorted keys, floats at 6 significant digits."""
    return json.dumps(_round_floats(obj), sort_keys=True, indent=2) + "\n"


def render_report(results: Mapping[str, Any], fmt: str = "json") -> str:
    """Text of a report; floats keep 6 significant digits and keys are sorted."""
    if fmt not in ("json", "csv"):
        raise ValueError(f"unknown report format {fmt!r}")
    results = _round_floats(dict(results))
    results.setdefault("aggregate", {})
    results.setdefault("per_video", [])
    if fmt == "json":
        return json.dumps(results, sort_keys=True, indent=2) + "\n"

    rows = list(results["per_video"])
    if results["aggregate"]:
        rows.append({"video_id": "aggregate", **results["aggregate"]})
    cols = sorted({k for r in rows for k, v in r.items() if not isinstance(v, (dict, list))} - {"video_id"})
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["video_id", *cols])
    for r in rows:
        w.writerow([r.get("video_id", "")] + [r.get(c, "") for c in cols])
    return buf.getvalue()


def write_report(results: Mapping[str, Any], fmt: str, path) -> Path:
    text = render_report(results, fmt)
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as e:
        raise IoError(f"cannot write report {path}: {e}") from e
    return Path(path)
