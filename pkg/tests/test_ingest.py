import json
import os
import random
import struct
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from mecoref.errors import (
    ConsistencyError,
    FormatError,
    InputError,
    IoError,
    NonFiniteTensor,
    ParseError,
    SchemaError,
    TruncationError,
)
from mecoref.ingest import (
    decode_tensor,
    encode_tensor,
    grounding_stats,
    load_annotations,
    load_grounding,
    load_run_bundle,
    load_tensor,
    render_report,
    write_annotations,
    write_report,
    write_run_bundle,
    write_tensor,
)
from mecoref.model import Event, RoleSlot, VideoAnnotation

import synth
from faults import CORRUPTIONS

DATA = Path(__file__).parent / "data"


# ---------------------------------------------------------------- annotations


def _write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return p


def test_annotation_counts(tmp_path):
    obj = [{"video_id": "v", "events": [
        {"index": i, "gt_verbs": ["run"], "roles": [{"role_label": "Arg0", "caption": "man"},
                                                   {"role_label": "Arg1", "caption": "dog"}]}
        for i in range(5)]}]
    (a,) = load_annotations(_write(tmp_path, "a.json", obj))
    assert a.num_events == 5
    assert len(list(a.slots())) == 10


def test_annotation_empty_array(tmp_path):
    assert load_annotations(_write(tmp_path, "a.json", [])) == []


def test_annotation_captions_normalized(tmp_path):
    obj = [{"video_id": "v", "events": [
        {"index": 0, "gt_verbs": ["run"], "roles": [{"role_label": "Arg0", "caption": "  Tall   MAN "}]}]}]
    (a,) = load_annotations(_write(tmp_path, "a.json", obj))
    assert a.events[0].roles[0].caption == "tall man"


def _random_annotation(rng, vid):
    events = []
    for i in range(rng.randrange(0, 6)):
        roles = tuple(
            RoleSlot(rng.choice(["Arg0", "Arg1", "AScn", "ArgM-Mnr"]),
                     " ".join(rng.choice(synth.NOUNS + synth.ADJ) for _ in range(rng.randrange(1, 5))),
                     rng.choice([None, rng.randrange(4)]))
            for _ in range(rng.randrange(0, 7)))
        events.append(Event(i, frozenset(rng.sample(synth.VERBS, rng.randrange(1, 4))), roles))
    return VideoAnnotation(vid, tuple(events), rng.choice([1.0, 2.0, 0.5]))


def test_annotation_round_trip_50(tmp_path):
    rng = random.Random(1)
    anns = [_random_annotation(rng, f"v{n:02d}") for n in range(50)]
    write_annotations(anns, tmp_path / "a.json")
    assert load_annotations(tmp_path / "a.json") == anns


def test_parse_error_reports_byte_offset(tmp_path):
    p = tmp_path / "bad.json"
    p.write_bytes('[{"video_id": "é", }]'.encode())
    with pytest.raises(ParseError) as e:
        load_annotations(p)
    # the stray brace sits after a two-byte character
    assert e.value.offset == '[{"video_id": "é", '.encode().__len__()


@pytest.mark.parametrize("mutate,field", [
    (lambda o: o[0]["events"][0].update(index=1), "events[0].index"),
    (lambda o: o[0]["events"][0]["roles"][0].update(caption="   "), "events[0].roles[0].caption"),
    (lambda o: o[0]["events"][0]["roles"][0].update(gold_entity_id=-2), "events[0].roles[0].gold_entity_id"),
    (lambda o: o[0]["events"][0].update(roles=[{"role_label": "Arg0", "caption": "x"}] * 7), "events[0].roles"),
    (lambda o: o[0].pop("events"), "events"),
])
def test_annotation_schema_errors_name_field(tmp_path, mutate, field):
    obj = [{"video_id": "v9", "events": [
        {"index": 0, "gt_verbs": ["run"], "roles": [{"role_label": "Arg0", "caption": "man"}]}]}]
    mutate(obj)
    with pytest.raises(SchemaError) as e:
        load_annotations(_write(tmp_path, "a.json", obj))
    assert e.value.field == field
    assert e.value.video_id == "v9"


# ---------------------------------------------------------------- grounding


def test_grounding_single_entry(tmp_path):
    obj = {"video_id": "v", "entries": [{"caption": "man", "frame_index": 0, "box": [0, 0, 1, 1]}]}
    sets = load_grounding(_write(tmp_path, "g.json", obj))
    assert list(sets) == ["v"] and len(sets["v"].entries) == 1


def test_grounding_rejects_inverted_box(tmp_path):
    obj = {"video_id": "v", "entries": [{"caption": "man", "frame_index": 0, "box": [5, 0, 5, 1]}]}
    with pytest.raises(SchemaError):
        load_grounding(_write(tmp_path, "g.json", obj))


def test_grounding_mini_stats_hand_count():
    # mini_a: 3 + 2 boxes, 2 captions; mini_b: 4 boxes, 1 caption; mini_c: 2 + 1 + 3 boxes, 3 captions
    st_ = grounding_stats(load_grounding(DATA / "grounding_mini.json"))
    assert (st_.num_videos, st_.num_boxes, st_.num_unique_captions) == (3, 15, 6)
    assert st_.boxes_per_caption == 2.5
    assert st_.boxes_per_video == 5.0


# ---------------------------------------------------------------- tensors


def test_tensor_zeros_round_trip(tmp_path):
    write_tensor(np.zeros((2, 3)), tmp_path / "z.bin")
    out = load_tensor(tmp_path / "z.bin")
    assert out.shape == (2, 3) and not out.any()


def test_tensor_layout_is_exact():
    buf = encode_tensor(np.array([[1.0, 2.0]], dtype=np.float32))
    assert buf[:4] == b"MECT" and buf[4:7] == bytes([1, 0, 2])
    assert struct.unpack("<II", buf[7:15]) == (1, 2)
    assert buf[15:] == struct.pack("<ff", 1.0, 2.0)


def test_tensor_1000_random_round_trips_bit_exact():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        shape = tuple(int(s) for s in rng.integers(0, 6, size=rng.integers(0, 4)))
        bits = rng.integers(0, 2 ** 32, size=shape, dtype=np.uint64).astype(np.uint32)
        a = bits.view(np.float32)
        a = np.where(np.isfinite(a), a, np.float32(1.5))
        out = decode_tensor(encode_tensor(a))
        assert out.shape == a.shape
        assert out.tobytes() == a.astype("<f4").tobytes()


@settings(max_examples=50)
@given(hnp.arrays(np.float32, hnp.array_shapes(min_dims=1, max_dims=3, max_side=5),
                  elements=st.floats(width=32, allow_nan=False, allow_infinity=False)))
def test_tensor_round_trip_property(a):
    assert decode_tensor(encode_tensor(a)).tobytes() == a.tobytes()


def test_tensor_bad_magic():
    buf = bytearray(encode_tensor(np.ones(3)))
    buf[:4] = b"XXXX"
    with pytest.raises(FormatError):
        decode_tensor(bytes(buf))


@pytest.mark.parametrize("cut", [2, 8, 14, 20])
def test_tensor_truncated(cut):
    buf = encode_tensor(np.ones((2, 2)))
    with pytest.raises(TruncationError):
        decode_tensor(buf[:cut])


def test_tensor_trailing_bytes():
    with pytest.raises(FormatError):
        decode_tensor(encode_tensor(np.ones(2)) + b"\0")


def test_tensor_nan_rejected():
    buf = bytearray(encode_tensor(np.ones(2)))
    buf[-4:] = struct.pack("<f", float("nan"))
    with pytest.raises(ValueError):
        decode_tensor(bytes(buf))
    with pytest.raises(NonFiniteTensor):
        encode_tensor(np.array([np.inf]))


def test_tensor_bad_version_and_dtype():
    buf = bytearray(encode_tensor(np.ones(2)))
    buf[4] = 2
    with pytest.raises(FormatError):
        decode_tensor(bytes(buf))
    buf[4], buf[5] = 1, 1
    with pytest.raises(FormatError):
        decode_tensor(bytes(buf))


# ---------------------------------------------------------------- run bundles


def test_bundle_165_proposals(tmp_path):
    b = synth.perfect_bundle(3, n_entities=15, n_distractors=0)
    assert len(b.proposals) == 165
    write_run_bundle(b, tmp_path / "b")
    got = load_run_bundle(tmp_path / "b" / "manifest.json")
    assert got.attention.shape == (30, 165)
    assert got.embeddings.shape == (165, 32)
    assert got.annotation == b.annotation
    assert got.proposals == b.proposals
    assert got.grounding == b.grounding


def test_bundle_attention_column_mismatch(tmp_path):
    b = synth.perfect_bundle(3, n_entities=15, n_distractors=0)
    write_run_bundle(b, tmp_path / "b")
    write_tensor(b.attention[:, :164], tmp_path / "b" / "attention.bin")
    with pytest.raises(ConsistencyError) as e:
        load_run_bundle(tmp_path / "b")
    assert e.value.expected == (30, 165) and e.value.found == (30, 164)


def test_bundle_missing_file(tmp_path):
    write_run_bundle(synth.perfect_bundle(1), tmp_path / "b")
    os.remove(tmp_path / "b" / "predictions.json")
    with pytest.raises(IoError):
        load_run_bundle(tmp_path / "b")


def test_random_valid_bundles_load(tmp_path):
    for seed in range(10):
        b = synth.noisy_bundle(seed, f"vid{seed:03d}", with_grounding=seed % 2 == 0)
        write_run_bundle(b, tmp_path / str(seed))
        got = load_run_bundle(tmp_path / str(seed))
        assert np.array_equal(got.attention, b.attention)
        assert got.predictions == b.predictions


@pytest.mark.parametrize("name", sorted(CORRUPTIONS))
def test_single_field_corruption_fails(tmp_path, name):
    rng = random.Random(name)
    for seed in range(3):
        d = tmp_path / str(seed)
        write_run_bundle(synth.perfect_bundle(seed, f"vid{seed:03d}"), d)
        load_run_bundle(d)
        CORRUPTIONS[name](d, rng)
        with pytest.raises(InputError):
            load_run_bundle(d)


# ---------------------------------------------------------------- reports


def test_report_empty_skeleton():
    assert json.loads(render_report({})) == {"aggregate": {}, "per_video": []}
    assert render_report({}, "csv") == "video_id\n"


def test_report_keeps_headline_value(tmp_path):
    write_report({"aggregate": {"cider": 76.34}}, "json", tmp_path / "r.json")
    assert "76.34" in (tmp_path / "r.json").read_text()


def test_report_six_significant_digits():
    text = render_report({"aggregate": {"x": 1 / 3, "y": 123456789.0}})
    assert "0.333333" in text and "123457000" in text


def test_report_byte_identical(tmp_path):
    res = {"aggregate": {"lea": 0.5578, "hota": 0.3422}, "per_video": [{"video_id": "a", "lea": 0.1}]}
    for fmt in ("json", "csv"):
        write_report(res, fmt, tmp_path / f"1.{fmt}")
        write_report(dict(reversed(list(res.items()))), fmt, tmp_path / f"2.{fmt}")
        assert (tmp_path / f"1.{fmt}").read_bytes() == (tmp_path / f"2.{fmt}").read_bytes()


def test_report_unwritable(tmp_path):
    with pytest.raises(IoError):
        write_report({}, "json", tmp_path / "missing" / "r.json")
