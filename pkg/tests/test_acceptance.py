"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines inline; they are
also repeated in the terminal summary.
"""
import contextlib
import json
import os
import random
import time
from pathlib import Path

import numpy as np

from mecoref import cli
from mecoref.assign import aggregate_attention, assign_clusters, build_fixed_attention, pooled_entity_embedding
from mecoref.finch import apply_constraints, cosine_distance_matrix, finch_hierarchy, finch_partition_step
from mecoref.ingest import grounding_stats, load_grounding, write_run_bundle, write_tensor
from mecoref.metrics.cider import cider
from mecoref.metrics.gied import match_entities
from mecoref.metrics.hota import ALPHAS, hota
from mecoref.metrics.hungarian import hungarian_match
from mecoref.metrics.lea import lea
from mecoref.model import VisualClusterSet, groups_from_buckets

import synth
from oracles import (
    aggregate_attention_loops,
    best_assignment_cost,
    cider_oracle,
    hota_oracle,
    lea_oracle,
    nn_graph_components,
)
from test_metrics_text import CANDS, CORPUS, WORDS, random_partition
from test_metrics_tracking import random_tracks, to_trackset
from test_finch import proposals as make_proposals

DATA = Path(__file__).parent / "data"


@contextlib.contextmanager
def criterion(log, n, title, limit=None):
    t0 = time.perf_counter()
    try:
        yield
        dt = time.perf_counter() - t0
        if limit is not None:
            assert dt < limit, f"runtime {dt:.2f}s exceeds {limit}s"
    except BaseException as e:
        line = f"FAIL  criterion {n}: {title} ({type(e).__name__}: {e})"
        print("\n" + line)
        log.append(line)
        raise
    line = f"PASS  criterion {n}: {title} [{dt:.2f}s]"
    print("\n" + line)
    log.append(line)


def run(argv, capsys):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_1_perfection_fixture(tmp_path, capsys, acceptance):
    write_run_bundle(synth.perfect_bundle(0), tmp_path / "b")
    with criterion(acceptance, 1, "perfection fixture through eval", limit=1.0):
        code, out, _ = run(["eval", "--bundle", tmp_path / "b"], capsys)
        assert code == 0
        agg = json.loads(out)["aggregate"]
        assert abs(agg["cider"] - 10.0) <= 1e-6
        assert agg["lea"] == 1.0 and agg["lea_soft"] == agg["lea"]
        assert agg["iou@0.3"] == agg["iou@0.5"] == 1.0
        assert agg["hota"] == 1.0
        assert agg["grouping_purity"] == 1.0


def test_2_finch_step_oracle(acceptance):
    rng = np.random.default_rng(20)
    with criterion(acceptance, 2, "first-neighbour step equals graph-component oracle (500)", limit=10.0):
        for _ in range(500):
            n = int(rng.integers(1, 13))
            x = rng.normal(size=(n, int(rng.integers(2, 6))))
            frames = rng.integers(0, max(1, n // 2), size=n).tolist()
            tracks = rng.integers(0, max(1, n // 3), size=n).tolist()
            d = apply_constraints(cosine_distance_matrix(x), make_proposals(frames, tracks), 1e-5)
            assert finch_partition_step(d).tolist() == nn_graph_components(d)


def test_3_constraint_invariants(acceptance):
    rng = np.random.default_rng(30)
    with criterion(acceptance, 3, "same-frame exclusion and tracklet cohesion (1000 videos)", limit=30.0):
        done = 0
        while done < 1000:
            ps, x = synth.random_video(rng, max_frames=11, max_slots=15, dim=16)
            raw = cosine_distance_matrix(x)
            off = raw[~np.eye(len(raw), dtype=bool)]
            if off.size and not (off.min() > 0.01 and off.max() <= 2.0):
                continue
            h = finch_hierarchy(x, ps, 1e-5, levels=4)
            frames = ps.frames
            for lv in h.levels:
                seen = set()
                for i, c in enumerate(lv):
                    assert (c, frames[i]) not in seen
                    seen.add((c, frames[i]))
            level0 = h.levels[0]
            owner = {}
            for i, t in enumerate(ps.tracklets):
                assert owner.setdefault(t, level0[i]) == level0[i]
            done += 1


def test_4_hota_and_hungarian_oracles(acceptance):
    rng = np.random.default_rng(40)
    with criterion(acceptance, 4, "HOTA (200) and Hungarian (1000) oracle equivalence", limit=60.0):
        for _ in range(200):
            gt, pred = random_tracks(rng, max_tracks=4, max_frames=6)
            r = hota(to_trackset(pred), to_trackset(gt))
            want = hota_oracle(gt, pred, ALPHAS)
            for a in range(len(ALPHAS)):
                assert abs(r.hota_alpha[a] - want[a][0]) <= 1e-9
                assert abs(r.deta_alpha[a] - want[a][1]) <= 1e-9
                assert abs(r.assa_alpha[a] - want[a][2]) <= 1e-9
        for _ in range(1000):
            c = rng.normal(size=(int(rng.integers(1, 8)), int(rng.integers(1, 8))))
            r, k = hungarian_match(c)
            assert len(set(r.tolist())) == len(r) == min(c.shape) == len(set(k.tolist()))
            assert abs(c[r, k].sum() - best_assignment_cost(c)) <= 1e-9


def test_5_lea_and_cider_oracles(acceptance):
    rng = random.Random(50)
    with criterion(acceptance, 5, "LEA (500) and CIDEr oracle equivalence, identities (100)"):
        for _ in range(500):
            n = rng.randrange(1, 9)
            ms = list(range(n))
            key = random_partition(rng, ms, rng.randrange(1, n + 1))
            resp = random_partition(rng, ms, rng.randrange(1, n + 1))
            s = lea(key, resp)
            p, r, f = lea_oracle(key, resp)
            assert max(abs(s.precision - p), abs(s.recall - r), abs(s.f1 - f)) <= 1e-12
        _, scores = cider(CANDS, CORPUS, CORPUS)
        for c, ref, s in zip(CANDS, CORPUS, scores):
            assert abs(s - cider_oracle(c, ref, CORPUS)) <= 1e-6
        for _ in range(100):
            caps = [" ".join(rng.choice(WORDS) for _ in range(rng.randrange(1, 8)))
                    for _ in range(rng.randrange(1, 6))]
            _, scores = cider(caps, caps, caps)
            assert all(abs(s - 10.0) <= 1e-6 for s in scores)
            n = rng.randrange(1, 9)
            part = random_partition(rng, list(range(n)), rng.randrange(1, n + 1))
            assert lea(part, part).f1 == 1.0


def test_6_eca_properties(acceptance):
    rng = np.random.default_rng(60)
    R = 6
    with criterion(acceptance, 6, "attention aggregation, scale invariance, pooled embeddings"):
        for _ in range(20):
            a = rng.random((30, 165))
            slots = [(i, k) for i in range(5) for k in range(R)]
            n_g = int(rng.integers(1, 10))
            buckets = [[] for _ in range(n_g)]
            for s in slots:
                if rng.random() < 0.8:
                    buckets[int(rng.integers(n_g))].append(s)
            groups = groups_from_buckets([b for b in buckets if b] or [[slots[0]]])
            n_cl = int(rng.integers(1, 15))
            labels = rng.integers(0, n_cl, size=165)
            labels[:n_cl] = np.arange(n_cl)
            cl = VisualClusterSet(tuple(tuple(np.flatnonzero(labels == c).tolist()) for c in range(n_cl)))
            aff = aggregate_attention(a, groups, cl, R)
            assert np.abs(aff - aggregate_attention_loops(a, list(groups), cl.clusters, R)).max() <= 1e-6
            base = assign_clusters(aff)
            x = rng.normal(size=(165, 32))
            fixed = build_fixed_attention(base, groups, cl, a.shape)
            per_role, per_group = pooled_entity_embedding(fixed, x, groups, R)
            for j, g in enumerate(groups):
                for s in g:
                    assert np.abs(per_role[s] - per_group[j]).max() <= 1e-7
        for c in rng.uniform(1e-3, 1e3, size=100):
            assert assign_clusters(aggregate_attention(c * a, groups, cl, R)).clusters == base.clusters


def test_7_grounding_statistics(acceptance):
    full = os.environ.get("MEC_GROUNDING_FILE")
    if full:
        title = "grounding statistics of the released file"
        want = (2810, 48026, 8157, 5.89, 17.09)
        path = Path(full)
    else:
        title = "grounding statistics of the bundled miniature (released file absent)"
        want = (3, 15, 6, 2.5, 5.0)
        path = DATA / "grounding_mini.json"
    with criterion(acceptance, 7, title):
        s = grounding_stats(load_grounding(path))
        assert (s.num_videos, s.num_boxes, s.num_unique_captions) == want[:3]
        assert abs(s.boxes_per_caption - want[3]) <= 0.01
        assert abs(s.boxes_per_video - want[4]) <= 0.01


def test_8_determinism(corpus100, tmp_path, capsys, acceptance):
    with criterion(acceptance, 8, "jobs 1 vs 8 byte-identical on 100 videos; eval < 10 s"):
        t0 = time.perf_counter()
        code, _, _ = run(["eval", "--bundle", corpus100, "--jobs", 1, "--out", tmp_path / "eval1.json"], capsys)
        assert code == 0
        single = time.perf_counter() - t0
        assert single < 10.0, f"single-threaded eval took {single:.2f}s"
        code, _, _ = run(["eval", "--bundle", corpus100, "--jobs", 8, "--out", tmp_path / "eval8.json"], capsys)
        assert code == 0
        assert (tmp_path / "eval1.json").read_bytes() == (tmp_path / "eval8.json").read_bytes()
        for cmd in ("validate", "cluster", "assign", "gied"):
            outs = []
            for jobs in (1, 8):
                target = tmp_path / f"{cmd}{jobs}.json"
                code, _, _ = run([cmd, "--bundle", corpus100, "--jobs", jobs, "--out", target], capsys)
                assert code == 0, cmd
                outs.append(target.read_bytes())
            assert outs[0] == outs[1], cmd
        for fmt in ("json", "csv"):
            texts = [run(["report", "--input", tmp_path / f"eval{j}.json", "--format", fmt], capsys)[1]
                     for j in (1, 8)]
            assert texts[0] == texts[1] and texts[0]


def test_9_gied_decreases_under_contraction(tmp_path, capsys, acceptance):
    bundles = [synth.perfect_bundle(s, f"vid{s:03d}") for s in range(4)]
    for b in bundles:
        write_run_bundle(b, tmp_path / "corpus" / b.video_id)
    rng = np.random.default_rng(90)
    dumps = tmp_path / "dumps"
    steps = 6
    for b in bundles:
        groups = match_entities(b.proposals, b.grounding).values()
        x0 = rng.normal(size=(len(b.proposals), 16)) * 0.3
        centres = {}
        for members in groups:
            c = rng.normal(size=16)
            c *= 3.0 / np.linalg.norm(c)
            for i in members:
                centres[i] = c
        for k in range(steps):
            lam = 1.0 - k / steps  # spread shrinks linearly to 1/steps of its start
            x = x0.copy()
            for i, c in centres.items():
                x[i] = c + lam * x0[i]
            (dumps / f"step{k}").mkdir(parents=True, exist_ok=True)
            write_tensor(x, dumps / f"step{k}" / f"{b.video_id}.bin")
    with criterion(acceptance, 9, "GIED strictly decreases along a contracting dump sequence"):
        code, out, _ = run(["gied", "--bundle", tmp_path / "corpus", "--dumps", dumps], capsys)
        assert code == 0
        rows = json.loads(out)["gied"]
        assert [r["dump"] for r in rows] == [f"step{k}" for k in range(steps)]
        vals = [r["gied"] for r in rows]
        assert all(a > b for a, b in zip(vals, vals[1:])), vals
