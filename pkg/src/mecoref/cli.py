"""``mec`` command line: validate, cluster, assign, eval, gied, report.

Exit codes: 0 success, 1 bad input, 2 internal error.  ``MEC_LOG`` sets
the log level (default WARNING).
"""
from __future__ import annotations

import argparse
import configparser
import logging
import os
import sys
import warnings
from pathlib import Path
from typing import Optional, Sequence


from . import __version__
from .errors import ConsistencyError, InputError, MecError
from .ingest import (
    dump_json,
    find_bundles,
    load_run_bundle,
    load_tensor,
    render_report,
    _read_json,
)
from .pipeline import (
    METRIC_GROUPS,
    RunConfig,
    assign_job,
    cluster_job,
    evaluate_corpus,
    gied_for_embeddings,
    parallel_map,
)

log = logging.getLogger("mecoref")

EXIT_OK, EXIT_INPUT, EXIT_INTERNAL = 0, 1, 2

_DEFAULTS = {
    "format": "json",
    "jobs": "1",
    "levels": "2",
    "tracklet-scale": "1e-5",
    "iou-thresholds": "0.3,0.5",
    "metrics": ",".join(sorted(METRIC_GROUPS)),
    "iou-floor": "0.3",
    "lea-soft-weight": "both",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _add_shared(p: argparse.ArgumentParser):
    p.add_argument("--bundle", required=True, help="bundle directory, manifest, or directory of bundles")
    p.add_argument("--out", help="output path (stdout when omitted)")
    p.add_argument("--format", choices=("json", "csv"))
    p.add_argument("--jobs", type=int)
    p.add_argument("--levels", type=int)
    p.add_argument("--tracklet-scale", type=float)
    p.add_argument("--iou-thresholds")
    p.add_argument("--metrics")
    p.add_argument("--iou-floor", type=float)
    p.add_argument("--lea-soft-weight", choices=("both", "recall", "precision", "none"))
    p.add_argument("--config", help="key = value file; command-line flags take precedence")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="mec", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, hlp in (
        ("validate", "check every loader invariant of one or more bundles"),
        ("cluster", "write visual clusters per video"),
        ("assign", "write entity-group to cluster assignments per video"),
        ("eval", "compute the metric report"),
        ("gied", "ground-truth intra-entity distance, optionally per embedding dump"),
    ):
        p = sub.add_parser(name, help=hlp)
        _add_shared(p)
        if name == "gied":
            p.add_argument("--dumps", help="directory of embedding dumps (files or per-video subdirectories)")
    p = sub.add_parser("report", help="re-render a saved evaluation JSON")
    p.add_argument("--input", required=True)
    p.add_argument("--out")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    return ap


def _read_config(path) -> dict:
    cp = configparser.ConfigParser()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise InputError(f"cannot read config {path}: {e}") from e
    try:
        cp.read_string("[mec]\n" + text)
    except configparser.Error as e:
        raise InputError(f"bad config {path}: {e}") from e
    return {k.replace("_", "-"): v for k, v in cp["mec"].items()}


def _setting(args, name: str, conf: dict):
    val = getattr(args, name.replace("-", "_"), None)
    if val is not None:
        return val
    return conf.get(name, _DEFAULTS.get(name))


def make_config(args) -> RunConfig:
    conf = _read_config(args.config) if getattr(args, "config", None) else {}
    try:
        ths = tuple(float(x) for x in str(_setting(args, "iou-thresholds", conf)).split(",") if x.strip())
        metrics = frozenset(x.strip() for x in str(_setting(args, "metrics", conf)).split(",") if x.strip())
        cfg = RunConfig(
            levels=int(_setting(args, "levels", conf)),
            tracklet_scale=float(_setting(args, "tracklet-scale", conf)),
            iou_thresholds=ths,
            metrics=metrics,
            iou_floor=float(_setting(args, "iou-floor", conf)),
            lea_soft_weight=str(_setting(args, "lea-soft-weight", conf)),
            jobs=int(_setting(args, "jobs", conf)),
        )
    except ValueError as e:
        raise InputError(f"bad configuration: {e}") from e
    args.format = _setting(args, "format", conf)
    if args.out is None and conf.get("out"):
        args.out = conf["out"]
    return cfg


def _emit(text: str, out: Optional[str]):
    if out:
        try:
            with open(out, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as e:
            raise InputError(f"cannot write {out}: {e}") from e
    else:
        sys.stdout.write(text)


def _load_all(bundle_arg):
    bundles = [load_run_bundle(m) for m in find_bundles(bundle_arg)]
    return sorted(bundles, key=lambda b: b.video_id)


def _single_or_list(items: list):
    return items[0] if len(items) == 1 else items


def cmd_validate(args) -> int:
    make_config(args)
    errors = []
    manifests = find_bundles(args.bundle)
    for m in manifests:
        try:
            load_run_bundle(m)
        except InputError as e:
            errors.append({
                "manifest": str(m),
                "error": type(e).__name__,
                "file": str(getattr(e, "path", "") or ""),
                "field": getattr(e, "field", None) or "",
                "video_id": getattr(e, "video_id", None) or "",
                "message": str(e),
            })
    report = {"bundles": len(manifests), "error_count": len(errors), "errors": errors}
    _emit(dump_json(report), args.out)
    sys.stderr.write(f"{len(errors)} errors\n")
    return EXIT_OK if not errors else EXIT_INPUT


def cmd_cluster(args) -> int:
    cfg = make_config(args)
    bundles = _load_all(args.bundle)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rows = parallel_map(_Job(cluster_job, cfg), bundles, cfg.jobs)
    _emit(dump_json(_single_or_list(rows)), args.out)
    return EXIT_OK


def cmd_assign(args) -> int:
    cfg = make_config(args)
    bundles = _load_all(args.bundle)
    rows = parallel_map(_Job(assign_job, cfg), bundles, cfg.jobs)
    _emit(dump_json(_single_or_list(rows)), args.out)
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = make_config(args)
    result = evaluate_corpus(_load_all(args.bundle), cfg)
    _emit(render_report(result, args.format), args.out)
    return EXIT_OK


def _dump_embeddings(entry: Path, bundles) -> list:
    if entry.is_file():
        if len(bundles) != 1:
            raise ConsistencyError(f"dump {entry.name} is a single tensor but there are {len(bundles)} videos")
        pairs = [(bundles[0], load_tensor(entry))]
    else:
        pairs = []
        for b in bundles:
            f = entry / f"{b.video_id}.bin"
            if not f.is_file():
                raise ConsistencyError(f"dump {entry.name} lacks {f.name}", video_id=b.video_id)
            pairs.append((b, load_tensor(f)))
    for b, x in pairs:
        if x.ndim != 2 or x.shape[0] != len(b.proposals):
            raise ConsistencyError(f"dump {entry.name} embeddings shape", expected=f"({len(b.proposals)}, d)",
                                   found=tuple(x.shape), video_id=b.video_id)
    return pairs


def cmd_gied(args) -> int:
    cfg = make_config(args)
    bundles = _load_all(args.bundle)
    if not any(b.grounding is not None for b in bundles):
        raise InputError("GIED needs grounding annotations; none of the bundles has grounding.json")
    if args.dumps:
        d = Path(args.dumps)
        if not d.is_dir():
            raise InputError(f"no such dump directory: {d}")
        entries = sorted((e for e in d.iterdir() if e.is_dir() or e.suffix == ".bin"), key=lambda e: e.name)
        named = [(e.stem if e.is_file() else e.name, _dump_embeddings(e, bundles)) for e in entries]
    else:
        named = [("bundle", [(b, b.embeddings) for b in bundles])]
    rows = []
    for name, pairs in named:
        v = gied_for_embeddings(pairs, cfg.iou_floor)
        rows.append({"video_id": name, "dump": name, "gied": "unavailable" if v is None else v})
    if args.format == "csv":
        text = render_report({"per_video": [{"video_id": r["dump"], "gied": r["gied"]} for r in rows]}, "csv")
        text = "dump" + text[len("video_id"):]
    else:
        text = dump_json({"gied": [{"dump": r["dump"], "gied": r["gied"]} for r in rows]})
    _emit(text, args.out)
    return EXIT_OK


def cmd_report(args) -> int:
    data = _read_json(args.input)
    if not isinstance(data, dict):
        raise InputError(f"{args.input}: not an evaluation report")
    _emit(render_report(data, args.format), args.out)
    return EXIT_OK


class _Job:
    """Picklable ``fn(bundle, cfg)`` closure for process pools."""

    def __init__(self, fn, cfg):
        self.fn, self.cfg = fn, cfg

    def __call__(self, b):
        return self.fn(b, self.cfg)


COMMANDS = {
    "validate": cmd_validate,
    "cluster": cmd_cluster,
    "assign": cmd_assign,
    "eval": cmd_eval,
    "gied": cmd_gied,
    "report": cmd_report,
}


def _setup_logging():
    level = os.environ.get("MEC_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv: Optional[Sequence[str]] = None) -> int:
    _setup_logging()
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:  # usage errors, --help, --version
        return e.code if isinstance(e.code, int) else EXIT_INPUT
    try:
        return COMMANDS[args.command](args)
    except InputError as e:
        sys.stderr.write(f"error: {type(e).__name__}: {e}\n")
        return EXIT_INPUT
    except MecError as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_INTERNAL
    except Exception as e:  # noqa: BLE001
        log.exception("internal error")
        sys.stderr.write(f"internal error: {type(e).__name__}: {e}\n")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
