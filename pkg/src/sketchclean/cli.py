"""Command-line surface: synth / train / eval / clean / retrieve / index / serve.

Exit codes: 0 success, 2 argument or input error, 1 runtime error. Logging
verbosity comes from the SKETCHCLEAN_LOG environment variable
(error | info | debug, default info).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import retrieval, training
from .model import load_checkpoint
from .raster import load_raster
from .synth import DefectProfile, make_dataset, read_dataset, write_dataset

log = logging.getLogger("sketchclean")

_LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


def _setup_logging() -> None:
    level = os.environ.get("SKETCHCLEAN_LOG", "info").lower()
    if level not in _LOG_LEVELS:
        level = "info"
    logging.basicConfig(level=_LOG_LEVELS[level], format="%(levelname)s %(name)s: %(message)s")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sketchclean",
                                     description="Sketch cleanup pipeline tools")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a rough/clean dataset directory")
    p.add_argument("--n", type=int, required=True, help="number of pairs")
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="dataset root directory")
    p.add_argument("--gap-rate", type=float, default=2.0)
    p.add_argument("--duplicates", type=int, default=1)
    p.add_argument("--duplicate-jitter", type=float, default=2.0)
    p.add_argument("--mesh-lines", type=int, default=2)
    p.add_argument("--extra-lines", type=int, default=1)
    p.add_argument("--blur-sigma", type=float, default=0.0)

    p = sub.add_parser("train", help="train a cleaner from a config file")
    p.add_argument("--config", required=True, help="JSON training config")
    p.add_argument("--data", required=True, help="dataset root directory")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--history", default=None, help="history JSONL path (default <out>.history.jsonl)")
    p.add_argument("--resume", default=None, help="resume from this checkpoint")
    p.add_argument("--checkpoint-every", type=int, default=0, help="epoch cadence, 0 = only final")
    p.add_argument("--paper-split", action="store_true",
                   help="use the fixed 632/169 split (801-pair datasets only)")

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out-csv", default=None)
    p.add_argument("--out-json", default=None)

    p = sub.add_parser("clean", help="clean one sketch image")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("input", help="input image (.png/.pgm)")
    p.add_argument("output", help="output image (.png)")

    p = sub.add_parser("index", help="build a retrieval index from a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--images", choices=["clean", "rough"], default="clean")

    p = sub.add_parser("retrieve", help="query an index with a sketch image")
    p.add_argument("--index", required=True)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("image")

    p = sub.add_parser("serve", help="run the HTTP cleaning/retrieval service")
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--index", default=None)
    p.add_argument("--data", default=None, help="dataset root for item thumbnails")
    p.add_argument("--port", type=int, default=8787)
    p.add_argument("--request-timeout", type=float, default=30.0)

    return parser


def _cmd_synth(args) -> int:
    profile = DefectProfile(
        gap_rate=args.gap_rate,
        duplicate_stroke_count=args.duplicates,
        duplicate_jitter=args.duplicate_jitter,
        mesh_line_count=args.mesh_lines,
        extra_line_count=args.extra_lines,
        blur_sigma=args.blur_sigma,
        seed=args.seed,
    )
    pairs = make_dataset(args.n, args.height, args.width, profile, seed=args.seed)
    write_dataset(pairs, args.out)
    log.info("wrote %d pairs to %s", len(pairs), args.out)
    return 0


def _cmd_train(args) -> int:
    cfg = training.load_config(args.config)
    _ids, pairs = read_dataset(args.data)
    train_pairs, test_pairs = training.split_dataset(
        pairs, cfg.split_ratio, cfg.seed, paper_compat=args.paper_split)
    history_path = args.history or str(args.out) + ".history.jsonl"
    log.info("training on %d pairs, holding out %d", len(train_pairs), len(test_pairs))
    net, _history = training.train(
        train_pairs, cfg,
        checkpoint_path=args.out,
        checkpoint_every=args.checkpoint_every,
        history_path=history_path,
        resume_from=args.resume,
    )
    if test_pairs:
        report = training.evaluate(net, test_pairs, cfg.loss)
        print(json.dumps({"test": report.to_dict()}))
    return 0


def _cmd_eval(args) -> int:
    net = load_checkpoint(args.checkpoint)
    ids, pairs = read_dataset(args.data)
    reports = training.evaluate_pairs(net, pairs, training.LossConfig())
    from .metrics import aggregate, write_reports_csv, write_summary_json

    summary = aggregate(reports)
    if args.out_csv:
        write_reports_csv(args.out_csv, ids, reports)
    if args.out_json:
        write_summary_json(args.out_json, summary)
    print(json.dumps(summary.to_dict()))
    return 0


def _cmd_clean(args) -> int:
    from .service import clean_image_bytes

    net = load_checkpoint(args.checkpoint)
    payload = Path(args.input).read_bytes()
    Path(args.output).write_bytes(clean_image_bytes(net, payload))
    log.info("cleaned %s -> %s", args.input, args.output)
    return 0


def _cmd_index(args) -> int:
    ids, pairs = read_dataset(args.data)
    items = []
    for pid, pair in zip(ids, pairs):
        raster = pair.clean if args.images == "clean" else pair.rough
        items.append((pid, pair.category or "", raster))
    index = retrieval.build_index(items)
    retrieval.save_index(index, args.out)
    log.info("indexed %d items into %s", len(index), args.out)
    return 0


def _cmd_retrieve(args) -> int:
    index = retrieval.load_index(args.index)
    q = retrieval.embed(load_raster(args.image))
    results = retrieval.query_scored(index, q, args.k)
    print(json.dumps([
        {"id": pid, "label": label, "similarity": sim} for pid, label, sim in results
    ]))
    return 0


def _cmd_serve(args) -> int:
    from .service import ServiceState, make_server

    net = load_checkpoint(args.checkpoint) if args.checkpoint else None
    index = retrieval.load_index(args.index) if args.index else None
    state = ServiceState(network=net, index=index,
                         data_root=Path(args.data) if args.data else None,
                         request_timeout=args.request_timeout)
    server = make_server(state, args.port)
    log.info("serving on port %d (model=%s, index=%s)",
             server.server_address[1], net is not None, index is not None)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "clean": _cmd_clean,
    "index": _cmd_index,
    "retrieve": _cmd_retrieve,
    "serve": _cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, FileNotFoundError, NotADirectoryError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        log.error("command failed: %s", exc)
        print(f"runtime error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
