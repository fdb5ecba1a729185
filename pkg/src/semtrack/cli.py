"""Command-line entry point: ``semtrack {track,query,eval,suggest-queries}``."""
from __future__ import annotations

import argparse
import io
import json
import logging
import os
import sys
import tempfile
from dataclasses import asdict
from pathlib import Path

from .embed import Backend, EmbedderConfig, OOVPolicy, make_embedder
from .evaluate import evaluate, suggest_query_candidates, sweep_grid, write_sweep_csv
from .ingest import (ParseError, load_ground_truth, load_sentence_vectors, load_word_vectors,
                     parse_frame_records)
from .search import QueryConfig, proposals_to_json, search
from .track import TrackerConfig, TrackerState, finalize, read_tracks, step, tracks_to_json

logger = logging.getLogger("semtrack")

_LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING,
               "info": logging.INFO, "debug": logging.DEBUG}
_BACKENDS = {"avg": Backend.AVERAGED_WORDS, "averaged_words": Backend.AVERAGED_WORDS,
             "precomputed": Backend.PRECOMPUTED_SENTENCE,
             "precomputed_sentence": Backend.PRECOMPUTED_SENTENCE}
_OOV = {"skip": OOVPolicy.SKIP_TOKEN, "skip_token": OOVPolicy.SKIP_TOKEN,
        "fail": OOVPolicy.FAIL}


class CLIError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _gate(value: str):
    if value.lower() in ("off", "none", "disabled"):
        return None
    try:
        return float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number or 'off', got {value!r}") from None


def _path(value: str) -> Path:
    return Path(value)


def _open_input(path: Path, mode="r"):
    if not path.is_file():
        raise CLIError(f"file not found: {path}")
    return open(path, mode, encoding="utf-8", newline="")


def _write_output(path: Path | None, text: str) -> None:
    """Write to ``path`` atomically (temp file + rename), or to stdout."""
    if path is None:
        sys.stdout.write(text)
        return
    directory = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _dumps(obj) -> str:
    return json.dumps(obj, indent=1, ensure_ascii=False) + "\n"


def _add_embedder_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--backend", choices=sorted(_BACKENDS), default="avg",
                   help="sentence vectors from averaged word vectors or a precomputed sidecar")
    p.add_argument("--vectors", type=_path, help="word-vector text file (avg backend)")
    p.add_argument("--sentences", type=_path, help="sentence-vector .jsonl (precomputed backend)")
    p.add_argument("--oov", choices=sorted(_OOV), default="skip",
                   help="out-of-vocabulary policy for the avg backend")


def _build_embedder(args):
    cfg = EmbedderConfig(_BACKENDS[args.backend], _OOV[args.oov])
    if cfg.backend is Backend.AVERAGED_WORDS:
        if args.vectors is None:
            raise CLIError("--vectors is required with --backend avg")
        with _open_input(args.vectors) as fh:
            return make_embedder(cfg, table=load_word_vectors(fh)), cfg
    if args.sentences is None:
        raise CLIError("--sentences is required with --backend precomputed")
    with _open_input(args.sentences) as fh:
        return make_embedder(cfg, sidecar=load_sentence_vectors(fh)), cfg


def _load_tracks(path: Path):
    with _open_input(path) as fh:
        return read_tracks(fh)


def cmd_track(args) -> int:
    config = TrackerConfig(args.t_sim, args.cutting, args.min_len, args.spatial_gate)
    embedder, _ = _build_embedder(args)
    with _open_input(args.frames) as fh:
        frames = parse_frame_records(fh)
    state = TrackerState(config)
    for frame in frames:
        step(state, frame, embedder)
    tracks = finalize(state)
    _write_output(args.out, _dumps(tracks_to_json(tracks, config)))
    summary = (f"frames processed: {state.frames_processed}, tracks stored: {len(tracks)}, "
               f"discarded: {len(state.discarded)}\n")
    (sys.stdout if args.out is not None else sys.stderr).write(summary)
    return 0


def cmd_query(args) -> int:
    cfg = QueryConfig(args.s_sim, args.top_k)
    _, tracks = _load_tracks(args.tracks)
    embedder, _ = _build_embedder(args)
    proposals = search(args.text, tracks, cfg, embedder)
    _write_output(args.out, _dumps(proposals_to_json(proposals)))
    return 0


def _parse_sweep(specs: list[str]) -> dict[float, Path]:
    out = {}
    for spec in specs:
        t_sim, sep, path = spec.partition("=")
        try:
            if not sep:
                raise ValueError
            out[float(t_sim)] = Path(path)
        except ValueError:
            raise CLIError(f"--sweep-tracks expects T_SIM=PATH, got {spec!r}") from None
    return out


def cmd_eval(args) -> int:
    if not 0.0 < args.iou_thr <= 1.0:
        raise CLIError("IoU threshold must be in (0,1]")
    track_config, tracks = _load_tracks(args.tracks)
    with _open_input(args.gt) as fh:
        gt = load_ground_truth(fh)
    embedder, emb_cfg = _build_embedder(args)
    config = {"backend": emb_cfg.backend.value, "oov_policy": emb_cfg.oov_policy.value,
              "tracker": None if track_config is None else asdict(track_config)}
    report = evaluate(gt.queries, tracks, embedder, args.iou_thr, args.s_sim, config)

    if args.sweep_tracks:
        if args.csv is None:
            raise CLIError("--sweep-tracks needs --csv")
        by_t = {t: _load_tracks(p)[1] for t, p in _parse_sweep(args.sweep_tracks).items()}
        grid = sweep_grid(gt.queries, by_t, args.s_sim_grid, embedder, args.iou_thr)
        buf = io.StringIO()
        write_sweep_csv(buf, grid)
        _write_output(args.csv, buf.getvalue())

    _write_output(args.out, _dumps(report.to_json()))
    line = f"mAP={report.map_all:.4f} mAP(recall>=0.5)={report.map_recall_ge_05:.4f}\n"
    (sys.stdout if args.out is not None else sys.stderr).write(line)
    return 0


def cmd_suggest_queries(args) -> int:
    with _open_input(args.frames) as fh:
        frames = parse_frame_records(fh)
    if not frames:
        raise CLIError(f"no frame records in {args.frames}")
    ranked = suggest_query_candidates(frames, args.sample, args.top, args.seed)
    _write_output(args.out, "".join(f"{count}\t{caption}\n" for caption, count in ranked))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="semtrack", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("track", help="build semantic tracks from a frames file")
    p.add_argument("--frames", type=_path, required=True)
    _add_embedder_args(p)
    p.add_argument("--t-sim", type=float, default=0.7, help="track similarity threshold")
    p.add_argument("--cutting", type=int, default=5, help="cutting threshold (frames)")
    p.add_argument("--min-len", type=int, default=5, help="minimum matched frames per track")
    p.add_argument("--spatial-gate", type=_gate, default=0.3,
                   help="box IoU gate against the track's last box, or 'off'")
    p.add_argument("--out", type=_path)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("query", help="retrieve tracks for a natural-language query")
    p.add_argument("--tracks", type=_path, required=True)
    p.add_argument("--text", required=True)
    _add_embedder_args(p)
    p.add_argument("--s-sim", type=float, default=0.6, help="search similarity threshold")
    p.add_argument("--top-k", type=int)
    p.add_argument("--out", type=_path)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("eval", help="score tracks against ground-truth segments")
    p.add_argument("--tracks", type=_path, required=True)
    p.add_argument("--gt", type=_path, required=True)
    _add_embedder_args(p)
    p.add_argument("--iou-thr", type=float, default=0.3)
    p.add_argument("--s-sim", type=float, default=0.6, help="search similarity threshold")
    p.add_argument("--out", type=_path)
    p.add_argument("--sweep-tracks", action="append", default=[], metavar="T_SIM=PATH",
                   help="tracks file built at the given track similarity threshold")
    p.add_argument("--s-sim-grid", type=float, nargs="+", default=[0.6, 0.7, 0.8])
    p.add_argument("--csv", type=_path, help="recall/precision grid output")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("suggest-queries", help="rank frequent captions as query candidates")
    p.add_argument("--frames", type=_path, required=True)
    p.add_argument("--sample", type=int, default=200)
    p.add_argument("--top", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=_path)
    p.set_defaults(func=cmd_suggest_queries)
    return parser


def _configure_logging() -> None:
    level = _LOG_LEVELS.get(os.environ.get("SEMTRACK_LOG", "warn").lower(), logging.WARNING)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    logger.handlers[:] = [handler]
    logger.setLevel(level)
    logger.propagate = False


def main(argv=None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CLIError, ParseError, ValueError, KeyError, OSError) as exc:
        print(f"semtrack {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
