"""Tracking by caption.

Boxes from consecutive frames are linked into *semantic tracks* when they
pass a spatial gate against the track's last box and their caption vector
is close enough (cosine) to the track's representative vector, i.e. the
vector of the first caption registered to the track. Unmatched tracks carry
their previous box forward; after more than ``cutting_threshold``
consecutive misses they are cut, trimmed of trailing carried frames, and
kept only if they hold at least ``min_track_len`` matched frames.
"""
from __future__ import annotations

import enum
import json
import logging
from dataclasses import asdict, dataclass, field
from typing import IO, Iterable

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import _validation
from .embed import Embedder, cosine_matrix
from .ingest import BoundingBox, FrameRecord, ParseError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrackerConfig:
    track_sim_threshold: float = 0.7
    cutting_threshold: int = 5
    min_track_len: int = 5
    spatial_gate_iou: float | None = 0.3

    def __post_init__(self):
        _validation.check_similarity(self.track_sim_threshold, "track similarity threshold")
        _validation.check_int(self.cutting_threshold, "cutting threshold", 0)
        _validation.check_int(self.min_track_len, "minimum track length", 1)
        _validation.check_gate(self.spatial_gate_iou)


class ObservationKind(str, enum.Enum):
    MATCHED = "matched"
    CARRIED = "carried"


class TrackStatus(str, enum.Enum):
    ACTIVE = "active"
    STORED = "stored"
    DISCARDED = "discarded"


@dataclass(frozen=True)
class TrackObservation:
    frame_index: int
    box: BoundingBox
    caption: str
    similarity_to_rep: float
    kind: ObservationKind


@dataclass(eq=False)
class SemanticTrack:
    track_id: int
    representative_caption: str
    representative_vector: np.ndarray
    start_frame: int
    end_frame: int
    observations: list[TrackObservation] = field(default_factory=list)
    state: TrackStatus = TrackStatus.ACTIVE
    miss_count: int = 0

    @property
    def n_matched(self) -> int:
        return sum(o.kind is ObservationKind.MATCHED for o in self.observations)

    @property
    def last_box(self) -> BoundingBox:
        return self.observations[-1].box

    def __eq__(self, other):
        if not isinstance(other, SemanticTrack):
            return NotImplemented
        return (self.track_id == other.track_id
                and self.representative_caption == other.representative_caption
                and np.array_equal(self.representative_vector, other.representative_vector)
                and self.start_frame == other.start_frame
                and self.end_frame == other.end_frame
                and self.observations == other.observations
                and self.state == other.state
                and self.miss_count == other.miss_count)


@dataclass
class TrackerState:
    config: TrackerConfig = field(default_factory=TrackerConfig)
    next_track_id: int = 0
    active: list[SemanticTrack] = field(default_factory=list)
    stored: list[SemanticTrack] = field(default_factory=list)
    discarded: list[SemanticTrack] = field(default_factory=list)
    last_frame_seen: int = -1
    frames_processed: int = 0


def box_iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two axis-aligned boxes."""
    iw = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    ih = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.w * a.h + b.w * b.h - inter)


def _box_iou_matrix(boxes_a: np.ndarray, boxes_b: np.ndarray) -> np.ndarray:
    # rows of (x, y, w, h)
    ax, ay, aw, ah = (boxes_a[:, i:i + 1] for i in range(4))
    bx, by, bw, bh = (boxes_b[:, i] for i in range(4))
    iw = np.minimum(ax + aw, bx + bw) - np.maximum(ax, bx)
    ih = np.minimum(ay + ah, by + bh) - np.maximum(ay, by)
    inter = np.where((iw > 0) & (ih > 0), iw * ih, 0.0)
    return inter / (aw * ah + bw * bh - inter)


def _as_array(boxes) -> np.ndarray:
    return np.array([(b.x, b.y, b.w, b.h) for b in boxes], dtype=np.float64)


def _cut(state: TrackerState, track: SemanticTrack) -> None:
    obs = track.observations
    while obs and obs[-1].kind is ObservationKind.CARRIED:
        obs.pop()
    track.miss_count = 0
    if track.n_matched >= state.config.min_track_len:
        track.state = TrackStatus.STORED
        state.stored.append(track)
    else:
        track.state = TrackStatus.DISCARDED
        state.discarded.append(track)


def step(state: TrackerState, frame: FrameRecord, embedder: Embedder) -> TrackerState:
    """Advance the tracker by one frame. Mutates and returns ``state``.

    Boxes whose caption has no vector are dropped with a warning.
    """
    if frame.frame_index <= state.last_frame_seen:
        raise ValueError(f"out-of-order frame_index {frame.frame_index} "
                         f"(last seen {state.last_frame_seen})")
    cfg = state.config
    fidx = frame.frame_index

    positions, vectors = [], []
    for pos, cb in enumerate(frame.boxes):
        vec = embedder.embed(cb.caption)
        if vec is None:
            logger.warning("frame %d box %d: caption %r has no vector; box skipped",
                           fidx, pos, cb.caption)
            continue
        positions.append(pos)
        vectors.append(vec)

    assigned: dict[int, tuple[int, float]] = {}  # active row -> (box column, sim)
    if state.active and vectors:
        sims = cosine_matrix(np.stack([t.representative_vector for t in state.active]),
                             np.stack(vectors))
        ok = sims >= cfg.track_sim_threshold
        if cfg.spatial_gate_iou is not None:
            ious = _box_iou_matrix(_as_array(t.last_box for t in state.active),
                                   _as_array(frame.boxes[p].box for p in positions))
            ok &= ious >= cfg.spatial_gate_iou
        rows, cols = np.nonzero(ok)
        if rows.size:
            vals = sims[rows, cols]
            # active is kept in track_id order and columns in box order,
            # so row/col indices realize the (track_id, box position) tie-break
            order = np.lexsort((cols, rows, -vals))
            used_cols: set[int] = set()
            for k in order:
                r, c = int(rows[k]), int(cols[k])
                if r in assigned or c in used_cols:
                    continue
                assigned[r] = (c, float(vals[k]))
                used_cols.add(c)

    survivors = []
    for r, track in enumerate(state.active):
        if r in assigned:
            c, sim = assigned[r]
            cb = frame.boxes[positions[c]]
            track.observations.append(TrackObservation(
                fidx, cb.box, cb.caption, sim, ObservationKind.MATCHED))
            track.miss_count = 0
            track.end_frame = fidx
            survivors.append(track)
            continue
        prev = track.observations[-1]
        track.observations.append(TrackObservation(
            fidx, prev.box, prev.caption, prev.similarity_to_rep, ObservationKind.CARRIED))
        track.miss_count += 1
        if track.miss_count > cfg.cutting_threshold:
            _cut(state, track)
        else:
            survivors.append(track)

    taken = {c for c, _ in assigned.values()}
    for c, (pos, vec) in enumerate(zip(positions, vectors)):
        if c in taken:
            continue
        cb = frame.boxes[pos]
        survivors.append(SemanticTrack(
            track_id=state.next_track_id,
            representative_caption=cb.caption,
            representative_vector=vec,
            start_frame=fidx,
            end_frame=fidx,
            observations=[TrackObservation(fidx, cb.box, cb.caption, 1.0,
                                           ObservationKind.MATCHED)],
        ))
        state.next_track_id += 1

    state.active = survivors
    state.last_frame_seen = fidx
    state.frames_processed += 1
    return state


def finalize(state: TrackerState) -> list[SemanticTrack]:
    """Cut every active track; return stored tracks ordered by (start_frame, track_id)."""
    for track in state.active:
        _cut(state, track)
    state.active = []
    return sorted(state.stored, key=lambda t: (t.start_frame, t.track_id))


def track_frames(frames: Iterable[FrameRecord], embedder: Embedder,
                 config: TrackerConfig | None = None) -> TrackerState:
    state = TrackerState(config or TrackerConfig())
    for frame in frames:
        step(state, frame, embedder)
    finalize(state)
    return state


class CaptionTracker(BaseEstimator):
    """Estimator wrapper around :func:`step` / :func:`finalize`.

    Parameters
    ----------
    embedder : Embedder
        Maps a caption to its sentence vector.
    track_sim_threshold : float
        Minimum cosine between a box's caption and a track's representative
        caption for the box to join the track.
    cutting_threshold : int
        Number of consecutive misses a track survives.
    min_track_len : int
        Minimum number of matched frames for a cut track to be stored.
    spatial_gate_iou : float or None
        Minimum box IoU against the track's last box. ``None`` disables
        the gate.

    Attributes
    ----------
    tracks_ : list of SemanticTrack
        Stored tracks, ordered by (start_frame, track_id).
    discarded_ : list of SemanticTrack
    n_frames_ : int
        Number of frame records consumed.
    """

    def __init__(self, embedder=None, track_sim_threshold=0.7, cutting_threshold=5,
                 min_track_len=5, spatial_gate_iou=0.3):
        self.embedder = embedder
        self.track_sim_threshold = track_sim_threshold
        self.cutting_threshold = cutting_threshold
        self.min_track_len = min_track_len
        self.spatial_gate_iou = spatial_gate_iou

    def _config(self) -> TrackerConfig:
        return TrackerConfig(self.track_sim_threshold, self.cutting_threshold,
                             self.min_track_len, self.spatial_gate_iou)

    def fit(self, frames, y=None):
        if self.embedder is None:
            raise ValueError("CaptionTracker needs an embedder")
        state = track_frames(frames, self.embedder, self._config())
        self.config_ = state.config
        self.tracks_ = sorted(state.stored, key=lambda t: (t.start_frame, t.track_id))
        self.discarded_ = state.discarded
        self.n_frames_ = state.frames_processed
        return self

    def fit_predict(self, frames, y=None) -> list[SemanticTrack]:
        return self.fit(frames).tracks_

    def to_json(self) -> dict:
        check_is_fitted(self, "tracks_")
        return tracks_to_json(self.tracks_, self.config_)


# -- tracks file -------------------------------------------------------------

def tracks_to_json(tracks: Iterable[SemanticTrack], config: TrackerConfig | None = None) -> dict:
    out = []
    for t in tracks:
        out.append({
            "id": t.track_id,
            "rep_caption": t.representative_caption,
            "rep_vec": [float(v) for v in t.representative_vector],
            "start": t.start_frame,
            "end": t.end_frame,
            "obs": [{"frame": o.frame_index, "x": o.box.x, "y": o.box.y,
                     "w": o.box.w, "h": o.box.h, "caption": o.caption,
                     "sim": o.similarity_to_rep, "kind": o.kind.value}
                    for o in t.observations],
        })
    return {"config": asdict(config) if config is not None else {}, "tracks": out}


def write_tracks(stream: IO[str], tracks, config: TrackerConfig | None = None) -> None:
    json.dump(tracks_to_json(tracks, config), stream, indent=1)
    stream.write("\n")


def tracks_from_json(doc: dict) -> tuple[TrackerConfig | None, list[SemanticTrack]]:
    if not isinstance(doc, dict) or not isinstance(doc.get("tracks"), list):
        raise ParseError("tracks document needs a 'tracks' list")
    config = None
    if doc.get("config"):
        try:
            config = TrackerConfig(**doc["config"])
        except (TypeError, ValueError) as exc:
            raise ParseError(f"bad tracker config: {exc}") from None
    tracks = []
    for idx, item in enumerate(doc["tracks"], start=1):
        try:
            vec = np.asarray(item["rep_vec"], dtype=np.float64)
            vec.setflags(write=False)
            obs = [TrackObservation(o["frame"], BoundingBox(o["x"], o["y"], o["w"], o["h"]),
                                    o["caption"], float(o["sim"]), ObservationKind(o["kind"]))
                   for o in item["obs"]]
            track = SemanticTrack(int(item["id"]), item["rep_caption"], vec,
                                  int(item["start"]), int(item["end"]), obs,
                                  TrackStatus.STORED)
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"track record {idx}: {exc!r}") from None
        if track.start_frame > track.end_frame:
            raise ParseError(f"track record {idx}: start after end")
        tracks.append(track)
    return config, tracks


def read_tracks(stream: IO[str]) -> tuple[TrackerConfig | None, list[SemanticTrack]]:
    try:
        doc = json.load(stream)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed tracks JSON ({exc.msg})", exc.lineno) from None
    return tracks_from_json(doc)
