"""Parsers for frame caption records, vector tables and ground-truth files.

Every parser accepts an iterable of lines (an open text or binary file,
``io.StringIO``, a list of strings) and raises :class:`ParseError` carrying
the 1-based line or record index of the first offending input.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator, Mapping, Sequence

import numpy as np


class ParseError(ValueError):
    """Malformed input. ``line`` is the 1-based line/record index, if known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"{message} at line {line}"
        super().__init__(message)


def normalize_caption(text: str) -> str:
    """Trim and collapse internal whitespace runs to single spaces."""
    return " ".join(text.split())


@dataclass(frozen=True)
class BoundingBox:
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        for name in ("x", "y", "w", "h"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"box field {name!r} must be finite")
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box dimensions must be positive (w={self.w}, h={self.h})")


@dataclass(frozen=True)
class CaptionBox:
    box: BoundingBox
    caption: str
    score: float | None = None

    def __post_init__(self):
        if not self.caption.strip():
            raise ValueError("caption is empty")
        if self.score is not None and not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score {self.score} outside [0, 1]")


@dataclass(frozen=True)
class FrameRecord:
    frame_index: int
    boxes: tuple[CaptionBox, ...] = ()


@dataclass(frozen=True)
class WordVectorTable:
    """Lowercased token -> vector of ``dim`` floats."""

    dim: int
    entries: Mapping[str, np.ndarray] = field(default_factory=dict)

    def __len__(self):
        return len(self.entries)


@dataclass(frozen=True)
class SentenceVectorSidecar:
    """Normalized caption string -> precomputed sentence vector."""

    dim: int
    entries: Mapping[str, np.ndarray] = field(default_factory=dict)

    def __len__(self):
        return len(self.entries)


@dataclass(frozen=True)
class GroundTruthSegment:
    start_frame: int
    end_frame: int

    def __post_init__(self):
        if self.start_frame < 0:
            raise ValueError(f"start_frame {self.start_frame} is negative")
        if self.end_frame < self.start_frame:
            raise ValueError(
                f"end_frame {self.end_frame} precedes start_frame {self.start_frame}")


@dataclass(frozen=True)
class GroundTruthQuery:
    query_id: str
    query_text: str
    segments: tuple[GroundTruthSegment, ...]


@dataclass(frozen=True)
class GroundTruth:
    queries: tuple[GroundTruthQuery, ...]

    def __iter__(self):
        return iter(self.queries)

    def __len__(self):
        return len(self.queries)


def _lines(stream: IO | Iterable) -> Iterator[tuple[int, str]]:
    for lineno, raw in enumerate(stream, start=1):
        if isinstance(raw, bytes):
            try:
                raw = raw.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise ParseError(f"invalid UTF-8 ({exc.reason})", lineno) from None
        yield lineno, raw.rstrip("\r\n")


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _is_int(value) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _finite_vector(values, lineno: int, what: str) -> np.ndarray:
    if not isinstance(values, list) or not all(_is_number(v) for v in values):
        raise ParseError(f"{what}: vector must be a list of numbers", lineno)
    vec = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(vec)):
        raise ParseError(f"{what}: vector has non-finite components", lineno)
    vec.setflags(write=False)
    return vec


def _parse_box(obj, lineno: int, pos: int) -> CaptionBox:
    if not isinstance(obj, dict):
        raise ParseError(f"box {pos} is not an object", lineno)
    coords = {}
    for key in ("x", "y", "w", "h"):
        value = obj.get(key)
        if not _is_number(value):
            raise ParseError(f"box {pos}: field {key!r} missing or not a number", lineno)
        coords[key] = float(value)
    caption = obj.get("caption")
    if not isinstance(caption, str):
        raise ParseError(f"box {pos}: field 'caption' missing or not a string", lineno)
    caption = normalize_caption(caption)
    if not caption:
        raise ParseError(f"box {pos}: empty caption", lineno)
    score = obj.get("score")
    if score is not None and not _is_number(score):
        raise ParseError(f"box {pos}: field 'score' is not a number", lineno)
    try:
        return CaptionBox(BoundingBox(**coords), caption,
                          None if score is None else float(score))
    except ValueError as exc:
        raise ParseError(f"box {pos}: {exc}", lineno) from None


def parse_frame_records(stream: IO | Iterable) -> list[FrameRecord]:
    """Parse a frames ``.jsonl`` stream.

    Blank lines are ignored. Frame gaps are kept as-is; no records are
    synthesized for missing frame indices.
    """
    records: list[FrameRecord] = []
    last = -1
    for lineno, line in _lines(stream):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"malformed JSON ({exc.msg})", lineno) from None
        if not isinstance(obj, dict):
            raise ParseError("record is not a JSON object", lineno)
        frame = obj.get("frame")
        if not _is_int(frame) or frame < 0:
            raise ParseError("field 'frame' missing or not a non-negative integer", lineno)
        if frame <= last:
            raise ParseError("non-increasing frame_index", lineno)
        boxes = obj.get("boxes", [])
        if not isinstance(boxes, list):
            raise ParseError("field 'boxes' is not a list", lineno)
        records.append(FrameRecord(frame, tuple(
            _parse_box(b, lineno, pos) for pos, b in enumerate(boxes))))
        last = frame
    return records


def frame_record_to_json(record: FrameRecord) -> dict:
    boxes = []
    for cb in record.boxes:
        item = {"x": cb.box.x, "y": cb.box.y, "w": cb.box.w, "h": cb.box.h,
                "caption": cb.caption}
        if cb.score is not None:
            item["score"] = cb.score
        boxes.append(item)
    return {"frame": record.frame_index, "boxes": boxes}


def dump_frame_records(records: Sequence[FrameRecord], stream: IO[str]) -> None:
    """Write records in the frames ``.jsonl`` format."""
    for record in records:
        stream.write(json.dumps(frame_record_to_json(record)) + "\n")


def load_word_vectors(stream: IO | Iterable) -> WordVectorTable:
    """Load a plain-text word-vector file (``"<vocab> <dim>"`` header)."""
    lines = _lines(stream)
    header = next(lines, None)
    if header is None:
        raise ParseError("missing header", 1)
    lineno, text = header
    parts = text.split()
    try:
        if len(parts) != 2:
            raise ValueError
        vocab, dim = int(parts[0]), int(parts[1])
    except ValueError:
        raise ParseError("header must be '<vocab_size> <dim>'", lineno) from None
    if vocab < 0 or dim <= 0:
        raise ParseError("header declares a negative vocabulary or non-positive dim", lineno)

    entries: dict[str, np.ndarray] = {}
    found = 0
    for lineno, text in lines:
        if not text.strip():
            continue
        found += 1
        token, *values = text.split()
        if len(values) != dim:
            raise ParseError(f"token {token!r}: expected {dim} components, got {len(values)}",
                             lineno)
        try:
            vec = np.array([float(v) for v in values], dtype=np.float64)
        except ValueError:
            raise ParseError(f"token {token!r}: non-numeric component", lineno) from None
        if not np.all(np.isfinite(vec)):
            raise ParseError(f"token {token!r}: non-finite component", lineno)
        key = token.lower()
        if key in entries:
            raise ParseError(f"duplicate token {key!r}", lineno)
        vec.setflags(write=False)
        entries[key] = vec
    if found != vocab:
        raise ParseError(f"expected {vocab} entries, found {found}")
    return WordVectorTable(dim, entries)


def load_sentence_vectors(stream: IO | Iterable) -> SentenceVectorSidecar:
    """Load a sentence-vector sidecar (``{"caption": ..., "vec": [...]}`` per line)."""
    entries: dict[str, np.ndarray] = {}
    dim: int | None = None
    for lineno, line in _lines(stream):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"malformed JSON ({exc.msg})", lineno) from None
        if not isinstance(obj, dict) or not isinstance(obj.get("caption"), str):
            raise ParseError("record needs a string 'caption'", lineno)
        caption = normalize_caption(obj["caption"])
        if not caption:
            raise ParseError("empty caption", lineno)
        vec = _finite_vector(obj.get("vec"), lineno, f"caption {caption!r}")
        if vec.size == 0:
            raise ParseError(f"caption {caption!r}: empty vector", lineno)
        if dim is None:
            dim = vec.size
        elif vec.size != dim:
            raise ParseError(
                f"caption {caption!r}: dimension mismatch (expected {dim}, got {vec.size})",
                lineno)
        if caption in entries:
            raise ParseError(f"duplicate caption key {caption!r}", lineno)
        entries[caption] = vec
    if dim is None:
        raise ParseError("sidecar contains no vectors")
    return SentenceVectorSidecar(dim, entries)


def load_ground_truth(stream: IO | Iterable | str) -> GroundTruth:
    """Load a ground-truth ``.json`` document. Errors name the 1-based query index."""
    if isinstance(stream, str):
        text = stream
    else:
        text = "\n".join(line for _, line in _lines(stream))
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON ({exc.msg})", exc.lineno) from None
    if not isinstance(doc, dict) or not isinstance(doc.get("queries"), list):
        raise ParseError("document needs a 'queries' list")

    queries = []
    seen: set[str] = set()
    for idx, q in enumerate(doc["queries"], start=1):
        where = f"query record {idx}"
        if not isinstance(q, dict):
            raise ParseError(f"{where}: not an object")
        qid, qtext, segs = q.get("id"), q.get("text"), q.get("segments")
        if not isinstance(qid, str) or not isinstance(qtext, str):
            raise ParseError(f"{where}: 'id' and 'text' must be strings")
        if qid in seen:
            raise ParseError(f"{where}: duplicate query id {qid!r}")
        seen.add(qid)
        if not isinstance(segs, list) or not segs:
            raise ParseError(f"{where}: query {qid!r} has no segments")
        segments = []
        for sidx, s in enumerate(segs, start=1):
            if not isinstance(s, dict) or not _is_int(s.get("start")) or not _is_int(s.get("end")):
                raise ParseError(f"{where}, segment {sidx}: 'start'/'end' must be integers")
            try:
                segments.append(GroundTruthSegment(s["start"], s["end"]))
            except ValueError as exc:
                raise ParseError(f"{where}, segment {sidx}: {exc}") from None
        queries.append(GroundTruthQuery(qid, normalize_caption(qtext), tuple(segments)))
    return GroundTruth(tuple(queries))
