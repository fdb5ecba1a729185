"""Frame-based retrieval evaluation: segment IoU, recall/precision, AP, mAP.

Intervals are inclusive frame ranges ``(start, end)``. A ground-truth
segment is *detected* when some proposal overlaps it with IoU at or above
the threshold; a proposal is *good* when it overlaps some ground truth the
same way. The two counts are independent, so several proposals hitting one
ground truth raise the good-proposal count but not the detection count.
"""
from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

from . import _validation
from .embed import Embedder
from .ingest import FrameRecord, GroundTruthQuery
from .search import QueryConfig, score_sweep, search
from .track import SemanticTrack

N_RECALL_LEVELS = 11


def _interval(x) -> tuple[int, int]:
    if hasattr(x, "start_frame"):
        start, end = x.start_frame, x.end_frame
    else:
        start, end = x
    if start > end:
        raise ValueError(f"invalid interval [{start}, {end}]")
    return int(start), int(end)


def segment_iou(a, b) -> float:
    """IoU of two inclusive frame intervals, measured in frames."""
    (s1, e1), (s2, e2) = _interval(a), _interval(b)
    inter = min(e1, e2) - max(s1, s2) + 1
    if inter <= 0:
        return 0.0
    union = (e1 - s1 + 1) + (e2 - s2 + 1) - inter
    return inter / union


@dataclass(frozen=True)
class EvalCounts:
    n_t: int
    n_p: int
    n_d: int
    n_g: int

    def __post_init__(self):
        if not (0 <= self.n_d <= self.n_t and 0 <= self.n_g <= self.n_p):
            raise ValueError(f"inconsistent counts {self}")

    def __add__(self, other: EvalCounts) -> EvalCounts:
        return EvalCounts(self.n_t + other.n_t, self.n_p + other.n_p,
                          self.n_d + other.n_d, self.n_g + other.n_g)

    def as_dict(self) -> dict:
        return {"n_t": self.n_t, "n_p": self.n_p, "n_d": self.n_d, "n_g": self.n_g}


def match_counts(gts: Sequence, proposals: Sequence, iou_threshold: float) -> EvalCounts:
    gts = [_interval(g) for g in gts]
    props = [_interval(p) for p in proposals]
    hit = np.zeros((len(gts), len(props)), dtype=bool)
    for i, g in enumerate(gts):
        for j, p in enumerate(props):
            hit[i, j] = segment_iou(g, p) >= iou_threshold
    return EvalCounts(len(gts), len(props),
                      int(hit.any(axis=1).sum()), int(hit.any(axis=0).sum()))


def recall_precision(counts: EvalCounts) -> tuple[float, float]:
    """``(n_d / n_t, n_g / n_p)``; precision is 0 when nothing was proposed."""
    if counts.n_t == 0:
        raise ValueError("recall undefined without ground-truth segments")
    precision = counts.n_g / counts.n_p if counts.n_p else 0.0
    return counts.n_d / counts.n_t, precision


def _first_level(min_recall: float) -> int:
    if not 0.0 <= min_recall <= 1.0:
        raise ValueError(f"recall restriction must be in [0,1], got {min_recall}")
    return math.ceil(round(min_recall * 10, 9))


def interpolated_ap(points: Iterable[EvalCounts], min_recall: float = 0.0) -> float:
    """11-point interpolated AP over operating points given as counts.

    For each recall level ``r`` in {0.0, 0.1, ..., 1.0} with ``r >= min_recall``,
    take the best precision among points whose recall reaches ``r`` (0 if none
    does) and average. Recall is compared in exact integer arithmetic.
    """
    points = list(points)
    rp = [(c, recall_precision(c)[1]) for c in points]
    levels = range(_first_level(min_recall), N_RECALL_LEVELS)
    total = 0.0
    for i in levels:
        reached = [p for c, p in rp if 10 * c.n_d >= i * c.n_t]
        total += max(reached, default=0.0)
    return total / len(levels)


def operating_points(query_text: str, tracks: Sequence[SemanticTrack], gts: Sequence,
                     iou_threshold: float, embedder: Embedder) -> list[EvalCounts]:
    return [match_counts(gts, props, iou_threshold)
            for _, props in score_sweep(query_text, tracks, embedder)]


def average_precision(query_text: str, tracks: Sequence[SemanticTrack], gts: Sequence,
                      iou_threshold: float, embedder: Embedder,
                      restrict_recall_ge: float | None = None) -> float:
    if not gts:
        raise ValueError("average precision needs at least one ground-truth segment")
    _validation.check_iou_threshold(iou_threshold)
    points = operating_points(query_text, tracks, gts, iou_threshold, embedder)
    return interpolated_ap(points, restrict_recall_ge or 0.0)


def mean_ap(queries: Iterable[GroundTruthQuery], tracks: Sequence[SemanticTrack],
            iou_threshold: float, embedder: Embedder,
            restrict_recall_ge: float | None = None) -> float:
    aps = [average_precision(q.query_text, tracks, q.segments, iou_threshold, embedder,
                             restrict_recall_ge)
           for q in queries]
    if not aps:
        raise ValueError("mean AP needs at least one query")
    return float(np.mean(aps))


def suggest_query_candidates(frames: Sequence[FrameRecord], sample_size: int = 200,
                             top_n: int = 100, rng_seed: int = 0) -> list[tuple[str, int]]:
    """Most frequent captions over a uniform random sample of frames.

    Ties are broken by caption in lexicographic order.
    """
    if not frames:
        raise ValueError("no frames to sample")
    _validation.check_int(sample_size, "sample size", 1)
    _validation.check_int(top_n, "top_n", 1)
    rng = np.random.default_rng(rng_seed)
    k = min(sample_size, len(frames))
    picked = np.sort(rng.choice(len(frames), size=k, replace=False))
    counts = Counter(cb.caption for i in picked for cb in frames[i].boxes)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return ranked[:top_n]


# -- reports -----------------------------------------------------------------

@dataclass
class QueryResult:
    query_text: str
    counts: EvalCounts
    recall: float
    precision: float
    ap: float
    ap_recall_ge_05: float


@dataclass
class EvalReport:
    per_query: dict[str, QueryResult]
    map_all: float
    map_recall_ge_05: float
    iou_threshold: float
    search_sim_threshold: float
    config: Mapping = field(default_factory=dict)

    @property
    def pooled(self) -> EvalCounts:
        return sum((r.counts for r in self.per_query.values()), EvalCounts(0, 0, 0, 0))

    def to_json(self) -> dict:
        pooled = self.pooled
        recall, precision = recall_precision(pooled) if pooled.n_t else (0.0, 0.0)
        return {
            "iou_threshold": self.iou_threshold,
            "search_sim_threshold": self.search_sim_threshold,
            "config": dict(self.config),
            "per_query": {
                qid: {"text": r.query_text, "counts": r.counts.as_dict(),
                      "recall": r.recall, "precision": r.precision,
                      "ap": r.ap, "ap_recall_ge_05": r.ap_recall_ge_05}
                for qid, r in self.per_query.items()
            },
            "pooled": {"counts": pooled.as_dict(), "recall": recall, "precision": precision},
            "map_all": self.map_all,
            "map_recall_ge_05": self.map_recall_ge_05,
        }


def evaluate(queries: Iterable[GroundTruthQuery], tracks: Sequence[SemanticTrack],
             embedder: Embedder, iou_threshold: float = 0.3,
             search_sim_threshold: float = 0.6, config: Mapping | None = None) -> EvalReport:
    """Per-query counts at ``search_sim_threshold`` plus AP over the full score sweep."""
    iou_threshold = _validation.check_iou_threshold(iou_threshold)
    qcfg = QueryConfig(search_sim_threshold)
    per_query = {}
    for q in queries:
        if not q.segments:
            raise ValueError(f"query {q.query_id!r} has no ground-truth segments")
        counts = match_counts(q.segments, search(q.query_text, tracks, qcfg, embedder),
                              iou_threshold)
        recall, precision = recall_precision(counts)
        points = operating_points(q.query_text, tracks, q.segments, iou_threshold, embedder)
        per_query[q.query_id] = QueryResult(q.query_text, counts, recall, precision,
                                            interpolated_ap(points),
                                            interpolated_ap(points, 0.5))
    if not per_query:
        raise ValueError("evaluation needs at least one query")
    results = per_query.values()
    return EvalReport(
        per_query=per_query,
        map_all=float(np.mean([r.ap for r in results])),
        map_recall_ge_05=float(np.mean([r.ap_recall_ge_05 for r in results])),
        iou_threshold=iou_threshold,
        search_sim_threshold=qcfg.search_sim_threshold,
        config=config or {},
    )


def sweep_grid(queries: Sequence[GroundTruthQuery],
               tracks_by_t_sim: Mapping[float, Sequence[SemanticTrack]],
               s_sims: Sequence[float], embedder: Embedder,
               iou_threshold: float = 0.3) -> dict[tuple[float, float], EvalCounts]:
    """Pooled counts for every (T_sim, S_sim) cell."""
    grid = {}
    for t_sim, tracks in tracks_by_t_sim.items():
        for s_sim in s_sims:
            cfg = QueryConfig(s_sim)
            grid[t_sim, s_sim] = sum(
                (match_counts(q.segments, search(q.query_text, tracks, cfg, embedder),
                              iou_threshold) for q in queries),
                EvalCounts(0, 0, 0, 0))
    return grid


def write_sweep_csv(stream: IO[str], grid: Mapping[tuple[float, float], EvalCounts]) -> None:
    """Recall block then precision block; rows are S_sim, columns T_sim."""
    t_sims = sorted({t for t, _ in grid})
    s_sims = sorted({s for _, s in grid})
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["metric", "s_sim"] + [f"t_sim={t:g}" for t in t_sims])
    for metric, idx in (("recall", 0), ("precision", 1)):
        for s in s_sims:
            row = [metric, f"{s:g}"]
            for t in t_sims:
                counts = grid[t, s]
                value = recall_precision(counts)[idx] if counts.n_t else 0.0
                row.append(f"{value:.6f}")
            writer.writerow(row)
