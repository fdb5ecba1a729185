"""Query-time retrieval of semantic tracks."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import _validation
from .embed import Embedder, cosine_similarity
from .track import SemanticTrack


class QueryNotEmbeddable(ValueError):
    def __init__(self, query: str):
        super().__init__(f"query not embeddable: {query!r}")
        self.query = query


@dataclass(frozen=True)
class QueryConfig:
    search_sim_threshold: float = 0.6
    top_k: int | None = None

    def __post_init__(self):
        _validation.check_similarity(self.search_sim_threshold, "search similarity threshold",
                                     bounded=False)
        if self.top_k is not None:
            _validation.check_int(self.top_k, "top_k", 1)


@dataclass(frozen=True)
class Proposal:
    track_id: int
    start_frame: int
    end_frame: int
    score: float
    rep_caption: str

    def to_json(self) -> dict:
        return {"track_id": self.track_id, "start": self.start_frame, "end": self.end_frame,
                "score": self.score, "rep_caption": self.rep_caption}


def _embed_query(query_text: str, embedder: Embedder) -> np.ndarray:
    vec = embedder.embed(query_text)
    if vec is None:
        raise QueryNotEmbeddable(query_text)
    return vec


def score_tracks(query_text: str, tracks: Sequence[SemanticTrack],
                 embedder: Embedder) -> list[Proposal]:
    """Every track as a proposal, ranked by descending score then ascending track_id."""
    qvec = _embed_query(query_text, embedder)
    scored = [Proposal(t.track_id, t.start_frame, t.end_frame,
                       cosine_similarity(qvec, t.representative_vector),
                       t.representative_caption) for t in tracks]
    scored.sort(key=lambda p: (-p.score, p.track_id))
    return scored


def search(query_text: str, tracks: Sequence[SemanticTrack], cfg: QueryConfig,
           embedder: Embedder) -> list[Proposal]:
    """Tracks whose representative vector scores at least ``cfg.search_sim_threshold``.

    Overlapping proposals are all kept; several may hit one ground truth.
    """
    out = [p for p in score_tracks(query_text, tracks, embedder)
           if p.score >= cfg.search_sim_threshold]
    if cfg.top_k is not None:
        out = out[:cfg.top_k]
    return out


def score_sweep(query_text: str, tracks: Sequence[SemanticTrack],
                embedder: Embedder) -> list[tuple[float, list[Proposal]]]:
    """Nested proposal sets, one per distinct score, thresholds descending.

    Set ``i`` holds every track scoring at least the ``i``-th largest
    distinct score.
    """
    ranked = score_tracks(query_text, tracks, embedder)
    sweep = []
    for i, p in enumerate(ranked):
        if i + 1 < len(ranked) and ranked[i + 1].score == p.score:
            continue
        sweep.append((p.score, ranked[:i + 1]))
    return sweep


class TrackRetriever(BaseEstimator):
    """Fit on finalized tracks, then ``predict`` proposals for a query.

    Parameters
    ----------
    embedder : Embedder
    search_sim_threshold : float
        Minimum query-to-representative cosine for a track to be proposed.
    top_k : int or None
        Keep at most this many proposals; ``None`` keeps all.
    """

    def __init__(self, embedder=None, search_sim_threshold=0.6, top_k=None):
        self.embedder = embedder
        self.search_sim_threshold = search_sim_threshold
        self.top_k = top_k

    def fit(self, tracks, y=None):
        if self.embedder is None:
            raise ValueError("TrackRetriever needs an embedder")
        self.config_ = QueryConfig(self.search_sim_threshold, self.top_k)
        self.tracks_ = list(tracks)
        return self

    def predict(self, query_text: str) -> list[Proposal]:
        check_is_fitted(self, "tracks_")
        return search(query_text, self.tracks_, self.config_, self.embedder)

    def score_sweep(self, query_text: str):
        check_is_fitted(self, "tracks_")
        return score_sweep(query_text, self.tracks_, self.embedder)

    def score(self, ground_truth, iou_threshold=0.3):
        """Mean 11-point AP over the queries of ``ground_truth``."""
        from .evaluate import mean_ap

        check_is_fitted(self, "tracks_")
        return mean_ap(ground_truth, self.tracks_, iou_threshold, self.embedder)


def proposals_to_json(proposals: Sequence[Proposal]) -> list[dict]:
    return [p.to_json() for p in proposals]


__all__ = ["Proposal", "QueryConfig", "QueryNotEmbeddable", "TrackRetriever",
           "proposals_to_json", "score_sweep", "score_tracks", "search"]
