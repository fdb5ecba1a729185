"""Retrieve video segments for natural-language queries by tracking dense captions."""
from .embed import (AveragedWordEmbedder, Backend, EmbedderConfig, OOVPolicy, PrecomputedEmbedder,
                    cosine_similarity, embed_averaged, embed_precomputed, make_embedder, tokenize)
from .evaluate import (EvalCounts, EvalReport, average_precision, evaluate, interpolated_ap,
                       match_counts, mean_ap, recall_precision, segment_iou,
                       suggest_query_candidates)
from .ingest import (BoundingBox, CaptionBox, FrameRecord, GroundTruth, GroundTruthQuery,
                     GroundTruthSegment, ParseError, SentenceVectorSidecar, WordVectorTable,
                     load_ground_truth, load_sentence_vectors, load_word_vectors,
                     parse_frame_records)
from .search import Proposal, QueryConfig, QueryNotEmbeddable, TrackRetriever, score_sweep, search
from .track import (CaptionTracker, SemanticTrack, TrackerConfig, TrackerState, box_iou, finalize,
                    step)

__version__ = "0.1.0"
