"""Synthetic frame streams and embedders shared by the tests."""
import numpy as np

from semtrack.embed import PrecomputedEmbedder
from semtrack.ingest import (BoundingBox, CaptionBox, FrameRecord, GroundTruthQuery,
                             GroundTruthSegment, SentenceVectorSidecar)


def embedder_from(vectors):
    vecs = {k: np.asarray(v, dtype=float) for k, v in vectors.items()}
    dim = len(next(iter(vecs.values())))
    return PrecomputedEmbedder(SentenceVectorSidecar(dim, vecs))


def box(caption, x=0.0, y=0.0, w=10.0, h=10.0):
    return CaptionBox(BoundingBox(x, y, w, h), caption)


def frame(idx, *boxes):
    return FrameRecord(idx, tuple(b if isinstance(b, CaptionBox) else box(b) for b in boxes))


def random_corpus(seed, n_frames=40, n_captions=8, dim=6, max_boxes=4):
    """Frames of random captions at one fixed position; Gaussian caption vectors."""
    rng = np.random.default_rng(seed)
    captions = [f"caption {i}" for i in range(n_captions)]
    emb = embedder_from({c: rng.normal(size=dim) for c in captions})
    frames = []
    for f in range(n_frames):
        n = int(rng.integers(0, max_boxes + 1))
        frames.append(frame(f, *(captions[int(rng.integers(n_captions))] for _ in range(n))))
    return frames, emb


def random_tracks(seed, n_tracks=12, n_frames=200, dim=5):
    """Finalized-looking tracks with random extents and representative vectors."""
    from semtrack.track import SemanticTrack, TrackStatus

    rng = np.random.default_rng(seed)
    tracks = []
    for tid in range(n_tracks):
        start = int(rng.integers(0, n_frames - 10))
        end = start + int(rng.integers(4, 40))
        tracks.append(SemanticTrack(tid, f"rep {tid}", rng.normal(size=dim), start, end,
                                    state=TrackStatus.STORED))
    return tracks


CONCEPTS = ("a man riding a horse", "a bird on the branch", "the cloudy blue sky")
PLANTED = {
    0: [(5, 20), (60, 75)],
    1: [(10, 30), (70, 90)],
    2: [(35, 50), (95, 115)],
}


def planted_stream(seed=0, n_frames=130, n_distractor_captions=12, dim=16):
    """Three concepts, each shown as two disjoint segments, plus distractor boxes.

    Concept ``k`` owns one-hot dimension ``k``; distractor vectors live in the
    remaining dimensions, so they are orthogonal to every concept.
    """
    rng = np.random.default_rng(seed)
    vectors = {}
    for k, caption in enumerate(CONCEPTS):
        vec = np.zeros(dim)
        vec[k] = 1.0
        vectors[caption] = vec
    distractors = [f"distractor {i}" for i in range(n_distractor_captions)]
    for caption in distractors:
        vec = np.zeros(dim)
        vec[len(CONCEPTS):] = rng.normal(size=dim - len(CONCEPTS))
        vectors[caption] = vec
    emb = embedder_from(vectors)

    frames = []
    for f in range(n_frames):
        boxes = []
        for k, segments in PLANTED.items():
            if any(s <= f <= e for s, e in segments):
                jitter = rng.uniform(-3, 3, size=2)
                boxes.append(box(CONCEPTS[k], 200 * k + jitter[0], 50 + jitter[1], 100, 100))
        for d in range(2):
            caption = distractors[int(rng.integers(n_distractor_captions))]
            x, y = rng.uniform(0, 600), rng.uniform(300, 500)
            boxes.append(box(caption, x, y, 80, 60))
        # a distractor sitting on concept 0's spot while concept 0 is absent
        if not any(s <= f <= e for s, e in PLANTED[0]):
            boxes.append(box(distractors[0], 0, 50, 100, 100))
        rng.shuffle(boxes)
        frames.append(FrameRecord(f, tuple(boxes)))

    queries = [GroundTruthQuery(f"q{k}", CONCEPTS[k],
                                tuple(GroundTruthSegment(s, e) for s, e in PLANTED[k]))
               for k in range(len(CONCEPTS))]
    return frames, emb, queries


def throughput_stream(n_frames=10_000, boxes_per_frame=5, dim=300, n_captions=200, seed=0):
    rng = np.random.default_rng(seed)
    captions = [f"caption number {i}" for i in range(n_captions)]
    emb = embedder_from({c: rng.normal(size=dim) for c in captions})
    slots = rng.uniform(0, 500, size=(boxes_per_frame, 2))
    current = rng.integers(0, n_captions, size=boxes_per_frame)
    frames = []
    for f in range(n_frames):
        change = rng.random(boxes_per_frame) < 0.1
        current = np.where(change, rng.integers(0, n_captions, size=boxes_per_frame), current)
        slots = slots + rng.normal(scale=2.0, size=slots.shape)
        frames.append(FrameRecord(f, tuple(
            box(captions[current[i]], slots[i, 0], slots[i, 1], 60, 60)
            for i in range(boxes_per_frame))))
    return frames, emb
