"""Sentence vectors for captions and queries, and cosine similarity.

Two backends: averaging word vectors over the tokens of a sentence, and
looking up a precomputed sentence-level vector. An embedder returns ``None``
when a sentence has no vector (all tokens out of vocabulary, or a caption
missing from the sidecar); callers treat ``None`` as "not embeddable".
"""
from __future__ import annotations

import enum
import logging
import string
from dataclasses import dataclass

import numpy as np

from .ingest import SentenceVectorSidecar, WordVectorTable, normalize_caption

logger = logging.getLogger(__name__)

#: Norm below which a vector is treated as zero by :func:`cosine_similarity`.
ZERO_NORM = 1e-12

_ASCII_PUNCT = string.punctuation


class Backend(str, enum.Enum):
    AVERAGED_WORDS = "averaged_words"
    PRECOMPUTED_SENTENCE = "precomputed_sentence"


class OOVPolicy(str, enum.Enum):
    SKIP_TOKEN = "skip_token"
    FAIL = "fail"


class OutOfVocabularyError(KeyError):
    def __init__(self, token: str):
        self.token = token
        super().__init__(f"out-of-vocabulary token {token!r}")

    def __str__(self):
        return self.args[0]


@dataclass(frozen=True)
class EmbedderConfig:
    backend: Backend = Backend.AVERAGED_WORDS
    oov_policy: OOVPolicy = OOVPolicy.SKIP_TOKEN

    def __post_init__(self):
        # accept plain strings, reject anything else
        object.__setattr__(self, "backend", Backend(self.backend))
        object.__setattr__(self, "oov_policy", OOVPolicy(self.oov_policy))


def tokenize(sentence: str) -> list[str]:
    """Lowercase, split on whitespace, strip ASCII punctuation from token ends."""
    tokens = (tok.strip(_ASCII_PUNCT) for tok in sentence.lower().split())
    return [tok for tok in tokens if tok]


def _frozen(vec: np.ndarray) -> np.ndarray:
    vec.setflags(write=False)
    return vec


def embed_averaged(sentence: str, table: WordVectorTable,
                   cfg: EmbedderConfig | None = None) -> np.ndarray | None:
    """Mean of the word vectors of all in-vocabulary tokens.

    Returns ``None`` when no token is in vocabulary. With
    ``oov_policy=fail`` the first unknown token raises
    :class:`OutOfVocabularyError` instead.
    """
    if len(table) == 0:
        raise ValueError("word-vector table is empty")
    fail = cfg is not None and cfg.oov_policy is OOVPolicy.FAIL
    vectors = []
    for tok in tokenize(sentence):
        vec = table.entries.get(tok)
        if vec is None:
            if fail:
                raise OutOfVocabularyError(tok)
            continue
        vectors.append(vec)
    if not vectors:
        return None
    return _frozen(np.mean(np.stack(vectors), axis=0))


def embed_precomputed(caption: str, sidecar: SentenceVectorSidecar) -> np.ndarray | None:
    return sidecar.entries.get(normalize_caption(caption))


def cosine_similarity(a, b) -> float:
    """Cosine of the angle between ``a`` and ``b``, clamped to [-1, 1].

    Returns 0.0 if either vector has norm below ``ZERO_NORM``.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na = float(np.sqrt(np.dot(a, a)))
    nb = float(np.sqrt(np.dot(b, b)))
    if na < ZERO_NORM or nb < ZERO_NORM:
        return 0.0
    # product of norms is commutative, so the result is exactly symmetric
    sim = float(np.dot(a, b)) / (na * nb)
    return min(1.0, max(-1.0, sim))


def cosine_matrix(rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Pairwise cosine similarity, same conventions as :func:`cosine_similarity`."""
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    cols = np.atleast_2d(np.asarray(cols, dtype=np.float64))
    if rows.shape[1] != cols.shape[1]:
        raise ValueError(f"dimension mismatch: {rows.shape[1]} vs {cols.shape[1]}")
    nr = np.sqrt(np.einsum("ij,ij->i", rows, rows))
    nc = np.sqrt(np.einsum("ij,ij->i", cols, cols))
    denom = np.outer(nr, nc)
    zero = (nr < ZERO_NORM)[:, None] | (nc < ZERO_NORM)[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        sims = (rows @ cols.T) / denom
    sims[zero] = 0.0
    return np.clip(sims, -1.0, 1.0)


class Embedder:
    """Base class: memoized ``embed(text) -> vector | None``."""

    dim: int

    def __init__(self):
        self._cache: dict[str, np.ndarray | None] = {}

    def _embed(self, text: str) -> np.ndarray | None:
        raise NotImplementedError

    def embed(self, text: str) -> np.ndarray | None:
        try:
            return self._cache[text]
        except KeyError:
            vec = self._cache[text] = self._embed(text)
            return vec

    __call__ = embed


class AveragedWordEmbedder(Embedder):
    def __init__(self, table: WordVectorTable, oov_policy: OOVPolicy | str = OOVPolicy.SKIP_TOKEN):
        super().__init__()
        self.table = table
        self.dim = table.dim
        self.config = EmbedderConfig(Backend.AVERAGED_WORDS, oov_policy)

    def _embed(self, text):
        return embed_averaged(text, self.table, self.config)


class PrecomputedEmbedder(Embedder):
    def __init__(self, sidecar: SentenceVectorSidecar):
        super().__init__()
        self.sidecar = sidecar
        self.dim = sidecar.dim
        self.config = EmbedderConfig(Backend.PRECOMPUTED_SENTENCE)

    def _embed(self, text):
        return embed_precomputed(text, self.sidecar)


def make_embedder(cfg: EmbedderConfig, table: WordVectorTable | None = None,
                  sidecar: SentenceVectorSidecar | None = None) -> Embedder:
    if cfg.backend is Backend.AVERAGED_WORDS:
        if table is None:
            raise ValueError("averaged_words backend needs a word-vector table")
        return AveragedWordEmbedder(table, cfg.oov_policy)
    if sidecar is None:
        raise ValueError("precomputed_sentence backend needs a sentence-vector sidecar")
    return PrecomputedEmbedder(sidecar)
