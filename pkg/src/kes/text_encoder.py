"""Text branch: word embeddings and a mean-pooling baseline encoder.

Any text model can stand in here as long as it maps a (premise tokens,
hypothesis tokens) pair to a vector of fixed width ``K``. The baseline
mean-pools each sentence, concatenates the two pooled vectors and applies
a bias-free projection followed by ReLU.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .kg_store import fallback_vector, read_vector_file


@dataclass
class WordEmbeddingTable:
    """Token vectors with a deterministic out-of-vocabulary fallback."""

    dim: int
    seed: int = 0
    vectors: dict[str, np.ndarray] = field(default_factory=dict)
    _oov: dict = field(default_factory=dict, repr=False)

    def __getitem__(self, token: str) -> np.ndarray:
        vec = self.vectors.get(token)
        if vec is None:
            vec = self._oov.get(token)
            if vec is None:
                vec = self._oov[token] = fallback_vector(token, self.dim, self.seed)
        return vec

    def __contains__(self, token):
        return token in self.vectors


def load_word_embeddings(path, dim: int, seed: int = 0) -> WordEmbeddingTable:
    vectors = read_vector_file(path, dim) if path is not None else {}
    return WordEmbeddingTable(dim, seed, vectors)


@dataclass
class BaselineEncoderParams:
    projection: np.ndarray  # (2 * word_dim, K)

    @property
    def word_dim(self) -> int:
        return self.projection.shape[0] // 2

    @property
    def out_width(self) -> int:
        return self.projection.shape[1]

    def named_tensors(self):
        return {"projection": self.projection}


def init_text_encoder(word_dim: int, k: int, rng: np.random.Generator) -> BaselineEncoderParams:
    lim = np.sqrt(6.0 / (2 * word_dim + k))
    return BaselineEncoderParams(rng.uniform(-lim, lim, size=(2 * word_dim, k)))


def mean_pool(tokens: Sequence[str], table: WordEmbeddingTable) -> np.ndarray:
    if not tokens:
        return np.zeros(table.dim)
    return np.mean([table[t] for t in tokens], axis=0)


def pooled_pair(premise, hypothesis, table: WordEmbeddingTable) -> np.ndarray:
    return np.concatenate([mean_pool(premise, table), mean_pool(hypothesis, table)])


def text_forward(params: BaselineEncoderParams, pooled: np.ndarray):
    t_out = np.maximum(pooled @ params.projection, 0.0)
    return t_out, (pooled, t_out)


def text_backward(params: BaselineEncoderParams, cache, d_t: np.ndarray) -> dict[str, np.ndarray]:
    pooled, t_out = cache
    return {"projection": np.outer(pooled, d_t * (t_out > 0))}


def encode_text_pair(params: BaselineEncoderParams, premise: Sequence[str], hypothesis: Sequence[str],
                     table: WordEmbeddingTable) -> np.ndarray:
    """Fixed-width encoding ``t_out`` of a tokenized sentence pair."""
    if table.dim != params.word_dim:
        raise ValueError(f"word table dim {table.dim} != encoder word dim {params.word_dim}")
    return text_forward(params, pooled_pair(premise, hypothesis, table))[0]
