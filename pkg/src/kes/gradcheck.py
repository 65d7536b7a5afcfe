"""Central finite-difference verification of the analytic gradients."""

from __future__ import annotations

import numpy as np

from .kg_store import EmbeddingTable
from .model import ModelParams, PreparedExample, forward, init_model, loss, loss_and_grads
from .rgcn import NODES, READOUT, prepare_subgraph
from .subgraph import KG, ContextualSubgraph, SeedSet, augment

TOLERANCE = 1e-4
EPSILON = 1e-4


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """``||a - n|| / max(||a||, ||n||)``; the plain difference norm when
    both gradients are (near) zero."""
    diff = np.linalg.norm(analytic - numeric)
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric))
    return float(diff if scale < 1e-10 else diff / scale)


def numerical_gradients(params: ModelParams, ex: PreparedExample, eps: float = EPSILON) -> dict[str, np.ndarray]:
    out = {}
    for name, p in params.named_tensors().items():
        g = np.zeros_like(p)
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = p[idx]
            p[idx] = orig + eps
            up = loss(forward(params, ex)[0], ex.label)
            p[idx] = orig - eps
            down = loss(forward(params, ex)[0], ex.label)
            p[idx] = orig
            g[idx] = (up - down) / (2 * eps)
        out[name] = g
    return out


def check_gradients(params: ModelParams, ex: PreparedExample, eps: float = EPSILON) -> dict[str, float]:
    """Relative error per tensor between analytic and numeric gradients."""
    _, _, analytic = loss_and_grads(params, ex)
    numeric = numerical_gradients(params, ex, eps)
    return {k: relative_error(analytic[k], numeric[k]) for k in analytic}


def random_subgraph(rng: np.random.Generator, num_concepts: int = 3, edge_prob: float = 0.5) -> ContextualSubgraph:
    """Random augmented subgraph over concepts ``0..num_concepts-1``."""
    concepts = list(range(num_concepts))
    edges = [(u, KG, v) for u in concepts for v in concepts if u != v and rng.random() < edge_prob]
    premise = frozenset(c for c in concepts if rng.random() < 0.5) or frozenset({0})
    hypothesis = frozenset(c for c in concepts if rng.random() < 0.5) or frozenset({num_concepts - 1})
    seed = SeedSet(premise, hypothesis)
    base = ContextualSubgraph(tuple(concepts), tuple(sorted(edges)), seed,
                              {c: 1.0 for c in concepts}, 0.0, 0.15)
    return augment(base)


def tiny_instance(seed: int, dim: int = 4, num_classes: int = 3, post_linear_position: str = NODES):
    """A tiny random model and one 5-node example (3 concepts + 2 supernodes)."""
    rng = np.random.default_rng(seed)
    params = init_model(word_dim=dim, text_dim=dim, node_dim=dim, graph_dim=dim, hidden_dim=dim,
                        num_classes=num_classes, seed=seed, post_linear_position=post_linear_position)
    sub = random_subgraph(rng)
    table = EmbeddingTable(dim=dim, seed=seed, vectors=rng.normal(size=(3, dim)))
    ex = PreparedExample(rng.normal(size=2 * dim), prepare_subgraph(sub, table),
                         int(rng.integers(num_classes)))
    return params, ex


def run_gradcheck(num_models: int = 20, seed: int = 0, eps: float = EPSILON, dim: int = 4) -> dict:
    """Check every tensor of ``num_models`` random tiny models.

    Alternates the position of the extra linear layer between models so
    both graph-encoder layouts are covered.
    """
    per_tensor: dict[str, float] = {}
    for i in range(num_models):
        position = NODES if i % 2 == 0 else READOUT
        params, ex = tiny_instance(seed + i, dim=dim, post_linear_position=position)
        for name, err in check_gradients(params, ex, eps).items():
            per_tensor[name] = max(per_tensor.get(name, 0.0), err)
    return {"models": num_models, "eps": eps, "max_rel_error": max(per_tensor.values()),
            "per_tensor": per_tensor}
