"""Contextual subgraph extraction.

Seed concepts linked from the premise and hypothesis are expanded by one
hop, scored with Personalized PageRank (PPR) over the expansion, filtered
by a threshold on max-normalized scores, and finally augmented with one
self-loop per node plus a premise and a hypothesis supernode.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .kg_store import KnowledgeGraph
from .linker import DEFAULT_MAX_LEN, link_concepts, mentioned_concepts, tokenize

PREMISE_NODE = -1
HYPOTHESIS_NODE = -2
SUPERNODE_LABELS = {PREMISE_NODE: "__premise__", HYPOTHESIS_NODE: "__hypothesis__"}

KG = "kg"
SELF_LOOP = "self_loop"
EDGE_TYPES = (KG, SELF_LOOP)

THETA_GRID = (0.2, 0.4, 0.6, 0.8)


class DegenerateSeedError(ValueError):
    """No seed concept is present in the graph being scored."""


@dataclass(frozen=True)
class SeedSet:
    premise: frozenset = frozenset()
    hypothesis: frozenset = frozenset()

    @property
    def union(self) -> frozenset:
        return self.premise | self.hypothesis

    def __bool__(self):
        return bool(self.premise or self.hypothesis)


@dataclass(frozen=True)
class PprConfig:
    """PPR and filtering settings. ``alpha`` is the teleport probability."""

    alpha: float = 0.15
    tol: float = 1e-10
    max_iter: int = 1000
    theta: float = 0.2

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"theta must be in [0, 1], got {self.theta}")


@dataclass(frozen=True)
class ContextualSubgraph:
    """Filtered (and usually augmented) subgraph for one text pair.

    ``nodes`` is sorted ascending, so supernodes (negative ids) come first.
    ``edges`` holds directed ``(src, edge_type, dst)`` tuples. ``scores``
    maps each kept concept to its max-normalized PPR score.
    """

    nodes: tuple[int, ...]
    edges: tuple[tuple[int, str, int], ...]
    seed: SeedSet
    scores: Mapping[int, float]
    theta: float
    alpha: float
    labels: Mapping[int, str] = field(default_factory=dict)
    augmented: bool = False

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def concept_nodes(self) -> tuple[int, ...]:
        return tuple(n for n in self.nodes if n >= 0)

    def edges_of_type(self, edge_type: str):
        return [e for e in self.edges if e[1] == edge_type]

    def label(self, node: int) -> str:
        if node in SUPERNODE_LABELS:
            return SUPERNODE_LABELS[node]
        return self.labels.get(node, str(node))


def expand_one_hop(graph: KnowledgeGraph, seed: SeedSet):
    """Seeds plus all their neighbors, and every triple inside that set.

    Returns ``(nodes, triples)`` where ``triples`` are the original
    ``(head, relation, tail)`` triples with both endpoints in ``nodes``.
    """
    s = seed.union
    for c in s:
        if not 0 <= c < graph.num_concepts:
            raise ValueError(f"seed concept {c} not in graph")
    nodes = set(s)
    for c in s:
        nodes.update(t for _, t in graph.out_edges(c))
        nodes.update(h for _, h in graph.in_edges(c))
    triples = []
    for c in sorted(nodes):
        for r, t in graph.out_edges(c):
            if t in nodes:
                triples.append((c, r, t))
    return frozenset(nodes), tuple(triples)


def _endpoints(edge):
    return edge[0], edge[-1]


def transition_matrix(order: Sequence[int], edges: Iterable) -> tuple[sp.csr_matrix, np.ndarray]:
    """Column-stochastic transition matrix of the undirected simple graph.

    Returns the matrix and a boolean mask of dangling (degree-0) nodes,
    whose columns are all zero.
    """
    index = {n: i for i, n in enumerate(order)}
    nbrs = [set() for _ in order]
    for e in edges:
        u, v = _endpoints(e)
        iu, iv = index[u], index[v]
        nbrs[iu].add(iv)
        nbrs[iv].add(iu)
    rows, cols, vals = [], [], []
    for j, ns in enumerate(nbrs):
        if ns:
            w = 1.0 / len(ns)
            for i in sorted(ns):
                rows.append(i)
                cols.append(j)
                vals.append(w)
    n = len(order)
    A = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    dangling = np.array([not ns for ns in nbrs], dtype=bool)
    return A, dangling


def ppr_scores(nodes: Iterable[int], edges: Iterable, seed: SeedSet,
               cfg: PprConfig = PprConfig()) -> dict[int, float]:
    """Personalized PageRank by power iteration.

    The jump vector is uniform over the seeds present in ``nodes``. Edges
    are taken as undirected; a dangling node sends all of its mass to the
    jump vector. Iterates ``R <- (1 - alpha) A R + alpha p`` from ``R = p``
    until the L1 change drops below ``cfg.tol``.
    """
    order = sorted(nodes)
    if not order:
        raise DegenerateSeedError("empty node set")
    present = [n for n in order if n in seed.union]
    if not present:
        raise DegenerateSeedError("no seed concept among the nodes")
    index = {n: i for i, n in enumerate(order)}
    p = np.zeros(len(order))
    p[[index[n] for n in present]] = 1.0 / len(present)

    A, dangling = transition_matrix(order, edges)
    alpha = cfg.alpha
    R = p.copy()
    for _ in range(cfg.max_iter):
        R_next = (1.0 - alpha) * (A @ R + R[dangling].sum() * p) + alpha * p
        delta = np.abs(R_next - R).sum()
        R = R_next
        if delta < cfg.tol:
            break
    return {n: float(R[i]) for n, i in index.items()}


def normalize_and_filter(nodes: Iterable[int], edges: Iterable, scores: Mapping[int, float],
                         seed: SeedSet, theta: float, alpha: float = PprConfig.alpha) -> ContextualSubgraph:
    """Drop non-seed nodes whose max-normalized score is below ``theta``,
    and every edge touching a dropped node.

    ``edges`` are ``(head, relation, tail)`` triples; the result carries
    one ``kg`` edge per distinct ``(head, tail)`` pair.
    """
    nodes = list(nodes)
    top = max((scores[n] for n in nodes), default=0.0)
    if not top > 0:
        raise ValueError("PPR scores are all zero")
    s = seed.union
    normalized = {n: scores[n] / top for n in nodes}
    kept = {n for n in nodes if n in s or normalized[n] >= theta}
    kg_edges = {(e[0], KG, e[-1]) for e in edges if e[0] in kept and e[-1] in kept}
    return ContextualSubgraph(
        nodes=tuple(sorted(kept)),
        edges=tuple(sorted(kg_edges)),
        seed=seed,
        scores={n: normalized[n] for n in sorted(kept)},
        theta=theta,
        alpha=alpha,
    )


def augment(filtered: ContextualSubgraph, seed: SeedSet | None = None) -> ContextualSubgraph:
    """Add both supernodes, their bidirectional links to the mentioned
    concepts, and one self-loop on every node."""
    if filtered.augmented:
        raise ValueError("subgraph is already augmented")
    seed = filtered.seed if seed is None else seed
    present = set(filtered.nodes)
    edges = list(filtered.edges)
    for sup, concepts in ((PREMISE_NODE, seed.premise), (HYPOTHESIS_NODE, seed.hypothesis)):
        for c in sorted(concepts & present):
            edges.append((sup, KG, c))
            edges.append((c, KG, sup))
    nodes = sorted(present | {PREMISE_NODE, HYPOTHESIS_NODE})
    edges.extend((n, SELF_LOOP, n) for n in nodes)
    return replace(filtered, nodes=tuple(nodes), edges=tuple(sorted(edges)), seed=seed, augmented=True)


def link_pair(graph: KnowledgeGraph, premise: str, hypothesis: str,
              max_len: int = DEFAULT_MAX_LEN, stoplist=None) -> SeedSet:
    p = mentioned_concepts(link_concepts(tokenize(premise), graph, max_len, stoplist))
    h = mentioned_concepts(link_concepts(tokenize(hypothesis), graph, max_len, stoplist))
    return SeedSet(p, h)


@dataclass(frozen=True)
class ScoredExpansion:
    """One-hop expansion with its PPR scores, reusable across thresholds."""

    seed: SeedSet
    nodes: frozenset
    triples: tuple
    scores: dict

    def filter(self, theta: float, alpha: float) -> ContextualSubgraph:
        if not self.seed:
            return ContextualSubgraph((), (), self.seed, {}, theta, alpha)
        return normalize_and_filter(self.nodes, self.triples, self.scores, self.seed, theta, alpha)


def score_expansion(graph: KnowledgeGraph, seed: SeedSet, cfg: PprConfig = PprConfig()) -> ScoredExpansion:
    if not seed:
        return ScoredExpansion(seed, frozenset(), (), {})
    nodes, triples = expand_one_hop(graph, seed)
    return ScoredExpansion(seed, nodes, triples, ppr_scores(nodes, triples, seed, cfg))


def _with_labels(sub: ContextualSubgraph, graph: KnowledgeGraph) -> ContextualSubgraph:
    return replace(sub, labels={n: graph.label(n) for n in sub.nodes if n >= 0})


def extract_contextual_subgraph(graph: KnowledgeGraph, premise: str, hypothesis: str,
                                cfg: PprConfig = PprConfig(), max_len: int = DEFAULT_MAX_LEN,
                                stoplist=None) -> ContextualSubgraph:
    """Full pipeline from a text pair to an augmented contextual subgraph.

    A pair with no linked concepts yields the two supernodes with their
    self-loops and nothing else.
    """
    seed = link_pair(graph, premise, hypothesis, max_len, stoplist)
    filtered = score_expansion(graph, seed, cfg).filter(cfg.theta, cfg.alpha)
    return augment(_with_labels(filtered, graph))


def new_content_counts(sub: ContextualSubgraph) -> tuple[int, int, int]:
    """(new nodes, new edges, mentioned concepts) for a contextual subgraph.

    New nodes are kept concepts not mentioned in the text; new edges are KG
    edges between concepts with at least one unmentioned endpoint.
    Supernodes and self-loops are not counted.
    """
    s = sub.seed.union
    concepts = [n for n in sub.nodes if n >= 0]
    new_nodes = sum(1 for n in concepts if n not in s)
    new_edges = sum(1 for u, t, v in sub.edges
                    if t == KG and u >= 0 and v >= 0 and (u not in s or v not in s))
    mentioned = sum(1 for n in concepts if n in s)
    return new_nodes, new_edges, mentioned


_WORKER_STATE = {}


def _init_worker(graph, cfg, max_len, stoplist):
    _WORKER_STATE.update(graph=graph, cfg=cfg, max_len=max_len, stoplist=stoplist)


def _score_pair(pair):
    st = _WORKER_STATE
    seed = link_pair(st["graph"], pair[0], pair[1], st["max_len"], st["stoplist"])
    return score_expansion(st["graph"], seed, st["cfg"])


def score_corpus(pairs: Sequence[tuple[str, str]], graph: KnowledgeGraph, cfg: PprConfig = PprConfig(),
                 max_len: int = DEFAULT_MAX_LEN, stoplist=None, jobs: int = 1) -> list[ScoredExpansion]:
    """Link and PPR-score every pair, optionally across ``jobs`` processes.

    Output order always matches input order.
    """
    pairs = [(p, h) for p, h in pairs]
    if jobs > 1 and len(pairs) > 1:
        with ProcessPoolExecutor(jobs, initializer=_init_worker,
                                 initargs=(graph, cfg, max_len, stoplist)) as pool:
            return list(pool.map(_score_pair, pairs, chunksize=max(1, len(pairs) // (4 * jobs))))
    _init_worker(graph, cfg, max_len, stoplist)
    return [_score_pair(pair) for pair in pairs]


def _as_pair(example):
    if isinstance(example, (tuple, list)):
        return example[0], example[1]
    return example.premise, example.hypothesis


def corpus_stats(dataset, graph: KnowledgeGraph, thetas: Iterable[float] = THETA_GRID,
                 cfg: PprConfig = PprConfig(), max_len: int = DEFAULT_MAX_LEN,
                 stoplist=None, jobs: int = 1) -> list[dict]:
    """Average new nodes, new edges and mentioned concepts per threshold.

    ``dataset`` holds objects with ``premise``/``hypothesis`` attributes or
    plain ``(premise, hypothesis)`` pairs. Returns one record per theta.
    """
    pairs = [_as_pair(ex) for ex in dataset]
    if not pairs:
        raise ValueError("dataset is empty")
    scored = score_corpus(pairs, graph, cfg, max_len, stoplist, jobs)
    report = []
    for theta in thetas:
        totals = np.zeros(3)
        for exp in scored:
            totals += new_content_counts(exp.filter(theta, cfg.alpha))
        mean = totals / len(pairs)
        report.append({
            "theta": float(theta),
            "mean_new_nodes": float(mean[0]),
            "mean_new_edges": float(mean[1]),
            "mean_mentioned_concepts": float(mean[2]),
        })
    return report


# -- serialization -----------------------------------------------------------

def _flags(sub: ContextualSubgraph, node: int) -> str:
    return ("p" if node in sub.seed.premise else "-") + \
           ("h" if node in sub.seed.hypothesis else "-") + \
           ("s" if node in sub.seed.union else "-")


def serialize_subgraph(sub: ContextualSubgraph) -> str:
    """Line-oriented text form.

    ``SUBGRAPH nodes=N edges=E theta=T alpha=A``, then one
    ``NODE id label normalized_score flags`` line per node and one
    ``EDGE src type dst`` line per edge. Supernodes carry score ``-``;
    flags are three positions ``p``/``h``/``s`` (premise, hypothesis, seed)
    with ``-`` for unset.
    """
    lines = [f"SUBGRAPH nodes={sub.num_nodes} edges={sub.num_edges} "
             f"theta={sub.theta!r} alpha={sub.alpha!r}"]
    for n in sub.nodes:
        score = "-" if n < 0 else repr(float(sub.scores[n]))
        lines.append(f"NODE {n} {sub.label(n)} {score} {_flags(sub, n)}")
    for u, t, v in sub.edges:
        lines.append(f"EDGE {u} {t} {v}")
    return "\n".join(lines) + "\n"


def parse_subgraph(text: str) -> ContextualSubgraph:
    """Inverse of :func:`serialize_subgraph`."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("SUBGRAPH "):
        raise ValueError("missing SUBGRAPH header")
    header = dict(kv.split("=", 1) for kv in lines[0].split()[1:])
    nodes, edges, scores, labels = [], [], {}, {}
    prem, hyp = set(), set()
    augmented = False
    for ln in lines[1:]:
        parts = ln.split()
        if parts[0] == "NODE":
            n = int(parts[1])
            nodes.append(n)
            if n < 0:
                augmented = True
                continue
            labels[n] = parts[2]
            scores[n] = float(parts[3])
            if parts[4][0] == "p":
                prem.add(n)
            if parts[4][1] == "h":
                hyp.add(n)
        elif parts[0] == "EDGE":
            edges.append((int(parts[1]), parts[2], int(parts[3])))
        else:
            raise ValueError(f"unknown record {parts[0]!r}")
    if len(nodes) != int(header["nodes"]) or len(edges) != int(header["edges"]):
        raise ValueError("node/edge counts disagree with header")
    theta, alpha = float(header["theta"]), float(header["alpha"])
    if math.isnan(theta) or math.isnan(alpha):
        raise ValueError("bad header values")
    return ContextualSubgraph(tuple(nodes), tuple(edges), SeedSet(frozenset(prem), frozenset(hyp)),
                              scores, theta, alpha, labels, augmented)
