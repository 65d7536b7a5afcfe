"""Knowledge-graph storage: triple ingestion, label interning, adjacency
indices and node embedding tables."""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

logger = logging.getLogger(__name__)

OUT = "out"
IN = "in"


class GraphFormatError(ValueError):
    """A triple or embedding file line could not be parsed."""

    def __init__(self, path, lineno: int, message: str):
        self.path = str(path)
        self.lineno = lineno
        super().__init__(f"{path}:{lineno}: {message}")


def normalize_label(label: str) -> str:
    """Lowercase and join whitespace-separated words with underscores."""
    return "_".join(label.strip().lower().split())


class KnowledgeGraph:
    """Immutable multi-relational directed graph over interned concepts.

    Concept and relation ids are dense integers starting at 0, assigned in
    order of first appearance. Duplicate ``(head, relation, tail)`` triples
    are stored once.
    """

    def __init__(self, concepts: Sequence[str], relations: Sequence[str],
                 triples: Iterable[tuple[int, int, int]]):
        self._concepts = tuple(concepts)
        self._relations = tuple(relations)
        self._concept_ids = MappingProxyType({c: i for i, c in enumerate(self._concepts)})
        self._relation_ids = MappingProxyType({r: i for i, r in enumerate(self._relations)})
        if len(self._concept_ids) != len(self._concepts):
            raise ValueError("duplicate concept labels")
        if len(self._relation_ids) != len(self._relations):
            raise ValueError("duplicate relation labels")

        unique = []
        seen = set()
        n, m = len(self._concepts), len(self._relations)
        for h, r, t in triples:
            if not (0 <= h < n and 0 <= t < n and 0 <= r < m):
                raise ValueError(f"triple ({h}, {r}, {t}) references unknown ids")
            if (h, r, t) not in seen:
                seen.add((h, r, t))
                unique.append((h, r, t))
        self._triples = tuple(unique)

        out_index: dict[int, list] = {}
        in_index: dict[int, list] = {}
        for h, r, t in self._triples:
            out_index.setdefault(h, []).append((r, t))
            in_index.setdefault(t, []).append((r, h))
        self._out = MappingProxyType({k: tuple(sorted(v)) for k, v in out_index.items()})
        self._in = MappingProxyType({k: tuple(sorted(v)) for k, v in in_index.items()})

    @property
    def concepts(self) -> tuple[str, ...]:
        return self._concepts

    @property
    def relations(self) -> tuple[str, ...]:
        return self._relations

    @property
    def triples(self) -> tuple[tuple[int, int, int], ...]:
        return self._triples

    @property
    def out_index(self) -> Mapping[int, tuple[tuple[int, int], ...]]:
        return self._out

    @property
    def in_index(self) -> Mapping[int, tuple[tuple[int, int], ...]]:
        return self._in

    @property
    def num_concepts(self) -> int:
        return len(self._concepts)

    @property
    def num_relations(self) -> int:
        return len(self._relations)

    @property
    def num_triples(self) -> int:
        return len(self._triples)

    def concept_id(self, label: str) -> int | None:
        """Id of a concept by (normalized) label, or None if absent."""
        return self._concept_ids.get(normalize_label(label))

    def relation_id(self, label: str) -> int | None:
        return self._relation_ids.get(normalize_label(label))

    def has_concept(self, label: str) -> bool:
        return label in self._concept_ids

    def label(self, concept: int) -> str:
        return self._concepts[concept]

    def out_edges(self, concept: int):
        return self._out.get(concept, ())

    def in_edges(self, concept: int):
        return self._in.get(concept, ())

    def fingerprint(self) -> str:
        """Content hash of the graph, stable across processes."""
        h = hashlib.sha256()
        for c in self._concepts:
            h.update(c.encode("utf-8") + b"\0")
        h.update(b"\1")
        for r in self._relations:
            h.update(r.encode("utf-8") + b"\0")
        h.update(b"\1")
        h.update(np.asarray(self._triples, dtype=np.int64).tobytes())
        return h.hexdigest()

    def summary(self) -> dict:
        return {
            "concepts": self.num_concepts,
            "relations": self.num_relations,
            "triples": self.num_triples,
        }

    def __repr__(self):
        return (f"KnowledgeGraph(concepts={self.num_concepts}, "
                f"relations={self.num_relations}, triples={self.num_triples})")

    @classmethod
    def from_labeled_triples(cls, triples: Iterable[tuple[str, str, str]]) -> "KnowledgeGraph":
        """Build a graph from ``(head, relation, tail)`` label triples."""
        concepts: dict[str, int] = {}
        relations: dict[str, int] = {}
        ids = []
        for head, rel, tail in triples:
            h = concepts.setdefault(normalize_label(head), len(concepts))
            r = relations.setdefault(normalize_label(rel), len(relations))
            t = concepts.setdefault(normalize_label(tail), len(concepts))
            ids.append((h, r, t))
        return cls(list(concepts), list(relations), ids)


def load_graph(path) -> KnowledgeGraph:
    """Read a tab-separated triple file.

    Each nonempty line holds ``head<TAB>relation<TAB>tail``; lines starting
    with ``#`` are comments. Raises :class:`GraphFormatError` with the line
    number on a wrong field count.
    """
    path = Path(path)
    labeled = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise GraphFormatError(path, lineno, f"expected 3 tab-separated fields, got {len(fields)}")
            if not all(f.strip() for f in fields):
                raise GraphFormatError(path, lineno, "empty field")
            labeled.append(tuple(fields))
    graph = KnowledgeGraph.from_labeled_triples(labeled)
    logger.info("loaded %s: %d concepts, %d relations, %d triples",
                path, graph.num_concepts, graph.num_relations, graph.num_triples)
    return graph


def fallback_vector(label: str, dim: int, seed: int) -> np.ndarray:
    """Deterministic pseudo-random vector for ``label``.

    Entries are uniform in ``[-0.5/dim, 0.5/dim]`` and depend only on
    ``(seed, label)``.
    """
    if dim <= 0:
        raise ValueError(f"dim must be positive, got {dim}")
    digest = hashlib.sha256(f"{seed}\x1f{label}".encode("utf-8")).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:16], "little"))
    half = 0.5 / dim
    return rng.uniform(-half, half, size=dim)


@dataclass(frozen=True)
class EmbeddingTable:
    """Per-concept vectors, file-provided where available.

    ``vectors[i]`` is the embedding of concept id ``i``; ``coverage`` holds
    the ids whose vector came from the file.
    """

    dim: int
    seed: int
    vectors: np.ndarray
    coverage: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.vectors.ndim != 2 or self.vectors.shape[1] != self.dim:
            raise ValueError(f"vectors must have shape (n, {self.dim}), got {self.vectors.shape}")
        self.vectors.setflags(write=False)

    def __getitem__(self, concept: int) -> np.ndarray:
        return self.vectors[concept]

    def __len__(self):
        return self.vectors.shape[0]

    @property
    def coverage_fraction(self) -> float:
        if len(self) == 0:
            return 0.0
        return len(self.coverage) / len(self)

    def fallback(self, label: str) -> np.ndarray:
        return fallback_vector(label, self.dim, self.seed)


def read_vector_file(path, dim: int) -> dict[str, np.ndarray]:
    """Parse ``label v1 ... v_dim`` lines into a label -> vector dict.

    Labels are normalized; a later line for the same label wins.
    """
    if dim <= 0:
        raise ValueError(f"dim must be positive, got {dim}")
    vectors = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if len(parts) != dim + 1:
                raise GraphFormatError(path, lineno, f"expected label and {dim} values, got {len(parts) - 1} values")
            try:
                vec = np.array([float(x) for x in parts[1:]])
            except ValueError as exc:
                raise GraphFormatError(path, lineno, str(exc)) from None
            vectors[normalize_label(parts[0])] = vec
    return vectors


def load_embeddings(path, graph: KnowledgeGraph, dim: int, seed: int) -> EmbeddingTable:
    """Load node embeddings for ``graph``; concepts absent from the file get
    :func:`fallback_vector`. ``path`` may be None for an all-fallback table."""
    if dim <= 0:
        raise ValueError(f"dim must be positive, got {dim}")
    from_file = read_vector_file(path, dim) if path is not None else {}
    table = np.empty((graph.num_concepts, dim))
    covered = set()
    for i, label in enumerate(graph.concepts):
        vec = from_file.get(label)
        if vec is None:
            table[i] = fallback_vector(label, dim, seed)
        else:
            table[i] = vec
            covered.add(i)
    emb = EmbeddingTable(dim=dim, seed=seed, vectors=table, coverage=frozenset(covered))
    logger.info("embedding coverage %.3f (%d/%d)", emb.coverage_fraction, len(covered), len(emb))
    return emb


def neighbors(graph: KnowledgeGraph, c: int) -> list[tuple[int, int, str]]:
    """All ``(relation, neighbor, direction)`` entries incident to ``c``,
    sorted by ``(relation, neighbor, direction)``."""
    if not (isinstance(c, (int, np.integer)) and 0 <= c < graph.num_concepts):
        raise ValueError(f"unknown concept id {c!r}")
    out = [(r, t, OUT) for r, t in graph.out_edges(c)]
    out += [(r, h, IN) for r, h in graph.in_edges(c)]
    out.sort()
    return out
