"""Tokenization and greedy longest-match linking of text to KG concepts."""

from __future__ import annotations

import string
from functools import lru_cache
from importlib import resources
from typing import Iterable, NamedTuple

from .kg_store import KnowledgeGraph

DEFAULT_MAX_LEN = 4

_STRIP = string.punctuation + "‘’“”"


class Mention(NamedTuple):
    start: int
    end: int
    concept: int


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace and strip surrounding punctuation.

    >>> tokenize("A girl runs.")
    ['a', 'girl', 'runs']
    """
    tokens = []
    for raw in text.lower().split():
        tok = raw.strip(_STRIP)
        if tok:
            tokens.append(tok)
    return tokens


def read_stoplist(path) -> frozenset[str]:
    words = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                words.add(line.lower())
    return frozenset(words)


@lru_cache(maxsize=None)
def default_stoplist() -> frozenset[str]:
    with resources.as_file(resources.files("kes") / "data" / "stopwords.txt") as p:
        return read_stoplist(p)


def link_concepts(tokens: list[str], graph: KnowledgeGraph, max_len: int = DEFAULT_MAX_LEN,
                  stoplist: Iterable[str] | None = None) -> tuple[Mention, ...]:
    """Greedy leftmost-longest match of token windows against concept labels.

    Windows of up to ``max_len`` tokens are joined with underscores. A
    matched span is consumed; scanning resumes after it. Single tokens in
    ``stoplist`` never match on their own (pass an empty set to disable).
    """
    if max_len < 1:
        raise ValueError(f"max_len must be >= 1, got {max_len}")
    stop = default_stoplist() if stoplist is None else frozenset(stoplist)
    mentions = []
    i, n = 0, len(tokens)
    while i < n:
        for length in range(min(max_len, n - i), 0, -1):
            if length == 1 and tokens[i] in stop:
                continue
            cid = graph.concept_id("_".join(tokens[i:i + length]))
            if cid is not None:
                mentions.append(Mention(i, i + length, cid))
                i += length
                break
        else:
            i += 1
    return tuple(mentions)


def mentioned_concepts(mentions: Iterable[Mention]) -> frozenset[int]:
    return frozenset(m.concept for m in mentions)
