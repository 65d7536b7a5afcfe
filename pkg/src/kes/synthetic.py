"""Synthetic KG + entailment corpora for controlled experiments.

:func:`make_connection_corpus` builds a task whose label depends only on
whether the premise concept and the hypothesis concept share a KG edge.
Concept names are random pseudo-words and every concept occurs in both
classes, so the text alone carries no usable signal for unseen pairs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Example
from .kg_store import KnowledgeGraph

_CONSONANTS = "bdfgklmnprstvz"
_VOWELS = "aeiou"

PREMISE_TEMPLATES = (
    "there is a {} over there",
    "someone mentioned the {} yesterday",
    "we looked at a {} together",
    "a picture shows the {}",
)
HYPOTHESIS_TEMPLATES = (
    "people talk about the {}",
    "the {} is somewhere nearby",
    "it has something to do with a {}",
    "they wrote about some {}",
)
RELATIONS = ("related_to", "is_a", "part_of", "used_for")


def pseudo_words(n: int, rng: np.random.Generator, syllables: int = 3) -> list[str]:
    words = set()
    while len(words) < n:
        words.add("".join(rng.choice(list(_CONSONANTS)) + rng.choice(list(_VOWELS))
                          for _ in range(syllables)))
    return sorted(words)


@dataclass
class SyntheticCorpus:
    graph: KnowledgeGraph
    labeled_triples: list[tuple[str, str, str]]
    concepts: list[str]
    train: list[Example]
    dev: list[Example]
    test: list[Example]


def make_connection_corpus(num_concepts: int = 160, leaves_per_concept: int = 2, num_train: int = 320,
                           num_dev: int = 80, num_test: int = 200, seed: int = 0) -> SyntheticCorpus:
    """KG over ``num_concepts`` concepts arranged as a shuffled 4-regular
    circulant graph, each concept with private leaf neighbors.

    ``entails`` pairs are KG-adjacent concepts, ``neutral`` pairs are not
    adjacent. The classes are balanced and the three splits use disjoint
    concept pairs.
    """
    rng = np.random.default_rng(seed)
    names = pseudo_words(num_concepts * (1 + leaves_per_concept), rng)
    rng.shuffle(names)
    concepts = names[:num_concepts]
    leaves = names[num_concepts:]

    perm = rng.permutation(num_concepts)
    adjacent = set()
    triples = []
    for i in range(num_concepts):
        for step in (1, 2):
            a, b = int(perm[i]), int(perm[(i + step) % num_concepts])
            adjacent.add(frozenset((a, b)))
            h, t = (a, b) if rng.random() < 0.5 else (b, a)
            triples.append((concepts[h], str(rng.choice(RELATIONS)), concepts[t]))
    for i, c in enumerate(concepts):
        for leaf in leaves[i * leaves_per_concept:(i + 1) * leaves_per_concept]:
            triples.append((c, "has_property", leaf))

    positives = sorted(tuple(sorted(p)) for p in adjacent)
    negatives = [(a, b) for a in range(num_concepts) for b in range(a + 1, num_concepts)
                 if frozenset((a, b)) not in adjacent]
    total = num_train + num_dev + num_test
    half = total // 2
    if half > len(positives):
        raise ValueError(f"only {len(positives)} connected pairs available for {half} positives")
    pos_idx = rng.permutation(len(positives))[:half]
    neg_idx = rng.permutation(len(negatives))[:total - half]

    examples = []
    for idx, label, pool in ((pos_idx, "entails", positives), (neg_idx, "neutral", negatives)):
        for k in idx:
            a, b = pool[k]
            if rng.random() < 0.5:
                a, b = b, a
            premise = str(rng.choice(PREMISE_TEMPLATES)).format(concepts[a])
            hypothesis = str(rng.choice(HYPOTHESIS_TEMPLATES)).format(concepts[b])
            examples.append(Example(premise, hypothesis, label))
    order = rng.permutation(len(examples))
    examples = [examples[i] for i in order]
    train = examples[:num_train]
    dev = examples[num_train:num_train + num_dev]
    test = examples[num_train + num_dev:]
    return SyntheticCorpus(KnowledgeGraph.from_labeled_triples(triples), triples, concepts, train, dev, test)
