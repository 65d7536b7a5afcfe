import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kes.kg_store import KnowledgeGraph
from kes.linker import Mention, default_stoplist, link_concepts, read_stoplist, tokenize

from conftest import write_lines


@pytest.mark.parametrize("text, tokens", [
    ("A girl runs.", ["a", "girl", "runs"]),
    ("", []),
    ("small-children", ["small-children"]),
    ("  \"Hello,\"  world!! ", ["hello", "world"]),
    ("... --- ...", []),
])
def test_tokenize(text, tokens):
    assert tokenize(text) == tokens


def graph_of(*labels):
    return KnowledgeGraph.from_labeled_triples([(lab, "r", "__anchor__") for lab in labels])


def test_longest_match_wins():
    g = graph_of("small_children", "children")
    mentions = link_concepts(["small", "children"], g)
    assert mentions == (Mention(0, 2, g.concept_id("small_children")),)


def test_single_match():
    g = graph_of("beach")
    assert link_concepts(["quiet", "beach"], g) == (Mention(1, 2, g.concept_id("beach")),)


def test_no_match_and_bad_max_len():
    g = graph_of("beach")
    assert link_concepts(["nothing", "here"], g) == ()
    with pytest.raises(ValueError):
        link_concepts(["beach"], g, max_len=0)


def test_max_len_caps_window():
    g = graph_of("a_b_c_d_e", "a")
    assert link_concepts(list("abcde"), g, max_len=4, stoplist=set()) == (Mention(0, 1, g.concept_id("a")),)
    assert link_concepts(list("abcde"), g, max_len=5, stoplist=set()) == (Mention(0, 5, g.concept_id("a_b_c_d_e")),)


def test_stoplist_blocks_single_tokens_only():
    g = graph_of("the", "the_beach", "it")
    assert link_concepts(["the", "it"], g) == ()
    assert link_concepts(["the", "beach"], g) == (Mention(0, 2, g.concept_id("the_beach")),)
    assert link_concepts(["it"], g, stoplist=set()) == (Mention(0, 1, g.concept_id("it")),)


def test_default_stoplist_and_file(tmp_path):
    stop = default_stoplist()
    assert {"a", "the", "is", "they"} <= stop
    assert "girl" not in stop
    custom = read_stoplist(write_lines(tmp_path / "stop.txt", ["# comment", "Foo", "", "bar"]))
    assert custom == {"foo", "bar"}


def brute_force_link(tokens, labels, max_len, stop):
    """Enumerate every window, then apply leftmost-longest selection."""
    windows = {}
    for i in range(len(tokens)):
        for j in range(i + 1, min(len(tokens), i + max_len) + 1):
            text = "_".join(tokens[i:j])
            if text in labels and not (j - i == 1 and tokens[i] in stop):
                windows.setdefault(i, []).append(j)
    out, i = [], 0
    while i < len(tokens):
        if i in windows:
            j = max(windows[i])
            out.append((i, j, labels["_".join(tokens[i:j])]))
            i = j
        else:
            i += 1
    return out


VOCAB = ["a", "b", "c", "d", "the"]


@settings(max_examples=300, deadline=None)
@given(st.lists(st.sampled_from(VOCAB), min_size=10, max_size=10), st.integers(0, 2**32 - 1))
def test_matches_brute_force(tokens, seed):
    rng = np.random.default_rng(seed)
    labels = set()
    for _ in range(12):
        n = int(rng.integers(1, 4))
        labels.add("_".join(rng.choice(VOCAB, size=n)))
    g = graph_of(*sorted(labels))
    ids = {lab: g.concept_id(lab) for lab in labels}
    stop = {"the"}
    got = link_concepts(tokens, g, max_len=4, stoplist=stop)
    assert [tuple(m) for m in got] == brute_force_link(tokens, ids, 4, stop)
    # spans are disjoint and every id is in the graph
    for m1, m2 in zip(got, got[1:]):
        assert m1.end <= m2.start
    assert all(0 <= m.concept < g.num_concepts for m in got)
    assert got == link_concepts(tokens, g, max_len=4, stoplist=stop)
