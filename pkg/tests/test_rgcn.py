import numpy as np
import pytest

from kes.gradcheck import random_subgraph
from kes.kg_store import EmbeddingTable, fallback_vector
from kes.rgcn import (GcnLayer, encode_subgraph, init_encoder, init_node_states, normalized_adjacency,
                      readout, rgcn_layer_forward)
from kes.subgraph import (HYPOTHESIS_NODE, KG, PREMISE_NODE, SELF_LOOP, SUPERNODE_LABELS, ContextualSubgraph,
                          SeedSet, augment)


def dense_layer(sub, H, weights):
    """ReLU(sum_r D_r^-1/2 A_r D_r^-1/2 H W_r) with dense matrices; D_r
    counts each node's distinct r-neighbors, direction ignored."""
    idx = {n: i for i, n in enumerate(sub.nodes)}
    n = len(idx)
    out = np.zeros((n, next(iter(weights.values())).shape[1]))
    for r, W in weights.items():
        A = np.zeros((n, n))
        for u, t, v in sub.edges:
            if t == r:
                A[idx[v], idx[u]] = 1.0
        deg = ((A + A.T) > 0).sum(axis=1).astype(float)
        inv = np.where(deg > 0, 1.0 / np.sqrt(np.where(deg > 0, deg, 1.0)), 0.0)
        out += np.diag(inv) @ A @ np.diag(inv) @ H @ W
    return np.maximum(out, 0.0)


def dense_encode(params, sub, table):
    H = np.array([table.fallback(SUPERNODE_LABELS[n]) if n < 0 else table[n] for n in sub.nodes])
    for layer in params.layers:
        H = dense_layer(sub, H, layer.weights)
    rows = {n: i for i, n in enumerate(sub.nodes)}
    if params.post_linear_position == "nodes":
        H = np.maximum(H @ params.post_linear, 0.0)
        total = np.zeros(H.shape[1])
        for row in H:
            total += row
        s = np.maximum(total @ params.readout_weight, 0.0)
    else:
        total = np.zeros(H.shape[1])
        for row in H:
            total += row
        s = np.maximum(np.maximum(total @ params.readout_weight, 0.0) @ params.post_linear, 0.0)
    return np.concatenate([s, H[rows[PREMISE_NODE]], H[rows[HYPOTHESIS_NODE]]])


def random_case(rng, max_concepts, dim):
    k = int(rng.integers(1, max_concepts + 1))
    sub = random_subgraph(rng, num_concepts=k, edge_prob=float(rng.uniform(0.1, 0.8)))
    table = EmbeddingTable(dim, int(rng.integers(1000)), rng.normal(size=(k, dim)))
    return sub, table


def test_self_loop_identity():
    sub = ContextualSubgraph((0,), ((0, SELF_LOOP, 0),), SeedSet(), {0: 1.0}, 0.0, 0.15, augmented=True)
    h = np.array([[0.5, 0.0, 2.0]])
    layer = GcnLayer({KG: np.zeros((3, 3)), SELF_LOOP: np.eye(3)})
    np.testing.assert_array_equal(rgcn_layer_forward(layer, sub, h), h)


def test_zero_weights_give_zero_states():
    rng = np.random.default_rng(0)
    sub, table = random_case(rng, 4, 3)
    H = init_node_states(sub, table)
    layer = GcnLayer({KG: np.zeros((3, 5)), SELF_LOOP: np.zeros((3, 5))})
    np.testing.assert_array_equal(rgcn_layer_forward(layer, sub, H), np.zeros((sub.num_nodes, 5)))


def test_layer_matches_dense_oracle():
    rng = np.random.default_rng(1)
    for _ in range(100):
        sub, table = random_case(rng, 3, 4)  # 5 nodes at most
        H = rng.normal(size=(sub.num_nodes, 4))
        weights = {KG: rng.normal(size=(4, 6)), SELF_LOOP: rng.normal(size=(4, 6))}
        got = rgcn_layer_forward(GcnLayer(weights), sub, H)
        assert np.abs(got - dense_layer(sub, H, weights)).max() < 1e-10


def test_normalization_constants():
    # premise supernode linked to two concepts: degree 2 under kg
    seed = SeedSet(frozenset({0, 1}), frozenset())
    sub = augment(ContextualSubgraph((0, 1), (), seed, {0: 1.0, 1: 1.0}, 0.2, 0.15))
    N = normalized_adjacency(sub, KG).toarray()
    rows = {n: i for i, n in enumerate(sub.nodes)}
    assert N[rows[0], rows[PREMISE_NODE]] == pytest.approx(1 / np.sqrt(2 * 1))
    assert N[rows[PREMISE_NODE], rows[1]] == pytest.approx(1 / np.sqrt(2))
    np.testing.assert_array_equal(normalized_adjacency(sub, SELF_LOOP).toarray(), np.eye(4))


def test_readout_single_node_identity():
    h = np.array([[1.0, 0.0, 3.0]])
    np.testing.assert_array_equal(readout(np.eye(3), h), h[0])
    with pytest.raises(ValueError):
        readout(np.eye(3), np.zeros((0, 3)))


def test_readout_matches_accumulation():
    rng = np.random.default_rng(2)
    H = rng.normal(size=(7, 5))
    W = rng.normal(size=(5, 4))
    acc = np.zeros(4)
    for row in H:
        acc += W.T @ row
    assert np.abs(readout(W, H) - np.maximum(acc, 0)).max() < 1e-12


def test_init_states_all_covered():
    rng = np.random.default_rng(3)
    sub, table = random_case(rng, 4, 3)
    H = init_node_states(sub, table)
    for i, n in enumerate(sub.nodes):
        if n >= 0:
            np.testing.assert_array_equal(H[i], table[n])


def test_init_states_mixed_coverage_manual():
    # 4 nodes: 2 concepts (one file-provided, one fallback) + 2 supernodes
    labels = ["girl", "beach"]
    vectors = np.array([[1.0, 2.0], fallback_vector("beach", 2, 5)])
    table = EmbeddingTable(2, 5, vectors, frozenset({0}))
    seed = SeedSet(frozenset({0}), frozenset({1}))
    sub = augment(ContextualSubgraph((0, 1), (), seed, {0: 1.0, 1: 1.0}, 0.2, 0.15, dict(enumerate(labels))))
    expected = np.array([
        fallback_vector("__hypothesis__", 2, 5),
        fallback_vector("__premise__", 2, 5),
        [1.0, 2.0],
        fallback_vector("beach", 2, 5),
    ])
    np.testing.assert_array_equal(init_node_states(sub, table), expected)


def test_supernode_states_shared_across_examples():
    rng = np.random.default_rng(4)
    a, table_a = random_case(rng, 3, 4)
    b, _ = random_case(rng, 3, 4)
    table_b = EmbeddingTable(4, table_a.seed, rng.normal(size=(3, 4)))
    np.testing.assert_array_equal(init_node_states(a, table_a)[:2], init_node_states(b, table_b)[:2])


def test_width_300():
    rng = np.random.default_rng(5)
    params = init_encoder(300, 300, rng)
    sub = augment(ContextualSubgraph((0,), (), SeedSet(frozenset({0})), {0: 1.0}, 0.2, 0.15))
    table = EmbeddingTable(300, 0, rng.normal(size=(1, 300)))
    enc = encode_subgraph(params, sub, table)
    assert enc.g_out.shape == (900,)


def test_degenerate_subgraph_encodes():
    rng = np.random.default_rng(6)
    params = init_encoder(4, 4, rng)
    sub = augment(ContextualSubgraph((), (), SeedSet(), {}, 0.2, 0.15))
    table = EmbeddingTable(4, 0, np.zeros((0, 4)))
    enc = encode_subgraph(params, sub, table)
    assert enc.g_out.shape == (12,)
    assert np.all(np.isfinite(enc.g_out))


@pytest.mark.parametrize("position", ["nodes", "readout"])
def test_encoder_matches_dense_oracle(position):
    rng = np.random.default_rng(7)
    for _ in range(50):
        sub, table = random_case(rng, 6, 5)  # up to 8 nodes
        params = init_encoder(5, 6, rng, num_layers=int(rng.integers(1, 3)), post_linear_position=position)
        got = encode_subgraph(params, sub, table).g_out
        assert np.abs(got - dense_encode(params, sub, table)).max() < 1e-9


def relabel(sub, table, perm):
    """Concept i becomes perm[i]; the embedding table follows."""
    m = {i: int(perm[i]) for i in range(len(perm))}
    m.update({PREMISE_NODE: PREMISE_NODE, HYPOTHESIS_NODE: HYPOTHESIS_NODE})
    seed = SeedSet(frozenset(m[c] for c in sub.seed.premise), frozenset(m[c] for c in sub.seed.hypothesis))
    moved = ContextualSubgraph(tuple(sorted(m[n] for n in sub.nodes)),
                               tuple(sorted((m[u], t, m[v]) for u, t, v in sub.edges)),
                               seed, {m[n]: s for n, s in sub.scores.items()}, sub.theta, sub.alpha,
                               augmented=True)
    vectors = np.empty_like(table.vectors)
    vectors[perm] = table.vectors
    return moved, EmbeddingTable(table.dim, table.seed, vectors)


def test_permutation_invariance():
    rng = np.random.default_rng(8)
    sub, table = random_case(rng, 6, 5)
    params = init_encoder(5, 5, rng)
    base = encode_subgraph(params, sub, table).g_out
    k = len(table)
    for _ in range(20):
        moved, moved_table = relabel(sub, table, rng.permutation(k))
        assert np.abs(encode_subgraph(params, moved, moved_table).g_out - base).max() <= 1e-10


def test_isolated_node_locality():
    rng = np.random.default_rng(9)
    seed = SeedSet(frozenset({0, 1}), frozenset({1}))
    sub = augment(ContextualSubgraph((0, 1, 2), ((0, KG, 1),), seed, {0: 1.0, 1: 1.0, 2: 1.0}, 0.2, 0.15))
    layer = GcnLayer({KG: rng.normal(size=(3, 3)), SELF_LOOP: rng.normal(size=(3, 3))})
    H = rng.normal(size=(sub.num_nodes, 3))
    H2 = H.copy()
    H2[[0, 1, 2, 3]] = rng.normal(size=(4, 3))  # everything except concept 2
    row = sub.nodes.index(2)
    np.testing.assert_array_equal(rgcn_layer_forward(layer, sub, H)[row], rgcn_layer_forward(layer, sub, H2)[row])


def test_zero_parameters_collapse():
    rng = np.random.default_rng(10)
    sub, table = random_case(rng, 4, 3)
    params = init_encoder(3, 3, rng)
    for arr in params.named_tensors().values():
        arr[...] = 0.0
    np.testing.assert_array_equal(encode_subgraph(params, sub, table).g_out, np.zeros(9))
