"""Relational GCN encoder for contextual subgraphs.

Node states are stored as an ``(n, d)`` array whose rows follow
``subgraph.nodes`` (ascending node id). Weight matrices use the row-vector
convention, ``W`` has shape ``(d_in, d_out)`` and a node update is
``h @ W``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .kg_store import EmbeddingTable
from .subgraph import EDGE_TYPES, HYPOTHESIS_NODE, PREMISE_NODE, SUPERNODE_LABELS, ContextualSubgraph

NODES = "nodes"
READOUT = "readout"


def relu(x):
    return np.maximum(x, 0.0)


@dataclass
class GcnLayer:
    """One R-GCN layer: a ``(d_in, d_out)`` matrix per edge type, ReLU."""

    weights: dict[str, np.ndarray]

    def __post_init__(self):
        shapes = {w.shape for w in self.weights.values()}
        if len(shapes) != 1:
            raise ValueError(f"edge-type weights disagree in shape: {shapes}")

    @property
    def d_in(self) -> int:
        return next(iter(self.weights.values())).shape[0]

    @property
    def d_out(self) -> int:
        return next(iter(self.weights.values())).shape[1]


@dataclass
class EncoderParams:
    """R-GCN layers, the extra linear layer and the readout weight.

    ``post_linear_position`` places the extra linear layer either on every
    node state after convolution (``"nodes"``, default) or on the pooled
    vector after readout (``"readout"``).
    """

    layers: list[GcnLayer]
    post_linear: np.ndarray
    readout_weight: np.ndarray
    post_linear_position: str = NODES

    def __post_init__(self):
        if self.post_linear_position not in (NODES, READOUT):
            raise ValueError(f"bad post_linear_position {self.post_linear_position!r}")
        for a, b in zip(self.layers, self.layers[1:]):
            if a.d_out != b.d_in:
                raise ValueError("layer dimensions do not chain")
        d = self.dim
        if self.post_linear.shape != (d, d) or self.readout_weight.shape != (d, d):
            raise ValueError("post_linear and readout_weight must be (d, d)")

    @property
    def d_in(self) -> int:
        return self.layers[0].d_in

    @property
    def dim(self) -> int:
        return self.layers[-1].d_out

    @property
    def out_width(self) -> int:
        return 3 * self.dim

    def named_tensors(self) -> dict[str, np.ndarray]:
        out = {}
        for i, layer in enumerate(self.layers):
            for r in sorted(layer.weights):
                out[f"layer{i}.{r}"] = layer.weights[r]
        out["post_linear"] = self.post_linear
        out["readout"] = self.readout_weight
        return out


def init_encoder(d_in: int, d: int, rng: np.random.Generator, num_layers: int = 1,
                 edge_types=EDGE_TYPES, post_linear_position: str = NODES) -> EncoderParams:
    """Glorot-uniform initialization."""
    def glorot(m, n):
        lim = np.sqrt(6.0 / (m + n))
        return rng.uniform(-lim, lim, size=(m, n))

    layers = []
    for i in range(num_layers):
        m = d_in if i == 0 else d
        layers.append(GcnLayer({r: glorot(m, d) for r in edge_types}))
    return EncoderParams(layers, glorot(d, d), glorot(d, d), post_linear_position)


def normalized_adjacency(subgraph: ContextualSubgraph, edge_type: str) -> sp.csr_matrix:
    """Matrix ``N`` with ``N[u, v] = 1 / sqrt(deg(u) deg(v))`` for every
    ``edge_type`` edge ``v -> u``.

    ``deg`` counts a node's distinct neighbors under ``edge_type`` with
    direction ignored; a self-loop makes the node its own neighbor once.
    """
    index = {n: i for i, n in enumerate(subgraph.nodes)}
    n = len(index)
    pairs = {(index[v], index[u]) for u, t, v in subgraph.edges if t == edge_type}
    nbrs = [set() for _ in range(n)]
    for dst, src in pairs:
        nbrs[dst].add(src)
        nbrs[src].add(dst)
    deg = np.array([len(s) for s in nbrs], dtype=float)
    if not pairs:
        return sp.csr_matrix((n, n))
    rows, cols = zip(*sorted(pairs))
    rows, cols = np.array(rows), np.array(cols)
    vals = 1.0 / np.sqrt(deg[rows] * deg[cols])
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def init_node_states(subgraph: ContextualSubgraph, table: EmbeddingTable) -> np.ndarray:
    """Initial states: embedding-table rows for concepts, reserved-label
    fallback vectors for the supernodes."""
    states = np.empty((subgraph.num_nodes, table.dim))
    for i, node in enumerate(subgraph.nodes):
        if node in SUPERNODE_LABELS:
            states[i] = table.fallback(SUPERNODE_LABELS[node])
        else:
            states[i] = table[node]
    return states


@dataclass
class SubgraphTensors:
    """Everything the encoder needs from a subgraph, precomputed once."""

    nodes: tuple[int, ...]
    adjacency: dict[str, sp.csr_matrix]
    states: np.ndarray
    premise_row: int
    hypothesis_row: int
    adjacency_t: dict[str, sp.csr_matrix] = field(default_factory=dict)

    def __post_init__(self):
        self.adjacency_t = {r: a.T.tocsr() for r, a in self.adjacency.items()}


def prepare_subgraph(subgraph: ContextualSubgraph, table: EmbeddingTable,
                     edge_types=EDGE_TYPES) -> SubgraphTensors:
    if not subgraph.augmented:
        raise ValueError("subgraph must be augmented with supernodes and self-loops")
    adj = {r: normalized_adjacency(subgraph, r) for r in edge_types}
    rows = {n: i for i, n in enumerate(subgraph.nodes)}
    return SubgraphTensors(subgraph.nodes, adj, init_node_states(subgraph, table),
                           rows[PREMISE_NODE], rows[HYPOTHESIS_NODE])


def _adjacency(subgraph, edge_types):
    if isinstance(subgraph, SubgraphTensors):
        return subgraph.adjacency
    return {r: normalized_adjacency(subgraph, r) for r in edge_types}


def _layer_preactivation(layer: GcnLayer, adjacency, states):
    z = np.zeros((states.shape[0], layer.d_out))
    for r in sorted(layer.weights):
        a = adjacency.get(r)
        if a is not None and a.nnz:
            z += a @ (states @ layer.weights[r])
    return z


def rgcn_layer_forward(layer: GcnLayer, subgraph, states: np.ndarray) -> np.ndarray:
    """One propagation step: ``ReLU(sum_r N_r H W_r)``.

    ``subgraph`` may be a :class:`ContextualSubgraph` or a prepared
    :class:`SubgraphTensors`.
    """
    if states.shape[1] != layer.d_in:
        raise ValueError(f"states width {states.shape[1]} != layer d_in {layer.d_in}")
    adjacency = _adjacency(subgraph, layer.weights)
    return relu(_layer_preactivation(layer, adjacency, states))


def readout(readout_weight: np.ndarray, states: np.ndarray) -> np.ndarray:
    """Graph vector ``ReLU((sum_v h_v) @ W)``. Rows are summed in stored
    (ascending node id) order."""
    if states.shape[0] == 0:
        raise ValueError("cannot read out an empty state matrix")
    return relu(states.sum(axis=0) @ readout_weight)


@dataclass
class GraphEncoding:
    s_G: np.ndarray
    h_p: np.ndarray
    h_h: np.ndarray

    @property
    def g_out(self) -> np.ndarray:
        return np.concatenate([self.s_G, self.h_p, self.h_h])


def encoder_forward(params: EncoderParams, tensors: SubgraphTensors):
    """Forward pass returning ``(g_out, cache)`` for :func:`encoder_backward`."""
    if tensors.states.shape[1] != params.d_in:
        raise ValueError(f"embedding dim {tensors.states.shape[1]} != encoder input dim {params.d_in}")
    hs = [tensors.states]
    for layer in params.layers:
        hs.append(relu(_layer_preactivation(layer, tensors.adjacency, hs[-1])))
    conv = hs[-1]
    if params.post_linear_position == NODES:
        final = relu(conv @ params.post_linear)
        pooled = final.sum(axis=0)
        s_G = relu(pooled @ params.readout_weight)
        s_mid = None
    else:
        final = conv
        pooled = final.sum(axis=0)
        s_mid = relu(pooled @ params.readout_weight)
        s_G = relu(s_mid @ params.post_linear)
    g_out = np.concatenate([s_G, final[tensors.premise_row], final[tensors.hypothesis_row]])
    cache = (tensors, hs, final, pooled, s_mid, s_G)
    return g_out, cache


def encoder_backward(params: EncoderParams, cache, d_g: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of all encoder tensors given ``dL/dg_out``.

    Keys match :meth:`EncoderParams.named_tensors`. The normalization
    constants depend only on graph structure and are not differentiated.
    """
    tensors, hs, final, pooled, s_mid, s_G = cache
    d = params.dim
    grads = {}
    d_s = d_g[:d] * (s_G > 0)
    d_final = np.zeros_like(final)
    d_final[tensors.premise_row] += d_g[d:2 * d]
    d_final[tensors.hypothesis_row] += d_g[2 * d:]

    if params.post_linear_position == NODES:
        grads["readout"] = np.outer(pooled, d_s)
        d_pooled = params.readout_weight @ d_s
        d_final += d_pooled[None, :]
        d_q = d_final * (final > 0)
        grads["post_linear"] = hs[-1].T @ d_q
        d_h = d_q @ params.post_linear.T
    else:
        grads["post_linear"] = np.outer(s_mid, d_s)
        d_mid = (params.post_linear @ d_s) * (s_mid > 0)
        grads["readout"] = np.outer(pooled, d_mid)
        d_final += (params.readout_weight @ d_mid)[None, :]
        d_h = d_final

    for i in range(len(params.layers) - 1, -1, -1):
        layer = params.layers[i]
        h_in, h_out = hs[i], hs[i + 1]
        d_z = d_h * (h_out > 0)
        d_prev = np.zeros_like(h_in)
        for r in sorted(layer.weights):
            a_t = tensors.adjacency_t.get(r)
            if a_t is None or not a_t.nnz:
                grads[f"layer{i}.{r}"] = np.zeros_like(layer.weights[r])
                continue
            m = a_t @ d_z
            grads[f"layer{i}.{r}"] = h_in.T @ m
            d_prev += m @ layer.weights[r].T
        d_h = d_prev
    return grads


def encode_subgraph(params: EncoderParams, subgraph: ContextualSubgraph, table: EmbeddingTable) -> GraphEncoding:
    """Encode an augmented subgraph into ``[s_G; h_p; h_h]``."""
    edge_types = tuple(params.layers[0].weights)
    g_out, _ = encoder_forward(params, prepare_subgraph(subgraph, table, edge_types))
    d = params.dim
    return GraphEncoding(g_out[:d], g_out[d:2 * d], g_out[2 * d:])
