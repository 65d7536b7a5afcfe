"""
Encoding a subgraph with a relational graph convolution
=======================================================

Node states start from concept embeddings, pass through one convolution
with a weight matrix per edge type, and are read out into a fixed-width
vector ``[graph summary; premise node; hypothesis node]``.
"""

import numpy as np

from kes.kg_store import KnowledgeGraph, load_embeddings
from kes.subgraph import extract_contextual_subgraph

graph = KnowledgeGraph.from_labeled_triples([
    ("girl", "IsA", "child"), ("girl", "RelatedTo", "play"), ("beach", "HasA", "sand"),
    ("small_children", "IsA", "child"),
])
sub = extract_contextual_subgraph(graph, "A girl is at the beach.", "Small children play in the sand.")
print(sub.num_nodes, "nodes,", len(sub.edges), "edges")

# without an embedding file every concept gets a deterministic hashed vector
d = 300
table = load_embeddings(None, graph, d, seed=0)

from kes.rgcn import encode_subgraph, init_encoder
params = init_encoder(d, d, np.random.default_rng(0))
enc = encode_subgraph(params, sub, table)
print(enc.g_out.shape)  # (900,)

# symmetric normalization of the kg edges: 1 / sqrt(deg(u) deg(v))
from kes.rgcn import normalized_adjacency
print(normalized_adjacency(sub, "kg").toarray().round(3))
