"""
Contextual subgraph of a premise/hypothesis pair
================================================

Link the concepts mentioned in both sentences, expand one hop in the
knowledge graph, score the expansion with Personalized PageRank and keep
the nodes above a threshold.
"""

# a toy knowledge graph given as labeled triples
from kes.kg_store import KnowledgeGraph
graph = KnowledgeGraph.from_labeled_triples([
    ("girl", "IsA", "child"), ("small_children", "IsA", "child"), ("girl", "RelatedTo", "play"),
    ("play", "RelatedTo", "toy"), ("beach", "HasA", "sand"), ("beach", "AtLocation", "ocean"),
    ("ocean", "HasA", "water"), ("sand", "RelatedTo", "sun"), ("child", "AtLocation", "park"),
])
print(graph.summary())

premise = "A girl is at the beach."
hypothesis = "Small children play in the sand."

# concept mentions: leftmost-longest matching, stop-listed single words skipped
from kes.linker import link_concepts, tokenize
for m in link_concepts(tokenize(hypothesis), graph):
    print(m.start, m.end, graph.label(m.concept))

# one subgraph per threshold; higher thresholds keep fewer non-seed nodes
from kes.subgraph import PprConfig, extract_contextual_subgraph, serialize_subgraph
for theta in (0.2, 0.4, 0.6, 0.8):
    sub = extract_contextual_subgraph(graph, premise, hypothesis, PprConfig(theta=theta))
    kept = sorted(graph.label(n) for n in sub.nodes if n >= 0)
    print(theta, kept)

# the text form used by the command line tool
print(serialize_subgraph(extract_contextual_subgraph(graph, premise, hypothesis)))
