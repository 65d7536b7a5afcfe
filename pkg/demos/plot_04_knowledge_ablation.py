"""
What the graph branch adds
==========================

A synthetic corpus where the label says only whether the premise concept
and the hypothesis concept are neighbors in the knowledge graph. Concept
names are random pseudo-words, so the text model has nothing to go on for
unseen pairs while the graph model can see the connecting edge.

Widths are reduced here to keep the run short; the acceptance suite uses
the full 300-dimensional setting.
"""

from kes.kg_store import load_embeddings
from kes.model import init_model
from kes.synthetic import make_connection_corpus
from kes.text_encoder import WordEmbeddingTable
from kes.trainer import Pipeline, TrainConfig, evaluate, train

corpus = make_connection_corpus(seed=0)
print(corpus.train[0])

d = 64
pipe = Pipeline(corpus.graph, load_embeddings(None, corpus.graph, d, 0), WordEmbeddingTable(d, 0))
cfg = TrainConfig(epochs=60, patience=20, learning_rate=1e-3)

for use_graph in (True, False):
    train_set, dev_set, test_set = (pipe.prepare_all(s, 2, use_graph) for s in (corpus.train, corpus.dev, corpus.test))
    params = init_model(d, d, d, d, d, num_classes=2, seed=0, use_graph=use_graph)
    result = train(params, train_set, dev_set, cfg)
    name = "with graph" if use_graph else "text only"
    print(f"{name:10s} best epoch {result.best_epoch:3d}  test accuracy {evaluate(result.params, test_set).accuracy:.3f}")
