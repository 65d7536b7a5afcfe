import json

import numpy as np
import pytest

from kes.data import load_dataset
from kes.kg_store import load_embeddings
from kes.model import ClassifierParams, ModelParams, PreparedExample, init_model
from kes.subgraph import PprConfig, parse_subgraph, serialize_subgraph
from kes.text_encoder import BaselineEncoderParams, WordEmbeddingTable
from kes.trainer import (Pipeline, TrainConfig, evaluate, history_report, predict_scores, sweep_thetas, train,
                         write_history)

from conftest import FIXTURE_HYPOTHESIS, FIXTURE_PREMISE


def text_only(dim, num_classes, seed=0):
    return init_model(dim, dim, dim, dim, dim, num_classes=num_classes, seed=seed, use_graph=False)


def separable_set(n, dim, rng, margin=0.5):
    """Two classes split by a random hyperplane with a gap."""
    w = rng.normal(size=dim)
    out = []
    while len(out) < n:
        x = rng.normal(size=dim)
        s = x @ w / np.linalg.norm(w)
        if abs(s) >= margin:
            out.append(PreparedExample(x, None, int(s > 0)))
    return out


def noise_set(n, dim, num_classes, rng):
    return [PreparedExample(rng.normal(size=dim), None, i % num_classes) for i in range(n)]


def test_default_config_matches_protocol():
    cfg = TrainConfig()
    assert (cfg.epochs, cfg.patience, cfg.batch_size, cfg.learning_rate) == (140, 20, 64, 1e-4)
    with pytest.raises(ValueError):
        TrainConfig(batch_size=0)
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=0.0)


def test_patience_zero_stops_after_first_non_improving_epoch():
    rng = np.random.default_rng(0)
    data = noise_set(30, 8, 3, rng)
    result = train(text_only(4, 3), data[:20], data[20:], TrainConfig(epochs=50, patience=0, batch_size=8))
    accs = [h["dev_acc"] for h in result.history]
    best = accs[0]
    for a in accs[1:-1]:
        assert a > best
        best = a
    assert len(accs) == 1 or accs[-1] <= best
    assert len(accs) < 50


def test_separable_set_reaches_95_percent():
    rng = np.random.default_rng(1)
    data = separable_set(300, 16, rng)
    params = init_model(8, 8, 8, 8, 16, num_classes=2, seed=1, use_graph=False)
    result = train(params, data[:240], data[240:], TrainConfig(epochs=100, patience=100, batch_size=32,
                                                                 learning_rate=1e-2))
    assert evaluate(result.params, data[:240]).accuracy >= 0.95


def test_same_seed_identical_history():
    rng = np.random.default_rng(2)
    data = noise_set(40, 8, 3, rng)
    cfg = TrainConfig(epochs=5, patience=5, batch_size=7, seed=3)
    a = train(text_only(4, 3), data[:30], data[30:], cfg)
    b = train(text_only(4, 3), data[:30], data[30:], cfg)
    assert a.history == b.history
    for k, v in a.params.named_tensors().items():
        np.testing.assert_array_equal(v, b.params.named_tensors()[k])


def test_input_parameters_untouched():
    rng = np.random.default_rng(4)
    data = noise_set(20, 8, 3, rng)
    params = text_only(4, 3)
    before = {k: v.copy() for k, v in params.named_tensors().items()}
    train(params, data[:10], data[10:], TrainConfig(epochs=2, learning_rate=0.1))
    for k, v in params.named_tensors().items():
        np.testing.assert_array_equal(v, before[k])


def test_returns_best_dev_epoch():
    rng = np.random.default_rng(5)
    data = separable_set(120, 8, rng, margin=0.1)
    params = init_model(4, 4, 4, 4, 8, num_classes=2, seed=5, use_graph=False)
    result = train(params, data[:60], data[60:], TrainConfig(epochs=30, patience=30, batch_size=8,
                                                               learning_rate=0.05))
    accs = [h["dev_acc"] for h in result.history]
    assert result.best_dev_accuracy == max(accs)
    assert result.best_epoch == accs.index(max(accs)) + 1
    # returned parameters reproduce the best dev accuracy
    assert evaluate(result.params, data[60:]).accuracy == result.best_dev_accuracy
    assert all(result.best_dev_accuracy >= a for a in accs)


def test_empty_sets_rejected():
    with pytest.raises(ValueError):
        train(text_only(4, 3), [], [PreparedExample(np.zeros(8), None, 0)])
    with pytest.raises(ValueError):
        evaluate(text_only(4, 3), [])


def identity_model(num_classes):
    """Text-only model whose scores equal the pooled vector's first C entries."""
    eye = np.eye(num_classes)
    return ModelParams(BaselineEncoderParams(eye.copy()), None, ClassifierParams(eye.copy(), eye.copy()))


def test_all_correct_set():
    data = [PreparedExample(np.eye(3)[i % 3] * 2.0, None, i % 3) for i in range(9)]
    result = evaluate(identity_model(3), data)
    assert result.accuracy == 1.0
    np.testing.assert_array_equal(result.confusion, np.diag([3, 3, 3]))


def test_random_model_near_chance():
    rng = np.random.default_rng(6)
    data = noise_set(900, 8, 3, rng)
    acc = evaluate(text_only(4, 3, seed=7), data).accuracy
    sigma = np.sqrt(1 / 3 * 2 / 3 / len(data))
    assert abs(acc - 1 / 3) < 4 * sigma


def test_accuracy_recount():
    rng = np.random.default_rng(8)
    data = noise_set(101, 8, 3, rng)
    params = text_only(4, 3, seed=9)
    result = evaluate(params, data)
    correct = 0
    for ex in data:
        scores = predict_scores(params, ex)
        correct += int(max(range(3), key=lambda i: scores[i]) == ex.label)
    assert result.accuracy == correct / len(data)
    assert result.confusion.sum() == len(data)
    assert evaluate(params, data, jobs=4).accuracy == result.accuracy


@pytest.fixture
def pipeline(fixture_graph):
    return Pipeline(fixture_graph, load_embeddings(None, fixture_graph, 6, 0), WordEmbeddingTable(6, 0))


def test_pipeline_disk_cache(fixture_graph, tmp_path):
    pipe = Pipeline(fixture_graph, load_embeddings(None, fixture_graph, 6, 0), WordEmbeddingTable(6, 0),
                    cache_dir=tmp_path)
    sub = pipe.subgraph(FIXTURE_PREMISE, FIXTURE_HYPOTHESIS)
    files = list(tmp_path.glob("*.subgraph"))
    assert len(files) == 1
    assert files[0].read_text() == serialize_subgraph(sub)
    fresh = Pipeline(fixture_graph, pipe.node_table, pipe.word_table, cache_dir=tmp_path)
    assert fresh.subgraph(FIXTURE_PREMISE, FIXTURE_HYPOTHESIS) == parse_subgraph(files[0].read_text())
    # a different theta is a different cache entry
    fresh.with_theta(0.8).subgraph(FIXTURE_PREMISE, FIXTURE_HYPOTHESIS)
    assert len(list(tmp_path.glob("*.subgraph"))) == 2


def test_pipeline_prepare_and_train(pipeline, data_dir, tmp_path):
    data = load_dataset(data_dir / "fixture_pairs.jsonl", 3)
    prepared = pipeline.prepare_all(data, 3)
    assert [ex.label for ex in prepared] == [0, 1, 2, 1]
    assert prepared[0].graph is not None
    params = init_model(6, 5, 6, 5, 5, seed=0)
    cfg = TrainConfig(epochs=3, batch_size=2)
    result = train(params, prepared, prepared, cfg)
    report = history_report(result, cfg)
    write_history(tmp_path / "h.json", report)
    loaded = json.loads((tmp_path / "h.json").read_text())
    assert loaded["config"]["epochs"] == 3
    assert set(loaded["history"][0]) == {"epoch", "train_loss", "train_acc", "dev_acc"}


def test_sweep_covers_grid(pipeline, data_dir):
    data = load_dataset(data_dir / "fixture_pairs.jsonl", 3)
    records = sweep_thetas(lambda: init_model(6, 4, 6, 4, 4, seed=0), pipeline, data, data,
                           TrainConfig(epochs=2))
    assert [r["theta"] for r in records] == [0.2, 0.4, 0.6, 0.8]


def test_pipeline_theta_changes_subgraph(pipeline):
    low = pipeline.subgraph(FIXTURE_PREMISE, FIXTURE_HYPOTHESIS)
    high = pipeline.with_theta(0.8).subgraph(FIXTURE_PREMISE, FIXTURE_HYPOTHESIS)
    assert set(high.nodes) < set(low.nodes)
    assert pipeline.ppr == PprConfig()
