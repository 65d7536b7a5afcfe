"""Example preparation, mini-batch training with early stopping, and
evaluation."""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .data import Example, label_index
from .kg_store import EmbeddingTable, KnowledgeGraph
from .linker import DEFAULT_MAX_LEN, tokenize
from .model import AdamState, ModelParams, PreparedExample, adam_step, forward, loss_and_grads
from .rgcn import prepare_subgraph
from .subgraph import (THETA_GRID, ContextualSubgraph, PprConfig, extract_contextual_subgraph,
                       parse_subgraph, serialize_subgraph)
from .text_encoder import WordEmbeddingTable, pooled_pair

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 140
    patience: int = 20
    batch_size: int = 64
    learning_rate: float = 1e-4
    theta: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.patience < 0:
            raise ValueError("epochs and batch_size must be >= 1, patience >= 0")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")


@dataclass
class Pipeline:
    """KG, embedding tables and extraction settings shared by all examples.

    Contextual subgraphs are memoized per text pair; with ``cache_dir`` set
    they are also stored on disk under a content hash of everything that
    determines them.
    """

    graph: KnowledgeGraph
    node_table: EmbeddingTable
    word_table: WordEmbeddingTable
    ppr: PprConfig = PprConfig()
    max_len: int = DEFAULT_MAX_LEN
    stoplist: frozenset | None = None
    cache_dir: Path | None = None
    _memo: dict = field(default_factory=dict, repr=False)
    _fingerprint: str | None = field(default=None, repr=False)

    def with_theta(self, theta: float) -> "Pipeline":
        return replace(self, ppr=replace(self.ppr, theta=theta), _memo={}, _fingerprint=self._fingerprint)

    def cache_key(self, premise: str, hypothesis: str) -> str:
        if self._fingerprint is None:
            self._fingerprint = self.graph.fingerprint()
        stop = "\n".join(sorted(self.stoplist)) if self.stoplist is not None else "<default>"
        payload = json.dumps([self._fingerprint, asdict(self.ppr), self.max_len, stop, premise, hypothesis])
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def subgraph(self, premise: str, hypothesis: str) -> ContextualSubgraph:
        key = (premise, hypothesis)
        sub = self._memo.get(key)
        if sub is not None:
            return sub
        path = None
        if self.cache_dir is not None:
            path = Path(self.cache_dir) / f"{self.cache_key(premise, hypothesis)}.subgraph"
            if path.exists():
                sub = parse_subgraph(path.read_text(encoding="utf-8"))
        if sub is None:
            sub = extract_contextual_subgraph(self.graph, premise, hypothesis, self.ppr,
                                              self.max_len, self.stoplist)
            if path is not None:
                path.parent.mkdir(parents=True, exist_ok=True)
                tmp = path.with_suffix(".tmp")
                tmp.write_text(serialize_subgraph(sub), encoding="utf-8")
                tmp.replace(path)
        self._memo[key] = sub
        return sub

    def prepare(self, example: Example, num_classes: int | None = None, use_graph: bool = True) -> PreparedExample:
        pooled = pooled_pair(tokenize(example.premise), tokenize(example.hypothesis), self.word_table)
        tensors = None
        if use_graph:
            tensors = prepare_subgraph(self.subgraph(example.premise, example.hypothesis), self.node_table)
        label = label_index(example, num_classes) if num_classes is not None else None
        return PreparedExample(pooled, tensors, label)

    def prepare_all(self, examples: Sequence[Example], num_classes: int | None = None,
                    use_graph: bool = True) -> list[PreparedExample]:
        return [self.prepare(ex, num_classes, use_graph) for ex in examples]


@dataclass
class EvalResult:
    accuracy: float
    confusion: np.ndarray  # rows: gold, columns: predicted
    predictions: list[int]

    def as_dict(self, labels=None) -> dict:
        out = {"accuracy": self.accuracy, "total": int(self.confusion.sum()),
               "correct": int(np.trace(self.confusion)), "confusion": self.confusion.tolist()}
        if labels is not None:
            out["labels"] = list(labels)
        return out


def predict_scores(params: ModelParams, ex: PreparedExample) -> np.ndarray:
    return forward(params, ex)[0]


def evaluate(params: ModelParams, dataset: Sequence[PreparedExample], jobs: int = 1) -> EvalResult:
    """Argmax accuracy and confusion counts over labeled examples."""
    if not dataset:
        raise ValueError("dataset is empty")
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            scores = list(pool.map(lambda ex: predict_scores(params, ex), dataset))
    else:
        scores = [predict_scores(params, ex) for ex in dataset]
    preds = [int(np.argmax(s)) for s in scores]
    c = params.num_classes
    confusion = np.zeros((c, c), dtype=np.int64)
    for ex, p in zip(dataset, preds):
        confusion[ex.label, p] += 1
    return EvalResult(float(np.trace(confusion) / len(dataset)), confusion, preds)


@dataclass
class TrainResult:
    params: ModelParams
    history: list[dict]
    best_epoch: int
    best_dev_accuracy: float
    stopped_early: bool


def batch_gradients(params: ModelParams, batch: Sequence[PreparedExample]):
    """Mean loss gradient over ``batch``, reduced in batch order."""
    total = None
    losses, correct = [], 0
    for ex in batch:
        loss, scores, grads = loss_and_grads(params, ex)
        losses.append(loss)
        correct += int(np.argmax(scores)) == ex.label
        if total is None:
            total = grads
        else:
            for k in total:
                total[k] += grads[k]
    n = len(batch)
    return {k: g / n for k, g in total.items()}, losses, correct


def train(params: ModelParams, train_set: Sequence[PreparedExample], dev_set: Sequence[PreparedExample],
          cfg: TrainConfig = TrainConfig(), on_epoch: Callable[[dict], None] | None = None) -> TrainResult:
    """Adam mini-batch training; keeps the parameters of the best dev epoch.

    Stops once dev accuracy has failed to improve on the best so far for
    ``cfg.patience`` consecutive epochs (a single epoch when patience is 0).
    """
    if not train_set or not dev_set:
        raise ValueError("train and dev sets must be nonempty")
    params = params.copy()
    rng = np.random.default_rng(cfg.seed)
    state = AdamState()
    history = []
    best = (-1.0, 0, params.copy())
    wait = 0
    stopped_early = False
    n = len(train_set)
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        losses, correct = [], 0
        for start in range(0, n, cfg.batch_size):
            batch = [train_set[i] for i in order[start:start + cfg.batch_size]]
            grads, batch_losses, batch_correct = batch_gradients(params, batch)
            adam_step(params, grads, state, cfg.learning_rate)
            losses.extend(batch_losses)
            correct += batch_correct
        dev_acc = evaluate(params, dev_set).accuracy
        record = {"epoch": epoch, "train_loss": float(np.mean(losses)),
                  "train_acc": correct / n, "dev_acc": dev_acc}
        history.append(record)
        if on_epoch is not None:
            on_epoch(record)
        logger.info("epoch %d loss %.4f train %.4f dev %.4f", epoch, record["train_loss"],
                    record["train_acc"], dev_acc)
        if dev_acc > best[0]:
            best = (dev_acc, epoch, params.copy())
            wait = 0
        else:
            wait += 1
            if wait >= max(cfg.patience, 1):
                stopped_early = epoch < cfg.epochs
                break
    return TrainResult(best[2], history, best[1], best[0], stopped_early)


def history_report(result: TrainResult, cfg: TrainConfig, extra: dict | None = None) -> dict:
    report = {"config": asdict(cfg), "best_epoch": result.best_epoch,
              "best_dev_acc": result.best_dev_accuracy, "stopped_early": result.stopped_early,
              "epochs_run": len(result.history), "history": result.history}
    if extra:
        report.update(extra)
    return report


def write_history(path, report: dict) -> None:
    Path(path).write_text(json.dumps(report, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def sweep_thetas(make_params: Callable[[], ModelParams], pipeline: Pipeline, train_examples, dev_examples,
                 cfg: TrainConfig = TrainConfig(), thetas=THETA_GRID) -> list[dict]:
    """Train one model per threshold; each record carries the best dev accuracy."""
    records = []
    for theta in thetas:
        pipe = pipeline.with_theta(theta)
        params = make_params()
        c = params.num_classes
        result = train(params, pipe.prepare_all(train_examples, c), pipe.prepare_all(dev_examples, c),
                       replace(cfg, theta=theta))
        records.append({"theta": theta, "best_dev_acc": result.best_dev_accuracy,
                        "best_epoch": result.best_epoch, "epochs_run": len(result.history)})
    return records
