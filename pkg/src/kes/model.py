"""The combined entailment model: text branch, graph branch and the
feedforward classifier over ``[t_out; g_out]``, with exact gradients and
an Adam optimizer."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from .rgcn import EncoderParams, SubgraphTensors, encoder_backward, encoder_forward, init_encoder, NODES
from .text_encoder import BaselineEncoderParams, init_text_encoder, text_backward, text_forward


@dataclass
class ClassifierParams:
    hidden: np.ndarray  # (K + 3d, H_f)
    output: np.ndarray  # (H_f, C)

    @property
    def in_width(self) -> int:
        return self.hidden.shape[0]

    @property
    def num_classes(self) -> int:
        return self.output.shape[1]


@dataclass
class ModelParams:
    """All trainable tensors. ``graph`` is None for a text-only model."""

    text: BaselineEncoderParams
    graph: EncoderParams | None
    classifier: ClassifierParams

    def __post_init__(self):
        width = self.text.out_width + (self.graph.out_width if self.graph is not None else 0)
        if width != self.classifier.in_width:
            raise ValueError(f"classifier input width {self.classifier.in_width} != K + 3d = {width}")
        if self.classifier.num_classes not in (2, 3):
            raise ValueError("number of classes must be 2 or 3")

    @property
    def num_classes(self) -> int:
        return self.classifier.num_classes

    @property
    def uses_graph(self) -> bool:
        return self.graph is not None

    def named_tensors(self) -> dict[str, np.ndarray]:
        """Name -> array view for every trainable tensor, in a fixed order."""
        out = {"text.projection": self.text.projection}
        if self.graph is not None:
            out.update({f"graph.{k}": v for k, v in self.graph.named_tensors().items()})
        out["classifier.hidden"] = self.classifier.hidden
        out["classifier.output"] = self.classifier.output
        return out

    def dims(self) -> dict:
        d = {
            "word_dim": self.text.word_dim,
            "text_dim": self.text.out_width,
            "hidden_dim": self.classifier.hidden.shape[1],
            "num_classes": self.num_classes,
            "use_graph": self.uses_graph,
        }
        if self.graph is not None:
            d.update(node_dim=self.graph.d_in, graph_dim=self.graph.dim,
                     num_layers=len(self.graph.layers),
                     edge_types=sorted(self.graph.layers[0].weights),
                     post_linear_position=self.graph.post_linear_position)
        return d

    def copy(self) -> "ModelParams":
        return copy.deepcopy(self)


def init_model(word_dim: int = 300, text_dim: int = 300, node_dim: int = 300, graph_dim: int = 300,
               hidden_dim: int = 300, num_classes: int = 3, seed: int = 0, use_graph: bool = True,
               num_layers: int = 1, post_linear_position: str = NODES) -> ModelParams:
    rng = np.random.default_rng(seed)
    text = init_text_encoder(word_dim, text_dim, rng)
    graph = init_encoder(node_dim, graph_dim, rng, num_layers,
                         post_linear_position=post_linear_position) if use_graph else None
    in_width = text_dim + (3 * graph_dim if use_graph else 0)

    def glorot(m, n):
        lim = np.sqrt(6.0 / (m + n))
        return rng.uniform(-lim, lim, size=(m, n))

    return ModelParams(text, graph, ClassifierParams(glorot(in_width, hidden_dim), glorot(hidden_dim, num_classes)))


def zeros_like(params: ModelParams) -> ModelParams:
    out = params.copy()
    for arr in out.named_tensors().values():
        arr[...] = 0.0
    return out


@dataclass
class PreparedExample:
    """Model-ready inputs: pooled word vectors, subgraph tensors, label."""

    pooled: np.ndarray
    graph: SubgraphTensors | None
    label: int | None = None


def forward(params: ModelParams, ex: PreparedExample):
    """Raw class scores and the cache needed by :func:`backward`."""
    t_out, t_cache = text_forward(params.text, ex.pooled)
    if params.graph is not None:
        g_out, g_cache = encoder_forward(params.graph, ex.graph)
        z = np.concatenate([t_out, g_out])
    else:
        g_cache = None
        z = t_out
    hidden = np.maximum(z @ params.classifier.hidden, 0.0)
    scores = hidden @ params.classifier.output
    return scores, (t_cache, g_cache, z, hidden)


def backward(params: ModelParams, cache, d_scores: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients for every tensor in :meth:`ModelParams.named_tensors`."""
    t_cache, g_cache, z, hidden = cache
    clf = params.classifier
    grads = {"classifier.output": np.outer(hidden, d_scores)}
    d_a = (clf.output @ d_scores) * (hidden > 0)
    grads["classifier.hidden"] = np.outer(z, d_a)
    d_z = clf.hidden @ d_a
    k = params.text.out_width
    grads["text.projection"] = text_backward(params.text, t_cache, d_z[:k])["projection"]
    if params.graph is not None:
        for name, g in encoder_backward(params.graph, g_cache, d_z[k:]).items():
            grads[f"graph.{name}"] = g
    return {name: grads[name] for name in params.named_tensors()}


def log_softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max()
    return shifted - np.log(np.exp(shifted).sum())


def softmax(scores: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(scores))


def loss(scores: np.ndarray, gold: int) -> float:
    """Softmax cross-entropy of ``scores`` against class index ``gold``."""
    if not 0 <= gold < len(scores):
        raise ValueError(f"gold class {gold} out of range for {len(scores)} classes")
    return float(-log_softmax(scores)[gold])


def loss_grad(scores: np.ndarray, gold: int) -> np.ndarray:
    g = softmax(scores)
    g[gold] -= 1.0
    return g


def loss_and_grads(params: ModelParams, ex: PreparedExample):
    scores, cache = forward(params, ex)
    return loss(scores, ex.label), scores, backward(params, cache, loss_grad(scores, ex.label))


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: ModelParams, grads: dict[str, np.ndarray], state: AdamState, lr: float) -> ModelParams:
    """One bias-corrected Adam update, applied in place."""
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for name, p in params.named_tensors().items():
        g = grads[name]
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape} for {name}")
        m = state.m.setdefault(name, np.zeros_like(p))
        v = state.v.setdefault(name, np.zeros_like(p))
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params
