"""Flat ``key = value`` run configuration.

Every key has a default. Blank lines and lines starting with ``#`` are
ignored. Sequences are comma-separated; booleans are ``true``/``false``;
an empty value means "unset" for optional paths.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

from .subgraph import THETA_GRID, PprConfig
from .trainer import TrainConfig


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    # paths
    kg_triples: str = ""
    kg_embeddings: str = ""
    word_embeddings: str = ""
    stoplist: str = ""
    train: str = ""
    dev: str = ""
    test: str = ""
    cache_dir: str = ""
    checkpoint_dir: str = "checkpoints"
    # linking and PPR
    max_len: int = 4
    alpha: float = 0.15
    tol: float = 1e-10
    max_iter: int = 1000
    theta: float = 0.2
    thetas: tuple = THETA_GRID
    # model
    node_dim: int = 300
    graph_dim: int = 300
    word_dim: int = 300
    text_dim: int = 300
    hidden_dim: int = 300
    num_classes: int = 3
    num_layers: int = 1
    post_linear_position: str = "nodes"
    use_graph: bool = True
    # training
    epochs: int = 140
    patience: int = 20
    batch_size: int = 64
    learning_rate: float = 1e-4
    seed: int = 0

    def ppr_config(self) -> PprConfig:
        return PprConfig(alpha=self.alpha, tol=self.tol, max_iter=self.max_iter, theta=self.theta)

    def train_config(self) -> TrainConfig:
        return TrainConfig(epochs=self.epochs, patience=self.patience, batch_size=self.batch_size,
                           learning_rate=self.learning_rate, theta=self.theta, seed=self.seed)

    def model_kwargs(self) -> dict:
        return dict(word_dim=self.word_dim, text_dim=self.text_dim, node_dim=self.node_dim,
                    graph_dim=self.graph_dim, hidden_dim=self.hidden_dim, num_classes=self.num_classes,
                    use_graph=self.use_graph, num_layers=self.num_layers,
                    post_linear_position=self.post_linear_position)

    def to_text(self) -> str:
        return "".join(f"{f.name} = {_format(getattr(self, f.name))}\n" for f in fields(self))

    def with_overrides(self, overrides: dict[str, str]) -> "RunConfig":
        return dataclasses.replace(self, **_parse_values(overrides))

    def validate(self) -> None:
        try:
            self.ppr_config()
            self.train_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.num_classes not in (2, 3):
            raise ConfigError("num_classes must be 2 or 3")
        for t in self.thetas:
            if not 0.0 <= t <= 1.0:
                raise ConfigError(f"theta {t} outside [0, 1]")
        if self.post_linear_position not in ("nodes", "readout"):
            raise ConfigError("post_linear_position must be 'nodes' or 'readout'")

    def require_paths(self, *keys: str) -> None:
        """Raise if any named path key is unset or does not exist."""
        for key in keys:
            value = getattr(self, key)
            if not value:
                raise ConfigError(f"config key {key!r} is required for this command")
            if not Path(value).exists():
                raise ConfigError(f"{key}: no such file: {value}")


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(repr(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _convert(key: str, raw: str):
    kind = _TYPES[key]
    raw = raw.strip()
    try:
        if kind == "bool":
            if raw.lower() not in ("true", "false"):
                raise ValueError(f"expected true/false, got {raw!r}")
            return raw.lower() == "true"
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "tuple":
            return tuple(float(x) for x in raw.split(",") if x.strip())
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {exc}") from None


def _parse_values(pairs: dict[str, str]) -> dict:
    out = {}
    for key, raw in pairs.items():
        if key not in _TYPES:
            raise ConfigError(f"unknown config key {key!r}")
        out[key] = _convert(key, raw)
    return out


def parse_config_text(text: str, source: str = "<config>") -> RunConfig:
    pairs = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        pairs[key.strip()] = value
    return RunConfig().with_overrides(pairs)


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"no such config file: {path}")
    cfg = parse_config_text(path.read_text(encoding="utf-8"), str(path))
    # relative paths in a config file resolve against the file's directory
    base = path.parent
    for key in ("kg_triples", "kg_embeddings", "word_embeddings", "stoplist", "train", "dev", "test",
                "cache_dir", "checkpoint_dir"):
        value = getattr(cfg, key)
        if value and not Path(value).is_absolute():
            setattr(cfg, key, str(base / value))
    return cfg
