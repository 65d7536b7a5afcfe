"""Entailment examples and JSON-lines dataset files."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable

LABELS_3 = ("entails", "neutral", "contradicts")
LABELS_2 = ("entails", "neutral")


def label_set(num_classes: int) -> tuple[str, ...]:
    if num_classes == 3:
        return LABELS_3
    if num_classes == 2:
        return LABELS_2
    raise ValueError(f"num_classes must be 2 or 3, got {num_classes}")


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class Example:
    premise: str
    hypothesis: str
    gold_label: str


def label_index(example: Example, num_classes: int, where: str = "") -> int:
    labels = label_set(num_classes)
    try:
        return labels.index(example.gold_label)
    except ValueError:
        raise DataError(f"{where or 'example'}: unknown label {example.gold_label!r}, "
                        f"expected one of {labels}") from None


def load_dataset(path, num_classes: int | None = None) -> list[Example]:
    """Read one JSON object per line with ``premise``, ``hypothesis`` and
    ``gold_label`` fields. Labels are checked when ``num_classes`` is given."""
    examples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                ex = Example(str(rec["premise"]), str(rec["hypothesis"]), str(rec["gold_label"]))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise DataError(f"{path}:{lineno}: bad record ({exc})") from None
            if num_classes is not None:
                label_index(ex, num_classes, f"{path}:{lineno}")
            examples.append(ex)
    return examples


def save_dataset(path, examples: Iterable[Example]) -> None:
    with open(Path(path), "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(json.dumps(asdict(ex), ensure_ascii=False) + "\n")
