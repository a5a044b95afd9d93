"""One-vs-all multiclass classification built from one binary engine per label.

Every engine sees the identical entity set; an example with class L becomes a
positive example for engine L and a negative one for all others, applied
sequentially in fixed label order. Decoding takes the argmax of the engines'
fresh margins (ties go to the first label in order), so it never depends on
which serving mode the underlying engines use.
"""

from __future__ import annotations

import os
from dataclasses import replace
from typing import Iterable, Mapping, Sequence

from .engine import Engine, EngineConfig
from .linear import TrainingExample
from .vectors import SparseVector


class MulticlassView:
    def __init__(
        self,
        entities: Iterable[tuple[object, SparseVector]],
        labels: Sequence[str],
        config: EngineConfig,
    ):
        if len(labels) != len(set(labels)):
            raise ValueError("labels must be distinct")
        if not labels:
            raise ValueError("need at least one label")
        self.labels = tuple(labels)
        entities = list(entities)
        self.engines: dict[str, Engine] = {}
        for label in self.labels:
            cfg = replace(config)
            if config.data_dir:
                cfg = replace(config, data_dir=os.path.join(config.data_dir, f"label_{label}"))
            self.engines[label] = Engine(entities, cfg)
        self.update_invocations = 0
        self.last_update_invocations = 0

    def add_example(self, example_id, f: SparseVector, label: str) -> None:
        """Fan one labeled example out as K binary examples, in label order."""
        if label not in self.engines:
            raise ValueError(f"unknown label {label!r}")
        self.last_update_invocations = 0
        for lab in self.labels:
            y = 1 if lab == label else -1
            self.engines[lab].add_training_example(TrainingExample(example_id, f, y))
            self.last_update_invocations += 1
        self.update_invocations += self.last_update_invocations

    def classify(self, entity_id) -> str:
        """Label with the largest fresh margin; first label in order wins ties."""
        best_label = None
        best_margin = None
        for lab in self.labels:
            m = self.engines[lab].margin_of(entity_id)
            if best_margin is None or m > best_margin:
                best_label, best_margin = lab, m
        return best_label

    def margins(self, entity_id) -> dict[str, float]:
        return {lab: self.engines[lab].margin_of(entity_id) for lab in self.labels}


def coalesce_labels(label: str, groups: Mapping[str, str]) -> str:
    """Map fine-grained labels onto coarser groups; unmapped labels pass through."""
    return groups.get(label, label)


def read_label_file(path: str) -> tuple[str, ...]:
    """One label per line; order is significant and defines engine order."""
    with open(path) as fh:
        labels = [line.strip() for line in fh if line.strip()]
    return tuple(labels)


def write_label_file(path: str, labels: Sequence[str]) -> None:
    with open(path, "w") as fh:
        for label in labels:
            fh.write(label + "\n")
