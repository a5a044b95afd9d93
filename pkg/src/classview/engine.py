"""Engine orchestration: wires the model, the clustered store, the rebuild
policy, and the hybrid layer into four serving modes (eager/lazy, each with or
without the hybrid layer) over two storage backends.

One maintenance thread owns all mutation; every round publishes an immutable
snapshot that readers use without locks, so reads are linearizable against the
most recently published round. Updates arrive strictly in order, one round per
training example. Training examples are retained so the model can always be
retrained from scratch (which is also how deletions are honored).
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable

from . import store as storage
from .hybrid import HybridBuffer, hybrid_lookup, rebuild_hybrid
from .linear import (
    LinearModel,
    TrainConfig,
    TrainingExample,
    margin,
    model_from_bytes,
    model_to_bytes,
    sgd_step,
    train_full,
    zero_model,
)
from .policy import ReorgTrigger, lazy_waste
from .store import StoredModelState, UnknownEntity
from .vectors import HolderPair, SparseVector, conjugate


@dataclass
class EngineConfig:
    mode: str = "eager"  # eager | lazy
    hybrid: bool = False
    backend: str = "memory"  # memory | disk
    p: float = float("inf")  # Hölder exponent applied to model deltas
    train: TrainConfig = field(default_factory=TrainConfig)
    alpha: float = 1.0
    cost_mode: str = "proxy"  # proxy | wallclock
    buffer_size: int | None = None
    buffer_fraction: float | None = 0.01
    data_dir: str | None = None

    def __post_init__(self):
        if self.mode not in ("eager", "lazy"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.backend not in ("memory", "disk"):
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.cost_mode not in ("proxy", "wallclock"):
            raise ValueError(f"unknown cost mode {self.cost_mode!r}")
        if self.backend == "disk" and not self.data_dir:
            raise ValueError("disk backend requires data_dir")


@dataclass
class EngineStats:
    rounds: int = 0
    reorg_count: int = 0
    tuples_touched: int = 0
    band_fractions: list = field(default_factory=list)
    disk_accesses: int = 0
    op_latency: dict = field(default_factory=dict)  # op -> [count, total seconds]

    def timed(self, op: str, seconds: float) -> None:
        bucket = self.op_latency.setdefault(op, [0, 0.0])
        bucket[0] += 1
        bucket[1] += seconds


@dataclass(frozen=True)
class Snapshot:
    """One published round: everything a reader needs, immutable by convention."""

    round: int
    model: LinearModel
    store: object
    state: StoredModelState
    view: dict
    eps_map: dict | None
    buffer: HybridBuffer | None


class Engine:
    """Maintains classifier output over an entity set as examples stream in."""

    def __init__(self, entities: Iterable[tuple[object, SparseVector]], config: EngineConfig):
        self.config = config
        self.holder = conjugate(config.p)
        entities = list(entities)
        self.model = zero_model(max((f.dimension for _, f in entities), default=1))
        started = time.perf_counter()
        store_dir = os.path.join(config.data_dir, "store") if config.data_dir else None
        self.store, self.state, self.view = storage.build(
            entities, self.model, self.holder, backend=config.backend, data_dir=store_dir
        )
        build_seconds = time.perf_counter() - started
        self.stats = EngineStats()
        self.examples: list[TrainingExample] = []
        self.trigger = ReorgTrigger(
            reorg_cost=1.0 if config.cost_mode == "proxy" else max(build_seconds, 1e-9),
            alpha=config.alpha,
        )
        self.eps_map: dict | None = None
        self.buffer: HybridBuffer | None = None
        if config.hybrid:
            self.eps_map, self.buffer = rebuild_hybrid(self.store, self._buffer_capacity())
        self._snapshot: Snapshot | None = None
        self._publish()

    # -- plumbing ------------------------------------------------------------

    def _buffer_capacity(self) -> int:
        if self.config.buffer_size is not None:
            return self.config.buffer_size
        frac = self.config.buffer_fraction or 0.0
        return int(len(self.store) * frac)

    def _publish(self) -> None:
        self._snapshot = Snapshot(
            round=self.model.round,
            model=self.model,
            store=self.store,
            state=self.state,
            view=self.view,
            eps_map=self.eps_map,
            buffer=self.buffer,
        )

    def snapshot(self) -> Snapshot:
        """Most recently published round; safe to read from other threads."""
        return self._snapshot

    @property
    def entity_count(self) -> int:
        return len(self.store)

    def _reorganize(self, model: LinearModel) -> None:
        self.store, self.state, self.view, seconds = storage.reorganize(
            self.store, self.state, self.view, model
        )
        measured = 1.0 if self.config.cost_mode == "proxy" else max(seconds, 1e-9)
        self.trigger.reorganized(measured)
        self.stats.reorg_count += 1
        self.stats.tuples_touched += len(self.store)
        self.stats.band_fractions.append(1.0)
        if self.config.hybrid:
            self.eps_map, self.buffer = rebuild_hybrid(self.store, self._buffer_capacity())

    # -- the three workload operations ----------------------------------------

    def add_training_example(self, ex: TrainingExample) -> None:
        """One round: advance the model, then maintain the view per the mode.

        Eager rounds either relabel the water band or, when the accumulated
        waste has reached its threshold, rebuild the clustering; the choice is
        exclusive. Lazy rounds only advance the model and the water bounds.
        """
        if ex.y not in (-1, 1):
            raise ValueError(f"label must be -1 or +1, got {ex.y}")
        self.model = sgd_step(self.model, ex, self.config.train)
        self.examples.append(ex)
        self.stats.rounds += 1
        self.state = storage.update_waters(self.state, self.model)
        if self.config.mode == "eager":
            if self.trigger.should_reorganize():
                self._reorganize(self.model)
            else:
                started = time.perf_counter()
                self.view, _, touched = storage.incremental_step(
                    self.store, self.state, self.view, self.model
                )
                seconds = time.perf_counter() - started
                total = max(len(self.store), 1)
                cost = touched / total if self.config.cost_mode == "proxy" else seconds
                self.trigger.observe_cost(cost)
                self.stats.tuples_touched += touched
                self.stats.band_fractions.append(touched / total)
        self._publish()

    def insert_entity(self, entity_id, f: SparseVector) -> None:
        """Admit a new entity: clustered under the stored model, labeled fresh."""
        self.state, self.view = storage.insert_entity(
            self.store, self.state, self.view, entity_id, f, self.model
        )
        if self.config.hybrid:
            # margin map covers every stored id; the buffer stays fixed
            self.eps_map[entity_id] = self.store.record(entity_id).eps
        self._publish()

    def query_single(self, entity_id) -> int:
        snap = self.snapshot()
        started = time.perf_counter()
        try:
            if self.config.hybrid:
                return hybrid_lookup(
                    entity_id,
                    snap.eps_map,
                    snap.state,
                    snap.buffer,
                    snap.store,
                    snap.model,
                    stats=self.stats,
                )
            if self.config.mode == "eager":
                return storage.single_entity_eager(snap.view, entity_id)
            return storage.single_entity_lazy(snap.store, snap.model, entity_id)
        finally:
            self.stats.timed("single", time.perf_counter() - started)

    def query_all_members(self) -> set:
        snap = self.snapshot()
        started = time.perf_counter()
        if self.config.mode == "eager":
            members = storage.all_members_eager(snap.view)
            self.stats.timed("members", time.perf_counter() - started)
            return members
        # lazy: the scan waste feeds the rebuild trigger; a rebuild round
        # accumulates nothing (the post-rebuild scan is tight by construction)
        if self.trigger.should_reorganize():
            self._reorganize(self.model)
            self._publish()
            snap = self.snapshot()
        scan_started = time.perf_counter()
        members, n_read, n_plus = storage.all_members_lazy(snap.store, snap.state, snap.model)
        scan_seconds = time.perf_counter() - scan_started
        if self.config.cost_mode == "proxy":
            read_cost = n_read / max(len(snap.store), 1)
        else:
            read_cost = scan_seconds
        self.trigger.observe_cost(lazy_waste(n_read, n_plus, read_cost))
        self.stats.timed("members", time.perf_counter() - started)
        return members

    def full_retrain(self, epochs: int = 5, seed: int = 0) -> None:
        """Retrain from the retained examples and rebuild the clustering."""
        if not self.examples:
            raise ValueError("no retained training examples to retrain from")
        model = train_full(self.examples, self.config.train, epochs=epochs, seed=seed)
        self.model = replace(model, round=self.model.round + 1)
        self._reorganize(self.model)
        self._publish()

    def remove_training_example(self, example_id) -> int:
        """Drop retained examples by id; takes effect at the next full retrain."""
        before = len(self.examples)
        self.examples = [ex for ex in self.examples if ex.id != example_id]
        return before - len(self.examples)

    def margin_of(self, entity_id) -> float:
        """Fresh margin of a stored entity under the current model."""
        snap = self.snapshot()
        return margin(snap.model, snap.store.record(entity_id).f)

    # -- persistence -----------------------------------------------------------

    def save(self, directory: str) -> None:
        """Persist everything needed to resume: config, entities, examples,
        models, and the drift/trigger scalars. Labels are never persisted; they
        are a function of the stored margins and the current model."""
        os.makedirs(directory, exist_ok=True)
        cfg = asdict(self.config)
        cfg["p"] = repr(self.config.p)
        with open(os.path.join(directory, "config.json"), "w") as fh:
            json.dump(cfg, fh, indent=1)
        with open(os.path.join(directory, "entities.jsonl"), "w") as fh:
            for rec in self.store.records():
                fh.write(_entity_line(rec.id, rec.f))
        with open(os.path.join(directory, "examples.jsonl"), "w") as fh:
            for ex in self.examples:
                fh.write(_example_line(ex))
        with open(os.path.join(directory, "stored_model.bin"), "wb") as fh:
            fh.write(model_to_bytes(self.state.stored_model))
        with open(os.path.join(directory, "current_model.bin"), "wb") as fh:
            fh.write(model_to_bytes(self.model))
        state = {
            "round": self.model.round,
            "last_round": self.state.last_round,
            "low_water": self.state.low_water,
            "high_water": self.state.high_water,
            "max_norm": self.state.max_norm,
            "train_step_count": self.config.train.step_count,
            "trigger": {
                "accumulated": self.trigger.accumulated,
                "reorg_cost": self.trigger.reorg_cost,
                "alpha": self.trigger.alpha,
                "scan_ratio": self.trigger.scan_ratio,
            },
        }
        with open(os.path.join(directory, "state.json"), "w") as fh:
            json.dump(state, fh, indent=1)

    @classmethod
    def load(cls, directory: str) -> "Engine":
        with open(os.path.join(directory, "config.json")) as fh:
            raw = json.load(fh)
        raw["p"] = float(raw["p"])
        if raw.get("backend") == "disk":
            raw["data_dir"] = directory  # the store travels with the engine directory
        train = TrainConfig(**raw.pop("train"))
        config = EngineConfig(train=train, **raw)
        entities = []
        with open(os.path.join(directory, "entities.jsonl")) as fh:
            for line in fh:
                entity_id, f = _parse_entity_line(line)
                entities.append((entity_id, f))
        with open(os.path.join(directory, "stored_model.bin"), "rb") as fh:
            stored_model = model_from_bytes(fh.read())
        with open(os.path.join(directory, "current_model.bin"), "rb") as fh:
            current_model = model_from_bytes(fh.read())
        with open(os.path.join(directory, "state.json")) as fh:
            state = json.load(fh)
        engine = cls.__new__(cls)
        engine.config = config
        engine.holder = conjugate(config.p)
        store_dir = os.path.join(config.data_dir, "store") if config.data_dir else None
        if config.backend == "disk":
            engine.store = storage.DiskStore(store_dir)
            # stored margins come from the segment itself
            engine.state = StoredModelState(
                stored_model=stored_model,
                max_norm=state["max_norm"],
                holder=engine.holder,
                low_water=state["low_water"],
                high_water=state["high_water"],
                last_round=state["last_round"],
            )
        else:
            engine.store, engine.state, _ = storage.build(
                entities, stored_model, engine.holder, backend="memory"
            )
            engine.state = replace(
                engine.state,
                max_norm=state["max_norm"],
                low_water=state["low_water"],
                high_water=state["high_water"],
                last_round=state["last_round"],
            )
        engine.model = current_model
        engine.config.train.step_count = state["train_step_count"]
        # labels outside the band are the rebuild-time signs; the band is
        # relabeled under the current model, which reconstructs the view exactly
        engine.view = {r.id: (1 if r.eps >= 0.0 else -1) for r in engine.store.records()}
        if config.mode == "eager" and current_model.round > stored_model.round:
            engine.view, _, _ = storage.incremental_step(
                engine.store, engine.state, engine.view, current_model
            )
        engine.examples = []
        with open(os.path.join(directory, "examples.jsonl")) as fh:
            for line in fh:
                engine.examples.append(_parse_example_line(line))
        trig = state["trigger"]
        engine.trigger = ReorgTrigger(
            reorg_cost=trig["reorg_cost"],
            alpha=trig["alpha"],
            scan_ratio=trig["scan_ratio"],
            accumulated=trig["accumulated"],
        )
        engine.stats = EngineStats()
        engine.eps_map = None
        engine.buffer = None
        if config.hybrid:
            engine.eps_map, engine.buffer = rebuild_hybrid(engine.store, engine._buffer_capacity())
        engine._snapshot = None
        engine._publish()
        return engine


def _entity_line(entity_id, f: SparseVector) -> str:
    return (
        json.dumps(
            {
                "id": entity_id,
                "dim": f.dimension,
                "idx": [i for i, _ in f.entries],
                "val": [v for _, v in f.entries],
            }
        )
        + "\n"
    )


def _parse_entity_line(line: str):
    obj = json.loads(line)
    f = SparseVector(list(zip(obj["idx"], obj["val"])), obj["dim"])
    return obj["id"], f


def _example_line(ex: TrainingExample) -> str:
    return (
        json.dumps(
            {
                "id": ex.id,
                "y": ex.y,
                "dim": ex.f.dimension,
                "idx": [i for i, _ in ex.f.entries],
                "val": [v for _, v in ex.f.entries],
            }
        )
        + "\n"
    )


def _parse_example_line(line: str) -> TrainingExample:
    obj = json.loads(line)
    f = SparseVector(list(zip(obj["idx"], obj["val"])), obj["dim"])
    return TrainingExample(obj["id"], f, obj["y"])
