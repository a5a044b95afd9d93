"""Command-line driver: data ingestion, engine lifecycle, the three workloads
as benchmark drivers, and reorganization-policy simulations.

Subcommands: load, update, query, members, retrain, bench, gen, simulate.
Configuration comes from a flat key=value file plus flag overrides; every
bench run writes its raw event log before the summary CSV so a crash still
leaves evidence. Exit code 0 on success, 1 on error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import threading
import time

import numpy as np

from .datasets import (
    ADULT_STYLE,
    MAGIC_STYLE,
    SyntheticSpec,
    load_dataset,
    parse_sparse_line,
    synthetic_examples,
    synthetic_stream,
    write_sparse_dataset,
)
from .engine import Engine, EngineConfig
from .features import Vocabulary, tf_features, tfidf_features, tfidf_stats
from .linear import TrainConfig, TrainingExample
from .simulator import (
    adversarial_family,
    measured_ratio,
    nonmonotone_demo,
    opt_schedule,
    random_monotone_costs,
    run_always,
    run_never,
    run_threshold,
)
from .store import UnknownEntity
from .vectors import SparseVector

CONFIG_KEYS = {
    "mode": str,
    "backend": str,
    "hybrid": lambda v: v.lower() in ("1", "true", "yes"),
    "p": float,
    "alpha": float,
    "cost_mode": str,
    "buffer_size": int,
    "buffer_fraction": float,
    "loss": str,
    "lam": float,
    "eta0": float,
}


def read_config_file(path: str) -> dict:
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, val = (part.strip() for part in line.split("=", 1))
            if key not in CONFIG_KEYS:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            out[key] = CONFIG_KEYS[key](val)
    return out


def build_engine_config(args, data_dir: str | None) -> EngineConfig:
    values: dict = {}
    if getattr(args, "config", None):
        values.update(read_config_file(args.config))
    for key in CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    train = TrainConfig(
        loss=values.pop("loss", "hinge"),
        lam=values.pop("lam", 1e-4),
        eta0=values.pop("eta0", 0.1),
    )
    return EngineConfig(train=train, data_dir=data_dir, **values)


def _log_event(directory: str, line: str) -> None:
    with open(os.path.join(directory, "events.log"), "a") as fh:
        fh.write(line + "\n")


def featurize_rows(rows, kind: str):
    """Turn (label, payload) rows into (label, SparseVector) pairs."""
    if all(isinstance(payload, SparseVector) for _, payload in rows):
        return rows
    texts = [payload for _, payload in rows]
    if kind == "tfidf":
        vocab = tfidf_stats(texts)
        return [(label, tfidf_features(vocab, text)) for (label, _), text in zip(rows, texts)]
    vocab = Vocabulary()
    feats = [tf_features(vocab, text) for text in texts]
    # re-dimension to the final vocabulary high-water mark
    dim = vocab.dimension
    feats = [SparseVector(f.entries, dim) for f in feats]
    return [(label, f) for (label, _), f in zip(rows, feats)]


# ---------------------------------------------------------------------------
# Subcommands


def cmd_load(args) -> int:
    rows = load_dataset(args.entities)
    rows = featurize_rows(rows, args.features)
    entities = [(k, f) for k, (_, f) in enumerate(rows)]
    config = build_engine_config(args, data_dir=args.dir)
    os.makedirs(args.dir, exist_ok=True)
    engine = Engine(entities, config)
    engine.save(args.dir)
    _log_event(args.dir, f"load entities={len(entities)} features={args.features}")
    print(f"loaded {len(entities)} entities into {args.dir}")
    return 0


def _parse_update(text: str) -> TrainingExample:
    label, f = parse_sparse_line(text)
    y = int(label)
    return TrainingExample(f"cli{time.time_ns()}", f, y)


def cmd_update(args) -> int:
    engine = Engine.load(args.dir)
    updates = []
    if args.example:
        updates.append(_parse_update(args.example))
    if args.file:
        with open(args.file) as fh:
            for line in fh:
                if line.strip():
                    updates.append(_parse_update(line))
    if not updates:
        print("nothing to apply; pass --example or --file", file=sys.stderr)
        return 1
    for ex in updates:
        engine.add_training_example(ex)
        _log_event(args.dir, f"update id={ex.id} y={ex.y}")
    engine.save(args.dir)
    print(f"applied {len(updates)} updates; round={engine.model.round}")
    return 0


def cmd_query(args) -> int:
    engine = Engine.load(args.dir)
    try:
        label = engine.query_single(args.id)
    except UnknownEntity:
        print(f"unknown entity {args.id}", file=sys.stderr)
        return 1
    _log_event(args.dir, f"query id={args.id} label={label}")
    print(label)
    return 0


def cmd_members(args) -> int:
    engine = Engine.load(args.dir)
    members = sorted(engine.query_all_members(), key=repr)
    engine.save(args.dir)  # lazy scans move the policy accumulator
    _log_event(args.dir, f"members count={len(members)}")
    print(" ".join(str(m) for m in members))
    return 0


def cmd_retrain(args) -> int:
    engine = Engine.load(args.dir)
    engine.full_retrain(epochs=args.epochs, seed=args.seed)
    engine.save(args.dir)
    _log_event(args.dir, f"retrain epochs={args.epochs} seed={args.seed}")
    print(f"retrained; round={engine.model.round}")
    return 0


def cmd_gen(args) -> int:
    spec = {"synthetic": SyntheticSpec(), "adult": ADULT_STYLE, "magic": MAGIC_STYLE}[args.kind]
    examples = synthetic_examples(spec, args.count, args.seed)
    write_sparse_dataset(args.out, [(str(ex.y), ex.f) for ex in examples])
    print(f"wrote {args.count} records to {args.out}")
    return 0


def cmd_bench(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    entities, stream = synthetic_stream(
        args.entities, args.warmup + args.updates, seed=args.seed
    )
    combos = []
    for mode in args.modes.split(","):
        for backend in args.backends.split(","):
            for hybrid in (False, True) if args.hybrid == "both" else ((args.hybrid == "1"),):
                combos.append((mode.strip(), backend.strip(), hybrid))
    event_path = os.path.join(args.out, "bench_events.log")
    summary_path = os.path.join(args.out, "bench_summary.csv")
    rows = []
    with open(event_path, "w") as events:
        for mode, backend, hybrid in combos:
            tag = f"{mode}-{backend}{'-hybrid' if hybrid else ''}"
            data_dir = os.path.join(args.out, f"engine_{tag}") if backend == "disk" else None
            if data_dir:
                os.makedirs(data_dir, exist_ok=True)
            config = EngineConfig(
                mode=mode, backend=backend, hybrid=hybrid, data_dir=data_dir, cost_mode="proxy"
            )
            engine = Engine(entities, config)
            started = time.perf_counter()
            rng = np.random.default_rng(args.seed + 7)
            entity_ids = [eid for eid, _ in entities]
            reads_done = 0
            for step, ex in enumerate(stream):
                engine.add_training_example(ex)
                events.write(f"{tag} update {step} round={engine.model.round}\n")
                if step >= args.warmup and args.reads and step % max(1, len(stream) // args.reads) == 0:
                    eid = entity_ids[int(rng.integers(len(entity_ids)))]
                    label = engine.query_single(eid)
                    reads_done += 1
                    events.write(f"{tag} read id={eid} label={label}\n")
            if args.read_threads:
                _concurrent_reads(engine, entity_ids, args.read_threads, args.seed)
            elapsed = time.perf_counter() - started
            stats = engine.stats
            n = engine.entity_count
            post = stats.band_fractions[args.warmup :]
            rows.append(
                {
                    "config": tag,
                    "entities": n,
                    "updates": len(stream),
                    "reads": reads_done,
                    "reorg_count": stats.reorg_count,
                    "tuples_touched": stats.tuples_touched,
                    "naive_tuples_touched": len(stream) * n if mode == "eager" else 0,
                    "avg_band_fraction": sum(post) / len(post) if post else 0.0,
                    "disk_accesses": stats.disk_accesses,
                    "wallclock_s": round(elapsed, 4),
                }
            )
            events.write(f"{tag} done wallclock={elapsed:.4f}\n")
    with open(summary_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    print(summary_path)
    return 0


def _concurrent_reads(engine, entity_ids, n_threads: int, seed: int) -> None:
    """Exercise snapshot reads from multiple threads; raises on any failure."""
    errors = []

    def reader(tid: int):
        rng = np.random.default_rng(seed + tid)
        try:
            for _ in range(200):
                eid = entity_ids[int(rng.integers(len(entity_ids)))]
                label = engine.query_single(eid)
                if label not in (-1, 1):
                    raise AssertionError(f"bad label {label}")
        except Exception as exc:  # propagate to the main thread
            errors.append(exc)

    threads = [threading.Thread(target=reader, args=(t,)) for t in range(n_threads)]
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    if errors:
        raise errors[0]


def cmd_simulate(args) -> int:
    rng = np.random.default_rng(args.seed)
    if args.what == "bound":
        ratios = []
        for _ in range(args.trials):
            n = int(rng.integers(2, args.max_rounds + 1))
            sigma = float(rng.uniform(0.05, 1.0))
            costs = random_monotone_costs(n, reorg_cost=1.0, sigma=sigma, rng=rng)
            _, paid = run_threshold(costs)
            _, best = opt_schedule(costs)
            ratios.append(paid / best if best > 0 else 1.0)
        _write_histogram(args.out, ratios)
        print(f"{args.trials} trials, worst ratio {max(ratios):.4f} -> {args.out}")
        return 0
    if args.what == "adversary":
        family = adversarial_family(
            beta=1.0, sigma=0.0, eps=args.reorg_cost / 1000.0,
            horizon=args.horizon, reorg_cost=args.reorg_cost,
        )
        for name, strat in (
            ("threshold", lambda c: run_threshold(c, alpha=1.0)),
            ("always", run_always),
            ("never", run_never),
        ):
            print(f"{name}: measured ratio {measured_ratio(strat, family):.4f}")
        return 0
    report = nonmonotone_demo()
    print(report["summary"])
    for name, series in report["ratios"].items():
        for n, ratio in series:
            print(f"{name} horizon={n} ratio={ratio:.2f}")
    return 0


def _write_histogram(path: str, values, bins: int = 20) -> None:
    counts, edges = np.histogram(values, bins=bins)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_lo", "bin_hi", "count"])
        for k in range(len(counts)):
            writer.writerow([edges[k], edges[k + 1], counts[k]])


# ---------------------------------------------------------------------------


def _add_engine_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--mode", choices=("eager", "lazy"))
    p.add_argument("--backend", choices=("memory", "disk"))
    p.add_argument("--hybrid", type=lambda v: v.lower() in ("1", "true", "yes"))
    p.add_argument("--p", type=float, help="Hölder exponent for model deltas")
    p.add_argument("--alpha", type=float)
    p.add_argument("--cost-mode", dest="cost_mode", choices=("proxy", "wallclock"))
    p.add_argument("--buffer-size", dest="buffer_size", type=int)
    p.add_argument("--buffer-fraction", dest="buffer_fraction", type=float)
    p.add_argument("--loss", choices=("hinge", "logistic", "ridge"))
    p.add_argument("--lam", type=float)
    p.add_argument("--eta0", type=float)


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="classview", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("load", help="featurize a dataset and build an engine directory")
    p.add_argument("--entities", required=True)
    p.add_argument("--features", choices=("sparse", "tf", "tfidf"), default="sparse")
    p.add_argument("--dir", required=True)
    _add_engine_flags(p)
    p.set_defaults(func=cmd_load)

    p = sub.add_parser("update", help="apply training examples")
    p.add_argument("--dir", required=True)
    p.add_argument("--example", help='one record, e.g. "-1 3:0.5 7:1.2"')
    p.add_argument("--file", help="file of records")
    p.set_defaults(func=cmd_update)

    p = sub.add_parser("query", help="label of a single entity")
    p.add_argument("--dir", required=True)
    p.add_argument("--id", type=int, required=True)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("members", help="all entities labeled positive")
    p.add_argument("--dir", required=True)
    p.set_defaults(func=cmd_members)

    p = sub.add_parser("retrain", help="full retrain from retained examples")
    p.add_argument("--dir", required=True)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_retrain)

    p = sub.add_parser("gen", help="write a synthetic dataset file")
    p.add_argument("--kind", choices=("synthetic", "adult", "magic"), default="synthetic")
    p.add_argument("--count", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("bench", help="run the mode x backend matrix on a synthetic stream")
    p.add_argument("--out", required=True)
    p.add_argument("--entities", type=int, default=500)
    p.add_argument("--updates", type=int, default=1000)
    p.add_argument("--warmup", type=int, default=200)
    p.add_argument("--reads", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--modes", default="eager,lazy")
    p.add_argument("--backends", default="memory")
    p.add_argument("--hybrid", choices=("0", "1", "both"), default="0")
    p.add_argument("--read-threads", dest="read_threads", type=int, default=0)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("simulate", help="reorganization-policy simulations")
    p.add_argument("what", choices=("bound", "adversary", "nonmonotone"))
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--max-rounds", dest="max_rounds", type=int, default=60)
    p.add_argument("--horizon", type=int, default=12000)
    p.add_argument("--reorg-cost", dest="reorg_cost", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="ratios.csv")
    p.set_defaults(func=cmd_simulate)

    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, UnknownEntity) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
