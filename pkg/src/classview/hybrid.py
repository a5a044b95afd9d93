"""Hybrid serving layer: an in-memory margin map over the full entity set plus
a bounded buffer of the entities most likely to change label.

Single-entity reads consult, in order: the water bounds (which decide the
label from the margin map alone), the buffer (which holds feature vectors so
the label is recomputed under the current model, never served stale), and only
then the backing store. Both structures are rebuilt at every reorganization
and the buffer stays fixed until the next one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .linear import LinearModel, classify
from .store import StoredModelState, UnknownEntity
from .vectors import SparseVector


@dataclass
class HybridBuffer:
    """Up to `capacity` feature vectors for the entities nearest the hyperplane."""

    capacity: int
    entries: dict = field(default_factory=dict)  # id -> SparseVector


def rebuild_hybrid(store, capacity: int) -> tuple[dict, HybridBuffer]:
    """Refresh the margin map from the store and refill the buffer.

    Buffer admission is by |eps| ascending (ties by id string order), so the
    band around zero is covered first. capacity = 0 degrades lookups to
    waters-or-store.
    """
    if capacity < 0:
        raise ValueError("buffer capacity must be non-negative")
    eps_map = {}
    ranked = []
    for rec in store.records():
        eps_map[rec.id] = rec.eps
        ranked.append(rec)
    ranked.sort(key=lambda r: (abs(r.eps), repr(r.id)))
    buf = HybridBuffer(capacity=capacity)
    for rec in ranked[:capacity]:
        buf.entries[rec.id] = rec.f
    return eps_map, buf


def hybrid_lookup(
    entity_id,
    eps_map: dict,
    state: StoredModelState,
    buffer: HybridBuffer,
    store,
    model: LinearModel,
    stats=None,
) -> int:
    """Label one entity, touching the store only as a last resort.

    The low-water test is strict: a record at exactly low water can still have
    a margin of zero, which labels positive, so it must be rechecked. The
    high-water test is safe at equality. The store-access counter (when stats
    is given) increments only on the final fallthrough.
    """
    eps = eps_map.get(entity_id)
    if eps is None:
        raise UnknownEntity(entity_id)
    if eps < state.low_water:
        return -1
    if eps >= state.high_water:
        return 1
    f = buffer.entries.get(entity_id)
    if f is not None:
        return classify(model, f)
    if stats is not None:
        stats.disk_accesses += 1
    return classify(model, store.record(entity_id).f)


def memory_estimate(buffer_entries: int, feature_bytes: int, key_bytes: int, entity_count: int) -> int:
    """Bytes held in memory: B(f + k) for the buffer plus (k + 8)N for the margin map."""
    if min(buffer_entries, feature_bytes, key_bytes, entity_count) < 0:
        raise ValueError("all sizes must be non-negative")
    return buffer_entries * (feature_bytes + key_bytes) + (key_bytes + 8) * entity_count
