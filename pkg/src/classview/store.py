"""Margin-clustered entity store with incremental relabeling.

Every entity is kept as a record (id, eps, f) where eps is its signed margin
under the *stored* model, the model in effect at the last reorganization.
Records stay sorted by eps (ties by id), so the entities whose labels could
have changed since then form one contiguous band.

Drift is tracked by two running scalars. After each model round j the bounds

    eps_high = M * ||w_j - w_s||_p + (b_j - b_s)
    eps_low  = -M * ||w_j - w_s||_p + (b_j - b_s)

are folded into high_water = max(...) and low_water = min(...), where M is the
largest q-norm over stored feature vectors and (p, q) are Hölder conjugates.
By Hölder's inequality |delta_w . f| <= ||delta_w||_p * ||f||_q, so a record
with eps >= high_water is still positive under every model seen since s, and
one with eps strictly below low_water is still negative. The closed band
[low_water, high_water] is rescanned; both boundaries are rechecked because
the low-side guarantee is strict (a margin of exactly zero labels positive).

Two interchangeable backends exist: in-memory sorted arrays and an on-disk
sorted segment file with a feature heap, a sparse fence-pointer index, and an
unsorted delta region for inserts (merged at the next reorganization).
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import time
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, replace
from typing import Iterable, Iterator

from .linear import LinearModel, classify, margin
from .vectors import HolderPair, SparseVector, norm


class DuplicateEntity(ValueError):
    """An entity id was added twice."""


class UnknownEntity(KeyError):
    """A lookup referenced an id that is not stored."""


@dataclass(frozen=True)
class EpsRecord:
    id: object
    eps: float
    f: SparseVector


@dataclass(frozen=True)
class StoredModelState:
    """Stored model plus the drift bookkeeping accumulated since it was set.

    low_water <= 0 <= high_water always; both are exactly 0 right after a
    reorganization and move monotonically outward until the next one.
    """

    stored_model: LinearModel
    max_norm: float  # max over stored records of norm(f, q)
    holder: HolderPair
    low_water: float
    high_water: float
    last_round: int


def _sort_key(rec: EpsRecord):
    return (rec.eps, rec.id)


# ---------------------------------------------------------------------------
# In-memory backend


class MemoryStore:
    """Records in eps order in plain lists; band scans via binary search."""

    backend = "memory"

    def __init__(self, records: Iterable[EpsRecord]):
        recs = sorted(records, key=_sort_key)
        self._recs: list[EpsRecord] = recs
        self._keys = [_sort_key(r) for r in recs]
        self._eps = [r.eps for r in recs]
        self._by_id: dict = {}
        for r in recs:
            if r.id in self._by_id:
                raise DuplicateEntity(f"duplicate entity id {r.id!r}")
            self._by_id[r.id] = r

    def __len__(self) -> int:
        return len(self._recs)

    def __contains__(self, entity_id) -> bool:
        return entity_id in self._by_id

    def record(self, entity_id) -> EpsRecord:
        try:
            return self._by_id[entity_id]
        except KeyError:
            raise UnknownEntity(entity_id) from None

    def records(self) -> Iterator[EpsRecord]:
        return iter(self._recs)

    def band(self, lo: float, hi: float) -> list[EpsRecord]:
        """Records with eps in the closed interval [lo, hi], eps order."""
        i = bisect_left(self._eps, lo)
        j = bisect_right(self._eps, hi)
        return self._recs[i:j]

    def from_water(self, lo: float) -> list[EpsRecord]:
        """Records with eps >= lo, eps order."""
        i = bisect_left(self._eps, lo)
        return self._recs[i:]

    def insert(self, rec: EpsRecord) -> None:
        if rec.id in self._by_id:
            raise DuplicateEntity(f"duplicate entity id {rec.id!r}")
        key = _sort_key(rec)
        pos = bisect_left(self._keys, key)
        self._keys.insert(pos, key)
        self._eps.insert(pos, rec.eps)
        self._recs.insert(pos, rec)
        self._by_id[rec.id] = rec

    def rewrite(self, records: Iterable[EpsRecord], dimension: int) -> "MemoryStore":
        return MemoryStore(records)


# ---------------------------------------------------------------------------
# On-disk backend
#
# segment.bin  fixed-width records sorted by (eps, id):
#              eps f64 LE | id u64 LE | heap offset u64 LE | heap length u32 LE
# heap.bin     concatenated sparse payloads, 12 bytes per entry: idx u32 | val f64
# delta.bin    same record layout as the segment, unsorted, merged at rebuild
# manifest.json  counts, dimension, stored round, max_norm, waters, checksum

_SEG_REC = struct.Struct("<dQQI")
_HEAP_ENTRY = struct.Struct("<Id")
PAGE_RECORDS = 128


def _heap_encode(f: SparseVector) -> bytes:
    return b"".join(_HEAP_ENTRY.pack(i, v) for i, v in f.entries)


def _heap_decode(blob: bytes, dimension: int) -> SparseVector:
    n = len(blob) // _HEAP_ENTRY.size
    entries = [_HEAP_ENTRY.unpack_from(blob, k * _HEAP_ENTRY.size) for k in range(n)]
    return SparseVector(entries, dimension)


def _sha256_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


class DiskStore:
    """Sorted segment file plus delta region; fence pointers stay in memory.

    Ids must be unsigned 64-bit integers. A rebuild writes fresh segment and
    heap files and renames them into place, so a crash mid-rebuild leaves the
    previous generation intact; the manifest's checksum detects torn segments.
    """

    backend = "disk"

    def __init__(self, directory: str):
        self.dir = directory
        self._load()

    # -- construction ------------------------------------------------------

    @classmethod
    def create(cls, directory: str, records: Iterable[EpsRecord], dimension: int) -> "DiskStore":
        os.makedirs(directory, exist_ok=True)
        recs = sorted(records, key=_sort_key)
        seen = set()
        for r in recs:
            if r.id in seen:
                raise DuplicateEntity(f"duplicate entity id {r.id!r}")
            seen.add(r.id)
        cls._write_generation(directory, recs, dimension)
        return cls(directory)

    @staticmethod
    def _write_generation(directory: str, recs: list[EpsRecord], dimension: int) -> None:
        seg_tmp = os.path.join(directory, "segment.tmp")
        heap_tmp = os.path.join(directory, "heap.tmp")
        with open(seg_tmp, "wb") as seg, open(heap_tmp, "wb") as heap:
            offset = 0
            for r in recs:
                payload = _heap_encode(r.f)
                heap.write(payload)
                seg.write(_SEG_REC.pack(r.eps, int(r.id), offset, len(payload)))
                offset += len(payload)
            seg.flush()
            os.fsync(seg.fileno())
            heap.flush()
            os.fsync(heap.fileno())
        os.replace(seg_tmp, os.path.join(directory, "segment.bin"))
        os.replace(heap_tmp, os.path.join(directory, "heap.bin"))
        delta = os.path.join(directory, "delta.bin")
        with open(delta, "wb"):
            pass
        manifest = {
            "version": 1,
            "count": len(recs),
            "dimension": dimension,
            "segment_sha256": _sha256_file(os.path.join(directory, "segment.bin")),
        }
        man_tmp = os.path.join(directory, "manifest.tmp")
        with open(man_tmp, "w") as fh:
            json.dump(manifest, fh)
        os.replace(man_tmp, os.path.join(directory, "manifest.json"))

    def _load(self) -> None:
        with open(os.path.join(self.dir, "manifest.json")) as fh:
            man = json.load(fh)
        self.dimension = int(man["dimension"])
        self._seg_count = int(man["count"])
        seg_path = os.path.join(self.dir, "segment.bin")
        if man.get("segment_sha256") and _sha256_file(seg_path) != man["segment_sha256"]:
            raise IOError("segment checksum mismatch; store is torn")
        self._seg = open(seg_path, "rb")
        self._heap = open(os.path.join(self.dir, "heap.bin"), "rb")
        # sparse fence pointers (first eps of every page) and the id -> slot map
        self._fences: list[float] = []
        self._slot_by_id: dict[int, int] = {}
        self._seg.seek(0)
        for slot in range(self._seg_count):
            eps, rid, _, _ = _SEG_REC.unpack(self._seg.read(_SEG_REC.size))
            if slot % PAGE_RECORDS == 0:
                self._fences.append(eps)
            self._slot_by_id[rid] = slot
        self._delta: list[EpsRecord] = []
        self._delta_ids: set[int] = set()
        delta_path = os.path.join(self.dir, "delta.bin")
        if os.path.exists(delta_path):
            with open(delta_path, "rb") as fh:
                blob = fh.read()
            for off in range(0, len(blob), _SEG_REC.size):
                eps, rid, hoff, hlen = _SEG_REC.unpack_from(blob, off)
                self._heap.seek(hoff)
                f = _heap_decode(self._heap.read(hlen), self.dimension)
                self._delta.append(EpsRecord(rid, eps, f))
                self._delta_ids.add(rid)

    # -- reads ---------------------------------------------------------------

    def __len__(self) -> int:
        return self._seg_count + len(self._delta)

    def __contains__(self, entity_id) -> bool:
        return entity_id in self._slot_by_id or entity_id in self._delta_ids

    def _read_slot(self, slot: int) -> EpsRecord:
        self._seg.seek(slot * _SEG_REC.size)
        eps, rid, hoff, hlen = _SEG_REC.unpack(self._seg.read(_SEG_REC.size))
        self._heap.seek(hoff)
        return EpsRecord(rid, eps, _heap_decode(self._heap.read(hlen), self.dimension))

    def record(self, entity_id) -> EpsRecord:
        slot = self._slot_by_id.get(entity_id)
        if slot is not None:
            return self._read_slot(slot)
        for rec in self._delta:
            if rec.id == entity_id:
                return rec
        raise UnknownEntity(entity_id)

    def records(self) -> Iterator[EpsRecord]:
        """All records in logical (eps, id) order: segment merged with delta."""
        if not self._delta:
            for slot in range(self._seg_count):
                yield self._read_slot(slot)
            return
        pending = sorted(self._delta, key=_sort_key)
        k = 0
        for slot in range(self._seg_count):
            rec = self._read_slot(slot)
            while k < len(pending) and _sort_key(pending[k]) < _sort_key(rec):
                yield pending[k]
                k += 1
            yield rec
        yield from pending[k:]

    def _scan_start(self, lo: float) -> int:
        """First slot of the page that could contain the first eps >= lo."""
        if not self._fences:
            return 0
        page = bisect_right(self._fences, lo) - 1
        return max(0, page) * PAGE_RECORDS

    def band(self, lo: float, hi: float) -> list[EpsRecord]:
        out = []
        for slot in range(self._scan_start(lo), self._seg_count):
            rec = self._read_slot(slot)
            if rec.eps > hi:
                break
            if rec.eps >= lo:
                out.append(rec)
        out.extend(r for r in self._delta if lo <= r.eps <= hi)
        out.sort(key=_sort_key)
        return out

    def from_water(self, lo: float) -> list[EpsRecord]:
        out = []
        for slot in range(self._scan_start(lo), self._seg_count):
            rec = self._read_slot(slot)
            if rec.eps >= lo:
                out.append(rec)
        out.extend(r for r in self._delta if r.eps >= lo)
        out.sort(key=_sort_key)
        return out

    # -- writes --------------------------------------------------------------

    def insert(self, rec: EpsRecord) -> None:
        if rec.id in self:
            raise DuplicateEntity(f"duplicate entity id {rec.id!r}")
        payload = _heap_encode(rec.f)
        with open(os.path.join(self.dir, "heap.bin"), "ab") as heap:
            hoff = heap.tell()
            heap.write(payload)
        with open(os.path.join(self.dir, "delta.bin"), "ab") as fh:
            fh.write(_SEG_REC.pack(rec.eps, int(rec.id), hoff, len(payload)))
        self._heap.close()
        self._heap = open(os.path.join(self.dir, "heap.bin"), "rb")
        self.dimension = max(self.dimension, rec.f.dimension)
        self._delta.append(rec)
        self._delta_ids.add(rec.id)

    def rewrite(self, records: Iterable[EpsRecord], dimension: int) -> "DiskStore":
        """Write a fresh generation and open it; this instance keeps serving the
        old one through its already-open file handles (rename semantics)."""
        self._write_generation(self.dir, sorted(records, key=_sort_key), dimension)
        return DiskStore(self.dir)

    def close(self) -> None:
        self._seg.close()
        self._heap.close()


# ---------------------------------------------------------------------------
# Algorithm operations, backend-agnostic


def build(
    entities: Iterable[tuple[object, SparseVector]],
    model: LinearModel,
    holder: HolderPair,
    backend: str = "memory",
    data_dir: str | None = None,
) -> tuple[object, StoredModelState, dict]:
    """Cluster entities by margin under `model` and label them by its sign."""
    records = []
    max_norm = 0.0
    dim = 1
    seen = set()
    for entity_id, f in entities:
        if entity_id in seen:
            raise DuplicateEntity(f"duplicate entity id {entity_id!r}")
        seen.add(entity_id)
        records.append(EpsRecord(entity_id, margin(model, f), f))
        max_norm = max(max_norm, norm(f, holder.q))
        dim = max(dim, f.dimension)
    if not records:
        raise ValueError("cannot build a store over an empty entity set")
    if backend == "memory":
        store: object = MemoryStore(records)
    elif backend == "disk":
        if not data_dir:
            raise ValueError("disk backend needs a data directory")
        store = DiskStore.create(data_dir, records, dim)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    state = StoredModelState(
        stored_model=model,
        max_norm=max_norm,
        holder=holder,
        low_water=0.0,
        high_water=0.0,
        last_round=model.round,
    )
    view = {r.id: (1 if r.eps >= 0.0 else -1) for r in records}
    return store, state, view


def _delta_norm(state: StoredModelState, new_model: LinearModel) -> float:
    ws, wj = state.stored_model.w, new_model.w
    if ws.shape[0] < wj.shape[0]:
        grown = np.zeros(wj.shape[0], dtype=np.float64)
        grown[: ws.shape[0]] = ws
        ws = grown
    elif wj.shape[0] < ws.shape[0]:
        grown = np.zeros(ws.shape[0], dtype=np.float64)
        grown[: wj.shape[0]] = wj
        wj = grown
    return norm(wj - ws, state.holder.p)


def update_waters(state: StoredModelState, new_model: LinearModel) -> StoredModelState:
    """Fold one model round into the running low/high water bounds."""
    if new_model.round <= state.last_round:
        raise ValueError(
            f"model round {new_model.round} is not newer than round {state.last_round}"
        )
    bound = state.max_norm * _delta_norm(state, new_model)
    shift = new_model.b - state.stored_model.b
    return replace(
        state,
        high_water=max(state.high_water, bound + shift),
        low_water=min(state.low_water, -bound + shift),
        last_round=new_model.round,
    )


def incremental_step(
    store, state: StoredModelState, view: dict, new_model: LinearModel
) -> tuple[dict, int, int]:
    """Relabel exactly the closed water band under the new model.

    Records outside the band keep their reorganization-time labels. Returns the
    updated view, how many labels changed, and how many records were touched.
    """
    touched = store.band(state.low_water, state.high_water)
    new_view = dict(view)
    changed = 0
    for rec in touched:
        label = classify(new_model, rec.f)
        if new_view[rec.id] != label:
            new_view[rec.id] = label
            changed += 1
    return new_view, changed, len(touched)


def reorganize(
    store, state: StoredModelState, view: dict, model: LinearModel
) -> tuple[object, StoredModelState, dict, float]:
    """Recompute every margin under `model`, re-sort, and reset the waters.

    Returns the new (store, state, view) plus the wall-clock seconds spent,
    which the caller feeds back as the measured rebuild cost.
    """
    started = time.perf_counter()
    records = []
    max_norm = 0.0
    dim = 1
    for rec in store.records():
        records.append(EpsRecord(rec.id, margin(model, rec.f), rec.f))
        max_norm = max(max_norm, norm(rec.f, state.holder.q))
        dim = max(dim, rec.f.dimension)
    new_store = store.rewrite(records, dim)
    new_state = StoredModelState(
        stored_model=model,
        max_norm=max_norm,
        holder=state.holder,
        low_water=0.0,
        high_water=0.0,
        last_round=model.round,
    )
    new_view = {r.id: (1 if r.eps >= 0.0 else -1) for r in records}
    return new_store, new_state, new_view, time.perf_counter() - started


def all_members_eager(view: dict) -> set:
    return {entity_id for entity_id, label in view.items() if label == 1}


def all_members_lazy(store, state: StoredModelState, model: LinearModel) -> tuple[set, int, int]:
    """Scan records at or above low water; classify only the in-band ones.

    Records with eps >= high_water are members outright. Returns the member
    ids, the number of records read, and the member count.
    """
    members = set()
    read = 0
    for rec in store.from_water(state.low_water):
        read += 1
        if rec.eps >= state.high_water:
            members.add(rec.id)
        elif margin(model, rec.f) >= 0.0:
            members.add(rec.id)
    return members, read, len(members)


def single_entity_eager(view: dict, entity_id) -> int:
    try:
        return view[entity_id]
    except KeyError:
        raise UnknownEntity(entity_id) from None


def single_entity_lazy(store, model: LinearModel, entity_id) -> int:
    return classify(model, store.record(entity_id).f)


def insert_entity(
    store,
    state: StoredModelState,
    view: dict,
    entity_id,
    f: SparseVector,
    current_model: LinearModel,
) -> tuple[StoredModelState, dict]:
    """Add one entity: clustered under the stored model, labeled by the current one.

    The store is updated in place; the returned state carries the possibly
    larger max_norm so the water bounds stay sound for the newcomer.
    """
    if entity_id in store:
        raise DuplicateEntity(f"duplicate entity id {entity_id!r}")
    eps = margin(state.stored_model, f)
    store.insert(EpsRecord(entity_id, eps, f))
    new_view = dict(view)
    new_view[entity_id] = classify(current_model, f)
    new_state = replace(state, max_norm=max(state.max_norm, norm(f, state.holder.q)))
    return new_state, new_view
