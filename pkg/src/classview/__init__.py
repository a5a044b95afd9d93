"""classview: incrementally maintained linear-classifier views.

Entities are clustered by their margin under a stored model; per-round Hölder
bounds confine possible label changes to one contiguous band, and a ski-rental
style policy decides when re-clustering pays for itself. Ships with eager,
lazy, and hybrid serving over in-memory and on-disk stores, one-vs-all
multiclass on top, and a simulator that checks the policy's competitive
guarantees against an exact dynamic-programming optimum.
"""

from .engine import Engine, EngineConfig, EngineStats, Snapshot
from .features import (
    RandomFeatureMap,
    Vocabulary,
    rff_project,
    tf_features,
    tfidf_features,
    tfidf_stats,
    tfidf_stats_inc,
    tokenize,
)
from .hybrid import HybridBuffer, hybrid_lookup, memory_estimate, rebuild_hybrid
from .linear import (
    KernelModel,
    LinearModel,
    TrainConfig,
    TrainingExample,
    classify,
    kernel_drift_bound,
    loss_grad,
    loss_value,
    margin,
    sgd_step,
    train_full,
    zero_model,
)
from .multiclass import MulticlassView, coalesce_labels
from .policy import ReorgTrigger, alpha_from_scan_ratio, lazy_waste
from .simulator import (
    CostMatrix,
    DripCosts,
    Schedule,
    StubbornCosts,
    adversarial_family,
    last_reorg_before,
    measured_ratio,
    nonmonotone_demo,
    opt_schedule,
    run_always,
    run_never,
    run_threshold,
    schedule_cost,
)
from .store import (
    DiskStore,
    DuplicateEntity,
    EpsRecord,
    MemoryStore,
    StoredModelState,
    UnknownEntity,
    all_members_eager,
    all_members_lazy,
    build,
    incremental_step,
    insert_entity,
    reorganize,
    single_entity_eager,
    single_entity_lazy,
    update_waters,
)
from .vectors import DenseVector, HolderPair, SparseVector, conjugate, dense, dot, norm

__version__ = "0.1.0"
