"""Desk-scale k-step training simulator.

Thin python surface over the C++ core: the k-step optimizer, the
topology-aware route planner, the tiered parameter store, AUC evaluation,
and the experiment runner.
"""

from ._core import (
    AdamHyper,
    ConfigError,
    GradientOracle,
    KpsimError,
    Route,
    TieredStore,
    Topology,
    WorkerState,
    adagrad_sparse_update,
    benchmark_oracle,
    check_gradient,
    compute_auc,
    default_config,
    example_topology,
    generate_synthetic,
    global_merge,
    load_topology,
    local_adam_step,
    oracle_from_python,
    parse_topology,
    quadratic_oracle,
    run_experiment,
    run_kstep_adam,
    transfer_time,
    validate_config,
)

__all__ = [
    "AdamHyper",
    "ConfigError",
    "GradientOracle",
    "KpsimError",
    "Route",
    "TieredStore",
    "Topology",
    "WorkerState",
    "adagrad_sparse_update",
    "benchmark_oracle",
    "check_gradient",
    "compute_auc",
    "default_config",
    "example_topology",
    "generate_synthetic",
    "global_merge",
    "load_topology",
    "local_adam_step",
    "oracle_from_python",
    "parse_topology",
    "quadratic_oracle",
    "run_experiment",
    "run_kstep_adam",
    "transfer_time",
    "validate_config",
]

__version__ = "0.1.0"
