"""Discrete-event simulator for live migration of virtualized 5G core
functions across edge hosts: driver-level latency model, dirty-page memory
transfer strategies, per-function migration policy, and scenario execution
with reproducible metrics."""

from .engine import Event, EventHandle, Simulator, rng_stream
from .errors import (
    DanglingReferenceError,
    DuplicateIdError,
    InsufficientCapacityError,
    InvalidCombinationError,
    InvariantViolation,
    NoPathError,
    ReplicaNotSyncedError,
    ScenarioParseError,
    ScenarioValidationError,
    SchedulingInPastError,
    SimulatorError,
    StrategyInapplicableError,
)
from .memory import (
    BatchFilter,
    BernoulliDirty,
    ConstantRateDirty,
    MemoryImage,
    PageState,
    advance_dirty,
)
from .migration import (
    MigrationParams,
    MigrationReport,
    PreCopyEstimate,
    ReplicaHandle,
    Strategy,
    analytic_pre_copy,
    migrate_inter_copy,
    migrate_parallel,
    migrate_post_copy,
    migrate_pre_copy,
    redeploy_stateless,
    start_replica_sync,
    transfer_time_us,
)
from .model import (
    BUILTIN_DRIVER_PROFILES,
    AvailabilityClass,
    Channel,
    DriverKind,
    HostNode,
    IsolationLevel,
    Link,
    NetworkDriverProfile,
    NfInstance,
    NfKind,
    PduSession,
    Plane,
    SessionType,
    ValidatedTopology,
    driver_table,
    validate_topology,
)
from .policy import (
    Objective,
    PlacementViolation,
    StrategyDecision,
    ViolationKind,
    check_placement,
    policy_table_text,
    required_isolation,
    select_strategy,
)
from .runner import MetricsBundle, RecordedMigration, export_metrics, run_scenario
from .scenario import (
    MigrationTrigger,
    Scenario,
    UeSpec,
    build_scenario,
    bundled_scenario_path,
    load_scenario,
)

__version__ = "0.1.0"

__all__ = [
    "AvailabilityClass",
    "BatchFilter",
    "BernoulliDirty",
    "BUILTIN_DRIVER_PROFILES",
    "Channel",
    "ConstantRateDirty",
    "DanglingReferenceError",
    "DriverKind",
    "DuplicateIdError",
    "Event",
    "EventHandle",
    "HostNode",
    "InsufficientCapacityError",
    "InvalidCombinationError",
    "InvariantViolation",
    "IsolationLevel",
    "Link",
    "MemoryImage",
    "MetricsBundle",
    "MigrationParams",
    "MigrationReport",
    "MigrationTrigger",
    "NetworkDriverProfile",
    "NfInstance",
    "NfKind",
    "NoPathError",
    "Objective",
    "PageState",
    "PduSession",
    "PlacementViolation",
    "Plane",
    "PreCopyEstimate",
    "RecordedMigration",
    "ReplicaHandle",
    "ReplicaNotSyncedError",
    "Scenario",
    "ScenarioParseError",
    "ScenarioValidationError",
    "SchedulingInPastError",
    "SessionType",
    "Simulator",
    "SimulatorError",
    "Strategy",
    "StrategyDecision",
    "StrategyInapplicableError",
    "UeSpec",
    "ValidatedTopology",
    "ViolationKind",
    "advance_dirty",
    "analytic_pre_copy",
    "build_scenario",
    "bundled_scenario_path",
    "check_placement",
    "driver_table",
    "export_metrics",
    "load_scenario",
    "migrate_inter_copy",
    "migrate_parallel",
    "migrate_post_copy",
    "migrate_pre_copy",
    "policy_table_text",
    "redeploy_stateless",
    "required_isolation",
    "rng_stream",
    "run_scenario",
    "select_strategy",
    "start_replica_sync",
    "transfer_time_us",
    "validate_topology",
]
