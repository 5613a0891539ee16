"""Per-function strategy selection and placement feasibility.

The selection table encodes one row per core function: the UPF is redeployed
cold because it keeps no migratable state; session- and mobility-management
functions prefer a synchronized replica when downtime matters and iterative
pre-copy when transfer volume matters; the authentication server and the
data-store functions take the single bulk copy, which minimizes migration
time and sends each byte exactly once; the repository function switches
between bulk copy and the iterative/replica approaches depending on what the
operator optimizes for.

Placement feasibility is data, not an error: a check returns the list of
violated constraints (Ethernet PDU sessions need an L2-capable attachment,
the authentication server needs high isolation, hosts have finite compute).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence

from .errors import InvalidCombinationError
from .migration import Strategy
from .model import (
    HostNode,
    IsolationLevel,
    NfInstance,
    NfKind,
    PduSession,
    SessionType,
    ValidatedTopology,
    stateful_allowed,
)


class Objective(str, Enum):
    MINIMIZE_DOWNTIME = "downtime"
    MINIMIZE_MIGRATION_TIME = "migration-time"
    MINIMIZE_BYTES = "bytes"


@dataclass(frozen=True)
class StrategyDecision:
    chosen: Strategy
    candidates: tuple[Strategy, ...]
    rationale: str

    def __post_init__(self):
        if not self.candidates:
            raise ValueError("candidates must be non-empty")
        if self.candidates[0] is not self.chosen:
            raise ValueError("chosen strategy must lead the candidate list")


_REDEPLOY = (Strategy.NO_MIGRATION_REDEPLOY,)
_INTER = (Strategy.INTER_COPY,)
_PARALLEL_FIRST = (Strategy.PARALLEL, Strategy.PRE_COPY)
_PRECOPY_FIRST = (Strategy.PRE_COPY, Strategy.PARALLEL)

_RATIONALE = {
    NfKind.UPF: "stateless-user-plane",
    NfKind.SMF: "stateful-session-management",
    NfKind.AMF: "signaling-availability-critical",
    NfKind.AUSF: "security-isolation",
    NfKind.UDM: "subscriber-data",
    NfKind.UDR: "central-data-store",
    NfKind.NRF: "registry-size-dependent",
}

# (kind, stateful) -> objective -> preference order.  Keys omitted for a
# kind mean the combination is invalid and is rejected before lookup.
_DECISION_TABLE: Mapping[tuple[NfKind, bool], Mapping[Objective, tuple[Strategy, ...]]] = {
    (NfKind.UPF, False): {
        Objective.MINIMIZE_DOWNTIME: _REDEPLOY,
        Objective.MINIMIZE_MIGRATION_TIME: _REDEPLOY,
        Objective.MINIMIZE_BYTES: _REDEPLOY,
    },
    (NfKind.SMF, True): {
        Objective.MINIMIZE_DOWNTIME: _PARALLEL_FIRST,
        Objective.MINIMIZE_MIGRATION_TIME: _PRECOPY_FIRST,
        Objective.MINIMIZE_BYTES: _PRECOPY_FIRST,
    },
    (NfKind.AMF, True): {
        Objective.MINIMIZE_DOWNTIME: _PARALLEL_FIRST,
        Objective.MINIMIZE_MIGRATION_TIME: _PARALLEL_FIRST,
        # Continuous replica sync duplicates every input, so it maximizes
        # bytes; iterative copy is the fallback when volume matters.
        Objective.MINIMIZE_BYTES: _PRECOPY_FIRST,
    },
    (NfKind.AUSF, True): {
        Objective.MINIMIZE_DOWNTIME: _INTER,
        Objective.MINIMIZE_MIGRATION_TIME: _INTER,
        Objective.MINIMIZE_BYTES: _INTER,
    },
    (NfKind.UDM, True): {
        Objective.MINIMIZE_DOWNTIME: _INTER,
        Objective.MINIMIZE_MIGRATION_TIME: _INTER,
        Objective.MINIMIZE_BYTES: _INTER,
    },
    (NfKind.UDM, False): {
        Objective.MINIMIZE_DOWNTIME: _REDEPLOY,
        Objective.MINIMIZE_MIGRATION_TIME: _REDEPLOY,
        Objective.MINIMIZE_BYTES: _REDEPLOY,
    },
    (NfKind.UDR, True): {
        Objective.MINIMIZE_DOWNTIME: _INTER,
        Objective.MINIMIZE_MIGRATION_TIME: _INTER,
        Objective.MINIMIZE_BYTES: _INTER,
    },
    (NfKind.NRF, True): {
        Objective.MINIMIZE_DOWNTIME: _PARALLEL_FIRST,
        Objective.MINIMIZE_MIGRATION_TIME: _INTER,
        Objective.MINIMIZE_BYTES: _PRECOPY_FIRST,
    },
}

# Cells whose preference is an inference from the cost model rather than a
# stated recommendation; surfaced in the rationale tag.
_INFERRED_CELLS = frozenset({(NfKind.AMF, True, Objective.MINIMIZE_BYTES)})


def select_strategy(kind: NfKind, stateful: bool, objective: Objective) -> StrategyDecision:
    """The migration strategy for a function kind under the given objective.

    Raises :class:`InvalidCombinationError` for (kind, stateful) pairs that
    cannot occur, e.g. a stateful UPF.
    """
    if not stateful_allowed(kind, stateful):
        raise InvalidCombinationError(
            f"{kind.value.upper()} cannot be {'stateful' if stateful else 'stateless'}"
        )
    candidates = _DECISION_TABLE[(kind, stateful)][objective]
    rationale = _RATIONALE[kind]
    if not stateful and kind is NfKind.UDM:
        rationale = "delegates-state-to-udr"
    if (kind, stateful, objective) in _INFERRED_CELLS:
        rationale += "+inferred"
    return StrategyDecision(candidates[0], candidates, rationale)


def required_isolation(kind: NfKind) -> IsolationLevel | None:
    """Minimum driver isolation for a kind, or None when unconstrained."""
    if kind is NfKind.AUSF:
        return IsolationLevel.HIGH
    return None


class ViolationKind(str, Enum):
    ETHERNET_PDU_REQUIRES_L2 = "ethernet-pdu-requires-l2"
    ISOLATION_TOO_LOW = "isolation-too-low"
    CAPACITY_EXCEEDED = "capacity-exceeded"


@dataclass(frozen=True)
class PlacementViolation:
    kind: ViolationKind
    detail: str


def check_placement(
    nf: NfInstance,
    host: HostNode,
    sessions: Sequence[PduSession],
    topology: ValidatedTopology,
    placements: Mapping[str, str] | None = None,
) -> list[PlacementViolation]:
    """Constraints violated by putting ``nf`` on ``host``; empty means feasible.

    ``placements`` maps function ids to their current hosts when they have
    moved since deployment; capacity accounting excludes ``nf`` itself.
    """
    profile = topology.drivers[host.attached_driver]
    violations: list[PlacementViolation] = []

    if nf.kind is NfKind.UPF and not profile.carries_l2:
        anchored_ethernet = [
            s
            for s in sessions
            if s.anchor_upf == nf.id and s.session_type is SessionType.ETHERNET
        ]
        if anchored_ethernet:
            violations.append(
                PlacementViolation(
                    ViolationKind.ETHERNET_PDU_REQUIRES_L2,
                    f"'{nf.id}' anchors Ethernet session(s) "
                    f"{[s.id for s in anchored_ethernet]} but driver "
                    f"'{host.attached_driver.value}' on '{host.id}' cannot carry L2",
                )
            )

    needed = required_isolation(nf.kind)
    if needed is not None and profile.isolation is not needed:
        violations.append(
            PlacementViolation(
                ViolationKind.ISOLATION_TOO_LOW,
                f"'{nf.id}' requires {needed.name} isolation; driver "
                f"'{host.attached_driver.value}' on '{host.id}' provides "
                f"{profile.isolation.name}",
            )
        )

    used = 0.0
    for other in topology.nfs.values():
        if other.id == nf.id:
            continue
        other_host = placements[other.id] if placements is not None else other.host
        if other_host == host.id:
            used += other.cpu_demand
    if used + nf.cpu_demand > host.cpu_capacity:
        violations.append(
            PlacementViolation(
                ViolationKind.CAPACITY_EXCEEDED,
                f"'{host.id}' has {host.cpu_capacity} units, {used} in use; "
                f"'{nf.id}' needs {nf.cpu_demand}",
            )
        )
    return violations


def policy_grid() -> list[tuple[NfKind, bool, Objective, StrategyDecision]]:
    """Every (kind, statefulness, objective) row of the decision table."""
    rows = []
    variants: list[tuple[NfKind, bool]] = []
    for kind in NfKind:
        if kind is NfKind.UDM:
            variants.extend([(kind, True), (kind, False)])
        elif kind is NfKind.UPF:
            variants.append((kind, False))
        else:
            variants.append((kind, True))
    for kind, stateful in variants:
        for objective in Objective:
            rows.append((kind, stateful, objective, select_strategy(kind, stateful, objective)))
    return rows


def policy_table_text() -> str:
    """The decision grid rendered as a fixed-width text table."""
    header = (
        f"{'kind':<6}{'stateful':<10}{'objective':<16}{'strategy':<12}"
        f"{'candidates':<22}rationale"
    )
    lines = [header, "-" * len(header)]
    for kind, stateful, objective, decision in policy_grid():
        candidates = ",".join(s.value for s in decision.candidates)
        lines.append(
            f"{kind.value:<6}{('yes' if stateful else 'no'):<10}"
            f"{objective.value:<16}{decision.chosen.value:<12}"
            f"{candidates:<22}{decision.rationale}"
        )
    return "\n".join(lines) + "\n"
