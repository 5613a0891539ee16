"""Scenario execution: mobility triggers -> policy -> migration machinery.

Each trigger moves the UE to a new zone and migrates the affected function
instances there.  Target hosts are chosen among the zone's feasible hosts by
lowest latency to the zone's representative (ties broken by host id).  A
function's placement flips to the target only when its migration completes,
so the sampled user-plane RTT shows the detour until the new anchor is up.

Everything is a pure function of (scenario, seed): reruns produce identical
reports, RTT series and event traces, byte for byte.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

from .engine import Event, Simulator, rng_stream
from .memory import DirtyProcess
from .migration import (
    MigrationReport,
    Strategy,
    failed_report,
    migrate_inter_copy,
    migrate_parallel,
    migrate_pre_copy,
    redeploy_stateless,
    start_replica_sync,
)
from .model import HostNode, NfInstance, NfKind
from .policy import check_placement, select_strategy
from .scenario import Scenario

MIGRATIONS_CSV_HEADER = (
    "trigger_id,nf_id,kind,strategy,downtime_us,migration_time_us,"
    "bytes,sync_bytes,stall_us,rounds,outcome"
)


@dataclass(frozen=True)
class RecordedMigration:
    trigger_index: int
    trigger_time_us: int
    nf_id: str
    kind: NfKind
    source_host: str
    target_host: str | None
    report: MigrationReport


@dataclass(frozen=True)
class MetricsBundle:
    scenario_name: str
    seed: int
    duration_us: int
    reports: tuple[RecordedMigration, ...]
    rtt_series: tuple[tuple[int, float], ...]
    trace: tuple[Event, ...]

    def totals_by_kind(self) -> dict[str, dict[str, int]]:
        totals: dict[str, dict[str, int]] = {}
        for rec in self.reports:
            agg = totals.setdefault(
                rec.kind.value,
                {
                    "migrations": 0,
                    "failed": 0,
                    "bytes": 0,
                    "sync_bytes": 0,
                    "downtime_us": 0,
                    "stall_us": 0,
                },
            )
            agg["migrations"] += 1
            agg["failed"] += 0 if rec.report.succeeded else 1
            agg["bytes"] += rec.report.bytes_transferred
            agg["sync_bytes"] += rec.report.sync_bytes
            agg["downtime_us"] += rec.report.downtime_us
            agg["stall_us"] += rec.report.stall_time_us
        return dict(sorted(totals.items()))


def run_scenario(scenario: Scenario, seed: int | None = None) -> MetricsBundle:
    """Execute every trigger and sample the user-plane RTT over the run."""
    effective_seed = scenario.seed if seed is None else seed
    topology = scenario.topology
    params = scenario.migration_params
    sim = Simulator(effective_seed)

    placement = {nf.id: nf.host for nf in topology.nfs.values()}
    pending_target: dict[str, str] = {}
    ue_zone = scenario.ue.zone if scenario.ue else None
    dirty_procs: dict[str, DirtyProcess] = {
        nf_id: spec.build(rng_stream(f"dirty:{nf_id}", effective_seed))
        for nf_id, spec in scenario.dirty_specs.items()
    }
    rtt_series: list[tuple[int, float]] = []
    reports: list[RecordedMigration] = []

    def ue_anchor_host() -> str | None:
        if scenario.ue is None:
            return None
        anchored = sorted(
            (s for s in topology.sessions if s.ue_id == scenario.ue.id),
            key=lambda s: s.id,
        )
        if not anchored:
            return None
        return placement[anchored[0].anchor_upf]

    def zone_representative(hall: str) -> str | None:
        hosts = topology.hosts_in_hall(hall)
        return hosts[0].id if hosts else None

    def sample_rtt(sim_: Simulator, event: Event) -> None:
        anchor = ue_anchor_host()
        rep = zone_representative(ue_zone) if ue_zone else None
        if anchor is not None and rep is not None:
            rtt = 2 * topology.one_way_latency_us(rep, anchor)
            rtt_series.append((sim_.now, rtt))
            # Annotate the observation onto the processed event so the
            # exported trace carries the measured value.
            event.data["rtt_us"] = int(rtt) if rtt == int(rtt) else rtt
        next_at = sim_.now + scenario.rtt_sample_interval_us
        if next_at <= scenario.duration_us:
            sim_.schedule(next_at, "rtt-sample", sample_rtt)

    def effective_placements() -> dict[str, str]:
        return {**placement, **pending_target}

    def choose_target(nf: NfInstance, hall: str) -> HostNode | None:
        rep = zone_representative(hall)
        if rep is None:
            return None
        current = effective_placements()
        feasible = []
        for host in topology.hosts_in_hall(hall):
            if check_placement(nf, host, topology.sessions, topology, placements=current):
                continue
            feasible.append((topology.one_way_latency_us(host.id, rep), host.id, host))
        if not feasible:
            return None
        return min(feasible)[2]

    def free_capacity(host: HostNode) -> float:
        current = effective_placements()
        used = sum(
            nf.cpu_demand for nf in topology.nfs.values() if current[nf.id] == host.id
        )
        return host.cpu_capacity - used

    def complete_migration(sim_: Simulator, event: Event) -> None:
        nf_id = event.data["nf"]
        placement[nf_id] = event.data["target"]
        pending_target.pop(nf_id, None)

    def on_trigger(sim_: Simulator, event: Event) -> None:
        nonlocal ue_zone
        index = event.data["index"]
        trigger = scenario.triggers[index]
        if scenario.ue is not None and trigger.ue_id == scenario.ue.id:
            ue_zone = trigger.new_zone
        affected = sorted(
            (nf for nf in topology.nfs.values() if nf.kind in trigger.affected_kinds),
            key=lambda nf: nf.id,
        )
        objective = trigger.objective or scenario.objective
        for nf in affected:
            source = placement[nf.id]
            decision = select_strategy(nf.kind, bool(nf.stateful), objective)
            target = choose_target(nf, trigger.new_zone)
            if target is None:
                report = failed_report(
                    decision.chosen, f"no feasible host in hall '{trigger.new_zone}'"
                )
                reports.append(
                    RecordedMigration(
                        index, trigger.time_us, nf.id, nf.kind, source, None, report
                    )
                )
                sim_.schedule(
                    sim_.now, "migration-infeasible", nf=nf.id, hall=trigger.new_zone
                )
                continue

            channel = topology.channel(source, target.id)
            started = sim_.now
            timeline_base = started
            if decision.chosen is Strategy.NO_MIGRATION_REDEPLOY:
                report = redeploy_stateless(nf, params)
            elif decision.chosen is Strategy.INTER_COPY:
                report = migrate_inter_copy(nf, channel, params)
            elif decision.chosen is Strategy.PRE_COPY:
                report = migrate_pre_copy(nf, channel, params, dirty_procs[nf.id])
            elif decision.chosen is Strategy.PARALLEL:
                replica = start_replica_sync(
                    nf,
                    channel,
                    params,
                    dirty_procs[nf.id],
                    now_us=started,
                    available_capacity=free_capacity(target),
                )
                sim_.schedule(
                    started,
                    "replica-sync-started",
                    nf=nf.id,
                    target=target.id,
                    pages=nf.memory.num_pages,
                )
                # Hand over as soon as the replica flushed its first sync
                # tick; the residual delta is then at most one interval old.
                handover_at = replica.run_until_ticks(1)
                report = migrate_parallel(replica, params, at_time_us=handover_at)
                for tick in replica.tick_log:
                    sim_.schedule(tick.done_us, "sync-tick", nf=nf.id, pages=tick.pages)
                timeline_base = handover_at
            else:  # pragma: no cover - the policy table never selects post-copy
                raise AssertionError(f"unexpected strategy {decision.chosen}")

            sim_.schedule(
                started,
                "migration-started",
                nf=nf.id,
                strategy=report.strategy.value,
                source=source,
                target=target.id,
                rationale=decision.rationale,
            )
            for phase in report.phases:
                sim_.schedule(
                    timeline_base + phase.start_us,
                    "migration-phase",
                    nf=nf.id,
                    phase=phase.name,
                    end_us=timeline_base + phase.end_us,
                )
            completion = timeline_base + report.migration_time_us
            pending_target[nf.id] = target.id
            sim_.schedule(
                completion,
                "migration-complete",
                complete_migration,
                nf=nf.id,
                target=target.id,
                downtime_us=report.downtime_us,
                outcome=report.outcome_label(),
            )
            reports.append(
                RecordedMigration(
                    index, trigger.time_us, nf.id, nf.kind, source, target.id, report
                )
            )

    for index, trigger in enumerate(scenario.triggers):
        sim.schedule(trigger.time_us, "trigger", on_trigger, index=index)
    sim.schedule(0, "rtt-sample", sample_rtt)
    sim.run_until(scenario.duration_us)

    return MetricsBundle(
        scenario_name=scenario.name,
        seed=effective_seed,
        duration_us=scenario.duration_us,
        reports=tuple(reports),
        rtt_series=tuple(rtt_series),
        trace=tuple(sim.trace),
    )


def _format_us(value: float) -> str:
    if value == int(value):
        return str(int(value))
    return repr(value)


def export_metrics(bundle: MetricsBundle, out_dir: str | Path) -> dict[str, Path]:
    """Write migrations.csv, rtt.csv, trace.jsonl and summary.txt.

    Output is deterministic: rerunning the same bundle reproduces every
    file byte for byte.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "migrations": out / "migrations.csv",
        "rtt": out / "rtt.csv",
        "trace": out / "trace.jsonl",
        "summary": out / "summary.txt",
    }

    with paths["migrations"].open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MIGRATIONS_CSV_HEADER.split(","))
        for rec in bundle.reports:
            writer.writerow(
                [
                    rec.trigger_index,
                    rec.nf_id,
                    rec.kind.value,
                    rec.report.strategy.value,
                    rec.report.downtime_us,
                    rec.report.migration_time_us,
                    rec.report.bytes_transferred,
                    rec.report.sync_bytes,
                    rec.report.stall_time_us,
                    rec.report.rounds,
                    rec.report.outcome_label(),
                ]
            )

    with paths["rtt"].open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["time_us", "rtt_us"])
        for time_us, rtt in bundle.rtt_series:
            writer.writerow([time_us, _format_us(rtt)])

    with paths["trace"].open("w", encoding="utf-8") as fh:
        for event in bundle.trace:
            record = {
                "time_us": event.time_us,
                "seq": event.seq,
                "kind": event.kind,
                "data": dict(event.data),
            }
            fh.write(json.dumps(record, sort_keys=True) + "\n")

    totals = bundle.totals_by_kind()
    lines = [
        f"scenario: {bundle.scenario_name}",
        f"seed: {bundle.seed}",
        f"duration_us: {bundle.duration_us}",
        f"migrations: {len(bundle.reports)}",
        "",
        f"{'kind':<6}{'migrations':>11}{'failed':>8}{'bytes':>14}"
        f"{'sync_bytes':>12}{'downtime_us':>13}{'stall_us':>10}",
    ]
    overall = {"migrations": 0, "failed": 0, "bytes": 0, "sync_bytes": 0, "downtime_us": 0, "stall_us": 0}
    for kind, agg in totals.items():
        lines.append(
            f"{kind:<6}{agg['migrations']:>11}{agg['failed']:>8}{agg['bytes']:>14}"
            f"{agg['sync_bytes']:>12}{agg['downtime_us']:>13}{agg['stall_us']:>10}"
        )
        for key in overall:
            overall[key] += agg[key]
    lines.append(
        f"{'total':<6}{overall['migrations']:>11}{overall['failed']:>8}{overall['bytes']:>14}"
        f"{overall['sync_bytes']:>12}{overall['downtime_us']:>13}{overall['stall_us']:>10}"
    )
    paths["summary"].write_text("\n".join(lines) + "\n", encoding="utf-8")
    return paths
