"""Event loop: replay a workload through the array and collect metrics.

The kernel owns the devices, the RAID placement, per-disk FCFS queues, the
I/O counters and the policy. One run: apply the scaling plan (charged as
I/O and latency at time zero), then replay the access stream, invoking the
policy on every host write and sampling the metric series on the controller
clock. Everything is deterministic for a fixed (config, seed, trace).

I/O accounting splits into host, parity, scaling-plan, wear-leveling and
GC-relocation page counters; their sum is the total I/O metric. Parity
updates are charged as one extra page program per parity disk of the
written stripe (read-modify-write reads are deliberately not modeled, and a
migrated unit keeps its stripe's parity disks for accounting). GC work
extends the service time of the operation that triggered it.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .config import ExperimentConfig
from .controller import PidState, TunerState, WlController
from .errors import CapacityExceeded, ConfigError, DeviceWornOut
from .flash import DeviceGeometry, DeviceState, erase_count_stddev
from .hotness import AccessWindow, ConservativeZone
from .policies import EdmPolicy, LazyWlPolicy, PsWlPolicy, SwansPolicy, WearPolicy
from .reliability import (
    FailureModelParams,
    LifetimeParams,
    array_failure_probability,
    failure_probability,
    initial_wear_for_probability,
)
from .scaling import PLANNERS, canonical_layout
from .workload import SyntheticSpec, WorkloadStream, generate_synthetic, parse_trace

log = logging.getLogger("pswlsim")

SERIES_COLUMNS = ("event_index", "stddev", "art", "triggers", "total_io",
                  "afp", "e", "u", "kp", "ki", "kd", "phase")


@dataclass(frozen=True)
class LatencyModel:
    read_us: float = 50.0
    program_us: float = 500.0
    erase_us: float = 3000.0

    def lint(self):
        if not self.erase_us >= self.program_us >= self.read_us:
            log.warning("unusual latency ordering: erase %s >= program %s >= read %s "
                        "does not hold", self.erase_us, self.program_us, self.read_us)


@dataclass
class DiskQueue:
    busy_until: float = 0.0
    served_ops: int = 0
    summed_response_us: float = 0.0


def response_time(arrival: float, q: DiskQueue, service: float) -> float:
    """FCFS service: start when the disk frees up, respond after service."""
    if service < 0:
        raise ConfigError("service time must be >= 0")
    start = arrival if arrival > q.busy_until else q.busy_until
    q.busy_until = start + service
    response = start + service - arrival
    q.served_ops += 1
    q.summed_response_us += response
    return response


@dataclass
class IoCounters:
    host: int = 0
    parity: int = 0
    scaling: int = 0
    wl: int = 0
    gc: int = 0

    @property
    def total(self) -> int:
        return self.host + self.parity + self.scaling + self.wl + self.gc

    def to_dict(self) -> dict:
        return {"host_io": self.host, "parity_io": self.parity,
                "scaling_io": self.scaling, "wl_io": self.wl,
                "gc_io": self.gc, "total_io": self.total}


@dataclass
class ExperimentReport:
    config: dict
    series: list = field(default_factory=list)
    final: dict = field(default_factory=dict)
    counters: dict = field(default_factory=dict)
    converged: bool = False
    convergence_event: int | None = None
    convergence_total_io: int | None = None
    convergence_afp: float | None = None
    failed: bool = False
    failure_reason: str = ""
    scheme_label: str = ""

    def to_json(self) -> str:
        payload = {
            "config": self.config,
            "scheme_label": self.scheme_label,
            "final": self.final,
            "counters": self.counters,
            "converged": self.converged,
            "convergence_event": self.convergence_event,
            "convergence_total_io": self.convergence_total_io,
            "convergence_afp": self.convergence_afp,
            "failed": self.failed,
            "failure_reason": self.failure_reason,
            "series_columns": list(SERIES_COLUMNS),
            "series_rows": len(self.series),
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    def write_series_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(SERIES_COLUMNS)
            for row in self.series:
                writer.writerow([row[c] for c in SERIES_COLUMNS])


class SimKernel:
    """One simulation instance; also the policy's view of the array."""

    def __init__(self, cfg: ExperimentConfig):
        cfg.validate()
        self.cfg = cfg
        f = cfg.flash
        self.geometry = DeviceGeometry(
            blocks_per_disk=f.blocks_per_disk, pages_per_block=f.pages_per_block,
            max_pe_cycles=f.max_pe_cycles, page_size=f.page_size)
        self.original_count = cfg.array.original_disks
        self.disk_count = self.original_count + cfg.array.scaling_disks
        self.devices = [
            DeviceState(self.geometry, overprovision=f.overprovision,
                        gc_threshold=f.gc_threshold)
            for _ in range(self.disk_count)]
        self.queues = [DiskQueue() for _ in range(self.disk_count)]
        self.latency = LatencyModel(cfg.latency.read_us, cfg.latency.program_us,
                                    cfg.latency.erase_us)
        self.latency.lint()
        self.counters = IoCounters()
        self.failure = FailureModelParams(mu=cfg.reliability.mu, sigma=cfg.reliability.sigma)
        self.lifetime = LifetimeParams(k=cfg.reliability.k, k_p=cfg.reliability.k_p)

        level = cfg.raid_level()
        cap = self.devices[0].logical_capacity
        rows = cfg.array.stripes or int(cap * 0.9)
        if rows < 1 or rows > cap:
            raise ConfigError(f"stripes {rows} exceeds per-disk capacity {cap}")
        width = self.original_count - level.parity_disks
        self.data_units = rows * width
        self.layout = canonical_layout(level, self.original_count, self.data_units)

        # per-disk cell bookkeeping: (row -> local lpn), free-lpn pool
        self._cell_lpn: list[dict[int, int]] = [dict() for _ in range(self.disk_count)]
        self._lpn_free: list[list[int]] = [[] for _ in range(self.disk_count)]
        self._lpn_next = [0] * self.disk_count

        self.unit_disk = np.empty(self.data_units, dtype=np.int64)
        self.unit_row = np.empty(self.data_units, dtype=np.int64)
        for unit, (disk, row) in self.layout.stripe_map.items():
            self.unit_disk[unit] = disk
            self.unit_row[unit] = row

        self._preload_initial_content()
        self._apply_initial_wear()

        self.window = AccessWindow(cfg.hotness.window)
        self.event_index = 0
        self.wl_triggers = 0
        self._ops = 0
        self._resp_sum = 0.0
        self._disk_writes = [0] * self.disk_count  # host-driven programs
        self._next_row = rows  # fresh rows for wear-leveling relocations

        self.policy = self._build_policy()
        self.sampling_period = cfg.controller.sampling_period
        self.report = ExperimentReport(config=cfg.to_dict())
        self.report.scheme_label = self._scheme_label()

        # scaling redistribution happens before any host I/O
        self.target_layout, self.plan = PLANNERS[cfg.array.scaling_scheme](
            self.layout, cfg.array.scaling_disks)
        # parity association is frozen at scaling time: a later wear-leveling
        # relocation does not change which disks hold a unit's parity
        self.unit_parity: list[tuple[int, ...]] = [()] * self.data_units
        self.unit_stripe_row = self.unit_row.copy()

    # ------------------------------------------------------------------
    # setup

    def _scheme_label(self) -> str:
        scheme = self.cfg.array.scaling_scheme
        return {"gsr": "gsr-style", "sdm": "sdm-style"}.get(scheme, scheme)

    def _preload_initial_content(self):
        per_disk_rows: list[list[int]] = [[] for _ in range(self.disk_count)]
        for disk, row in self.layout.stripe_map.values():
            per_disk_rows[disk].append(row)
        for row, disks in self.layout.parity_map.items():
            for d in disks:
                per_disk_rows[d].append(row)
        for disk, rows in enumerate(per_disk_rows):
            for row in sorted(rows):
                self._lpn_for(disk, row)
            self.devices[disk].preload(len(rows))

    def _apply_initial_wear(self):
        iw = self.cfg.initial_wear
        if iw.mode == "none":
            return
        if iw.mode == "probability":
            wear = initial_wear_for_probability(iw.probability, self.failure)
            targets = [wear] * self.original_count + [0.0] * (
                self.disk_count - self.original_count)
        else:
            targets = [float(x) for x in iw.pe_counts]
        for dev, pe in zip(self.devices, targets):
            dev.set_uniform_wear(pe)

    def _build_policy(self) -> WearPolicy:
        cfg = self.cfg
        kind = cfg.policy.kind
        t0 = cfg.controller.sampling_period
        if kind in ("pswl", "pswl_ablation"):
            c = cfg.controller
            pid = PidState(kp=c.kp, ki=c.ki, kd=c.kd, t0=t0)
            control = WlController(
                pid, TunerState(alpha=c.tuner_alpha),
                exit_threshold=c.exit_threshold,
                restart_threshold=cfg.restart_threshold,
                u_max=c.u_max, tuner_epoch=c.tuner_epoch,
                self_tuning=c.self_tuning)
            zone = ConservativeZone(
                n_base=self.data_units, k_ban_base=cfg.hotness.k_ban_base,
                k_ban_max=cfg.hotness.k_ban_max, gap_ref=cfg.gap_ref)
            return PsWlPolicy(
                control, self.lifetime, self.failure,
                theta_hot=cfg.hotness.theta_hot, theta_cold=cfg.hotness.theta_cold,
                zone=zone, use_effective_lifetime=(kind == "pswl"))
        if kind == "swans":
            p = cfg.policy.swans
            scan = p.scan_period or max(1, t0 // 8)
            batch = p.batch_pages or self.geometry.pages_per_block
            return SwansPolicy(scan, stddev_threshold=p.stddev_threshold,
                               batch_pages=batch,
                               theta_hot=cfg.hotness.theta_hot,
                               theta_cold=cfg.hotness.theta_cold)
        if kind == "lazy_wl":
            p = cfg.policy.lazy_wl
            return LazyWlPolicy(t0, kp=p.kp, ki=p.ki, kd=p.kd, k_ban=p.k_ban,
                                n_base=self.data_units,
                                theta_hot=cfg.hotness.theta_hot,
                                theta_cold=cfg.hotness.theta_cold,
                                u_max=cfg.controller.u_max)
        p = cfg.policy.edm
        return EdmPolicy(t0, gap_threshold=p.gap_threshold,
                         theta_hot=cfg.hotness.theta_hot,
                         theta_cold=cfg.hotness.theta_cold)

    # ------------------------------------------------------------------
    # view protocol for policies

    def pe_counts(self):
        return [dev.pe_count for dev in self.devices]

    def disk_write_activity(self):
        return list(self._disk_writes)

    def dest_has_room(self, disk: int) -> bool:
        dev = self.devices[disk]
        margin = self.geometry.pages_per_block
        return dev.mapped_pages + margin <= dev.logical_capacity

    @property
    def wl_io(self) -> int:
        return self.counters.wl

    @property
    def total_io(self) -> int:
        return self.counters.total

    # ------------------------------------------------------------------
    # cell/lpn bookkeeping

    def _lpn_for(self, disk: int, row: int) -> int:
        lpn = self._cell_lpn[disk].get(row)
        if lpn is None:
            if self._lpn_free[disk]:
                lpn = self._lpn_free[disk].pop()
            else:
                lpn = self._lpn_next[disk]
                self._lpn_next[disk] += 1
            self._cell_lpn[disk][row] = lpn
        return lpn

    def _release_cell(self, disk: int, row: int) -> None:
        lpn = self._cell_lpn[disk].pop(row)
        self._lpn_free[disk].append(lpn)

    # ------------------------------------------------------------------
    # I/O primitives

    def _serve(self, disk: int, arrival: float, service: float) -> None:
        r = response_time(arrival, self.queues[disk], service)
        self._ops += 1
        self._resp_sum += r

    def _program(self, disk: int, lpn: int, arrival: float):
        outcome = self.devices[disk].host_write(lpn)
        self.counters.gc += outcome.gc_relocations
        service = (self.latency.program_us
                   + outcome.gc_relocations * self.latency.program_us
                   + outcome.gc_erases * self.latency.erase_us)
        self._serve(disk, arrival, service)
        return outcome

    # ------------------------------------------------------------------
    # scaling plan

    def apply_scaling_plan(self) -> None:
        """Lift every moving unit and every stale parity cell first, then
        place movers and rewrite parity. All charged at time zero, before
        the host stream starts."""
        old_parity = self.layout.parity_map
        new_parity = self.target_layout.parity_map
        changed_rows = [row for row in sorted(set(old_parity) | set(new_parity))
                        if old_parity.get(row, ()) != new_parity.get(row, ())]
        for unit, (sd, sr), _ in self.plan.moves:
            self._serve(sd, 0.0, self.latency.read_us)
            self.counters.scaling += 1
            self.devices[sd].trim(self._cell_lpn[sd][sr])
            self._release_cell(sd, sr)
        for row in changed_rows:
            for d in old_parity.get(row, ()):
                self.devices[d].trim(self._cell_lpn[d][row])
                self._release_cell(d, row)
        for unit, _, (dd, dr) in self.plan.moves:
            lpn = self._lpn_for(dd, dr)
            self._program(dd, lpn, 0.0)
            self.counters.scaling += 1
            self.unit_disk[unit] = dd
            self.unit_row[unit] = dr
        for row in changed_rows:
            for d in new_parity.get(row, ()):
                lpn = self._lpn_for(d, row)
                self._program(d, lpn, 0.0)
                self.counters.scaling += 1
        self.layout = self.target_layout
        self.unit_stripe_row = self.unit_row.copy()
        parity_map = self.layout.parity_map
        self.unit_parity = [
            parity_map.get(int(self.unit_stripe_row[u]), ())
            for u in range(self.data_units)]
        self._next_row = max(self._next_row,
                             1 + max((r for _, r in self.layout.stripe_map.values()),
                                     default=0))

    # ------------------------------------------------------------------
    # host path

    def _host_write(self, unit: int, now: float) -> None:
        disk = int(self.unit_disk[unit])
        row = int(self.unit_row[unit])
        self._program(disk, self._cell_lpn[disk][row], now)
        self.counters.host += 1
        self._disk_writes[disk] += 1
        stripe_row = int(self.unit_stripe_row[unit])
        for pdisk in self.unit_parity[unit]:
            # synthetic stripes allocate their parity cell on first use
            self._program(pdisk, self._lpn_for(pdisk, stripe_row), now)
            self.counters.parity += 1
            self._disk_writes[pdisk] += 1

    def _host_read(self, unit: int, now: float) -> None:
        disk = int(self.unit_disk[unit])
        self._serve(disk, now, self.latency.read_us)
        self.counters.host += 1

    def _execute_migration(self, decision, now: float) -> None:
        moved = 0
        for unit in (decision.page, *decision.batch):
            src, dst = decision.src_disk, decision.dst_disk
            if int(self.unit_disk[unit]) != src or not self.dest_has_room(dst):
                continue
            src_row = int(self.unit_row[unit])
            self._serve(src, now, self.latency.read_us)
            self.counters.wl += 1
            new_row = self._next_row
            self._next_row += 1
            lpn = self._lpn_for(dst, new_row)
            self._program(dst, lpn, now)
            self.counters.wl += 1
            self.devices[src].trim(self._cell_lpn[src][src_row])
            self._release_cell(src, src_row)
            self.unit_disk[unit] = dst
            self.unit_row[unit] = new_row
            # the unit joins a fresh stripe: parity rotates over the array,
            # steering clear of the data disk itself
            self.unit_stripe_row[unit] = new_row
            self.unit_parity[unit] = self._synthetic_parity(dst, new_row)
            moved += 1
        if moved:
            self.wl_triggers += 1  # one activation, whatever it carried

    def _synthetic_parity(self, data_disk: int, row: int) -> tuple[int, ...]:
        npar = self.layout.raid_level.parity_disks
        out = []
        d = row % self.disk_count
        while len(out) < npar:
            if d != data_disk:
                out.append(d)
            d = (d + 1) % self.disk_count
        return tuple(out)

    # ------------------------------------------------------------------
    # metrics

    def _afp(self) -> float:
        probs = []
        for dev in self.devices:
            pe = dev.pe_count
            probs.append(failure_probability(pe, self.failure) if pe > 0 else 0.0)
        return array_failure_probability(probs)

    def _sample_row(self) -> dict:
        tele = {"e": 0.0, "u": 0.0, "kp": 0.0, "ki": 0.0, "kd": 0.0, "phase": "-"}
        tele.update(self.policy.telemetry())
        return {
            "event_index": self.event_index,
            "stddev": erase_count_stddev(self.devices),
            "art": self._resp_sum / self._ops if self._ops else 0.0,
            "triggers": self.wl_triggers,
            "total_io": self.counters.total,
            "afp": self._afp(),
            "e": tele["e"], "u": tele["u"],
            "kp": tele["kp"], "ki": tele["ki"], "kd": tele["kd"],
            "phase": tele["phase"],
        }

    def _policy_converged(self) -> bool:
        return (isinstance(self.policy, PsWlPolicy)
                and self.policy.control.converged_at_sample is not None)

    def _initial_gap_below_exit(self) -> bool:
        if not isinstance(self.policy, PsWlPolicy) or self.disk_count == self.original_count:
            return False
        metrics = [self.policy.disk_metric(pe) for pe in self.pe_counts()]
        l_o = sum(metrics[:self.original_count]) / self.original_count
        l_s = sum(metrics[self.original_count:]) / (self.disk_count - self.original_count)
        gap = self.policy.control.relative_gap(l_o, l_s)
        return gap < self.policy.control.exit_threshold

    # ------------------------------------------------------------------
    # run loop

    def run(self, stream: WorkloadStream | None = None) -> ExperimentReport:
        cfg = self.cfg
        if stream is None:
            stream = self._load_stream()
        self.apply_scaling_plan()

        until_converged = cfg.run.until == "converged"
        if until_converged and self._initial_gap_below_exit():
            self._mark_converged()
            self.report.series.append(self._sample_row())
            self._finalize()
            return self.report

        try:
            for now, is_write, unit in stream.events():
                self.event_index += 1
                if is_write:
                    self.window.record(unit)
                    self._host_write(unit, now)
                    decision = self.policy.on_host_write(self, unit)
                    if decision.trigger_counted:
                        self._execute_migration(decision, now)
                else:
                    self._host_read(unit, now)
                if self.event_index % self.sampling_period == 0:
                    self.report.series.append(self._sample_row())
                if until_converged and self._policy_converged():
                    self._mark_converged()
                    break
        except DeviceWornOut as exc:
            self.report.failed = True
            self.report.failure_reason = f"device_worn_out: {exc}"
        except CapacityExceeded as exc:
            self.report.failed = True
            self.report.failure_reason = f"capacity_exceeded: {exc}"

        if not self.report.series or self.report.series[-1]["event_index"] != self.event_index:
            self.report.series.append(self._sample_row())
        self._finalize()
        return self.report

    def _load_stream(self) -> WorkloadStream:
        w = self.cfg.workload
        space = w.address_space or self.data_units
        if w.source == "trace":
            stream, report = parse_trace(w.trace_path, self.geometry.page_size, space)
            log.info("trace %s: %d records, %d accesses, %d malformed",
                     w.trace_path, report.records, report.accesses, report.malformed)
            return stream
        return generate_synthetic(SyntheticSpec(
            op_count=w.ops, address_space=space, write_fraction=w.write_fraction,
            skew=w.zipf_skew, seed=self.cfg.run.seed,
            inter_arrival_us=w.inter_arrival_us, hotset_shifts=w.hotset_shifts))

    def _mark_converged(self):
        self.report.converged = True
        self.report.convergence_event = self.event_index
        self.report.convergence_total_io = self.counters.total
        self.report.convergence_afp = self._afp()

    def _finalize(self):
        last = self.report.series[-1] if self.report.series else self._sample_row()
        self.report.final = {
            "lifetime_stddev": last["stddev"],
            "avg_response_time_us": last["art"],
            "wl_trigger_count": last["triggers"],
            "total_io": last["total_io"],
            "array_failure_prob": last["afp"],
        }
        self.report.counters = self.counters.to_dict()
        if self.cfg.run.until == "converged" and not self.report.converged:
            self.report.failure_reason = self.report.failure_reason or "non_convergence"


def run_experiment(cfg: ExperimentConfig, stream: WorkloadStream | None = None) -> ExperimentReport:
    return SimKernel(cfg).run(stream)
