"""Inter-disk wear-leveling policies.

Every policy sees host writes through ``on_host_write(view, page)`` and may
answer with a single migration. Policies act only on sampling-period
boundaries (the shared controller clock); between boundaries they return
NoAction and let the hotness window accumulate.

The view object (the simulation kernel, or a stub in tests) must provide:

* ``event_index``: count of replayed accesses so far
* ``disk_count`` / ``original_count``: array shape, originals first
* ``pe_counts()``: per-disk average P/E counts
* ``window``: the shared AccessWindow
* ``unit_disk``: numpy array mapping each data unit to its current disk
* ``disk_write_activity()``: host-driven programs per disk this run
* ``dest_has_room(disk)``: free logical space for one more migrated page
* ``wl_io`` / ``total_io``: page I/O counters for the tuning loss
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import controller as ctl
from .controller import ControllerPhase, WlController
from .errors import ConfigError
from .hotness import (
    ConservativeZone,
    HotnessClass,
    HotnessSnapshot,
    migration_allowed,
    update_conservative_zone,
)
from .reliability import FailureModelParams, LifetimeParams, effective_lifetime

POLICY_KINDS = ("pswl", "pswl_ablation", "swans", "lazy_wl", "edm")


@dataclass(frozen=True)
class PolicyDecision:
    action: str  # "none" | "migrate"
    page: int | None = None
    src_disk: int | None = None
    dst_disk: int | None = None
    batch: tuple = ()  # extra pages riding along on the same activation

    @property
    def trigger_counted(self) -> bool:
        return self.action == "migrate"


NO_ACTION = PolicyDecision("none")


def migrate(page: int, src: int, dst: int, batch: tuple = ()) -> PolicyDecision:
    return PolicyDecision("migrate", page=page, src_disk=src, dst_disk=dst,
                          batch=batch)


def wl_io_ratio(wl_page_ios: int, total_page_ios: int) -> float:
    """Loss J for the gain tuner: share of I/O spent on wear leveling."""
    if total_page_ios == 0:
        raise ZeroDivisionError("no I/O recorded yet")
    return wl_page_ios / total_page_ios


def _disk_mean_hotness(snap: HotnessSnapshot, unit_disk: np.ndarray,
                       disk_count: int) -> np.ndarray:
    """Mean scalar hotness of tracked pages per disk (0 where none)."""
    if len(snap.pages) == 0:
        return np.zeros(disk_count)
    disks = unit_disk[snap.pages]
    sums = np.bincount(disks, weights=snap.h, minlength=disk_count)
    nums = np.bincount(disks, minlength=disk_count)
    out = np.zeros(disk_count)
    nz = nums > 0
    out[nz] = sums[nz] / nums[nz]
    return out


def _candidates_on_disk(snap: HotnessSnapshot, unit_disk: np.ndarray, disk: int,
                        hotness_class: HotnessClass | None, coldest: bool = False):
    """Pages on one disk ordered for migration (hottest first by default,
    coldest first for fallback scans); ties break to the lower page number."""
    mask = unit_disk[snap.pages] == disk
    if hotness_class is not None:
        mask &= snap.classes == hotness_class.value
    idx = np.nonzero(mask)[0]
    if idx.size == 0:
        return []
    keys = snap.h[idx] if coldest else -snap.h[idx]
    order = np.lexsort((snap.pages[idx], keys))
    return snap.pages[idx][order].tolist()


def _pstdev(values) -> float:
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.std())


class WearPolicy:
    """Base: sampling-boundary bookkeeping shared by all policies."""

    name = "base"

    def __init__(self, sampling_period: int):
        if sampling_period < 1:
            raise ConfigError("sampling period must be >= 1")
        self.sampling_period = sampling_period
        self._next_mark = sampling_period

    def on_host_write(self, view, page: int) -> PolicyDecision:
        if view.event_index < self._next_mark:
            return NO_ACTION
        self._next_mark += self.sampling_period * (
            1 + (view.event_index - self._next_mark) // self.sampling_period)
        return self._sample(view)

    def _sample(self, view) -> PolicyDecision:
        raise NotImplementedError

    def telemetry(self) -> dict:
        """Controller internals for the report stream; empty when N/A."""
        return {}


class PsWlPolicy(WearPolicy):
    """Probability-sensitive wear leveling.

    Per sampling period: refresh hotness classes and the conservative zone,
    run the PID on the lifetime error between disk groups, and, while
    chasing, migrate the hottest extremely-hot page from the most worn disk
    to the least worn one, gated by the hotness baseline and the zone. The
    ablation variant ranks and controls on raw P/E counts instead of
    effective lifetime; with a zero penalty weight the two are identical.
    """

    def __init__(self, control: WlController, lifetime: LifetimeParams,
                 failure: FailureModelParams, *, theta_hot: float = 0.8,
                 theta_cold: float = 0.1, zone: ConservativeZone,
                 use_effective_lifetime: bool = True):
        super().__init__(control.pid.t0)
        self.control = control
        self.lifetime = lifetime
        self.failure = failure
        self.theta_hot = theta_hot
        self.theta_cold = theta_cold
        self.zone = zone
        self.use_effective_lifetime = use_effective_lifetime
        self.name = "pswl" if use_effective_lifetime else "pswl_ablation"
        self.last_sample: ctl.SampleResult | None = None

    def disk_metric(self, pe: float) -> float:
        if self.use_effective_lifetime:
            return effective_lifetime(pe, self.lifetime, self.failure)
        return pe

    def _sample(self, view) -> PolicyDecision:
        metrics = [self.disk_metric(pe) for pe in view.pe_counts()]
        k_o = view.original_count
        l_orig, l_ext = metrics[:k_o], metrics[k_o:]
        try:
            loss = wl_io_ratio(view.wl_io, view.total_io)
        except ZeroDivisionError:
            loss = None
        result = self.control.sample(l_orig, l_ext, loss_now=loss)
        self.last_sample = result

        snap = HotnessSnapshot.from_window(view.window)
        snap.cut_classes(self.theta_hot, self.theta_cold)
        warm_idx = np.nonzero(snap.classes == HotnessClass.WARM.value)[0]
        ranked_warm = snap.pages[warm_idx][
            np.lexsort((snap.pages[warm_idx], -snap.h[warm_idx]))].tolist()
        update_conservative_zone(self.zone, ranked_warm, result.gap)

        if result.phase is not ControllerPhase.CHASING or result.u == 0.0:
            return NO_ACTION
        # the error's sign already steers the flow (worn disk -> fresh disk);
        # the baseline magnitude throttles how eagerly migrations are approved
        baseline = abs(result.u)
        src = min(range(len(metrics)), key=lambda d: (-metrics[d], d))
        dst = min(range(len(metrics)), key=lambda d: (metrics[d], d))
        if src == dst or not view.dest_has_room(dst):
            return NO_ACTION
        candidates = _candidates_on_disk(snap, view.unit_disk, src,
                                         HotnessClass.EXTREMELY_HOT)
        if not candidates:
            return NO_ACTION
        dest_hotness = float(
            _disk_mean_hotness(snap, view.unit_disk, view.disk_count)[dst])
        if not ctl.approve_migration(dest_hotness, baseline):
            return NO_ACTION
        page = candidates[0]
        if not migration_allowed(page, dst >= k_o, self.zone, result.gap):
            return NO_ACTION
        return migrate(page, src, dst)

    def telemetry(self) -> dict:
        r = self.last_sample
        pid = self.control.pid
        return {
            "e": r.e if r else 0.0,
            "u": r.u if r else 0.0,
            "gap": r.gap if r else 0.0,
            "kp": pid.kp, "ki": pid.ki, "kd": pid.kd,
            "phase": self.control.phase.value,
        }


class SwansPolicy(WearPolicy):
    """Unrestrained write-workload smoothing. While the wear spread exceeds
    a fixed threshold, each scan moves a block-sized batch of the hottest
    data from the busiest disk (by recent write activity) to the quietest.
    No baseline, no protection zone, no exit. Equalizing write rates leaves
    pre-existing wear differences in place, and the block-sized bursts are
    where its response-time jitter comes from."""

    name = "swans"

    def __init__(self, sampling_period: int, *, stddev_threshold: float = 1.0,
                 batch_pages: int = 1, theta_hot: float = 0.8, theta_cold: float = 0.1):
        super().__init__(sampling_period)
        self.stddev_threshold = stddev_threshold
        self.batch_pages = max(1, batch_pages)
        self.theta_hot = theta_hot
        self.theta_cold = theta_cold
        self._prev_activity: list[int] | None = None

    def _sample(self, view) -> PolicyDecision:
        # recent write rates, not lifetime totals: the monitor follows the
        # workload as it shifts
        cumulative = view.disk_write_activity()
        prev = self._prev_activity or [0] * len(cumulative)
        self._prev_activity = cumulative
        activity = [a - b for a, b in zip(cumulative, prev)]
        if _pstdev(view.pe_counts()) <= self.stddev_threshold:
            return NO_ACTION
        src = min(range(len(activity)), key=lambda d: (-activity[d], d))
        dst = min(range(len(activity)), key=lambda d: (activity[d], d))
        if src == dst or not view.dest_has_room(dst):
            return NO_ACTION
        snap = HotnessSnapshot.from_window(view.window)
        snap.cut_classes(self.theta_hot, self.theta_cold)
        candidates = _candidates_on_disk(snap, view.unit_disk, src, None)
        if not candidates:
            return NO_ACTION
        chunk = candidates[: self.batch_pages]
        return migrate(chunk[0], src, dst, batch=tuple(chunk[1:]))


class LazyWlPolicy(WearPolicy):
    """Restrained catch-up: a PID watches the wear standard deviation and
    produces the migration baseline, while a fixed-size conservative zone
    keeps the hottest data off the extended disks entirely. Catch-up is
    therefore carried by mid-tier pages, which is the scheme's deliberate
    caution and also its weakness: the parameters never adapt."""

    name = "lazy_wl"

    def __init__(self, sampling_period: int, *, kp: float = 0.01, ki: float = 0.00002,
                 kd: float = 0.002, k_ban: float = 0.2, n_base: int,
                 theta_hot: float = 0.8, theta_cold: float = 0.1, u_max: float = 1.0):
        super().__init__(sampling_period)
        self.pid = ctl.PidState(kp=kp, ki=ki, kd=kd, t0=sampling_period,
                                integral_limit=u_max / ki if ki > 0 else None)
        self.capacity = round(n_base * k_ban)
        self.members: set = set()
        self.theta_hot = theta_hot
        self.theta_cold = theta_cold
        self.u = 0.0

    def _sample(self, view) -> PolicyDecision:
        pes = view.pe_counts()
        self.u = ctl.pid_step(self.pid, _pstdev(pes))
        snap = HotnessSnapshot.from_window(view.window)
        snap.cut_classes(self.theta_hot, self.theta_cold)
        # static zone: the top slice of the hotness ranking, hot data first
        order = np.lexsort((snap.pages, -snap.h))
        self.members = set(snap.pages[order][: self.capacity].tolist())

        src = min(range(len(pes)), key=lambda d: (-pes[d], d))
        dst = min(range(len(pes)), key=lambda d: (pes[d], d))
        if src == dst or not view.dest_has_room(dst):
            return NO_ACTION
        dest_hotness = float(
            _disk_mean_hotness(snap, view.unit_disk, view.disk_count)[dst])
        if not ctl.approve_migration(dest_hotness, self.u):
            return NO_ACTION
        # hottest non-cold page on the most worn disk that the zone permits
        candidates = _candidates_on_disk(snap, view.unit_disk, src, None)
        for page in candidates:
            if snap.scalar_of(page) <= self.theta_cold:
                continue
            if page in self.members and dst >= view.original_count:
                continue  # hot data never lands on an extended disk
            return migrate(page, src, dst)
        return NO_ACTION

    def telemetry(self) -> dict:
        return {"u": self.u, "kp": self.pid.kp, "ki": self.pid.ki, "kd": self.pid.kd}


class EdmPolicy(WearPolicy):
    """Endurance-gap driven migration: when the wear gap between the most
    and least worn disks passes a threshold, move hot data first and fall
    back to cold data when no hot candidate exists."""

    name = "edm"

    def __init__(self, sampling_period: int, *, gap_threshold: float = 24.0,
                 theta_hot: float = 0.8, theta_cold: float = 0.1):
        super().__init__(sampling_period)
        self.gap_threshold = gap_threshold
        self.theta_hot = theta_hot
        self.theta_cold = theta_cold

    def _sample(self, view) -> PolicyDecision:
        pes = view.pe_counts()
        if max(pes) - min(pes) <= self.gap_threshold:
            return NO_ACTION
        src = min(range(len(pes)), key=lambda d: (-pes[d], d))
        dst = min(range(len(pes)), key=lambda d: (pes[d], d))
        if src == dst or not view.dest_has_room(dst):
            return NO_ACTION
        snap = HotnessSnapshot.from_window(view.window)
        snap.cut_classes(self.theta_hot, self.theta_cold)
        hot = _candidates_on_disk(snap, view.unit_disk, src, HotnessClass.EXTREMELY_HOT)
        if hot:
            return migrate(hot[0], src, dst)
        cold = _candidates_on_disk(snap, view.unit_disk, src, None, coldest=True)
        if cold:
            return migrate(cold[0], src, dst)
        return NO_ACTION
