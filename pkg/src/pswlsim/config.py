"""Experiment configuration: schema, validation, TOML loading.

Configs are nested tables mirroring the dataclasses below. Unknown keys are
rejected (sweep matrices are where typos hide), and scheme/RAID pairings
are checked up front.
"""

from __future__ import annotations

import math
import sys
from dataclasses import MISSING, asdict, dataclass, field, fields, is_dataclass

from .errors import ConfigError
from .scaling import SCHEME_RAID_LEVELS, RaidLevel

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

LN_3000 = math.log(3000.0)


@dataclass
class ArrayConfig:
    original_disks: int = 3
    scaling_disks: int = 1
    raid_level: str = "raid5"
    scaling_scheme: str = "rr"
    stripes: int = 0  # 0 = derive from device capacity


@dataclass
class FlashConfig:
    blocks_per_disk: int = 64
    pages_per_block: int = 32
    page_size: int = 4096
    max_pe_cycles: int = 1_000_000
    overprovision: float = 0.10
    gc_threshold: float = 0.05


@dataclass
class ReliabilityConfig:
    mu: float = LN_3000  # ln of the median-life P/E count
    sigma: float = 0.1
    k: float = 1.0
    k_p: float = 1000.0


@dataclass
class ControllerConfig:
    kp: float = 0.5
    ki: float = 0.01
    kd: float = 0.1
    sampling_period: int = 4096
    exit_threshold: float = 0.02
    restart_threshold: float = 0.0  # 0 = twice the exit threshold
    u_max: float = 1.0
    tuner_alpha: float = 0.05
    tuner_epoch: int = 16
    self_tuning: bool = True


@dataclass
class HotnessConfig:
    window: int = 65536
    theta_hot: float = 0.8
    theta_cold: float = 0.1
    k_ban_base: float = 0.2
    k_ban_max: float = 0.5
    gap_ref: float = 0.0  # 0 = twice the exit threshold


@dataclass
class SwansParams:
    stddev_threshold: float = 1.0
    scan_period: int = 0  # events between scans; 0 = sampling_period / 8
    batch_pages: int = 0  # pages per activation; 0 = one flash block


@dataclass
class LazyWlParams:
    kp: float = 0.01
    ki: float = 0.00002
    kd: float = 0.002
    k_ban: float = 0.2


@dataclass
class EdmParams:
    gap_threshold: float = 24.0


@dataclass
class PolicyConfig:
    kind: str = "pswl"
    swans: SwansParams = field(default_factory=SwansParams)
    lazy_wl: LazyWlParams = field(default_factory=LazyWlParams)
    edm: EdmParams = field(default_factory=EdmParams)


@dataclass
class LatencyConfig:
    read_us: float = 50.0
    program_us: float = 500.0
    erase_us: float = 3000.0


@dataclass
class WorkloadSection:
    source: str = "synthetic"
    trace_path: str = ""
    ops: int = 100_000
    write_fraction: float = 0.9
    zipf_skew: float = 1.0
    address_space: int = 0  # 0 = the array's data-unit count
    inter_arrival_us: float = 10.0
    hotset_shifts: int = 0


@dataclass
class InitialWearConfig:
    mode: str = "none"  # none | probability | explicit
    probability: float = 1e-4
    pe_counts: list = field(default_factory=list)


@dataclass
class RunSection:
    until: str = "stream_end"  # stream_end | converged
    seed: int = 1


@dataclass
class ExperimentConfig:
    array: ArrayConfig = field(default_factory=ArrayConfig)
    flash: FlashConfig = field(default_factory=FlashConfig)
    reliability: ReliabilityConfig = field(default_factory=ReliabilityConfig)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    hotness: HotnessConfig = field(default_factory=HotnessConfig)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    latency: LatencyConfig = field(default_factory=LatencyConfig)
    workload: WorkloadSection = field(default_factory=WorkloadSection)
    initial_wear: InitialWearConfig = field(default_factory=InitialWearConfig)
    run: RunSection = field(default_factory=RunSection)

    # ------------------------------------------------------------------

    @property
    def restart_threshold(self) -> float:
        c = self.controller
        return c.restart_threshold if c.restart_threshold > 0 else 2.0 * c.exit_threshold

    @property
    def gap_ref(self) -> float:
        h = self.hotness
        return h.gap_ref if h.gap_ref > 0 else 2.0 * self.controller.exit_threshold

    def raid_level(self) -> RaidLevel:
        try:
            return RaidLevel(self.array.raid_level)
        except ValueError:
            raise ConfigError(f"unknown raid_level {self.array.raid_level!r}") from None

    def validate(self) -> None:
        a = self.array
        if a.original_disks < 1:
            raise ConfigError("original_disks must be >= 1")
        if a.scaling_disks < 0:
            raise ConfigError("scaling_disks must be >= 0")
        level = self.raid_level()
        if a.scaling_scheme not in SCHEME_RAID_LEVELS:
            raise ConfigError(f"unknown scaling_scheme {a.scaling_scheme!r}")
        if level not in SCHEME_RAID_LEVELS[a.scaling_scheme]:
            allowed = ", ".join(l.value for l in SCHEME_RAID_LEVELS[a.scaling_scheme])
            raise ConfigError(
                f"scheme {a.scaling_scheme!r} supports {allowed}, not {level.value}")
        if a.original_disks <= level.parity_disks:
            raise ConfigError(
                f"{level.value} needs more than {level.parity_disks} disks")
        f = self.flash
        for name in ("blocks_per_disk", "pages_per_block", "page_size", "max_pe_cycles"):
            if getattr(f, name) < 1:
                raise ConfigError(f"flash.{name} must be >= 1")
        if not 0.0 <= f.overprovision < 1.0:
            raise ConfigError("flash.overprovision must be in [0,1)")
        if not 0.0 < f.gc_threshold < 1.0:
            raise ConfigError("flash.gc_threshold must be in (0,1)")
        r = self.reliability
        if r.sigma <= 0:
            raise ConfigError("reliability.sigma must be > 0")
        if r.k <= 0:
            raise ConfigError("reliability.k must be > 0")
        if r.k_p < 0:
            raise ConfigError("reliability.k_p must be >= 0")
        c = self.controller
        if c.sampling_period < 1:
            raise ConfigError("controller.sampling_period must be >= 1")
        if c.exit_threshold <= 0:
            raise ConfigError("controller.exit_threshold must be > 0")
        if self.restart_threshold <= c.exit_threshold:
            raise ConfigError("restart_threshold must exceed exit_threshold")
        if c.tuner_alpha <= 0 or c.tuner_epoch < 1:
            raise ConfigError("controller tuner parameters out of range")
        h = self.hotness
        if h.window < 1:
            raise ConfigError("hotness.window must be >= 1")
        if not h.theta_cold < h.theta_hot:
            raise ConfigError("hotness.theta_cold must be below theta_hot")
        if self.policy.kind not in ("pswl", "pswl_ablation", "swans", "lazy_wl", "edm"):
            raise ConfigError(f"unknown policy kind {self.policy.kind!r}")
        lat = self.latency
        if min(lat.read_us, lat.program_us, lat.erase_us) < 0:
            raise ConfigError("latency values must be >= 0")
        w = self.workload
        if w.source not in ("synthetic", "trace"):
            raise ConfigError(f"unknown workload source {w.source!r}")
        if w.source == "trace" and not w.trace_path:
            raise ConfigError("workload.trace_path required for trace source")
        if w.ops < 0 or not 0.0 <= w.write_fraction <= 1.0 or w.zipf_skew < 0:
            raise ConfigError("workload parameters out of range")
        iw = self.initial_wear
        if iw.mode not in ("none", "probability", "explicit"):
            raise ConfigError(f"unknown initial_wear mode {iw.mode!r}")
        if iw.mode == "probability" and not 0.0 < iw.probability < 1.0:
            raise ConfigError("initial_wear.probability must be in (0,1)")
        if iw.mode == "explicit":
            want = a.original_disks + a.scaling_disks
            if len(iw.pe_counts) != want:
                raise ConfigError(
                    f"initial_wear.pe_counts needs {want} entries, got {len(iw.pe_counts)}")
        if self.run.until not in ("stream_end", "converged"):
            raise ConfigError(f"unknown run.until {self.run.until!r}")

    def to_dict(self) -> dict:
        return asdict(self)


def _build(cls, data: dict, path: str):
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"unknown key {path}{key!r}")
        factory = known[key].default_factory
        nested = factory is not MISSING and is_dataclass(factory)
        if nested:
            if not isinstance(value, dict):
                raise ConfigError(f"{path}{key} must be a table")
            kwargs[key] = _build(factory, value, f"{path}{key}.")
        elif isinstance(value, dict):
            raise ConfigError(f"{path}{key} does not take a table")
        else:
            kwargs[key] = value
    return cls(**kwargs)


def config_from_dict(data: dict) -> ExperimentConfig:
    cfg = _build(ExperimentConfig, data, "")
    cfg.validate()
    return cfg


def load_config(path: str) -> ExperimentConfig:
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(data)
