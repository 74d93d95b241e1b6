"""Workload ingestion: block-trace replay and synthetic generation.

Traces are comma-separated ``device_id,opcode,offset,length,timestamp``
lines (opcode R/W, byte offsets and lengths, microsecond timestamps),
optionally gzip-compressed. Each record expands to one access per page it
spans, wrapped modulo the simulated logical capacity so full-scale traces
stay usable on desk-scale arrays. Synthetic streams draw pages from a
bounded Zipf distribution; the same seed always yields the same stream.
"""

from __future__ import annotations

import gzip
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, FormatError, IoError


@dataclass
class SyntheticSpec:
    op_count: int
    address_space: int
    write_fraction: float = 0.9
    skew: float = 1.0  # Zipf exponent; 0 = uniform
    seed: int = 1
    inter_arrival_us: float = 10.0
    hotset_shifts: int = 0  # times the popularity ranking is reshuffled

    def __post_init__(self):
        if self.op_count < 0:
            raise DomainError("op_count must be >= 0")
        if self.address_space < 1:
            raise DomainError("address_space must be >= 1")
        if not 0.0 <= self.write_fraction <= 1.0:
            raise DomainError("write_fraction must be in [0,1]")
        if self.skew < 0:
            raise DomainError("skew must be >= 0")
        if self.hotset_shifts < 0:
            raise DomainError("hotset_shifts must be >= 0")


class WorkloadStream:
    """Column-wise access stream: times (us), write flags, page numbers."""

    def __init__(self, times_us: np.ndarray, is_write: np.ndarray, pages: np.ndarray):
        assert len(times_us) == len(is_write) == len(pages)
        self.times_us = times_us
        self.is_write = is_write
        self.pages = pages

    def __len__(self):
        return len(self.pages)

    def events(self):
        """Iterate (time_us, is_write, page) tuples in stream order."""
        return zip(self.times_us.tolist(), self.is_write.tolist(), self.pages.tolist())


@dataclass
class ParseReport:
    lines: int = 0
    malformed: int = 0
    records: int = 0
    accesses: int = 0


def parse_trace(path: str, page_size: int, address_space: int) -> tuple[WorkloadStream, ParseReport]:
    """Load a trace file into a replayable stream.

    Malformed lines are counted and skipped; more than 1% of them fails the
    whole file. Records are sorted by timestamp before expansion.
    """
    if page_size < 1 or address_space < 1:
        raise DomainError("page_size and address_space must be >= 1")
    report = ParseReport()
    records = []
    opener = gzip.open if str(path).endswith(".gz") else open
    try:
        fh = opener(path, "rt")
    except OSError as exc:
        raise IoError(f"cannot open trace {path}: {exc}") from exc
    with fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            report.lines += 1
            parts = line.split(",")
            if len(parts) != 5:
                report.malformed += 1
                continue
            try:
                opcode = parts[1].strip().upper()
                offset = int(parts[2])
                length = int(parts[3])
                timestamp = int(parts[4])
            except ValueError:
                report.malformed += 1
                continue
            if opcode not in ("R", "W") or offset < 0 or length <= 0:
                report.malformed += 1
                continue
            records.append((timestamp, opcode == "W", offset, length))
    if report.lines and report.malformed > 0.01 * report.lines:
        raise FormatError(
            f"{report.malformed} of {report.lines} trace lines malformed")
    report.records = len(records)
    records.sort(key=lambda r: r[0])

    times, writes, pages = [], [], []
    for timestamp, is_write, offset, length in records:
        first = offset // page_size
        for i in range(math.ceil(length / page_size)):
            times.append(timestamp)
            writes.append(is_write)
            pages.append((first + i) % address_space)
    report.accesses = len(pages)
    stream = WorkloadStream(
        np.asarray(times, dtype=np.float64).reshape(-1),
        np.asarray(writes, dtype=bool).reshape(-1),
        np.asarray(pages, dtype=np.int64).reshape(-1),
    )
    return stream, report


def generate_synthetic(spec: SyntheticSpec) -> WorkloadStream:
    """Zipf-popularity stream: page of rank r is drawn with weight r^-skew.

    With hotset_shifts > 0 the stream splits into equal phases and the
    rank-to-page assignment is reshuffled at each phase boundary, modeling a
    workload whose hot set moves over time.
    """
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    n = spec.op_count
    ranks_idx = np.arange(1, spec.address_space + 1, dtype=np.float64)
    weights = ranks_idx ** -spec.skew
    cdf = np.cumsum(weights)
    cdf /= cdf[-1]
    ranks = np.searchsorted(cdf, rng.random(n), side="right").astype(np.int64)
    phases = spec.hotset_shifts + 1
    if phases == 1:
        pages = ranks
    else:
        pages = np.empty(n, dtype=np.int64)
        mapping = np.arange(spec.address_space, dtype=np.int64)
        bounds = [n * i // phases for i in range(phases + 1)]
        for i in range(phases):
            lo, hi = bounds[i], bounds[i + 1]
            pages[lo:hi] = mapping[ranks[lo:hi]]
            if i + 1 < phases:
                mapping = rng.permutation(spec.address_space).astype(np.int64)
    is_write = rng.random(n) < spec.write_fraction
    times = np.arange(n, dtype=np.float64) * spec.inter_arrival_us
    return WorkloadStream(times, is_write, pages)
