"""Page-level model of a single SSD.

Out-of-place writes, block-granularity erases, greedy garbage collection and
P/E accounting. The mapping policy is intentionally plain (append into an
active block that advances round-robin): intra-disk wear leveling is not the
point of this simulator, inter-disk leveling is.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .errors import CapacityExceeded, DeviceWornOut, DomainError


class PageState(Enum):
    FREE = 0
    VALID = 1
    INVALID = 2


@dataclass(frozen=True)
class DeviceGeometry:
    blocks_per_disk: int
    pages_per_block: int
    max_pe_cycles: int
    page_size: int = 4096

    def __post_init__(self):
        for name in ("blocks_per_disk", "pages_per_block", "max_pe_cycles", "page_size"):
            if getattr(self, name) < 1:
                raise DomainError(f"{name} must be >= 1")

    @property
    def total_pages(self) -> int:
        return self.blocks_per_disk * self.pages_per_block


@dataclass
class WriteOutcome:
    pages_programmed: int = 0  # host page + GC relocations
    gc_relocations: int = 0
    gc_erases: int = 0


class DeviceState:
    """One simulated SSD.

    The logical address space is ``total_pages * (1 - overprovision)``; the
    reserve is what keeps greedy GC able to make progress. ``gc_threshold``
    is the fraction of blocks kept fully free; dropping below it triggers GC
    after a program completes.
    """

    def __init__(self, geometry: DeviceGeometry, overprovision: float = 0.10,
                 gc_threshold: float = 0.05):
        if not 0.0 <= overprovision < 1.0:
            raise DomainError(f"overprovision must be in [0,1), got {overprovision}")
        if not 0.0 < gc_threshold < 1.0:
            raise DomainError(f"gc_threshold must be in (0,1), got {gc_threshold}")
        self.geometry = geometry
        self.overprovision = overprovision
        self.gc_threshold = gc_threshold
        self.logical_capacity = int(geometry.total_pages * (1.0 - overprovision))
        # blocks kept fully free; GC runs while the pool is below this
        self.gc_threshold_blocks = max(1, math.ceil(geometry.blocks_per_disk * gc_threshold))

        npages = geometry.total_pages
        self.page_states = [PageState.FREE] * npages
        self.block_erase_counts = [0] * geometry.blocks_per_disk
        self.map: dict[int, int] = {}  # lpn -> physical page
        self.rmap: dict[int, int] = {}  # physical page -> lpn
        self._block_valid = [0] * geometry.blocks_per_disk
        self._block_free = [geometry.pages_per_block] * geometry.blocks_per_disk
        self._free_block_count = geometry.blocks_per_disk
        self.active_block = 0

    # ------------------------------------------------------------------
    # derived state

    @property
    def pe_count(self) -> float:
        """Average block erase count; the device's wear as a smooth scalar."""
        return sum(self.block_erase_counts) / self.geometry.blocks_per_disk

    @property
    def mapped_pages(self) -> int:
        return len(self.map)

    @property
    def free_block_count(self) -> int:
        return self._free_block_count

    def counts(self):
        """(valid, invalid, free) page totals; cheap conservation check."""
        valid = sum(self._block_valid)
        free = sum(self._block_free)
        return valid, self.geometry.total_pages - valid - free, free

    # ------------------------------------------------------------------
    # internals

    def _block_of(self, ppn: int) -> int:
        return ppn // self.geometry.pages_per_block

    def _is_worn(self, block: int) -> bool:
        return self.block_erase_counts[block] >= self.geometry.max_pe_cycles

    def _program_into(self, block: int, lpn: int) -> int:
        ppb = self.geometry.pages_per_block
        base = block * ppb
        for ppn in range(base, base + ppb):
            if self.page_states[ppn] is PageState.FREE:
                if self._block_free[block] == ppb:
                    self._free_block_count -= 1
                self.page_states[ppn] = PageState.VALID
                self._block_valid[block] += 1
                self._block_free[block] -= 1
                self.map[lpn] = ppn
                self.rmap[ppn] = lpn
                return ppn
        raise AssertionError("block advertised free pages it does not have")

    def _advance_active(self, exclude: int | None = None) -> int:
        """Next block (round-robin from the active one) with a free page,
        skipping worn blocks and ``exclude``."""
        nb = self.geometry.blocks_per_disk
        for off in range(nb):
            b = (self.active_block + off) % nb
            if b == exclude or self._is_worn(b):
                continue
            if self._block_free[b] > 0:
                self.active_block = b
                return b
        raise DeviceWornOut("no writable block with a free page")

    def _invalidate(self, ppn: int) -> None:
        block = self._block_of(ppn)
        self.page_states[ppn] = PageState.INVALID
        self._block_valid[block] -= 1
        lpn = self.rmap.pop(ppn)
        self.map.pop(lpn, None)

    def _erase(self, block: int) -> None:
        if self._is_worn(block):
            raise DeviceWornOut(f"block {block} is at its P/E limit")
        ppb = self.geometry.pages_per_block
        base = block * ppb
        for ppn in range(base, base + ppb):
            if self.page_states[ppn] is PageState.VALID:
                raise AssertionError("erasing a block that still holds valid pages")
            self.page_states[ppn] = PageState.FREE
        self._block_valid[block] = 0
        self._block_free[block] = ppb
        self._free_block_count += 1
        self.block_erase_counts[block] += 1

    def _gc_victim(self) -> int:
        """Greedy victim: fewest valid pages among used, erasable blocks;
        the active block is never a victim. Ties break to the lowest index."""
        best = -1
        best_valid = None
        ppb = self.geometry.pages_per_block
        any_candidate = False
        for b in range(self.geometry.blocks_per_disk):
            if b == self.active_block or self._block_free[b] == ppb:
                continue
            any_candidate = True
            if self._is_worn(b):
                continue
            v = self._block_valid[b]
            if best_valid is None or v < best_valid:
                best, best_valid = b, v
        if best < 0:
            if any_candidate:
                raise DeviceWornOut("every GC candidate block is at its P/E limit")
            raise CapacityExceeded("no GC candidate; device over-filled")
        return best

    def _run_gc(self, outcome: WriteOutcome) -> None:
        iterations = 0
        while self._free_block_count < self.gc_threshold_blocks:
            iterations += 1
            if iterations > self.geometry.blocks_per_disk:
                raise CapacityExceeded(
                    "GC cannot restore the free-block reserve; "
                    "overprovision too small for this workload")
            victim = self._gc_victim()
            ppb = self.geometry.pages_per_block
            base = victim * ppb
            for ppn in range(base, base + ppb):
                if self.page_states[ppn] is not PageState.VALID:
                    continue
                lpn = self.rmap[ppn]
                dest = self._advance_active(exclude=victim)
                self._invalidate(ppn)
                self._program_into(dest, lpn)
                outcome.gc_relocations += 1
                outcome.pages_programmed += 1
            self._erase(victim)
            outcome.gc_erases += 1

    # ------------------------------------------------------------------
    # public operations

    def host_write(self, lpn: int) -> WriteOutcome:
        """Out-of-place write of one logical page, running GC if the free
        pool drops below threshold afterwards."""
        if not 0 <= lpn < self.logical_capacity:
            raise CapacityExceeded(
                f"lpn {lpn} outside logical capacity {self.logical_capacity}")
        outcome = WriteOutcome()
        old = self.map.get(lpn)
        if old is not None:
            self._invalidate(old)
        if self._block_free[self.active_block] == 0 or self._is_worn(self.active_block):
            self._advance_active()
        self._program_into(self.active_block, lpn)
        outcome.pages_programmed += 1
        if self._free_block_count < self.gc_threshold_blocks:
            self._run_gc(outcome)
        return outcome

    def trim(self, lpn: int) -> bool:
        """Drop a logical page without writing (migration source side)."""
        ppn = self.map.get(lpn)
        if ppn is None:
            return False
        self._invalidate(ppn)
        return True

    def preload(self, lpn_count: int) -> None:
        """Mark ``lpn_count`` logical pages as already present, without any
        I/O accounting. Models an array that was in service before the run."""
        if lpn_count > self.logical_capacity:
            raise CapacityExceeded(
                f"preload of {lpn_count} exceeds capacity {self.logical_capacity}")
        for lpn in range(lpn_count):
            if self._block_free[self.active_block] == 0:
                self._advance_active()
            self._program_into(self.active_block, lpn)

    def set_uniform_wear(self, target_pe: float) -> None:
        """Set block erase counts so the device average is ~``target_pe``."""
        if target_pe < 0:
            raise DomainError("wear must be >= 0")
        if target_pe > self.geometry.max_pe_cycles:
            raise DomainError(
                f"wear {target_pe} exceeds max_pe_cycles {self.geometry.max_pe_cycles}")
        nb = self.geometry.blocks_per_disk
        base = int(target_pe)
        extra = round((target_pe - base) * nb)
        for b in range(nb):
            self.block_erase_counts[b] = min(
                base + (1 if b < extra else 0), self.geometry.max_pe_cycles)


def erase_count_stddev(devs) -> float:
    """Population standard deviation of per-device wear."""
    pes = [d.pe_count for d in devs]
    if not pes:
        raise DomainError("need at least one device")
    mean = sum(pes) / len(pes)
    return (sum((x - mean) ** 2 for x in pes) / len(pes)) ** 0.5
