"""Per-page access dynamics over a sliding event window.

Three raw metrics are tracked per logical page: access frequency (count of
in-window references), recency (events since the last reference), and
compactness (intervening events between the two most recent references,
undefined with fewer than two). Min-max normalization maps them onto [0,1]
hotness components; their mean is the scalar hotness used for class cuts
and ranking. Pages that age out of the window are cold by definition.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ConfigError


class HotnessClass(Enum):
    COLD = 0
    WARM = 1
    EXTREMELY_HOT = 2


@dataclass
class PageHotness:
    page: int
    freq: int
    recency: int
    compactness: int | None
    h_freq: float | None = None
    h_rec: float | None = None
    h_comp: float | None = None

    @property
    def scalar(self) -> float | None:
        if self.h_freq is None:
            return None
        return (self.h_freq + self.h_rec + self.h_comp) / 3.0


class AccessWindow:
    """Sliding window over the last ``capacity`` access events."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ConfigError(f"window capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self.events: deque[tuple[int, int]] = deque()  # (event_index, page)
        self._refs: dict[int, deque[int]] = {}  # page -> its event indices
        self.latest_index = -1

    def __len__(self):
        return len(self.events)

    def tracked_pages(self):
        return self._refs.keys()

    def record(self, page: int) -> None:
        self.latest_index += 1
        idx = self.latest_index
        self.events.append((idx, page))
        self._refs.setdefault(page, deque()).append(idx)
        if len(self.events) > self.capacity:
            old_idx, old_page = self.events.popleft()
            refs = self._refs[old_page]
            assert refs[0] == old_idx
            refs.popleft()
            if not refs:
                del self._refs[old_page]

    def raw_metrics(self, page: int) -> PageHotness | None:
        refs = self._refs.get(page)
        if not refs:
            return None
        freq = len(refs)
        recency = self.latest_index - refs[-1]
        compactness = refs[-1] - refs[-2] - 1 if freq >= 2 else None
        return PageHotness(page=page, freq=freq, recency=recency, compactness=compactness)


def record_access(window: AccessWindow, page: int) -> PageHotness:
    """Append one access event and return the touched page's raw metrics."""
    window.record(page)
    metrics = window.raw_metrics(page)
    assert metrics is not None
    return metrics


def normalize(window: AccessWindow) -> dict[int, PageHotness]:
    """Min-max normalize all tracked pages' metrics.

    Degenerate ranges (max == min) map every page to 0.5 for that component;
    undefined compactness maps to 0.
    """
    snap = HotnessSnapshot.from_window(window)
    out = {}
    for i, page in enumerate(snap.pages):
        comp = int(snap.compactness[i])
        out[int(page)] = PageHotness(
            page=int(page),
            freq=int(snap.freq[i]),
            recency=int(snap.recency[i]),
            compactness=None if comp < 0 else comp,
            h_freq=float(snap.h_freq[i]),
            h_rec=float(snap.h_rec[i]),
            h_comp=float(snap.h_comp[i]),
        )
    return out


def classify(hotness: dict[int, PageHotness], theta_hot: float,
             theta_cold: float) -> dict[int, HotnessClass]:
    """Three-way cut of the scalar hotness: >= theta_hot is extremely hot,
    <= theta_cold is cold, anything between is warm."""
    if theta_cold >= theta_hot:
        raise ConfigError(
            f"theta_cold ({theta_cold}) must be below theta_hot ({theta_hot})")
    out = {}
    for page, ph in hotness.items():
        h = ph.scalar
        if h is None:
            raise ConfigError("classify() needs normalized hotness values")
        if h >= theta_hot:
            out[page] = HotnessClass.EXTREMELY_HOT
        elif h <= theta_cold:
            out[page] = HotnessClass.COLD
        else:
            out[page] = HotnessClass.WARM
    return out


class HotnessSnapshot:
    """Vectorized view of one normalization pass, for the simulation loop.

    Arrays are aligned: ``pages[i]`` has components ``h_freq[i]`` etc. and
    scalar hotness ``h[i]``. ``classes`` holds HotnessClass values as ints.
    """

    __slots__ = ("pages", "freq", "recency", "compactness",
                 "h_freq", "h_rec", "h_comp", "h", "classes", "_index")

    def __init__(self, pages, freq, recency, compactness):
        self.pages = pages
        self.freq = freq
        self.recency = recency
        self.compactness = compactness
        self.h_freq = _minmax(freq.astype(np.float64))
        self.h_rec = 1.0 - _minmax(recency.astype(np.float64))
        self.h_comp = _comp_scores(compactness)
        self.h = (self.h_freq + self.h_rec + self.h_comp) / 3.0
        self.classes = None
        self._index = None

    @classmethod
    def from_window(cls, window: AccessWindow) -> "HotnessSnapshot":
        n = len(window._refs)
        pages = np.empty(n, dtype=np.int64)
        freq = np.empty(n, dtype=np.int64)
        recency = np.empty(n, dtype=np.int64)
        compactness = np.full(n, -1, dtype=np.int64)
        latest = window.latest_index
        for i, (page, refs) in enumerate(window._refs.items()):
            pages[i] = page
            freq[i] = len(refs)
            recency[i] = latest - refs[-1]
            if len(refs) >= 2:
                compactness[i] = refs[-1] - refs[-2] - 1
        return cls(pages, freq, recency, compactness)

    def cut_classes(self, theta_hot: float, theta_cold: float) -> None:
        if theta_cold >= theta_hot:
            raise ConfigError(
                f"theta_cold ({theta_cold}) must be below theta_hot ({theta_hot})")
        classes = np.full(self.h.shape, HotnessClass.WARM.value, dtype=np.int8)
        classes[self.h >= theta_hot] = HotnessClass.EXTREMELY_HOT.value
        classes[self.h <= theta_cold] = HotnessClass.COLD.value
        self.classes = classes

    def scalar_of(self, page: int) -> float:
        if self._index is None:
            self._index = {int(p): i for i, p in enumerate(self.pages)}
        i = self._index.get(page)
        return 0.0 if i is None else float(self.h[i])


def _minmax(values: np.ndarray) -> np.ndarray:
    if values.size == 0:
        return values
    lo, hi = values.min(), values.max()
    if hi == lo:
        return np.full(values.shape, 0.5)
    return (values - lo) / (hi - lo)


def _comp_scores(compactness: np.ndarray) -> np.ndarray:
    # -1 marks "fewer than two in-window references": scored 0
    out = np.zeros(compactness.shape, dtype=np.float64)
    defined = compactness >= 0
    if defined.any():
        vals = compactness[defined].astype(np.float64)
        lo, hi = vals.min(), vals.max()
        out[defined] = 0.5 if hi == lo else 1.0 - (vals - lo) / (hi - lo)
    return out


@dataclass
class ConservativeZone:
    """Warm pages shielded from migrating onto extended disks while the
    lifetime gap is small. Capacity adapts: it shrinks linearly as the gap
    grows toward ``gap_ref`` (a wide gap means catch-up matters more than
    protecting warm data)."""

    n_base: int
    k_ban_base: float = 0.2
    k_ban_max: float = 0.5
    gap_ref: float = 0.04
    k_ban: float = 0.0
    capacity: int = 0
    members: set = field(default_factory=set)


def update_conservative_zone(zone: ConservativeZone, ranked_warm, gap: float) -> ConservativeZone:
    """Recompute the zone for the current gap and warm ranking.

    ``ranked_warm`` must already be ordered by descending hotness; the most
    churn-prone warm pages get protected first.
    """
    if gap < 0:
        raise ConfigError(f"gap must be >= 0, got {gap}")
    k_ban = zone.k_ban_base * (1.0 - gap / zone.gap_ref)
    zone.k_ban = min(max(k_ban, 0.0), zone.k_ban_max)
    zone.capacity = round(zone.n_base * zone.k_ban)
    members = set()
    for page in ranked_warm:
        if len(members) >= zone.capacity:
            break
        members.add(page)
    zone.members = members
    return zone


def migration_allowed(page: int, dest_is_extended: bool, zone: ConservativeZone,
                      gap: float) -> bool:
    """Deny only the protected case: a zone member heading to an extended
    disk while the lifetime gap is still small."""
    return not (page in zone.members and dest_is_extended and gap < zone.gap_ref)
