"""Post-scaling target layouts and migration plans.

A layout places logical data units on (disk, row) cells; a stripe is one
row, and parity cells for RAID-5/6 rows live in a separate map. Four
planners cover the redistribution styles compared in the experiments:

* round-robin: full re-stripe over the widened array; moves nearly all data
  and recomputes parity for every stripe.
* fastscale (RAID-0): moves exactly the balancing share of units, old disks
  to new disks only.
* gsr-style (RAID-5): preserves a leading segment of stripes untouched and
  re-stripes the trailing segment across all disks at fresh rows.
* sdm-style (RAID-6): rebalances unit counts by moving units sideways
  within their own stripe, so stripe membership and parity never change.

The gsr/sdm planners follow the published goals (minimal movement, minimal
parity work, uniformity) rather than reproducing the original algorithms
step by step, and reports label them accordingly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .errors import DomainError, UnsupportedRaidLevel


class RaidLevel(Enum):
    RAID0 = "raid0"
    RAID5 = "raid5"
    RAID6 = "raid6"

    @property
    def parity_disks(self) -> int:
        return {"raid0": 0, "raid5": 1, "raid6": 2}[self.value]


Cell = tuple[int, int]  # (disk, row)


@dataclass
class ArrayLayout:
    raid_level: RaidLevel
    disk_count: int
    stripe_map: dict[int, Cell] = field(default_factory=dict)  # unit -> cell
    parity_map: dict[int, tuple[int, ...]] = field(default_factory=dict)  # row -> disks

    @property
    def data_units(self) -> int:
        return len(self.stripe_map)

    def rows_of(self) -> dict[int, list[int]]:
        """row -> units (sorted), derived from the stripe map."""
        rows: dict[int, list[int]] = {}
        for unit, (_, row) in self.stripe_map.items():
            rows.setdefault(row, []).append(unit)
        for units in rows.values():
            units.sort()
        return rows

    def occupied_cells(self) -> set[Cell]:
        cells = set(self.stripe_map.values())
        for row, disks in self.parity_map.items():
            for d in disks:
                cells.add((d, row))
        return cells

    def copy(self) -> "ArrayLayout":
        return ArrayLayout(self.raid_level, self.disk_count,
                           dict(self.stripe_map),
                           {r: tuple(d) for r, d in self.parity_map.items()})


@dataclass
class MigrationPlan:
    """Ordered unit moves plus the stripes whose parity must be rewritten."""

    moves: list[tuple[int, Cell, Cell]] = field(default_factory=list)
    parity_rows: list[int] = field(default_factory=list)

    @property
    def parity_updates(self) -> int:
        return len(self.parity_rows)

    def to_text(self) -> str:
        lines = [f"{u},{s[0]},{s[1]},{d[0]},{d[1]}" for u, s, d in self.moves]
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def from_text(cls, text: str) -> "MigrationPlan":
        plan = cls()
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            u, sd, so, dd, do = (int(x) for x in line.split(","))
            plan.moves.append((u, (sd, so), (dd, do)))
        return plan


def canonical_layout(raid_level: RaidLevel, disk_count: int, data_units: int,
                     start_row: int = 0, first_unit: int = 0) -> ArrayLayout:
    """Row-major layout with rotated parity; the reference arrangement that
    round-robin scaling re-stripes into."""
    npar = raid_level.parity_disks
    width = disk_count - npar
    if width < 1:
        raise DomainError(
            f"{raid_level.value} needs more than {npar} disks, got {disk_count}")
    layout = ArrayLayout(raid_level, disk_count)
    unit = first_unit
    row = start_row
    remaining = data_units
    while remaining > 0:
        pdisks = _parity_disks_for_row(raid_level, disk_count, row)
        data_cols = [c for c in range(disk_count) if c not in pdisks]
        take = min(width, remaining)
        for j in range(take):
            layout.stripe_map[unit] = (data_cols[j], row)
            unit += 1
        if npar:
            layout.parity_map[row] = pdisks
        remaining -= take
        row += 1
    return layout


def _parity_disks_for_row(raid_level: RaidLevel, disk_count: int, row: int) -> tuple[int, ...]:
    if raid_level is RaidLevel.RAID0:
        return ()
    p = (disk_count - 1 - (row % disk_count)) % disk_count
    if raid_level is RaidLevel.RAID5:
        return (p,)
    return (p, (p + 1) % disk_count)


def validate_layout(layout: ArrayLayout) -> None:
    """Raise DomainError on any structural violation."""
    seen: set[Cell] = set()
    for unit, (disk, row) in layout.stripe_map.items():
        if not 0 <= disk < layout.disk_count:
            raise DomainError(f"unit {unit} on nonexistent disk {disk}")
        if (disk, row) in seen:
            raise DomainError(f"cell collision at disk {disk} row {row}")
        seen.add((disk, row))
    npar = layout.raid_level.parity_disks
    rows = layout.rows_of()
    if npar == 0:
        if layout.parity_map:
            raise DomainError("parity entries on a RAID-0 layout")
        return
    for row in rows:
        pdisks = layout.parity_map.get(row)
        if pdisks is None:
            raise DomainError(f"row {row} holds data but has no parity")
        if len(pdisks) != npar or len(set(pdisks)) != npar:
            raise DomainError(f"row {row} needs {npar} distinct parity disks")
        for d in pdisks:
            if not 0 <= d < layout.disk_count:
                raise DomainError(f"row {row} parity on nonexistent disk {d}")
            if (d, row) in seen:
                raise DomainError(f"row {row} parity collides with data on disk {d}")
            seen.add((d, row))


def apply_plan(old: ArrayLayout, plan: MigrationPlan,
               target_disk_count: int) -> ArrayLayout:
    """Replay a plan onto a layout (lift all movers, then place them)."""
    out = old.copy()
    out.disk_count = target_disk_count
    for unit, src, _ in plan.moves:
        if out.stripe_map.get(unit) != src:
            raise DomainError(f"move source mismatch for unit {unit}")
        del out.stripe_map[unit]
    for unit, _, dst in plan.moves:
        out.stripe_map[unit] = dst
    return out


def _diff_moves(old: ArrayLayout, new: ArrayLayout) -> list[tuple[int, Cell, Cell]]:
    moves = []
    for unit in sorted(old.stripe_map):
        src = old.stripe_map[unit]
        dst = new.stripe_map[unit]
        if src != dst:
            moves.append((unit, src, dst))
    return moves


def _changed_parity_rows(old: ArrayLayout, new: ArrayLayout) -> list[int]:
    if new.raid_level.parity_disks == 0:
        return []
    old_rows = old.rows_of()
    changed = []
    for row, units in sorted(new.rows_of().items()):
        if (old_rows.get(row) != units
                or old.parity_map.get(row) != new.parity_map.get(row)):
            changed.append(row)
    return changed


def plan_rr(old: ArrayLayout, k_s: int) -> tuple[ArrayLayout, MigrationPlan]:
    """Full round-robin re-stripe across the widened array."""
    if k_s < 0:
        raise DomainError("k_s must be >= 0")
    target_disks = old.disk_count + k_s
    target = canonical_layout(old.raid_level, target_disks, old.data_units)
    plan = MigrationPlan(moves=_diff_moves(old, target),
                         parity_rows=_changed_parity_rows(old, target))
    return target, plan


def plan_fastscale(old: ArrayLayout, k_s: int) -> tuple[ArrayLayout, MigrationPlan]:
    """Move only the balancing share of units, strictly old disk -> new disk."""
    if old.raid_level is not RaidLevel.RAID0:
        raise UnsupportedRaidLevel("fastscale plans RAID-0 arrays only")
    if k_s < 0:
        raise DomainError("k_s must be >= 0")
    d_old = old.disk_count
    d_new = d_old + k_s
    target = old.copy()
    target.disk_count = d_new
    plan = MigrationPlan()
    if k_s == 0 or old.data_units == 0:
        return target, plan

    n = old.data_units
    counts = [0] * d_new
    per_disk_units: list[list[tuple[int, int]]] = [[] for _ in range(d_new)]
    for unit, (disk, row) in old.stripe_map.items():
        counts[disk] += 1
        per_disk_units[disk].append((row, unit))
    q, r = divmod(n, d_new)
    # split the r "+1" slots between old and new columns so the migration
    # volume stays within one unit of the ideal k_s/(k_o+k_s) share
    x = round(k_s * r / d_new)
    x = max(max(0, r - d_old), min(x, min(r, k_s)))
    old_plus = sorted(range(d_old), key=lambda c: (-counts[c], c))[: r - x]
    final = [q] * d_new
    for c in old_plus:
        final[c] += 1
    for j in range(x):
        final[d_old + j] += 1

    moved: list[tuple[int, Cell]] = []
    for c in range(d_old):
        shed = counts[c] - final[c]
        if shed < 0:
            raise DomainError("fastscale target would grow an old disk")
        if shed:
            victims = sorted(per_disk_units[c])[-shed:]  # highest rows leave
            moved.extend((unit, (c, row)) for row, unit in victims)
    moved.sort(key=lambda m: m[1])  # by (src disk, src row)

    cursor = 0
    for j in range(k_s):
        col = d_old + j
        for slot in range(final[col]):
            unit, src = moved[cursor]
            cursor += 1
            dst = (col, slot)
            plan.moves.append((unit, src, dst))
            del target.stripe_map[unit]
            target.stripe_map[unit] = dst
    assert cursor == len(moved)
    return target, plan


def plan_gsr(old: ArrayLayout, k_s: int) -> tuple[ArrayLayout, MigrationPlan]:
    """Preserve a leading stripe segment; re-stripe the rest at fresh rows."""
    if old.raid_level is not RaidLevel.RAID5:
        raise UnsupportedRaidLevel("gsr-style planning covers RAID-5 only")
    if k_s < 0:
        raise DomainError("k_s must be >= 0")
    d_old = old.disk_count
    d_new = d_old + k_s
    target = old.copy()
    target.disk_count = d_new
    plan = MigrationPlan()
    if k_s == 0 or old.data_units == 0:
        return target, plan

    rows = sorted(old.rows_of())
    total_rows = len(rows)
    preserved = (total_rows * d_old) // d_new
    dissolved_rows = rows[preserved:]
    dissolved_units = []
    old_rows = old.rows_of()
    for row in dissolved_rows:
        dissolved_units.extend(old_rows[row])
        del target.parity_map[row]

    fresh_start = rows[-1] + 1 if rows else 0
    rebuilt = canonical_layout(RaidLevel.RAID5, d_new, len(dissolved_units),
                               start_row=fresh_start)
    new_cells = sorted(rebuilt.stripe_map.items())  # deterministic row-major
    for (unit, src), (_, dst) in zip(
            ((u, old.stripe_map[u]) for u in dissolved_units),
            new_cells):
        plan.moves.append((unit, src, dst))
        del target.stripe_map[unit]
        target.stripe_map[unit] = dst
    for row, pdisks in rebuilt.parity_map.items():
        target.parity_map[row] = pdisks
        plan.parity_rows.append(row)
    return target, plan


def plan_sdm(old: ArrayLayout, k_s: int) -> tuple[ArrayLayout, MigrationPlan]:
    """Rebalance unit counts by sliding units sideways within their stripes.

    Stripe membership and parity placement stay fixed, so no parity
    recomputation is implied; uniformity comes from per-column quotas. A
    column can only receive as many units as it has cells not already taken
    by data or parity, so quotas are capped by that capacity (this only
    bites on degenerate arrays with fewer stripes than disks).
    """
    if old.raid_level is not RaidLevel.RAID6:
        raise UnsupportedRaidLevel("sdm-style planning covers RAID-6 only")
    if k_s < 0:
        raise DomainError("k_s must be >= 0")
    d_old = old.disk_count
    d_new = d_old + k_s
    target = old.copy()
    target.disk_count = d_new
    plan = MigrationPlan()
    if k_s == 0 or old.data_units == 0:
        return target, plan

    counts = [0] * d_new
    for disk, _ in old.stripe_map.values():
        counts[disk] += 1
    row_units = old.rows_of()
    total_rows = len(row_units)
    blocked = [0] * d_new  # parity cells per column
    for disks in old.parity_map.values():
        for d in disks:
            blocked[d] += 1
    cap = [total_rows - blocked[c] for c in range(d_new)]

    # water-fill quotas: raise the emptiest feasible column first, breaking
    # ties toward fuller then newer columns (keeps more units in place, and
    # new columns are never parity-blocked)
    final = [0] * d_new
    for _ in range(old.data_units):
        c = min((c for c in range(d_new) if final[c] < cap[c]),
                key=lambda c: (final[c], -counts[c], c < d_old, c))
        final[c] += 1

    shed = {c: counts[c] - final[c] for c in range(d_new) if counts[c] > final[c]}
    gain = {c: final[c] - counts[c] for c in range(d_new) if final[c] > counts[c]}
    occupied = old.occupied_cells()
    assignments = _greedy_within_rows(old, row_units, dict(shed), dict(gain), occupied)
    if assignments is None:
        # greedy can strand quotas on degenerate arrays; solve exactly there
        assignments = _match_within_rows(old, row_units, shed, gain, occupied)
    for unit, dst_col in assignments:
        src = target.stripe_map[unit]
        dst = (dst_col, src[1])
        plan.moves.append((unit, src, dst))
        target.stripe_map[unit] = dst
    plan.moves.sort(key=lambda m: (m[1][1], m[1][0]))  # row-major, stable
    return target, plan


def _greedy_within_rows(old, row_units, shed, gain, occupied):
    """One sweep: per row, fill empty deficit cells from the neediest
    surplus column. Returns None if any quota is left over."""
    out = []
    for row in sorted(row_units):
        if not gain:
            break
        remaining = [u for u in row_units[row] if old.stripe_map[u][0] in shed]
        if not remaining:
            continue
        for col in sorted(gain):
            if (col, row) in occupied:
                continue
            cands = [u for u in remaining if old.stripe_map[u][0] in shed]
            if not cands:
                break
            unit = min(cands, key=lambda u: (-shed[old.stripe_map[u][0]],
                                             old.stripe_map[u][0]))
            remaining.remove(unit)
            src_col = old.stripe_map[unit][0]
            out.append((unit, col))
            shed[src_col] -= 1
            if shed[src_col] == 0:
                del shed[src_col]
            gain[col] -= 1
            if gain[col] == 0:
                del gain[col]
    return sorted(out) if not shed and not gain else None


def _match_within_rows(old, row_units, shed, gain, occupied):
    """Exact assignment of surplus units to empty cells of deficit columns,
    same stripe only. Max-flow keeps degenerate toy arrays honest; realistic
    instances never need augmenting paths."""
    total_gain = sum(gain.values())
    if total_gain == 0:
        return []
    # nodes: "S", ("shed",c), ("unit",u), ("gaincell",c',row)->fold into
    # ("gain",c'), "T"
    capacity: dict[tuple, dict[tuple, int]] = {}

    def add_edge(a, b, c):
        capacity.setdefault(a, {})[b] = c
        capacity.setdefault(b, {}).setdefault(a, 0)

    for c, s in shed.items():
        add_edge("S", ("shed", c), s)
    for c, g in gain.items():
        add_edge(("gain", c), "T", g)
    for row in sorted(row_units):
        empty_gain_cols = [c for c in gain if (c, row) not in occupied]
        if not empty_gain_cols:
            continue
        for u in row_units[row]:
            col = old.stripe_map[u][0]
            if col not in shed:
                continue
            add_edge(("shed", col), ("unit", u), 1)
            for c in empty_gain_cols:
                add_edge(("unit", u), ("gain", c, row), 1)
        for c in empty_gain_cols:
            add_edge(("gain", c, row), ("gain", c), 1)

    flow = 0
    while True:
        # BFS augmenting path on residual capacities
        parent = {"S": None}
        queue = ["S"]
        while queue and "T" not in parent:
            node = queue.pop(0)
            for nxt, capc in capacity.get(node, {}).items():
                if capc > 0 and nxt not in parent:
                    parent[nxt] = node
                    queue.append(nxt)
        if "T" not in parent:
            break
        node = "T"
        while node != "S":
            prev = parent[node]
            capacity[prev][node] -= 1
            capacity[node][prev] += 1
            node = prev
        flow += 1
    if flow != total_gain:
        raise DomainError("sdm-style rebalance could not satisfy its quotas")

    out = []
    for node, edges in capacity.items():
        if isinstance(node, tuple) and node[0] == "unit":
            for nxt, capc in edges.items():
                if isinstance(nxt, tuple) and nxt[0] == "gain" and len(nxt) == 3 and capc == 0:
                    out.append((node[1], nxt[1]))
    return sorted(out)


PLANNERS = {
    "rr": plan_rr,
    "fastscale": plan_fastscale,
    "gsr": plan_gsr,
    "sdm": plan_sdm,
}

SCHEME_RAID_LEVELS = {
    "rr": (RaidLevel.RAID0, RaidLevel.RAID5, RaidLevel.RAID6),
    "fastscale": (RaidLevel.RAID0,),
    "gsr": (RaidLevel.RAID5,),
    "sdm": (RaidLevel.RAID6,),
}
