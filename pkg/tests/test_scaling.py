import pytest

from pswlsim.errors import UnsupportedRaidLevel
from pswlsim.scaling import (
    ArrayLayout,
    MigrationPlan,
    RaidLevel,
    apply_plan,
    canonical_layout,
    plan_fastscale,
    plan_gsr,
    plan_rr,
    plan_sdm,
    validate_layout,
)


def disk_counts(layout, include_parity=False):
    counts = [0] * layout.disk_count
    for disk, _ in layout.stripe_map.values():
        counts[disk] += 1
    if include_parity:
        for disks in layout.parity_map.values():
            for d in disks:
                counts[d] += 1
    return counts


def check_plan(old, target, plan, k_s):
    """Shared structural checks: validity, consistency, integrity."""
    validate_layout(target)
    # applying the moves to the old placement reproduces the target placement
    replayed = apply_plan(old, plan, old.disk_count + k_s)
    assert replayed.stripe_map == target.stripe_map
    # no destination collisions: distinct dests, none landing on a cell that
    # a non-moving unit or parity keeps occupying
    dests = [d for _, _, d in plan.moves]
    assert len(dests) == len(set(dests))
    movers = {u for u, _, _ in plan.moves}
    stationary = {c for u, c in old.stripe_map.items() if u not in movers}
    stationary |= {(d, r) for r, ds in target.parity_map.items() for d in ds}
    assert not (set(dests) & stationary)
    # round-trip integrity with simulated payload tags
    content = {cell: unit for unit, cell in old.stripe_map.items()}
    for unit, src, _ in plan.moves:
        assert content.pop(src) == unit
    for unit, _, dst in plan.moves:
        assert dst not in content
        content[dst] = unit
    for unit, cell in target.stripe_map.items():
        assert content[cell] == unit


def test_canonical_layouts_are_valid():
    for level, disks in ((RaidLevel.RAID0, 2), (RaidLevel.RAID5, 3), (RaidLevel.RAID6, 4)):
        layout = canonical_layout(level, disks, 37)
        validate_layout(layout)
        assert layout.data_units == 37


def test_rr_restripes_six_units_over_three_disks():
    # brute-force enumeration of the 2-disk and 3-disk round-robin layouts
    old = canonical_layout(RaidLevel.RAID0, 2, 6)
    target, plan = plan_rr(old, 1)
    assert {u: c for u, c in target.stripe_map.items()} == {
        0: (0, 0), 1: (1, 0), 2: (2, 0), 3: (0, 1), 4: (1, 1), 5: (2, 1)}
    moved = {u for u, _, _ in plan.moves}
    assert moved == {2, 3, 4, 5}  # units 0 and 1 happen to stay put
    check_plan(old, target, plan, 1)


def test_rr_noop_scaling_is_empty():
    old = canonical_layout(RaidLevel.RAID5, 4, 30)
    target, plan = plan_rr(old, 0)
    assert plan.moves == []
    assert plan.parity_updates == 0
    assert target.stripe_map == old.stripe_map


def test_rr_balance_and_parity_churn():
    old = canonical_layout(RaidLevel.RAID5, 4, 60)
    target, plan = plan_rr(old, 2)
    counts = disk_counts(target, include_parity=True)
    assert max(counts) - min(counts) <= 1
    # a full re-stripe rewrites parity for (almost) every target stripe
    assert plan.parity_updates >= len(target.rows_of()) - 1
    check_plan(old, target, plan, 2)


def test_fastscale_moves_exact_share():
    old = canonical_layout(RaidLevel.RAID0, 3, 12)
    target, plan = plan_fastscale(old, 1)
    assert len(plan.moves) == 3  # 12 * 1/4
    assert {src[0] for _, src, _ in plan.moves} == {0, 1, 2}
    assert all(dst[0] >= 3 for _, _, dst in plan.moves)
    counts = disk_counts(target)
    assert max(counts) - min(counts) <= 1
    assert plan.parity_updates == 0
    check_plan(old, target, plan, 1)


def test_fastscale_rejects_parity_raid():
    with pytest.raises(UnsupportedRaidLevel):
        plan_fastscale(canonical_layout(RaidLevel.RAID5, 4, 12), 1)


def test_fastscale_noop():
    old = canonical_layout(RaidLevel.RAID0, 3, 12)
    _, plan = plan_fastscale(old, 0)
    assert plan.moves == []


def test_gsr_preserves_leading_segment():
    old = canonical_layout(RaidLevel.RAID5, 4, 60)  # 20 stripes of 3 data units
    target, plan = plan_gsr(old, 1)
    # preserved share ~ k_o/(k_o+k_s): 16 of 20 stripes untouched
    moved = {u for u, _, _ in plan.moves}
    preserved_rows = set(range(16))
    for unit, (disk, row) in old.stripe_map.items():
        if row in preserved_rows:
            assert unit not in moved
            assert target.stripe_map[unit] == (disk, row)
            assert target.parity_map[row] == old.parity_map[row]
    assert len(moved) == 12  # 4 dissolved stripes x 3 units
    assert plan.parity_updates == 3  # 12 units re-striped 4-wide
    check_plan(old, target, plan, 1)


def test_gsr_rejects_other_levels():
    with pytest.raises(UnsupportedRaidLevel):
        plan_gsr(canonical_layout(RaidLevel.RAID0, 3, 12), 1)
    with pytest.raises(UnsupportedRaidLevel):
        plan_gsr(canonical_layout(RaidLevel.RAID6, 4, 12), 1)


def test_sdm_balances_without_parity_churn():
    old = canonical_layout(RaidLevel.RAID6, 4, 60)  # 30 stripes x 2 data units
    target, plan = plan_sdm(old, 2)
    counts = disk_counts(target)
    assert max(counts) - min(counts) <= 1
    assert plan.parity_updates == 0
    # moves never leave their stripe
    for _, src, dst in plan.moves:
        assert src[1] == dst[1]
    # parity placement untouched, still two distinct disks per stripe
    assert target.parity_map == old.parity_map
    check_plan(old, target, plan, 2)


def test_sdm_rejects_other_levels():
    with pytest.raises(UnsupportedRaidLevel):
        plan_sdm(canonical_layout(RaidLevel.RAID5, 4, 12), 1)


def test_sdm_noop():
    old = canonical_layout(RaidLevel.RAID6, 4, 30)
    _, plan = plan_sdm(old, 0)
    assert plan.moves == []


def test_migration_volume_ordering():
    # fastscale <= gsr-style <= rr on comparable data volumes
    for stripes in (12, 20, 33, 64):
        for k_o, k_s in ((3, 1), (4, 1), (4, 2), (5, 3)):
            data_units = stripes * (k_o - 1)  # RAID-5 data volume
            rr_moves = len(plan_rr(
                canonical_layout(RaidLevel.RAID5, k_o, data_units), k_s)[1].moves)
            gsr_moves = len(plan_gsr(
                canonical_layout(RaidLevel.RAID5, k_o, data_units), k_s)[1].moves)
            fs_moves = len(plan_fastscale(
                canonical_layout(RaidLevel.RAID0, k_o, data_units), k_s)[1].moves)
            assert fs_moves <= gsr_moves <= rr_moves, (stripes, k_o, k_s)


def test_plan_text_round_trip():
    old = canonical_layout(RaidLevel.RAID0, 3, 12)
    _, plan = plan_fastscale(old, 1)
    text = plan.to_text()
    assert text.splitlines()[0].count(",") == 4
    again = MigrationPlan.from_text(text)
    assert again.moves == plan.moves


def test_plan_golden_text():
    old = canonical_layout(RaidLevel.RAID0, 2, 6)
    _, plan = plan_rr(old, 1)
    assert plan.to_text() == (
        "2,0,1,2,0\n"
        "3,1,1,0,1\n"
        "4,0,2,1,1\n"
        "5,1,2,2,1\n"
    )


def brute_force_grid():
    for k_o in range(2, 7):
        for k_s in range(0, 3):
            for stripes in (1, 2, 5, 13, 40, 64):
                yield k_o, k_s, stripes


def test_toy_grid_all_schemes():
    # exhaustive structural verification on small instances (<= 8 disks,
    # <= 64 stripes): validity, plan/layout consistency, integrity, and the
    # per-scheme contracts
    checked = 0
    for k_o, k_s, stripes in brute_force_grid():
        # round-robin at every level it supports
        for level in (RaidLevel.RAID0, RaidLevel.RAID5, RaidLevel.RAID6):
            width = k_o - level.parity_disks
            if width < 1:
                continue
            old = canonical_layout(level, k_o, stripes * width)
            target, plan = plan_rr(old, k_s)
            check_plan(old, target, plan, k_s)
            counts = disk_counts(target, include_parity=True)
            assert max(counts) - min(counts) <= 1
            checked += 1
        # fastscale on RAID-0
        old = canonical_layout(RaidLevel.RAID0, k_o, stripes * k_o)
        target, plan = plan_fastscale(old, k_s)
        check_plan(old, target, plan, k_s)
        counts = disk_counts(target)
        assert max(counts) - min(counts) <= 1
        n = old.data_units
        ideal = round(k_s / (k_o + k_s) * n)
        assert abs(len(plan.moves) - ideal) <= 1, (k_o, k_s, stripes)
        assert all(src[0] < k_o <= dst[0] for _, src, dst in plan.moves)
        checked += 1
        # gsr-style on RAID-5
        if k_o >= 2:
            old = canonical_layout(RaidLevel.RAID5, k_o, stripes * (k_o - 1))
            target, plan = plan_gsr(old, k_s)
            check_plan(old, target, plan, k_s)
            checked += 1
        # sdm-style on RAID-6; data balance is only reachable once the
        # parity rotation has wrapped every column (stripes >= disks)
        if k_o >= 3:
            old = canonical_layout(RaidLevel.RAID6, k_o, stripes * (k_o - 2))
            target, plan = plan_sdm(old, k_s)
            check_plan(old, target, plan, k_s)
            if k_s > 0 and stripes >= k_o:
                counts = disk_counts(target)
                assert max(counts) - min(counts) <= 1, (k_o, k_s, stripes)
            checked += 1
    assert checked > 100
