import random
from functools import reduce

import pytest

from setrograde.core import Player, Shape, Trump, first_deal, iter_deals, parse_deal
from setrograde.sets import (
    FULL_MASK,
    SetEntry,
    candidate_with_x_counts,
    enumerate_members,
    feasible,
    format_entry,
    intersects,
    mask_bits,
    mask_of,
    member,
    member_count,
    subsumes,
    try_merge,
    with_value,
)

from conftest import single_suit

N, S, E, W = (mask_of(p) for p in (Player.N, Player.S, Player.E, Player.W))
NS = N | S
KEY_4 = single_suit(1)
KEY_8 = single_suit(2)


def spade_entry(key, masks, value=2):
    return SetEntry.from_suit_masks(key, [tuple(masks) + (FULL_MASK,) * (key.shape.suit_size(0) - len(masks)), (), (), ()], value)


def deal_8(text):
    return parse_deal(text, Player.E, Trump.NT)


def brute_members(entry):
    return {deal for deal in iter_deals(entry.shape, entry.partition.leader, entry.partition.trump) if member(entry, deal)}


@pytest.fixture
def top_two_with_partners():
    return spade_entry(KEY_8, [NS, NS])


@pytest.mark.parametrize(
    "text,expected",
    [
        ("N:98... E:54... S:76... W:32...", True),
        ("N:95... E:76... S:84... W:32...", True),
        ("N:32... E:98... S:76... W:54...", False),
        ("N:84... E:95... S:76... W:32...", False),
    ],
)
def test_membership_of_top_two_with_partners(top_two_with_partners, text, expected):
    assert member(top_two_with_partners, deal_8(text)) is expected


def test_membership_needs_the_same_partition(top_two_with_partners):
    deal = first_deal(Shape.single_suit(2), Player.N, Trump.NT)
    assert not member(top_two_with_partners, deal)


def test_north_holding_the_top_two_has_90_members():
    entry = candidate_with_x_counts(first_deal(Shape.single_suit(2), Player.E, Trump.NT), (6, 0, 0, 0))
    assert entry.ranked == ((N, N), (), (), ())
    assert member_count(entry) == len(enumerate_members(entry)) == 90


def test_singleton_entry_has_one_member():
    deal = first_deal(Shape.single_suit(2), Player.E, Trump.NT)
    entry = candidate_with_x_counts(deal, (1, 0, 0, 0))
    assert enumerate_members(entry) == [deal]
    assert member_count(entry) == 1


def test_union_of_the_four_diagrams_counts_540(top_two_with_partners):
    diagrams = [spade_entry(KEY_8, [a, b]) for a in (N, S) for b in (N, S)]
    counts = [member_count(e) for e in diagrams]
    assert sorted(counts) == [90, 90, 180, 180]
    assert member_count(top_two_with_partners) == sum(counts) == 540
    assert len(brute_members(top_two_with_partners)) == 540


def test_members_are_enumerated_in_canonical_order(top_two_with_partners):
    members = enumerate_members(top_two_with_partners)
    assert [d.words for d in members] == sorted(d.words for d in members)
    assert set(members) == brute_members(top_two_with_partners)


def test_multi_suit_counts_match_filtering():
    shape = Shape(((1, 1, 0, 0), (1, 1, 0, 0), (1, 0, 1, 0), (0, 1, 1, 0)))
    key = first_deal(shape, Player.N, Trump.NT).partition
    entry = SetEntry(key, ((N | E,), (FULL_MASK & ~W,), (), ()), (2, 2, 2, 0), 1)
    assert member_count(entry) == len(enumerate_members(entry)) == len(brute_members(entry))


def test_every_deal_is_in_each_of_its_candidates():
    for deal in iter_deals(Shape.single_suit(2), Player.E, Trump.NT):
        for x in range(1, 9):
            assert member(candidate_with_x_counts(deal, (x, 0, 0, 0)), deal)


@pytest.mark.parametrize("x_counts", [(0, 0, 0, 0), (9, 0, 0, 0), (2, 1, 0, 0)])
def test_candidate_rejects_bad_counts(x_counts):
    with pytest.raises(ValueError):
        candidate_with_x_counts(first_deal(Shape.single_suit(2), Player.E, Trump.NT), x_counts)


def test_all_x_entry_covers_the_partition():
    entry = candidate_with_x_counts(first_deal(Shape.single_suit(2), Player.E, Trump.NT), (8, 0, 0, 0))
    assert entry.ranked == ((), (), (), ())
    assert member_count(entry) == 2520


@pytest.mark.parametrize(
    "masks,caps,expected",
    [
        ((N, N, N), (2, 1, 0, 0), False),
        ((NS, NS, FULL_MASK), (1, 1, 1, 0), True),
        ((NS, NS, NS), (1, 1, 1, 0), False),
        ((E, 0), (1, 1, 0, 0), False),
        ((N,), (1, 1, 0, 0), False),
    ],
)
def test_feasible(masks, caps, expected):
    assert feasible(masks, caps) is expected


def test_larger_x_count_subsumes_the_smaller():
    deal = first_deal(Shape.single_suit(2), Player.E, Trump.NT)
    top_two = candidate_with_x_counts(deal, (6, 0, 0, 0))
    for x in range(1, 7):
        smaller = candidate_with_x_counts(deal, (x, 0, 0, 0))
        assert subsumes(top_two, smaller)
        assert subsumes(smaller, smaller)
    assert not subsumes(candidate_with_x_counts(deal, (5, 0, 0, 0)), top_two)


def test_subsumption_matches_member_inclusion():
    rng = random.Random(4)
    entries = []
    while len(entries) < 40:
        x = rng.randint(1, 8)
        masks = [rng.randint(1, FULL_MASK) for _ in range(8 - x)]
        entry = spade_entry(KEY_8, masks)
        if member_count(entry):
            entries.append(entry)
    members = [brute_members(e) for e in entries]
    for _ in range(100):
        i, j = rng.randrange(40), rng.randrange(40)
        assert subsumes(entries[i], entries[j]) == (members[j] <= members[i])
        assert intersects(entries[i], entries[j]) == bool(members[i] & members[j])


def test_merging_north_and_south_tops():
    north = spade_entry(KEY_4, [N], value=1)
    south = spade_entry(KEY_4, [S], value=1)
    merged = try_merge(north, south)
    assert merged.ranked == ((NS,), (), (), ())
    assert merged.x_counts == (3, 0, 0, 0)
    assert mask_bits(merged.ranked[0][0]) == "1100"
    assert brute_members(merged) == brute_members(north) | brute_members(south)


def test_merge_needs_equal_values():
    assert try_merge(spade_entry(KEY_4, [N], 1), spade_entry(KEY_4, [S], 0)) is None


def test_merge_needs_a_single_difference():
    assert try_merge(spade_entry(KEY_8, [N, S]), spade_entry(KEY_8, [S, N])) is None


def test_merge_returns_the_subsumer(top_two_with_partners):
    inner = spade_entry(KEY_8, [N, N])
    assert try_merge(inner, top_two_with_partners) == top_two_with_partners


def test_pairwise_merges_rebuild_the_partner_entry(top_two_with_partners):
    diagrams = [spade_entry(KEY_8, [a, b]) for a in (N, S) for b in (N, S)]
    north_top = try_merge(diagrams[0], diagrams[1])
    south_top = try_merge(diagrams[2], diagrams[3])
    merged = try_merge(north_top, south_top)
    assert merged == top_two_with_partners
    union = reduce(set.union, (brute_members(d) for d in diagrams))
    assert brute_members(merged) == union


def test_format_entry(top_two_with_partners):
    assert format_entry(top_two_with_partners) == "♠9[NS] ♠8[NS] x x x x x x = 2"
    assert format_entry(with_value(spade_entry(KEY_4, [W]), 0)) == "♠5[W] x x x = 0"
