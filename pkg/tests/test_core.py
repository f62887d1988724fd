from itertools import combinations, islice, product
import math
import random

import pytest

from setrograde.core import (
    AbsoluteDeal,
    Card,
    Deal,
    PartitionKey,
    Player,
    Shape,
    SPADES,
    HEARTS,
    Trump,
    absolute_state_count,
    canonicalize,
    card_order,
    deal_count,
    enumerate_shapes,
    first_deal,
    format_deal,
    iter_deals,
    iter_shapes,
    next_suit_permutation,
    parse_deal,
    random_deal,
    shape_classes,
    shape_of,
)
from setrograde.errors import MalformedDealError

N, S, E, W = Player.N, Player.S, Player.E, Player.W


def spades(text):
    return parse_deal(text, Player.E, Trump.NT)


def test_canonicalize_compresses_ranks_keeping_holders():
    absolute = AbsoluteDeal({Card(SPADES, 14): N, Card(SPADES, 13): E, Card(SPADES, 7): S, Card(SPADES, 3): W}, E, Trump.NT)
    deal = canonicalize(absolute)
    assert deal.holders == {Card(SPADES, 5): N, Card(SPADES, 4): E, Card(SPADES, 3): S, Card(SPADES, 2): W}
    assert deal.leader == E and deal.trump == Trump.NT


def test_canonicalize_is_identity_on_compressed_deals_and_idempotent():
    deal = spades("N:98... E:54... S:76... W:32...")
    assert canonicalize(deal) == deal
    assert canonicalize(deal.to_absolute()) == deal
    assert canonicalize(canonicalize(deal)) == canonicalize(deal)


def test_eight_of_thirteen_ranks_collapse_to_one_deal():
    seats = [N, N, S, S, E, E, W, W]
    canonical = set()
    selections = 0
    for ranks in combinations(range(2, 15), 8):
        holders = {Card(SPADES, r): seat for r, seat in zip(sorted(ranks, reverse=True), seats)}
        canonical.add(canonicalize(AbsoluteDeal(holders, E, Trump.NT)))
        selections += 1
    assert selections == 1287
    assert len(canonical) == 1


def test_unequal_hands_are_rejected():
    holders = {Card(SPADES, 14): N, Card(SPADES, 13): N, Card(SPADES, 12): E, Card(SPADES, 11): S}
    with pytest.raises(MalformedDealError):
        canonicalize(AbsoluteDeal(holders, E, Trump.NT))


def test_shape_of_two_spades_each():
    deal = parse_deal("N:98... E:32... S:76... W:54... leader=N trump=NT")
    assert shape_of(deal) == Shape.single_suit(2)
    assert shape_of(deal).caps(SPADES) == (2, 2, 2, 2)


def test_shape_of_empty_deal_is_zero():
    deal = Deal(((), (), (), ()), N, Trump.NT)
    assert shape_of(deal).lengths == ((0, 0, 0, 0),) * 4
    assert deal.d == 0


def test_every_three_trick_deal_has_rows_of_three():
    rng = random.Random(7)
    for shape in rng.sample(list(islice(iter_shapes(12), 5000)), 20):
        deal = random_deal(shape, N, Trump.S, rng)
        assert all(sum(row) == 3 for row in shape_of(deal).lengths)


def _brute_force_shape_count(cards):
    d = cards // 4
    count = 0
    for cells in product(range(d + 1), repeat=16):
        rows = [cells[4 * i:4 * i + 4] for i in range(4)]
        if all(sum(row) == d for row in rows) and all(sum(r[s] for r in rows) <= 13 for s in range(4)):
            count += 1
    return count


def test_four_card_shapes_match_brute_force():
    shapes = enumerate_shapes(4)
    assert len(shapes) == len(set(shapes)) == _brute_force_shape_count(4) == 256


def test_eight_card_shapes_match_nested_count():
    rows = [r for r in product(range(3), repeat=4) if sum(r) == 2]
    expected = len(rows) ** 4
    shapes = enumerate_shapes(8)
    assert len(shapes) == len(set(shapes)) == expected == 10000


@pytest.mark.parametrize("cards,lower_bound", [(4, 2e1), (8, 5e2)])
def test_shape_classes_within_an_order_of_magnitude_of_lower_bound(cards, lower_bound):
    count = len(shape_classes(cards))
    assert lower_bound / 10 <= count <= lower_bound * 10


def test_four_card_shape_classes_are_set_partitions_of_the_seats():
    assert len(shape_classes(4)) == 15


@pytest.mark.parametrize("cards,expected", [(4, 3e7), (8, 9e12)])
def test_absolute_state_counts(cards, expected):
    assert abs(math.log10(absolute_state_count(cards)) - math.log10(expected)) < 0.1


def test_shape_rejects_uneven_hands():
    with pytest.raises(ValueError):
        Shape(((1, 0, 0, 0), (1, 0, 0, 0), (1, 0, 0, 0), (2, 0, 0, 0)))


def test_shape_id_and_bytes_round_trip():
    shape = Shape(((2, 0, 0, 0), (0, 2, 0, 0), (0, 0, 1, 1), (0, 0, 1, 1)))
    assert shape.shape_id == "2000-0011-0200-0011"
    assert Shape.from_id(shape.shape_id) == shape
    assert Shape.from_bytes(shape.to_bytes()) == shape


@pytest.mark.parametrize(
    "d,expected",
    [
        (1, "N:5... E:3... S:4... W:2..."),
        (2, "N:98... E:54... S:76... W:32..."),
    ],
)
def test_first_deal_single_suit(d, expected):
    assert first_deal(Shape.single_suit(d), E, Trump.NT) == spades(expected)


def test_first_deal_gives_whole_suit_to_sole_holder():
    shape = Shape(((2, 0, 0, 0), (0, 2, 0, 0), (0, 0, 1, 1), (0, 0, 1, 1)))
    deal = first_deal(shape, N, Trump.NT)
    assert deal.words == ((0, 0), (1, 1), (2, 3), (2, 3))


def test_next_suit_permutation_moves_the_eight_to_south():
    deal = spades("N:98... E:54... S:76... W:32...")
    assert next_suit_permutation(deal, SPADES, 2) == spades("N:97... E:54... S:86... W:32...")


def test_next_suit_permutation_follow_up_deals_of_four_cards():
    deal = first_deal(Shape.single_suit(1), E, Trump.NT)
    seen = []
    for _ in range(3):
        deal = next_suit_permutation(deal, SPADES, 1)
        seen.append(format_deal(deal))
    assert seen == [
        "N:4... E:3... S:5... W:2... leader=E trump=NT",
        "N:4... E:5... S:3... W:2... leader=E trump=NT",
        "N:4... E:2... S:3... W:5... leader=E trump=NT",
    ]
    assert next_suit_permutation(deal, SPADES, 1) is None


def test_next_suit_permutation_rejects_bad_count():
    deal = first_deal(Shape.single_suit(1), E, Trump.NT)
    with pytest.raises(ValueError):
        next_suit_permutation(deal, SPADES, 0)


def test_full_permutation_walk_counts_2520_increasing_deals():
    deal = first_deal(Shape.single_suit(2), E, Trump.NT)
    walked = [deal]
    while True:
        deal = next_suit_permutation(deal, SPADES, 8)
        if deal is None:
            break
        walked.append(deal)
    assert len(walked) == 2520 == deal_count(Shape.single_suit(2))
    assert all(a.words < b.words for a, b in zip(walked, walked[1:]))
    assert walked == list(iter_deals(Shape.single_suit(2), E, Trump.NT))


def _runs_are_contiguous(keys):
    runs = [k for i, k in enumerate(keys) if i == 0 or k != keys[i - 1]]
    return len(runs) == len(set(runs))


def test_deals_sharing_a_top_word_are_contiguous():
    deals = list(iter_deals(Shape.single_suit(2), E, Trump.NT))
    for k in range(1, 9):
        assert _runs_are_contiguous([d.words[SPADES][:k] for d in deals])


def test_top_words_are_contiguous_below_a_fixed_leading_suit():
    shape = Shape(((1, 1, 0, 0), (1, 1, 0, 0), (1, 0, 1, 0), (0, 1, 1, 0)))
    deals = list(iter_deals(shape, N, Trump.NT))
    for k in range(1, 4):
        assert _runs_are_contiguous([(d.words[SPADES], d.words[HEARTS][:k]) for d in deals])


def test_card_order_breaks_rank_ties_by_suit():
    order = card_order(Shape(((1, 1, 0, 0), (1, 1, 0, 0), (1, 1, 0, 0), (1, 1, 0, 0))))
    assert order[:3] == ((SPADES, 0), (HEARTS, 0), (SPADES, 1))


def test_parse_accepts_absolute_ranks_and_formats_relative():
    deal = parse_deal("N:AK.-.-.- E:Q2.-.-.- S:T9.-.-.- W:87.-.-.- leader=S trump=H")
    assert deal.leader == S and deal.trump == Trump.H
    assert format_deal(deal) == "N:98... E:72... S:65... W:43... leader=S trump=H"


@pytest.mark.parametrize(
    "text,column",
    [
        ("N:9Z... E:54... S:76... W:32... leader=E trump=NT", 3),
        ("N:98... E:54... S:76... Q:32...", 24),
        ("N:98... E:54... S:76... W:32... leader=X trump=NT", 39),
    ],
)
def test_parse_errors_name_the_column(text, column):
    with pytest.raises(MalformedDealError) as excinfo:
        parse_deal(text)
    assert excinfo.value.column == column


def test_parse_needs_a_leader():
    with pytest.raises(MalformedDealError):
        parse_deal("N:98... E:54... S:76... W:32... trump=NT")


def test_partition_key_paths():
    key = PartitionKey(Shape.single_suit(2), E, Trump.NT)
    assert key.label == "8/NT/E/2000-2000-2000-2000"
    assert str(key.relpath("setdb", ".sgdb")) == "setdb/8/NT/E/2000-2000-2000-2000.sgdb"
