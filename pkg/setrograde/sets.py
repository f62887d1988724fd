"""Consistent sets of deals: holder masks over the ranked cards, interchangeable x-cards below.

A mask has one bit per seat, N at bit 0 then S, E, W. A set holds every deal
of its partition where each ranked card sits with a seat its mask allows;
x-cards go anywhere the shape leaves room.
"""
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import product
from typing import Iterator, List, Optional, Sequence, Tuple

from setrograde.core import RANK_SYMBOLS, SUIT_SYMBOLS, SUITS, Deal, PartitionKey, Player, Shape, multinomial

logger = logging.getLogger(__name__)

FULL_MASK = 0b1111
Masks = Tuple[int, ...]


def mask_of(player: int) -> int:
    return 1 << int(player)


def mask_bits(mask: int) -> str:
    """Bits in N, S, E, W order, e.g. ``1100`` for a card North or South may hold."""
    return "".join("1" if mask >> p & 1 else "0" for p in Player)


def mask_seats(mask: int) -> str:
    return "".join(p.name for p in Player if mask >> p & 1)


@dataclass(frozen=True)
class SetEntry:
    """One consistent set and its value.

    ``ranked[s]`` holds the masks of suit ``s``'s top cards, highest first;
    the lowest ``x_counts[s]`` cards of the suit are x.
    """

    partition: PartitionKey
    ranked: Tuple[Masks, ...]
    x_counts: Tuple[int, ...]
    value: int

    @property
    def shape(self) -> Shape:
        return self.partition.shape

    @property
    def ranked_counts(self) -> Tuple[int, ...]:
        return tuple(len(masks) for masks in self.ranked)

    def suit_masks(self, suit: int) -> Masks:
        return self.ranked[suit] + (FULL_MASK,) * self.x_counts[suit]

    @classmethod
    def from_suit_masks(cls, partition: PartitionKey, masks: Sequence[Masks], value: int) -> "SetEntry":
        """Build an entry, turning unconstrained cards at the bottom of each suit into x's."""
        ranked, x_counts = [], []
        for suit_masks in masks:
            suit_masks = tuple(suit_masks)
            keep = len(suit_masks)
            while keep and suit_masks[keep - 1] == FULL_MASK:
                keep -= 1
            ranked.append(suit_masks[:keep])
            x_counts.append(len(suit_masks) - keep)
        return cls(partition, tuple(ranked), tuple(x_counts), value)


def feasible(masks: Sequence[int], caps: Sequence[int]) -> bool:
    """Can one suit's cards be dealt so card i goes to a seat in masks[i] and seat p gets caps[p]?

    Checked with Hall's condition over the 15 nonempty seat subsets.
    """
    if len(masks) != sum(caps) or any(m & FULL_MASK == 0 for m in masks):
        return False
    for seats in range(1, 16):
        inside = sum(1 for m in masks if m & ~seats & FULL_MASK == 0)
        if inside > sum(caps[p] for p in range(4) if seats >> p & 1):
            return False
    return True


def _suit_words(masks: Masks, caps: Tuple[int, ...]) -> Iterator[Tuple[int, ...]]:
    remaining = list(caps)
    word: List[int] = []

    def place(i: int) -> Iterator[Tuple[int, ...]]:
        if i == len(masks):
            yield tuple(word)
            return
        for p in range(4):
            if masks[i] >> p & 1 and remaining[p]:
                remaining[p] -= 1
                word.append(p)
                yield from place(i + 1)
                word.pop()
                remaining[p] += 1

    yield from place(0)


@lru_cache(maxsize=65536)
def _count_suit_words(masks: Masks, caps: Tuple[int, ...]) -> int:
    """Ranked assignments times the x placements left over for each."""
    if not masks or all(m == FULL_MASK for m in masks):
        return multinomial(caps)
    keep = len(masks)
    while masks[keep - 1] == FULL_MASK:
        keep -= 1
    total = 0
    for head in _suit_words(masks[:keep], caps):
        remaining = list(caps)
        for p in head:
            remaining[p] -= 1
        total += multinomial(tuple(remaining))
    return total


def member(entry: SetEntry, deal: Deal) -> bool:
    if deal.partition != entry.partition:
        return False
    for s, masks in enumerate(entry.ranked):
        word = deal.words[s]
        for i, mask in enumerate(masks):
            if not mask >> word[i] & 1:
                return False
    return True


def iter_members(entry: SetEntry) -> Iterator[Deal]:
    """Members in increasing canonical order."""
    shape = entry.shape
    per_suit = [list(_suit_words(entry.suit_masks(s), shape.caps(s))) for s in SUITS]
    key = entry.partition
    for words in product(*per_suit):
        yield Deal(words, key.leader, key.trump)


def enumerate_members(entry: SetEntry) -> List[Deal]:
    return list(iter_members(entry))


def member_count(entry: SetEntry) -> int:
    shape = entry.shape
    return math.prod(_count_suit_words(entry.suit_masks(s), shape.caps(s)) for s in SUITS)


def candidate_with_x_counts(deal: Deal, x_counts: Sequence[int]) -> SetEntry:
    """The set that fixes the holders of all but the lowest ``x_counts[s]`` cards of each suit."""
    ranked = []
    for s, word in enumerate(deal.words):
        n, x = len(word), x_counts[s]
        low = 1 if n else 0
        if not low <= x <= n:
            raise ValueError(f"x count for {SUIT_SYMBOLS[s]} must be in {low}..{n}, got {x}")
        ranked.append(tuple(mask_of(p) for p in word[:n - x]))
    return SetEntry(deal.partition, tuple(ranked), tuple(x_counts), -1)


def with_value(entry: SetEntry, value: int) -> SetEntry:
    return SetEntry(entry.partition, entry.ranked, entry.x_counts, value)


def subsumes(a: SetEntry, b: SetEntry) -> bool:
    """True iff every member of ``b`` is a member of ``a``.

    Suits are dealt independently, so inclusion is decided per suit and per
    card: ``b`` escapes ``a`` exactly when some card of ``b`` can feasibly go
    to a seat that ``a`` forbids for it.
    """
    if a.partition != b.partition:
        return False
    shape = a.shape
    for s in SUITS:
        outer, inner = a.suit_masks(s), b.suit_masks(s)
        caps = shape.caps(s)
        for i, (mask_a, mask_b) in enumerate(zip(outer, inner)):
            escaping = mask_b & ~mask_a & FULL_MASK
            for p in range(4):
                if escaping >> p & 1:
                    forced = inner[:i] + (1 << p,) + inner[i + 1:]
                    if feasible(forced, caps):
                        return False
    return True


def intersects(a: SetEntry, b: SetEntry) -> bool:
    if a.partition != b.partition:
        return False
    shape = a.shape
    for s in SUITS:
        both = tuple(x & y for x, y in zip(a.suit_masks(s), b.suit_masks(s)))
        if not feasible(both, shape.caps(s)):
            return False
    return True


def try_merge(a: SetEntry, b: SetEntry) -> Optional[SetEntry]:
    """Express the union of two equal-valued sets as one set, if it is one.

    The subsumer is returned when one set contains the other. Otherwise the
    sets must share x counts and differ in exactly one ranked card's mask.
    """
    if a.partition != b.partition or a.value != b.value:
        return None
    if subsumes(a, b):
        return a
    if subsumes(b, a):
        return b
    if a.x_counts != b.x_counts:
        return None
    differences = [
        (s, i)
        for s in SUITS
        for i, (mask_a, mask_b) in enumerate(zip(a.ranked[s], b.ranked[s]))
        if mask_a != mask_b
    ]
    if len(differences) != 1:
        return None
    suit, card = differences[0]
    masks = [a.suit_masks(s) for s in SUITS]
    union = masks[suit][card] | b.ranked[suit][card]
    masks[suit] = masks[suit][:card] + (union,) + masks[suit][card + 1:]
    merged = SetEntry.from_suit_masks(a.partition, masks, a.value)
    logger.debug(f"Merged {format_entry(a)} and {format_entry(b)} into {format_entry(merged)}")
    return merged


def format_entry(entry: SetEntry) -> str:
    """e.g. ``♠9[NS] ♠8[NS] x x x x x x = 2``"""
    parts = []
    shape = entry.shape
    for s in SUITS:
        n = shape.suit_size(s)
        for i, mask in enumerate(entry.ranked[s]):
            parts.append(f"{SUIT_SYMBOLS[s]}{RANK_SYMBOLS[n - 1 - i]}[{mask_seats(mask)}]")
        parts.extend("x" for _ in range(entry.x_counts[s]))
    return f"{' '.join(parts)} = {entry.value}"
