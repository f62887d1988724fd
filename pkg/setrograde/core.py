"""Cards, deals and shapes in relative-rank form, and the canonical deal ordering.

A deal is stored as one holder word per suit: the seats holding that suit's
in-play cards, read from the highest card down. Words are tuples of player
digits (N=0, S=1, E=2, W=3), so the relative rank of position ``i`` in a suit
of ``n`` cards is ``n + 1 - i`` and two deals of the same shape compare by
their words directly.
"""
import logging
import math
import random
import re
from dataclasses import dataclass, field
from enum import IntEnum
from functools import lru_cache
from itertools import permutations, product
from pathlib import Path
from typing import Dict, Iterator, List, Mapping, NamedTuple, Optional, Sequence, Tuple, Union

from setrograde.errors import MalformedDealError

logger = logging.getLogger(__name__)

RANK_SYMBOLS = "23456789TJQKA"
SUIT_LETTERS = "SHDC"
SUIT_SYMBOLS = "♠♥♦♣"
SPADES, HEARTS, DIAMONDS, CLUBS = range(4)
SUITS = (SPADES, HEARTS, DIAMONDS, CLUBS)
MAX_SUIT_LENGTH = 13

Word = Tuple[int, ...]


class Player(IntEnum):
    """A seat. Integer values follow the canonical comparison order N < S < E < W."""

    N = 0
    S = 1
    E = 2
    W = 3

    @property
    def is_ns(self) -> bool:
        return self is Player.N or self is Player.S

    @property
    def partnership(self) -> str:
        return "NS" if self.is_ns else "EW"

    def next(self) -> "Player":
        """The seat to this player's left (play is clockwise N, E, S, W)."""
        return _CLOCKWISE_NEXT[self]


PLAY_ORDER = (Player.N, Player.E, Player.S, Player.W)
_CLOCKWISE_NEXT = {Player.N: Player.E, Player.E: Player.S, Player.S: Player.W, Player.W: Player.N}


class Trump(IntEnum):
    """Trump strain; values are the on-disk trump codes."""

    NT = 0
    S = 1
    H = 2
    D = 3
    C = 4

    @property
    def suit(self) -> Optional[int]:
        return None if self is Trump.NT else int(self) - 1


class Card(NamedTuple):
    suit: int
    rank: int

    def __str__(self) -> str:
        return f"{SUIT_SYMBOLS[self.suit]}{RANK_SYMBOLS[self.rank - 2]}"


@dataclass(frozen=True)
class Shape:
    """Per-player, per-suit hand lengths, indexed ``lengths[player][suit]``."""

    lengths: Tuple[Tuple[int, int, int, int], ...]

    def __post_init__(self):
        rows = tuple(tuple(int(n) for n in row) for row in self.lengths)
        if len(rows) != 4 or any(len(row) != 4 for row in rows):
            raise ValueError(f"shape must be 4x4, got {self.lengths}")
        if any(n < 0 for row in rows for n in row):
            raise ValueError(f"shape lengths must be non-negative: {rows}")
        if len({sum(row) for row in rows}) != 1:
            raise ValueError(f"every hand must hold the same number of cards: {rows}")
        if any(sum(row[s] for row in rows) > MAX_SUIT_LENGTH for s in SUITS):
            raise ValueError(f"a suit has more than {MAX_SUIT_LENGTH} cards: {rows}")
        object.__setattr__(self, "lengths", rows)

    @classmethod
    def single_suit(cls, d: int, suit: int = SPADES) -> "Shape":
        rows = [[0, 0, 0, 0] for _ in range(4)]
        for row in rows:
            row[suit] = d
        return cls(tuple(tuple(row) for row in rows))

    @classmethod
    def from_id(cls, shape_id: str) -> "Shape":
        """Inverse of ``shape_id``; hands are listed in play order N, E, S, W."""
        parts = shape_id.split("-")
        if len(parts) != 4 or any(len(p) != 4 for p in parts):
            raise ValueError(f"malformed shape id: {shape_id!r}")
        rows: Dict[Player, Tuple[int, ...]] = {}
        for seat, part in zip(PLAY_ORDER, parts):
            rows[seat] = tuple(int(ch, 16) for ch in part)
        return cls(tuple(rows[p] for p in Player))

    @classmethod
    def from_bytes(cls, data: bytes) -> "Shape":
        """Parse the 16-byte on-disk layout (hands N, E, S, W; suits S, H, D, C)."""
        if len(data) != 16:
            raise ValueError(f"shape needs 16 bytes, got {len(data)}")
        rows = {seat: tuple(data[4 * i:4 * i + 4]) for i, seat in enumerate(PLAY_ORDER)}
        return cls(tuple(rows[p] for p in Player))

    def to_bytes(self) -> bytes:
        return bytes(n for seat in PLAY_ORDER for n in self.lengths[seat])

    @property
    def d(self) -> int:
        return sum(self.lengths[0])

    @property
    def cards(self) -> int:
        return 4 * self.d

    def suit_size(self, suit: int) -> int:
        return sum(row[suit] for row in self.lengths)

    def caps(self, suit: int) -> Tuple[int, int, int, int]:
        """How many cards of ``suit`` each player holds, in N, S, E, W order."""
        return tuple(row[suit] for row in self.lengths)

    @property
    def shape_id(self) -> str:
        return "-".join("".join(f"{n:x}" for n in self.lengths[seat]) for seat in PLAY_ORDER)

    def __str__(self) -> str:
        return self.shape_id


class PartitionKey(NamedTuple):
    """Databases are built and stored per (shape, leader, trump)."""

    shape: Shape
    leader: Player
    trump: Trump

    @property
    def d(self) -> int:
        return self.shape.d

    @property
    def cards(self) -> int:
        return self.shape.cards

    @property
    def label(self) -> str:
        return f"{self.cards}/{self.trump.name}/{self.leader.name}/{self.shape.shape_id}"

    def relpath(self, kind: str, suffix: str) -> Path:
        return Path(kind, str(self.cards), self.trump.name, self.leader.name, f"{self.shape.shape_id}{suffix}")


@dataclass(frozen=True)
class Deal:
    """A canonical deal: relative ranks only, plus the leader and the trump strain."""

    words: Tuple[Word, ...]
    leader: Player
    trump: Trump

    @property
    def d(self) -> int:
        return sum(len(w) for w in self.words) // 4

    @property
    def shape(self) -> Shape:
        return _shape_of_words(self.words)

    @property
    def partition(self) -> PartitionKey:
        return PartitionKey(self.shape, self.leader, self.trump)

    def holder(self, card: Card) -> Player:
        word = self.words[card.suit]
        return Player(word[len(word) + 1 - card.rank])

    @property
    def holders(self) -> Dict[Card, Player]:
        return {
            Card(s, len(w) + 1 - i): Player(p)
            for s, w in enumerate(self.words)
            for i, p in enumerate(w)
        }

    def hand(self, player: Player) -> List[Card]:
        """Cards held by ``player``, suits in S, H, D, C order, highest first."""
        return [
            Card(s, len(w) + 1 - i)
            for s, w in enumerate(self.words)
            for i, p in enumerate(w)
            if p == player
        ]

    def to_absolute(self) -> "AbsoluteDeal":
        return AbsoluteDeal(self.holders, self.leader, self.trump)

    def __str__(self) -> str:
        return format_deal(self)


@dataclass(frozen=True)
class AbsoluteDeal:
    """A deal over the standard 52-card alphabet (ranks 2..14) with any subset in play."""

    holders: Mapping[Card, Player] = field(hash=False)
    leader: Player = Player.N
    trump: Trump = Trump.NT


@lru_cache(maxsize=4096)
def _shape_of_words(words: Tuple[Word, ...]) -> Shape:
    rows = [[0, 0, 0, 0] for _ in range(4)]
    for s, word in enumerate(words):
        for p in word:
            rows[p][s] += 1
    return Shape(tuple(tuple(row) for row in rows))


def canonicalize(deal: Union[AbsoluteDeal, Deal]) -> Deal:
    """Remap every suit's in-play ranks onto 2..n+1, keeping holders, leader and trump.

    Raises:
        MalformedDealError: If the hands are not all the same size or a card is invalid
    """
    if isinstance(deal, Deal):
        deal = deal.to_absolute()
    per_suit: List[List[Tuple[int, int]]] = [[] for _ in SUITS]
    sizes = [0, 0, 0, 0]
    for card, player in deal.holders.items():
        if card.suit not in SUITS or not 2 <= card.rank <= 14:
            raise MalformedDealError(f"invalid card {card!r}")
        per_suit[card.suit].append((card.rank, int(player)))
        sizes[int(player)] += 1
    if len(set(sizes)) != 1:
        counts = {p.name: sizes[p] for p in Player}
        raise MalformedDealError(f"hands must be the same size, got {counts}")
    words = tuple(tuple(p for _, p in sorted(cards, reverse=True)) for cards in per_suit)
    return Deal(words, Player(deal.leader), Trump(deal.trump))


def shape_of(deal: Deal) -> Shape:
    return deal.shape


@lru_cache(maxsize=None)
def multinomial(counts: Tuple[int, ...]) -> int:
    total = math.factorial(sum(counts))
    for c in counts:
        total //= math.factorial(c)
    return total


def deal_count(shape: Shape) -> int:
    """Number of canonical deals with this shape (for one leader and trump)."""
    return math.prod(multinomial(shape.caps(s)) for s in SUITS)


def _hand_rows(d: int) -> List[Tuple[int, int, int, int]]:
    return [row for row in product(range(min(d, MAX_SUIT_LENGTH) + 1), repeat=4) if sum(row) == d]


def iter_shapes(cards: int) -> Iterator[Shape]:
    if cards % 4 or not 4 <= cards <= 52:
        raise ValueError(f"cards must be a multiple of 4 between 4 and 52, got {cards}")
    rows = _hand_rows(cards // 4)
    for combo in product(rows, repeat=4):
        if all(sum(row[s] for row in combo) <= MAX_SUIT_LENGTH for s in SUITS):
            yield Shape(combo)


def enumerate_shapes(cards: int) -> List[Shape]:
    """Every shape with ``cards // 4`` cards per hand, in lexicographic order of the rows."""
    shapes = list(iter_shapes(cards))
    logger.debug(f"Enumerated {len(shapes)} shapes for {cards} cards")
    return shapes


def shape_classes(cards: int) -> List[Shape]:
    """One representative per class of shapes equal up to a permutation of the suits."""
    classes = set()
    for shape in iter_shapes(cards):
        classes.add(min(
            tuple(tuple(row[s] for s in perm) for row in shape.lengths)
            for perm in permutations(SUITS)
        ))
    return [Shape(lengths) for lengths in sorted(classes)]


def absolute_state_count(cards: int) -> int:
    """Absolute deals of ``cards`` cards drawn from a full pack, times the five strains."""
    d = cards // 4
    deals = math.factorial(52) // (math.factorial(d) ** 4 * math.factorial(52 - cards))
    return deals * len(Trump)


def canonical_state_count(cards: int) -> int:
    return sum(deal_count(shape) for shape in iter_shapes(cards)) * len(Trump) * len(Player)


def first_word(caps: Sequence[int]) -> Word:
    return tuple(p for p in range(4) for _ in range(caps[p]))


def next_word(word: Word, caps: Sequence[int], fixed_high_count: int) -> Optional[Word]:
    """Advance the top ``fixed_high_count`` digits of ``word`` and reset the rest.

    Returns None when the prefix is already the greatest feasible one.
    """
    prefix = list(word[:fixed_high_count])
    used = [prefix.count(p) for p in range(4)]
    for i in range(len(prefix) - 1, -1, -1):
        used[prefix[i]] -= 1
        for candidate in range(prefix[i] + 1, 4):
            if used[candidate] < caps[candidate]:
                used[candidate] += 1
                head = tuple(prefix[:i]) + (candidate,)
                return head + tuple(p for p in range(4) for _ in range(caps[p] - used[p]))
    return None


def iter_words(caps: Sequence[int]) -> Iterator[Word]:
    """All holder words for one suit, in increasing order."""
    word: Optional[Word] = first_word(caps)
    n = len(word)
    if n == 0:
        yield ()
        return
    while word is not None:
        yield word
        word = next_word(word, caps, n)


def first_deal(shape: Shape, leader: Player, trump: Trump) -> Deal:
    return Deal(tuple(first_word(shape.caps(s)) for s in SUITS), Player(leader), Trump(trump))


def next_suit_permutation(deal: Deal, suit: int, fixed_high_count: int) -> Optional[Deal]:
    """The next deal whose top ``fixed_high_count`` cards of ``suit`` differ from ``deal``'s.

    Lower cards of that suit are reset to their first feasible completion and
    other suits are untouched.
    """
    word = deal.words[suit]
    if not 1 <= fixed_high_count <= len(word):
        raise ValueError(f"fixed_high_count must be in 1..{len(word)}, got {fixed_high_count}")
    advanced = next_word(word, deal.shape.caps(suit), fixed_high_count)
    if advanced is None:
        return None
    words = deal.words[:suit] + (advanced,) + deal.words[suit + 1:]
    return Deal(words, deal.leader, deal.trump)


def iter_deals(shape: Shape, leader: Player, trump: Trump) -> Iterator[Deal]:
    """All deals of a partition in increasing canonical order."""
    per_suit = [list(iter_words(shape.caps(s))) for s in SUITS]
    for words in product(*per_suit):
        yield Deal(words, leader, trump)


def random_deal(shape: Shape, leader: Player, trump: Trump, rng: random.Random) -> Deal:
    """A uniformly random deal of the partition."""
    words = []
    for s in SUITS:
        word = list(first_word(shape.caps(s)))
        rng.shuffle(word)
        words.append(tuple(word))
    return Deal(tuple(words), leader, trump)


@lru_cache(maxsize=None)
def card_order(shape: Shape) -> Tuple[Tuple[int, int], ...]:
    """(suit, position) of every in-play card, highest relative rank first, ties S > H > D > C."""
    cards = []
    for s in SUITS:
        n = shape.suit_size(s)
        cards.extend((n + 1 - pos, s, pos) for pos in range(n))
    cards.sort(key=lambda c: (-c[0], c[1]))
    return tuple((s, pos) for _, s, pos in cards)


_TOKEN = re.compile(r"\S+")


def parse_deal(text: str, leader: Optional[Player] = None, trump: Optional[Trump] = None) -> Deal:
    """Parse ``N:98... E:54... S:76... W:32... leader=E trump=NT`` into a canonical deal.

    Ranks may be absolute; they are compressed on the way in. ``leader`` and
    ``trump`` arguments fill in tokens the text leaves out.

    Raises:
        MalformedDealError: With the column of the first offending character
    """
    holders: Dict[Card, Player] = {}
    seen_seats = set()
    for match in _TOKEN.finditer(text):
        token, column = match.group(), match.start()
        if token.startswith("leader="):
            value = token[len("leader="):]
            if value not in Player.__members__:
                raise MalformedDealError(f"unknown leader {value!r}", column + len("leader="))
            leader = Player[value]
        elif token.startswith("trump="):
            value = token[len("trump="):]
            if value not in Trump.__members__:
                raise MalformedDealError(f"unknown trump {value!r}", column + len("trump="))
            trump = Trump[value]
        elif len(token) >= 2 and token[0] in "NESW" and token[1] == ":":
            seat = Player[token[0]]
            if seat in seen_seats:
                raise MalformedDealError(f"hand {seat.name} given twice", column)
            seen_seats.add(seat)
            _parse_hand(token[2:], seat, column + 2, holders)
        else:
            raise MalformedDealError(f"unexpected token {token!r}", column)
    if len(seen_seats) != 4:
        missing = [p.name for p in PLAY_ORDER if p not in seen_seats]
        raise MalformedDealError(f"missing hands: {missing}", len(text))
    if leader is None or trump is None:
        raise MalformedDealError("deal needs a leader and a trump", len(text))
    return canonicalize(AbsoluteDeal(holders, leader, trump))


def _parse_hand(body: str, seat: Player, column: int, holders: Dict[Card, Player]) -> None:
    fields = body.split(".")
    if len(fields) != 4:
        raise MalformedDealError(f"hand {seat.name} needs 4 suit fields, got {len(fields)}", column)
    offset = column
    for suit, text in enumerate(fields):
        if text != "-":
            for i, symbol in enumerate(text):
                if symbol not in RANK_SYMBOLS:
                    raise MalformedDealError(f"unknown rank {symbol!r}", offset + i)
                card = Card(suit, RANK_SYMBOLS.index(symbol) + 2)
                if card in holders:
                    raise MalformedDealError(f"card {card} dealt twice", offset + i)
                holders[card] = seat
        offset += len(text) + 1


def format_deal(deal: Deal) -> str:
    hands = []
    for seat in PLAY_ORDER:
        suits = []
        for s, word in enumerate(deal.words):
            n = len(word)
            suits.append("".join(RANK_SYMBOLS[n - 1 - i] for i, p in enumerate(word) if p == seat))
        hands.append(f"{seat.name}:{'.'.join(suits)}")
    return f"{' '.join(hands)} leader={deal.leader.name} trump={deal.trump.name}"
