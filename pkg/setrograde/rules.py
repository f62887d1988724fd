"""Trick mechanics and the brute-force double-dummy evaluators.

``trick_value`` plays out one trick by partnership minimax and scores every
completed trick with a caller-supplied value for the successor deal. The
databases plug their lookups in there; ``minimax_value`` plugs in itself.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Dict, FrozenSet, List, Optional, Sequence, Set, Tuple

from setrograde.core import Card, Deal, Player, Trump

logger = logging.getLogger(__name__)

Play = Tuple[Player, Card]
SuccessorValue = Callable[[Deal], int]


@dataclass(frozen=True)
class TrickState:
    deal: Deal
    played: Tuple[Play, ...] = ()
    ns_tricks_so_far: int = 0

    @property
    def suit_led(self) -> Optional[int]:
        return self.played[0][1].suit if self.played else None

    @property
    def to_act(self) -> Player:
        seat = self.deal.leader
        for _ in self.played:
            seat = seat.next()
        return seat

    def play(self, card: Card) -> "TrickState":
        if len(self.played) == 4:
            raise ValueError("trick is already complete")
        if card not in legal_plays(self):
            raise ValueError(f"{self.to_act.name} cannot play {card}")
        return TrickState(self.deal, self.played + ((self.to_act, card),), self.ns_tricks_so_far)


def legal_plays(state: TrickState) -> List[Card]:
    """Cards the player to act may play: the suit led if they hold it, else anything."""
    hand = state.deal.hand(state.to_act)
    led = state.suit_led
    if led is None:
        return hand
    follow = [card for card in hand if card.suit == led]
    return follow or hand


def trick_winner(plays: Sequence[Play], suit_led: int, trump: Trump) -> Player:
    if len(plays) != 4:
        raise ValueError(f"a trick has 4 plays, got {len(plays)}")
    trump_suit = trump.suit
    best_key, winner = (-1, 0), None
    for player, card in plays:
        if card.suit == trump_suit:
            key = (2, card.rank)
        elif card.suit == suit_led:
            key = (1, card.rank)
        else:
            key = (0, 0)
        if key > best_key:
            best_key, winner = key, player
    return winner


def after_trick(deal: Deal, plays: Sequence[Play], winner: Player) -> Deal:
    """Remove the trick's cards and re-compress ranks; the winner leads next."""
    gone: Set[Tuple[int, int]] = {(c.suit, len(deal.words[c.suit]) + 1 - c.rank) for _, c in plays}
    words = tuple(
        tuple(p for i, p in enumerate(word) if (s, i) not in gone)
        for s, word in enumerate(deal.words)
    )
    return Deal(words, winner, deal.trump)


def _candidate_cards(deal: Deal, player: Player) -> List[Card]:
    """Hand ordered highest rank first, one card per run of touching cards."""
    cards = []
    for s, word in enumerate(deal.words):
        n = len(word)
        for i, p in enumerate(word):
            # the card just above belongs to the same hand, so this one plays identically
            if p == player and not (i > 0 and word[i - 1] == player):
                cards.append(Card(s, n + 1 - i))
    cards.sort(key=lambda c: -c.rank)
    return cards


def trick_value(deal: Deal, successor_value: SuccessorValue) -> int:
    """NS tricks from ``deal`` when the rest of the play is worth ``successor_value``.

    N and S maximize, E and W minimize. For one-trick deals ``successor_value``
    is never called.
    """
    if deal.d < 1:
        raise ValueError("deal has no tricks left to play")
    hands = {p: _candidate_cards(deal, p) for p in Player}
    seats = [deal.leader]
    for _ in range(3):
        seats.append(seats[-1].next())
    last_trick = deal.d == 1

    def search(plays: Tuple[Play, ...], alpha: int, beta: int) -> int:
        if len(plays) == 4:
            winner = trick_winner(plays, plays[0][1].suit, deal.trump)
            won = 1 if winner.is_ns else 0
            if last_trick:
                return won
            return won + successor_value(after_trick(deal, plays, winner))
        player = seats[len(plays)]
        cards = hands[player]
        if plays:
            led = plays[0][1].suit
            cards = [c for c in cards if c.suit == led] or cards
        maximizing = player.is_ns
        best = -1 if maximizing else deal.d + 1
        for card in cards:
            value = search(plays + ((player, card),), alpha, beta)
            if maximizing:
                best = max(best, value)
                alpha = max(alpha, best)
            else:
                best = min(best, value)
                beta = min(beta, best)
            if alpha >= beta:
                break
        return best

    return search((), -1, deal.d + 1)


def minimax_value(deal: Deal) -> int:
    """Exact NS tricks by plain alpha-beta, one trick at a time."""
    if deal.d == 0:
        return 0
    return trick_value(deal, minimax_value)


def trick_successors(deal: Deal) -> List[Tuple[int, Deal]]:
    """Every distinct (NS won the trick, successor deal) outcome of one trick."""
    outcomes = set()

    def walk(state: TrickState) -> None:
        if len(state.played) == 4:
            winner = trick_winner(state.played, state.suit_led, deal.trump)
            outcomes.add((1 if winner.is_ns else 0, after_trick(deal, state.played, winner)))
            return
        for card in legal_plays(state):
            walk(TrickState(deal, state.played + ((state.to_act, card),)))

    walk(TrickState(deal))
    return sorted(outcomes, key=lambda o: (o[0], o[1].leader, o[1].words))


def solve_card_by_card(deal: Deal) -> int:
    """Full-depth alpha-beta over single cards, without re-canonicalizing between tricks."""
    hands: Dict[Player, FrozenSet[Card]] = {p: frozenset(deal.hand(p)) for p in Player}

    def search(hands: Dict[Player, FrozenSet[Card]], leader: Player, plays: Tuple[Play, ...],
               alpha: int, beta: int) -> int:
        if len(plays) == 4:
            winner = trick_winner(plays, plays[0][1].suit, deal.trump)
            won = 1 if winner.is_ns else 0
            if not hands[winner]:
                return won
            return won + search(hands, winner, (), alpha - won, beta - won)
        player = leader
        for _ in plays:
            player = player.next()
        cards = sorted(hands[player], key=lambda c: (-c.rank, c.suit))
        if plays:
            led = plays[0][1].suit
            cards = [c for c in cards if c.suit == led] or cards
        maximizing = player.is_ns
        best = -1 if maximizing else deal.d + 1
        for card in cards:
            rest = dict(hands)
            rest[player] = hands[player] - {card}
            value = search(rest, leader, plays + ((player, card),), alpha, beta)
            if maximizing:
                best = max(best, value)
                alpha = max(alpha, best)
            else:
                best = min(best, value)
                beta = min(beta, best)
            if alpha >= beta:
                break
        return best

    if deal.d == 0:
        return 0
    return search(hands, deal.leader, (), -1, deal.d + 1)
