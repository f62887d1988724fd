"""Set-based retrograde construction of one partition's database.

Independent (not yet covered) deals are pulled from an open list in
decreasing canonical order, valued from the (d-1)-trick databases, widened by
binary search on the number of x-cards into the largest consistent set the
search reaches, and stored. Successors of each stored set seed the open list.
"""
import heapq
import json
import logging
import random
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Set, Tuple, Union

from setrograde.core import (
    SUITS,
    Deal,
    PartitionKey,
    Player,
    Shape,
    Trump,
    first_deal,
    format_deal,
    iter_deals,
    next_suit_permutation,
)
from setrograde.errors import MissingPartitionError, ValidationMismatch
from setrograde.rules import trick_value
from setrograde.setdb import PartitionTree, SetStore, compact, covering_entry, entries, insert, lookup_state, value_bounds
from setrograde.sets import SetEntry, candidate_with_x_counts, format_entry, iter_members, with_value

logger = logging.getLogger(__name__)

VALUE_CACHE_SIZE = 1 << 18

Probe = Tuple[int, int, bool]
ProbeHook = Callable[[int, int, bool], None]


class OpenList:
    """Pending deals, popped greatest canonical position first; each deal is accepted once."""

    def __init__(self):
        self._heap: List[Tuple[Tuple[int, ...], Deal]] = []
        # keeps popped deals too; a later successor may repeat one
        self._seen: Set[Deal] = set()
        self.max_size = 0

    def push(self, deal: Deal) -> bool:
        if deal in self._seen:
            return False
        self._seen.add(deal)
        heapq.heappush(self._heap, (tuple(-p for word in deal.words for p in word), deal))
        self.max_size = max(self.max_size, len(self._heap))
        return True

    def pop(self) -> Deal:
        return heapq.heappop(self._heap)[1]

    def __len__(self) -> int:
        return len(self._heap)


@dataclass
class BuildReport:
    partition: str
    generated: int = 0
    independent: int = 0
    duplicate: int = 0
    entries_before: int = 0
    entries_after: int = 0
    elapsed: float = 0.0
    oracle_queries: int = 0
    max_open_list: int = 0
    monotonicity_violations: int = 0
    probe_log: List[Probe] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "BuildReport":
        data = dict(data)
        data["probe_log"] = [tuple(p) for p in data.get("probe_log", [])]
        return cls(**data)


class Evaluator:
    """Values of one depth's deals, computed from the (d-1)-trick set databases.

    Deal and successor values are kept in two LRU caches of ``cache_size``
    deals each, for the lifetime of the evaluator (normally one partition build).
    """

    def __init__(self, prior: Optional[SetStore], cache_size: int = VALUE_CACHE_SIZE):
        self.prior = prior
        self.queries = 0
        self.successor_value = lru_cache(maxsize=cache_size)(self._successor_value)
        self._value = lru_cache(maxsize=cache_size)(self._trick_value)

    def _successor_value(self, deal: Deal) -> int:
        if self.prior is None:
            raise MissingPartitionError(f"no prior databases to value {format_deal(deal)}", deal.partition)
        value = lookup_state(self.prior.get(deal.partition), deal)
        if value is None:
            raise MissingPartitionError(
                f"incomplete prior: {deal.partition.label} does not cover {format_deal(deal)}", deal.partition)
        return value

    def _trick_value(self, deal: Deal) -> int:
        return trick_value(deal, self.successor_value)

    def value(self, deal: Deal) -> int:
        self.queries += 1
        return self._value(deal)

    def cache_info(self):
        return self._value.cache_info()


def _evaluator(prior: Union[Evaluator, SetStore, None]) -> Evaluator:
    return prior if isinstance(prior, Evaluator) else Evaluator(prior)


def database_lookup(deal: Deal, prior: Union[Evaluator, SetStore, None]) -> int:
    """Value of ``deal``: one trick of partnership minimax over the prior databases.

    Raises:
        MissingPartitionError: If a successor is not covered by the prior databases
    """
    return _evaluator(prior).value(deal)


def oracle(entry: SetEntry, value: int, prior: Union[Evaluator, SetStore, None]) -> bool:
    """True iff every member of ``entry`` has value ``value``."""
    evaluator = _evaluator(prior)
    return all(evaluator.value(deal) == value for deal in iter_members(entry))


def _setwise_applies(entry: SetEntry) -> bool:
    if entry.partition.trump is not Trump.NT:
        return False
    shape = entry.shape
    for s in SUITS:
        if shape.suit_size(s) and any(shape.lengths[p][s] == 0 for p in Player):
            return False
    return all(mask in (1, 2, 4, 8) for masks in entry.ranked for mask in masks)


def _resultant(entry: SetEntry, suit: int, plays: List[Tuple[Player, Optional[int]]], winner: Player) -> SetEntry:
    """The set of successors after a trick of ranked cards (positions) and x-cards (None) in ``suit``."""
    shape = entry.shape
    rows = [list(row) for row in shape.lengths]
    for player, _ in plays:
        rows[player][suit] -= 1
    played = {pos for _, pos in plays if pos is not None}
    x_played = sum(1 for _, pos in plays if pos is None)
    ranked = list(entry.ranked)
    ranked[suit] = tuple(m for i, m in enumerate(entry.ranked[suit]) if i not in played)
    x_counts = list(entry.x_counts)
    x_counts[suit] -= x_played
    if x_counts[suit] == 0 and ranked[suit]:
        # the lowest card's holder is forced by the shape
        ranked[suit] = ranked[suit][:-1]
        x_counts[suit] = 1
    partition = PartitionKey(Shape(tuple(tuple(row) for row in rows)), winner, entry.partition.trump)
    return SetEntry(partition, tuple(ranked), tuple(x_counts), -1)


def _setwise_bounds(entry: SetEntry, evaluator: Evaluator) -> Tuple[int, int]:
    """Interval holding the value of every member, by playing one trick on the set itself."""
    d = entry.partition.d
    holders = [[(mask.bit_length() - 1) for mask in masks] for masks in entry.ranked]
    xs = [[entry.shape.lengths[p][s] - holders[s].count(p) for s in SUITS] for p in range(4)]
    seats = [entry.partition.leader]
    for _ in range(3):
        seats.append(seats[-1].next())

    def leaf(suit: int, plays: List[Tuple[Player, Optional[int]]]) -> Tuple[int, int]:
        ranked_plays = [(pos, player) for player, pos in plays if pos is not None]
        winners = [min(ranked_plays)[1]] if ranked_plays else [player for player, _ in plays]
        lo, hi = d + 1, -1
        for winner in winners:
            won = 1 if winner.is_ns else 0
            if d == 1:
                bounds = (0, 0)
            else:
                probe = _resultant(entry, suit, plays, winner)
                bounds = value_bounds(evaluator.prior.get(probe.partition), probe) if evaluator.prior else None
                if bounds is None:
                    raise MissingPartitionError(f"incomplete prior: nothing overlaps {format_entry(probe)}", probe.partition)
            lo, hi = min(lo, won + bounds[0]), max(hi, won + bounds[1])
        return lo, hi

    def search(suit: Optional[int], plays: List[Tuple[Player, Optional[int]]]) -> Tuple[int, int]:
        if len(plays) == 4:
            return leaf(suit, plays)
        player = seats[len(plays)]
        options = []
        for s in ([suit] if suit is not None else SUITS):
            options.extend((s, pos) for pos, p in enumerate(holders[s]) if p == player)
            if xs[player][s]:
                options.append((s, None))
        results = []
        for s, pos in options:
            if pos is None:
                xs[player][s] -= 1
            results.append(search(s, plays + [(player, pos)]))
            if pos is None:
                xs[player][s] += 1
        pick = max if player.is_ns else min
        return pick(r[0] for r in results), pick(r[1] for r in results)

    return search(None, [])


def oracle_setwise(entry: SetEntry, value: int, prior: Union[Evaluator, SetStore, None]) -> bool:
    """Same verdict as ``oracle``, decided on the set where the play of x-cards allows.

    Only no-trump sets of single-holder cards where every hand holds every
    suit in play are handled here; anything else, and any undecided interval,
    goes to ``oracle``.
    """
    evaluator = _evaluator(prior)
    if _setwise_applies(entry):
        lo, hi = _setwise_bounds(entry, evaluator)
        if lo == hi == value:
            return True
        if value < lo or value > hi:
            return False
    return oracle(entry, value, evaluator)


def generalize_to_set(deal: Deal, value: int, prior: Union[Evaluator, SetStore, None],
                      on_probe: Optional[ProbeHook] = None, setwise: bool = False,
                      check_monotone: bool = False) -> SetEntry:
    """Widen ``deal`` into the consistent set with the most x-cards the search reaches.

    Suits go largest first (ties in S, H, D, C order); each suit's x count is
    binary searched with the other suits held at their current counts.
    """
    evaluator = _evaluator(prior)
    check = oracle_setwise if setwise else oracle
    x_counts = [1 if word else 0 for word in deal.words]
    order = sorted((s for s in SUITS if deal.words[s]), key=lambda s: (-len(deal.words[s]), s))

    def probe(suit: int, count: int) -> bool:
        trial = list(x_counts)
        trial[suit] = count
        verdict = check(candidate_with_x_counts(deal, trial), value, evaluator)
        logger.debug(f"Probe {format_deal(deal)} suit {suit} x={count}: {verdict}")
        if on_probe is not None:
            on_probe(suit, count, verdict)
        return verdict

    for suit in order:
        lo, hi = 1, len(deal.words[suit])
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if probe(suit, mid):
                lo = mid
            else:
                hi = mid - 1
        if check_monotone and not all(probe(suit, k) for k in range(1, lo)):
            logger.warning(f"Non-monotone x counts in suit {suit} of {format_deal(deal)}; scanning linearly")
            lo = next(k for k in range(len(deal.words[suit]), 0, -1) if k == 1 or probe(suit, k))
            if on_probe is not None:
                on_probe(suit, -1, False)
        x_counts[suit] = lo
    return with_value(candidate_with_x_counts(deal, x_counts), value)


def successors(deal: Deal, entry: SetEntry) -> List[Deal]:
    """For each suit, the next deal whose ranked cards of that suit differ from ``entry``'s."""
    found = []
    for s in SUITS:
        ranked = len(entry.ranked[s])
        if ranked:
            nxt = next_suit_permutation(deal, s, ranked)
            if nxt is not None:
                found.append(nxt)
    return found


def next_independent_state(open_list: OpenList, tree: PartitionTree, last_entry: Optional[SetEntry] = None,
                           origin: Optional[Deal] = None, report: Optional[BuildReport] = None) -> Optional[Deal]:
    """Push the successors of the last stored set, then pop until an uncovered deal appears.

    Covered deals are discarded, after their own successors (taken against the
    set covering them) are pushed.
    """
    counts = report if report is not None else BuildReport(tree.partition.label)
    if last_entry is not None and origin is not None:
        for nxt in successors(origin, last_entry):
            if open_list.push(nxt):
                counts.generated += 1
    while len(open_list):
        deal = open_list.pop()
        covering = covering_entry(tree, deal)
        if covering is None:
            counts.independent += 1
            return deal
        counts.duplicate += 1
        logger.debug(f"Duplicate {format_deal(deal)}")
        for nxt in successors(deal, covering):
            if open_list.push(nxt):
                counts.generated += 1
    return None


def build_setro_db(shape: Shape, leader: Player, trump: Trump, prior: Optional[SetStore],
                   debug_sweep: bool = False, setwise: bool = False,
                   check_monotone: bool = False) -> Tuple[PartitionTree, BuildReport]:
    """Build and compact the set database of one partition.

    Raises:
        MissingPartitionError: If the prior databases do not cover a successor
        ValidationMismatch: If the debug sweep finds an uncovered deal
    """
    partition = PartitionKey(shape, Player(leader), Trump(trump))
    start = time.perf_counter()
    report = BuildReport(partition.label)
    evaluator = Evaluator(prior)
    tree = PartitionTree(partition)
    open_list = OpenList()
    open_list.push(first_deal(shape, leader, trump))
    report.generated = 1
    deal = next_independent_state(open_list, tree, report=report)
    while deal is not None:
        value = evaluator.value(deal)
        probes: List[Probe] = []
        entry = generalize_to_set(deal, value, evaluator, on_probe=lambda s, k, ok: probes.append((s, k, ok)),
                                  setwise=setwise, check_monotone=check_monotone)
        if report.independent == 1:
            report.probe_log = probes
        if any(k < 0 for _, k, _ in probes):
            report.monotonicity_violations += 1
        insert(tree, entry)
        logger.debug(f"Stored {format_entry(entry)}")
        deal = next_independent_state(open_list, tree, entry, deal, report)
    report.entries_before = tree.entry_count
    tree = compact(tree)
    report.entries_after = tree.entry_count
    report.oracle_queries = evaluator.queries
    report.max_open_list = open_list.max_size
    report.elapsed = time.perf_counter() - start
    if debug_sweep:
        sweep(tree)
    logger.info(
        f"Built setro {partition.label}: {report.independent} independent of {report.generated} generated, "
        f"{report.entries_before} -> {report.entries_after} entries in {report.elapsed:.2f}s")
    logger.info(f"Open list high-water mark for {partition.label}: {report.max_open_list}")
    return tree, report


def sweep(tree: PartitionTree) -> int:
    """Check that every deal of the partition is covered; returns the number checked."""
    key = tree.partition
    checked = 0
    for deal in iter_deals(key.shape, key.leader, key.trump):
        if lookup_state(tree, deal) is None:
            raise ValidationMismatch(f"{format_deal(deal)} is not covered by {key.label}", deal)
        checked += 1
    return checked


def verify_entries(tree: PartitionTree, prior: Optional[SetStore], fraction: float = 0.01,
                   rng: Optional[random.Random] = None) -> int:
    """Re-run the oracle on a random sample (at least one) of the stored sets.

    Raises:
        ValidationMismatch: If a sampled set is not consistent
    """
    stored = entries(tree)
    if not stored:
        return 0
    rng = rng or random.Random(0)
    sample = rng.sample(stored, max(1, round(fraction * len(stored))))
    evaluator = Evaluator(prior)
    for entry in sample:
        if not oracle(entry, entry.value, evaluator):
            raise ValidationMismatch(f"stored set is not consistent: {format_entry(entry)}")
    return len(sample)


def successor_partitions(key: PartitionKey) -> Set[PartitionKey]:
    """Partitions one trick below ``key`` that some line of play can reach."""
    shape, trump = key.shape, key.trump
    seats = [key.leader]
    for _ in range(3):
        seats.append(seats[-1].next())
    found: Set[PartitionKey] = set()

    def walk(i: int, led: Optional[int], suits: List[int]) -> None:
        if i == 4:
            rows = [list(row) for row in shape.lengths]
            for seat, s in zip(seats, suits):
                rows[seat][s] -= 1
            reduced = Shape(tuple(tuple(row) for row in rows))
            for seat, s in zip(seats, suits):
                if s == led or s == trump.suit:
                    found.add(PartitionKey(reduced, seat, trump))
            return
        held = [s for s in SUITS if shape.lengths[seats[i]][s]]
        if led is not None and led in held:
            held = [led]
        for s in held:
            walk(i + 1, s if led is None else led, suits + [s])

    walk(0, None, [])
    return found


def required_partitions(top: Iterable[PartitionKey]) -> Dict[int, List[PartitionKey]]:
    """The partitions needed to build ``top``, grouped by depth."""
    by_depth: Dict[int, Set[PartitionKey]] = {}
    frontier = set(top)
    while frontier:
        d = next(iter(frontier)).d
        by_depth.setdefault(d, set()).update(frontier)
        below: Set[PartitionKey] = set()
        if d > 1:
            for key in frontier:
                below |= successor_partitions(key)
        frontier = below
    return {
        d: sorted(keys, key=lambda k: (int(k.trump), int(k.leader), k.shape.shape_id))
        for d, keys in by_depth.items()
    }


def _build_task(root: Path, key: PartitionKey, debug_sweep: bool, setwise: bool) -> Tuple[BuildReport, int, int]:
    # the parent process owns the manifests
    store = SetStore(root)
    tree, report = build_setro_db(key.shape, key.leader, key.trump, store, debug_sweep, setwise)
    store.put(tree, manifest=False)
    write_report(store, key, report)
    return report, tree.entry_count, len(tree.nodes)


def build_depth(keys: Iterable[PartitionKey], store: SetStore, workers: int = 1,
                debug_sweep: bool = False, setwise: bool = False) -> List[BuildReport]:
    """Build every missing partition in ``keys``, all of one depth, one task per partition."""
    todo = [key for key in keys if key not in store]
    if workers > 1 and store.root is not None and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            n = len(todo)
            results = list(pool.map(_build_task, [store.root] * n, todo, [debug_sweep] * n, [setwise] * n))
        store.record((key, entry_count, node_count) for key, (_, entry_count, node_count) in zip(todo, results))
        return [report for report, _, _ in results]
    reports = []
    for key in todo:
        tree, report = build_setro_db(key.shape, key.leader, key.trump, store, debug_sweep, setwise)
        store.put(tree)
        write_report(store, key, report)
        reports.append(report)
    return reports


def report_path(store: SetStore, key: PartitionKey) -> Optional[Path]:
    return store.path(key).with_suffix(".json") if store.root is not None else None


def write_report(store: SetStore, key: PartitionKey, report: BuildReport) -> None:
    path = report_path(store, key)
    if path is not None:
        path.write_text(report.to_json())


def read_report(store: SetStore, key: PartitionKey) -> Optional[BuildReport]:
    path = report_path(store, key)
    if path is None or not path.exists():
        return None
    return BuildReport.from_dict(json.loads(path.read_text()))
