"""State-wise retrograde databases.

Every deal of a partition gets a dense index (a mixed-radix rank over the
per-suit holder words) and a 4-bit value. Two values share a byte, the even
index in the low nibble.
"""
import logging
import struct
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from setrograde.core import (
    PLAY_ORDER,
    SUITS,
    Deal,
    PartitionKey,
    Player,
    Shape,
    Trump,
    Word,
    deal_count,
    multinomial,
)
from setrograde.errors import FormatError, MissingPartitionError
from setrograde.rules import trick_value

logger = logging.getLogger(__name__)

RETRO_MAGIC = b"RGDB"
RETRO_VERSION = 1
# magic, version, d, trump, leader, shape, state count
RETRO_HEADER = struct.Struct("<4sHBBB16sQ")
UNSET = 0xF


def suit_rank(word: Word, caps: Sequence[int]) -> int:
    """Position of ``word`` among all words with these per-player counts."""
    remaining = list(caps)
    index = 0
    for digit in word:
        for smaller in range(digit):
            if remaining[smaller]:
                remaining[smaller] -= 1
                index += multinomial(tuple(remaining))
                remaining[smaller] += 1
        remaining[digit] -= 1
    return index


def suit_unrank(index: int, caps: Sequence[int]) -> Word:
    remaining = list(caps)
    word = []
    for _ in range(sum(caps)):
        for digit in range(4):
            if not remaining[digit]:
                continue
            remaining[digit] -= 1
            block = multinomial(tuple(remaining))
            if index < block:
                word.append(digit)
                break
            index -= block
            remaining[digit] += 1
    return tuple(word)


def state_count(shape: Shape) -> int:
    return deal_count(shape)


def rank(deal: Deal) -> int:
    """Dense index of ``deal`` within its partition; spades are the most significant digit."""
    shape = deal.shape
    index = 0
    for s in SUITS:
        caps = shape.caps(s)
        index = index * multinomial(caps) + suit_rank(deal.words[s], caps)
    return index


def unrank(shape: Shape, leader: Player, trump: Trump, index: int) -> Deal:
    total = state_count(shape)
    if not 0 <= index < total:
        raise IndexError(f"state index {index} out of range for {total} states")
    words: List[Word] = []
    for s in reversed(SUITS):
        caps = shape.caps(s)
        index, digit = divmod(index, multinomial(caps))
        words.append(suit_unrank(digit, caps))
    return Deal(tuple(reversed(words)), leader, trump)


@dataclass
class RetroDB:
    partition: PartitionKey
    packed: np.ndarray
    state_count: int
    visited: int = 0

    @classmethod
    def from_values(cls, partition: PartitionKey, values: np.ndarray, visited: int = 0) -> "RetroDB":
        values = np.asarray(values, dtype=np.uint8)
        padded = values if len(values) % 2 == 0 else np.append(values, np.uint8(0))
        packed = (padded[0::2] & 0xF) | ((padded[1::2] & 0xF) << 4)
        return cls(partition, packed.astype(np.uint8), len(values), visited)

    def values(self) -> np.ndarray:
        unpacked = np.empty(2 * len(self.packed), dtype=np.uint8)
        unpacked[0::2] = self.packed & 0xF
        unpacked[1::2] = self.packed >> 4
        return unpacked[:self.state_count]

    def value_at(self, index: int) -> int:
        byte = int(self.packed[index >> 1])
        return (byte >> 4) if index & 1 else (byte & 0xF)

    def lookup(self, deal: Deal) -> int:
        if deal.partition != self.partition:
            raise ValueError(f"deal belongs to {deal.partition.label}, not {self.partition.label}")
        return self.value_at(rank(deal))

    def to_bytes(self) -> bytes:
        key = self.partition
        header = RETRO_HEADER.pack(
            RETRO_MAGIC, RETRO_VERSION, key.d, int(key.trump), PLAY_ORDER.index(key.leader),
            key.shape.to_bytes(), self.state_count,
        )
        return header + self.packed.tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "RetroDB":
        if len(data) < RETRO_HEADER.size:
            raise FormatError(f"truncated header ({len(data)} bytes)", len(data))
        magic, version, d, trump, leader, shape_bytes, count = RETRO_HEADER.unpack_from(data)
        if magic != RETRO_MAGIC:
            raise FormatError(f"bad magic {magic!r}", 0)
        if version != RETRO_VERSION:
            raise FormatError(f"unsupported version {version}", 4)
        try:
            shape = Shape.from_bytes(shape_bytes)
            partition = PartitionKey(shape, PLAY_ORDER[leader], Trump(trump))
        except (ValueError, IndexError) as e:
            raise FormatError(f"bad partition fields: {e}", 6)
        if shape.d != d:
            raise FormatError(f"depth {d} does not match shape {shape}", 6)
        body = data[RETRO_HEADER.size:]
        if len(body) != (count + 1) // 2:
            raise FormatError(f"expected {(count + 1) // 2} value bytes, got {len(body)}", RETRO_HEADER.size)
        return cls(partition, np.frombuffer(body, dtype=np.uint8).copy(), count)


def build_retro_db(shape: Shape, leader: Player, trump: Trump,
                   prior: Optional["RetroStore"] = None) -> RetroDB:
    """Solve every deal of one partition from the finished (d-1)-trick databases.

    Raises:
        MissingPartitionError: If a successor's partition is not in ``prior``
    """
    partition = PartitionKey(shape, Player(leader), Trump(trump))
    if shape.d > 1 and prior is None:
        raise MissingPartitionError(f"{partition.label} needs the {shape.d - 1}-trick databases", partition)
    start = time.perf_counter()
    count = state_count(shape)
    values = np.full(count, UNSET, dtype=np.uint8)
    visited = 0
    for index in range(count):
        deal = unrank(shape, leader, trump, index)
        values[index] = trick_value(deal, prior.lookup if prior is not None else _no_successor)
        visited += 1
    db = RetroDB.from_values(partition, values, visited)
    logger.info(f"Built retro {partition.label}: {count} states in {time.perf_counter() - start:.2f}s")
    return db


def _no_successor(deal: Deal) -> int:
    raise AssertionError("one-trick deals have no successor to look up")


class RetroStore:
    """Retro databases keyed by partition, kept under ``root`` when one is given."""

    def __init__(self, root: Optional[Path] = None):
        self.root = Path(root) if root is not None else None
        self._dbs: Dict[PartitionKey, RetroDB] = {}

    def path(self, key: PartitionKey) -> Path:
        return self.root / key.relpath("retro", ".rdb")

    def __contains__(self, key: PartitionKey) -> bool:
        return key in self._dbs or (self.root is not None and self.path(key).exists())

    def get(self, key: PartitionKey) -> RetroDB:
        db = self._dbs.get(key)
        if db is None:
            if self.root is None or not self.path(key).exists():
                raise MissingPartitionError(f"retro database {key.label} has not been built", key)
            db = load(self.path(key))
            self._dbs[key] = db
        return db

    def put(self, db: RetroDB) -> None:
        self._dbs[db.partition] = db
        if self.root is not None:
            save(db, self.path(db.partition))

    def lookup(self, deal: Deal) -> int:
        return self.get(deal.partition).lookup(deal)


def save(db: RetroDB, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(db.to_bytes())
    logger.info(f"Wrote {path} ({db.state_count} states)")


def load(path: Path) -> RetroDB:
    return RetroDB.from_bytes(Path(path).read_bytes())


def _build_task(root: Path, key: PartitionKey) -> Tuple[PartitionKey, float]:
    store = RetroStore(root)
    start = time.perf_counter()
    store.put(build_retro_db(key.shape, key.leader, key.trump, store))
    return key, time.perf_counter() - start


def build_retro_depth(keys: Iterable[PartitionKey], store: RetroStore, workers: int = 1) -> Dict[PartitionKey, float]:
    """Build every missing partition in ``keys`` (all of one depth); returns seconds per partition."""
    todo = [key for key in keys if key not in store]
    elapsed: Dict[PartitionKey, float] = {}
    if workers > 1 and store.root is not None and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for key, seconds in pool.map(_build_task, [store.root] * len(todo), todo):
                elapsed[key] = seconds
    else:
        for key in todo:
            start = time.perf_counter()
            store.put(build_retro_db(key.shape, key.leader, key.trump, store))
            elapsed[key] = time.perf_counter() - start
    return elapsed
