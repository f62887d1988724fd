"""Shallow-tree storage for consistent sets.

Cards are taken four at a time in ``card_order``; each tree level keys those
four cards with their holder masks (slot j in bits 4j..4j+3, N lowest). A
deal matches a node when its one-hot key ANDed with the node key gives the
deal key back. Children directly follow their parent in the packed array and
siblings chain through forward offsets.
"""
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, NamedTuple, Optional, Tuple

from setrograde.core import PLAY_ORDER, SUITS, Deal, PartitionKey, Shape, Trump, card_order, deal_count, iter_deals
from setrograde.errors import FormatError, MissingPartitionError
from setrograde.sets import FULL_MASK, SetEntry, intersects, member_count, subsumes, try_merge

logger = logging.getLogger(__name__)

SETDB_MAGIC = b"SGDB"
SETDB_VERSION = 1
# magic, version, d, trump, leader, shape, node count, entry count
SETDB_HEADER = struct.Struct("<4sHBBB16sQQ")
NODE = struct.Struct("<Q")
NODE_BYTES = NODE.size
MANIFEST = "MANIFEST.txt"
CARDS_PER_LEVEL = 4
ALL_X_KEY = 0xFFFF
# bits 58-63 of a node are reserved and must be zero
RESERVED_SHIFT = 58


class TreeNode(NamedTuple):
    key: int
    lo: int
    hi: int
    sibling: int
    has_child: bool
    is_entry: bool

    def pack(self) -> int:
        return (
            self.key
            | self.lo << 16
            | self.hi << 20
            | self.sibling << 24
            | int(self.has_child) << 56
            | int(self.is_entry) << 57
        )

    @classmethod
    def unpack(cls, word: int) -> "TreeNode":
        return cls(
            key=word & 0xFFFF,
            lo=word >> 16 & 0xF,
            hi=word >> 20 & 0xF,
            sibling=word >> 24 & 0xFFFFFFFF,
            has_child=bool(word >> 56 & 1),
            is_entry=bool(word >> 57 & 1),
        )


@dataclass
class _Branch:
    key: int
    lo: int
    hi: int
    is_entry: bool = False
    children: List["_Branch"] = field(default_factory=list)


class PartitionTree:
    """The set database of one partition.

    Built as linked branches; ``nodes`` gives the packed array used for
    lookups and files, recomputed after each change.
    """

    def __init__(self, partition: PartitionKey):
        self.partition = partition
        self._roots: List[_Branch] = []
        self._nodes: Optional[List[TreeNode]] = None

    @property
    def nodes(self) -> List[TreeNode]:
        if self._nodes is None:
            out: List[TreeNode] = []
            _pack(self._roots, out)
            self._nodes = out
        return self._nodes

    @property
    def entry_count(self) -> int:
        return sum(1 for node in self.nodes if node.is_entry)

    def __len__(self) -> int:
        return len(self.nodes)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PartitionTree):
            return NotImplemented
        return self.partition == other.partition and self.nodes == other.nodes

    @classmethod
    def from_nodes(cls, partition: PartitionKey, nodes: List[TreeNode]) -> "PartitionTree":
        tree = cls(partition)
        if nodes:
            tree._roots = _unpack(nodes, 0, 0, partition.d)
        tree._nodes = list(nodes)
        return tree

    def _changed(self) -> None:
        self._nodes = None


def _pack(branches: List[_Branch], out: List[Optional[TreeNode]]) -> None:
    starts = []
    for branch in branches:
        starts.append(len(out))
        out.append(None)
        _pack(branch.children, out)
    for k, (branch, start) in enumerate(zip(branches, starts)):
        sibling = starts[k + 1] - start if k + 1 < len(starts) else 0
        out[start] = TreeNode(branch.key, branch.lo, branch.hi, sibling, bool(branch.children), branch.is_entry)


def _unpack(nodes: List[TreeNode], i: int, depth: int, max_depth: int) -> List[_Branch]:
    if depth >= max_depth:
        raise FormatError(f"tree deeper than {max_depth} levels", SETDB_HEADER.size + i * NODE_BYTES)
    branches = []
    while True:
        if i >= len(nodes):
            raise FormatError(f"node index {i} past the end", SETDB_HEADER.size + i * NODE_BYTES)
        node = nodes[i]
        branch = _Branch(node.key, node.lo, node.hi, node.is_entry)
        if node.has_child:
            branch.children = _unpack(nodes, i + 1, depth + 1, max_depth)
        branches.append(branch)
        if node.sibling == 0:
            return branches
        i += node.sibling


def _level_key(masks: List[int]) -> int:
    key = 0
    for j, mask in enumerate(masks):
        key |= mask << (4 * j)
    return key


def _ordered_masks(entry: SetEntry) -> List[int]:
    per_suit = [entry.suit_masks(s) for s in SUITS]
    return [per_suit[s][pos] for s, pos in card_order(entry.shape)]


def entry_keys(entry: SetEntry) -> Tuple[int, ...]:
    """Level keys of an entry's path; levels of x-cards only at the bottom are dropped."""
    masks = _ordered_masks(entry)
    keys = [_level_key(masks[i:i + CARDS_PER_LEVEL]) for i in range(0, len(masks), CARDS_PER_LEVEL)]
    while len(keys) > 1 and keys[-1] == ALL_X_KEY:
        keys.pop()
    return tuple(keys)


def probe_keys(entry: SetEntry) -> Tuple[int, ...]:
    masks = _ordered_masks(entry)
    return tuple(_level_key(masks[i:i + CARDS_PER_LEVEL]) for i in range(0, len(masks), CARDS_PER_LEVEL))


def state_keys(deal: Deal) -> Tuple[int, ...]:
    order = card_order(deal.shape)
    masks = [1 << deal.words[s][pos] for s, pos in order]
    return tuple(_level_key(masks[i:i + CARDS_PER_LEVEL]) for i in range(0, len(masks), CARDS_PER_LEVEL))


def entry_from_keys(partition: PartitionKey, keys: Tuple[int, ...], value: int) -> SetEntry:
    shape = partition.shape
    masks = [[FULL_MASK] * shape.suit_size(s) for s in SUITS]
    order = card_order(shape)
    for level, key in enumerate(keys):
        for j in range(CARDS_PER_LEVEL):
            s, pos = order[level * CARDS_PER_LEVEL + j]
            masks[s][pos] = key >> (4 * j) & FULL_MASK
    return SetEntry.from_suit_masks(partition, [tuple(m) for m in masks], value)


def insert(tree: PartitionTree, entry: SetEntry) -> PartitionTree:
    """Add ``entry`` along its key path, reusing shared prefixes and widening bounds."""
    if entry.partition != tree.partition:
        raise ValueError(f"entry for {entry.partition.label} inserted into {tree.partition.label}")
    value = entry.value
    branches = tree._roots
    path = []
    for key in entry_keys(entry):
        branch = next((b for b in branches if b.key == key), None)
        if branch is None:
            branch = _Branch(key, value, value)
            branches.append(branch)
        path.append(branch)
        branches = branch.children
    if path[-1].is_entry:
        logger.debug(f"Entry already stored in {tree.partition.label}")
        return tree
    path[-1].is_entry = True
    for branch in path:
        branch.lo = min(branch.lo, value)
        branch.hi = max(branch.hi, value)
    tree._changed()
    return tree


def _descend(nodes: List[TreeNode], keys: Tuple[int, ...]) -> Optional[List[int]]:
    """Indices of the nodes from a root down to the first entry matching ``keys``."""

    def walk(i: int, level: int) -> Optional[List[int]]:
        key = keys[level]
        while True:
            node = nodes[i]
            if node.key & key == key:
                if node.is_entry:
                    return [i]
                if node.has_child and level + 1 < len(keys):
                    found = walk(i + 1, level + 1)
                    if found is not None:
                        return [i] + found
            if node.sibling == 0:
                return None
            i += node.sibling

    if not nodes:
        return None
    return walk(0, 0)


def _check_partition(tree: PartitionTree, deal: Deal) -> None:
    if deal.partition != tree.partition:
        raise ValueError(f"deal belongs to {deal.partition.label}, not {tree.partition.label}")


def lookup_state(tree: PartitionTree, deal: Deal) -> Optional[int]:
    """Value of ``deal``, or None if no stored set contains it."""
    _check_partition(tree, deal)
    nodes = tree.nodes
    path = _descend(nodes, state_keys(deal))
    return None if path is None else nodes[path[-1]].lo


def covering_entry(tree: PartitionTree, deal: Deal) -> Optional[SetEntry]:
    """The stored set that ``lookup_state`` would answer from."""
    _check_partition(tree, deal)
    nodes = tree.nodes
    path = _descend(nodes, state_keys(deal))
    if path is None:
        return None
    return entry_from_keys(tree.partition, tuple(nodes[i].key for i in path), nodes[path[-1]].lo)


def _slots_overlap(a: int, b: int) -> bool:
    return all((a >> (4 * j)) & (b >> (4 * j)) & FULL_MASK for j in range(CARDS_PER_LEVEL))


def _walk_entries(branches: List[_Branch], prefix: Tuple[int, ...]) -> Iterator[Tuple[Tuple[int, ...], _Branch]]:
    for branch in branches:
        keys = prefix + (branch.key,)
        if branch.is_entry:
            yield keys, branch
        yield from _walk_entries(branch.children, keys)


def entries(tree: PartitionTree) -> List[SetEntry]:
    """Stored sets in tree order."""
    return [entry_from_keys(tree.partition, keys, b.lo) for keys, b in _walk_entries(tree._roots, ())]


def find_overlapping(tree: PartitionTree, probe: SetEntry) -> List[Tuple[SetEntry, int]]:
    """Stored sets sharing at least one deal with ``probe``."""
    if probe.partition != tree.partition:
        raise ValueError(f"probe for {probe.partition.label} sent to {tree.partition.label}")
    keys = probe_keys(probe)
    found = []

    def walk(branches: List[_Branch], level: int, prefix: Tuple[int, ...]) -> None:
        for branch in branches:
            if not _slots_overlap(branch.key, keys[level]):
                continue
            path = prefix + (branch.key,)
            if branch.is_entry:
                entry = entry_from_keys(tree.partition, path, branch.lo)
                if intersects(entry, probe):
                    found.append((entry, branch.lo))
            walk(branch.children, level + 1, path)

    walk(tree._roots, 0, ())
    return found


def value_bounds(tree: PartitionTree, probe: SetEntry) -> Optional[Tuple[int, int]]:
    values = [value for _, value in find_overlapping(tree, probe)]
    if not values:
        return None
    return min(values), max(values)


def _merge_pass(items: List[SetEntry]) -> Tuple[List[SetEntry], int]:
    """Merge entries that differ in a single ranked card, bucketing by everything else."""
    alive: List[Optional[SetEntry]] = list(items)
    buckets: Dict[tuple, int] = {}
    merges = 0
    i = 0
    while i < len(alive):
        entry = alive[i]
        if entry is not None:
            for s in SUITS:
                for pos in range(len(entry.ranked[s])):
                    blanked = entry.ranked[:s] + (entry.ranked[s][:pos] + (-1,) + entry.ranked[s][pos + 1:],) + entry.ranked[s + 1:]
                    bucket = (entry.value, entry.x_counts, blanked)
                    j = buckets.get(bucket)
                    if j is not None and alive[j] is not None:
                        merged = try_merge(alive[j], entry)
                        if merged is not None:
                            alive[j] = alive[i] = None
                            alive.append(merged)
                            merges += 1
                            break
                    buckets[bucket] = i
                if alive[i] is None:
                    break
        i += 1
    return [e for e in alive if e is not None], merges


def _drop_subsumed(items: List[SetEntry]) -> List[SetEntry]:
    kept: List[SetEntry] = []
    for i, entry in enumerate(items):
        covered = any(
            other.value == entry.value and subsumes(other, entry) and (j < i or not subsumes(entry, other))
            for j, other in enumerate(items) if j != i
        )
        if not covered:
            kept.append(entry)
    return kept


def compact(tree: PartitionTree) -> PartitionTree:
    """Merge and prune stored sets until nothing changes; every lookup keeps its value."""
    current = entries(tree)
    before = len(current)
    while True:
        merged, merges = _merge_pass(current)
        pruned = _drop_subsumed(merged)
        if merges == 0 and len(pruned) == len(current):
            break
        current = pruned
    result = PartitionTree(tree.partition)
    for entry in current:
        insert(result, entry)
    logger.debug(f"Compacted {tree.partition.label}: {before} -> {result.entry_count} entries")
    return result


def stats(tree: PartitionTree, exact_limit: int = 10 ** 7) -> Dict[str, float]:
    """Entry, node and byte counts plus how many deals the tree covers.

    Coverage is exact when the partition has at most ``exact_limit`` deals,
    otherwise it is the largest single entry's member count.
    """
    stored = entries(tree)
    if not stored:
        return {"entries": 0, "nodes": 0, "bytes": 0, "states_covered": 0, "states_per_byte": 0.0}
    key = tree.partition
    if deal_count(key.shape) <= exact_limit:
        covered = sum(1 for deal in iter_deals(key.shape, key.leader, key.trump) if lookup_state(tree, deal) is not None)
    else:
        covered = max(member_count(entry) for entry in stored)
    size = len(tree.nodes) * NODE_BYTES
    return {
        "entries": len(stored),
        "nodes": len(tree.nodes),
        "bytes": size,
        "states_covered": covered,
        "states_per_byte": covered / size,
    }


def serialize(tree: PartitionTree) -> bytes:
    key = tree.partition
    nodes = tree.nodes
    header = SETDB_HEADER.pack(
        SETDB_MAGIC, SETDB_VERSION, key.d, int(key.trump), PLAY_ORDER.index(key.leader),
        key.shape.to_bytes(), len(nodes), tree.entry_count,
    )
    return header + b"".join(NODE.pack(node.pack()) for node in nodes)


def deserialize(data: bytes) -> PartitionTree:
    """Parse a ``.sgdb`` image.

    Raises:
        FormatError: On a bad magic, version, partition field, length or node word
    """
    if len(data) < SETDB_HEADER.size:
        raise FormatError(f"truncated header ({len(data)} bytes)", len(data))
    magic, version, d, trump, leader, shape_bytes, node_count, entry_count = SETDB_HEADER.unpack_from(data)
    if magic != SETDB_MAGIC:
        raise FormatError(f"bad magic {magic!r}", 0)
    if version != SETDB_VERSION:
        raise FormatError(f"unsupported version {version}", 4)
    try:
        shape = Shape.from_bytes(shape_bytes)
        partition = PartitionKey(shape, PLAY_ORDER[leader], Trump(trump))
    except (ValueError, IndexError) as e:
        raise FormatError(f"bad partition fields: {e}", 6)
    if shape.d != d:
        raise FormatError(f"depth {d} does not match shape {shape}", 6)
    expected = SETDB_HEADER.size + node_count * NODE_BYTES
    if len(data) != expected:
        raise FormatError(f"expected {expected} bytes for {node_count} nodes, got {len(data)}", min(len(data), expected))
    nodes = []
    for i, (word,) in enumerate(NODE.iter_unpack(data[SETDB_HEADER.size:])):
        offset = SETDB_HEADER.size + i * NODE_BYTES
        if word >> RESERVED_SHIFT:
            raise FormatError(f"node {i} sets reserved bits", offset)
        node = TreeNode.unpack(word)
        if not node.lo <= node.hi <= d:
            raise FormatError(f"node {i} bounds [{node.lo}, {node.hi}] are not within 0..{d}", offset)
        nodes.append(node)
    tree = PartitionTree.from_nodes(partition, nodes)
    if tree.entry_count != entry_count:
        raise FormatError(f"header says {entry_count} entries, nodes hold {tree.entry_count}", SETDB_HEADER.size - 8)
    return tree


class SetStore:
    """Partition trees keyed by partition, kept under ``root`` when one is given."""

    def __init__(self, root: Optional[Path] = None):
        self.root = Path(root) if root is not None else None
        self._trees: Dict[PartitionKey, PartitionTree] = {}

    def path(self, key: PartitionKey) -> Path:
        return self.root / key.relpath("setdb", ".sgdb")

    def __contains__(self, key: PartitionKey) -> bool:
        return key in self._trees or (self.root is not None and self.path(key).exists())

    def get(self, key: PartitionKey) -> PartitionTree:
        tree = self._trees.get(key)
        if tree is None:
            if self.root is None or not self.path(key).exists():
                raise MissingPartitionError(f"set database {key.label} has not been built", key)
            tree = load(self.path(key))
            self._trees[key] = tree
        return tree

    def put(self, tree: PartitionTree, manifest: bool = True) -> None:
        """Store ``tree``; with ``manifest=False`` the caller records it later through ``record``."""
        self._trees[tree.partition] = tree
        if self.root is not None:
            path = self.path(tree.partition)
            save(tree, path)
            if manifest:
                _update_manifest(path.parent, {tree.partition.shape.shape_id: (tree.entry_count, len(tree.nodes))})

    def record(self, rows: Iterable[Tuple[PartitionKey, int, int]]) -> None:
        """Add (partition, entries, nodes) rows to the manifests, one write per directory."""
        if self.root is None:
            return
        by_directory: Dict[Path, Dict[str, Tuple[int, int]]] = {}
        for key, entry_count, node_count in rows:
            by_directory.setdefault(self.path(key).parent, {})[key.shape.shape_id] = (entry_count, node_count)
        for directory, found in by_directory.items():
            _update_manifest(directory, found)

    def keys(self, cards: Optional[int] = None) -> List[PartitionKey]:
        """Every stored partition, ordered by cards, trump, leader and shape id."""
        found = set(self._trees)
        if self.root is not None:
            for path in (self.root / "setdb").glob("*/*/*/*.sgdb"):
                leader, trump = path.parent.name, path.parent.parent.name
                found.add(PartitionKey(Shape.from_id(path.stem), PLAY_ORDER[_LEADER_NAMES.index(leader)], Trump[trump]))
        keys = [k for k in found if cards is None or k.cards == cards]
        return sorted(keys, key=lambda k: (k.cards, int(k.trump), PLAY_ORDER.index(k.leader), k.shape.shape_id))


_LEADER_NAMES = [p.name for p in PLAY_ORDER]


def save(tree: PartitionTree, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(serialize(tree))
    logger.info(f"Wrote {path} ({tree.entry_count} entries, {len(tree.nodes)} nodes)")


def load(path: Path) -> PartitionTree:
    return deserialize(Path(path).read_bytes())


def read_manifest(directory: Path) -> Dict[str, Tuple[int, int]]:
    manifest = Path(directory) / MANIFEST
    rows: Dict[str, Tuple[int, int]] = {}
    if manifest.exists():
        for line in manifest.read_text().splitlines():
            if line.strip():
                shape_id, entry_count, node_count = line.split()
                rows[shape_id] = (int(entry_count), int(node_count))
    return rows


def _update_manifest(directory: Path, found: Dict[str, Tuple[int, int]]) -> None:
    rows = read_manifest(directory)
    rows.update(found)
    lines = [f"{shape_id} {e} {n}" for shape_id, (e, n) in sorted(rows.items())]
    (directory / MANIFEST).write_text("\n".join(lines) + "\n")
