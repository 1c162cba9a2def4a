"""Fixed-depth word tries backed by MDDs, one per n-gram position type.

The trie answers the chaining question during compilation: which words can
follow a given (n-1)-word suffix. Because reduction shares both prefixes
and suffixes, the structure stays compact even for hundreds of thousands
of n-grams.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .corpus import NGram, Position, Token
from .errors import ArityError, FormatError, MixedArityError
from .mdd import LABELS, Mdd, TT, load_mdd, reduce, save_mdd

BUNDLE_VERSION = 1
_POSITIONS = (Position.INITIAL, Position.MIDDLE, Position.FINAL)
_MISS = object()


@dataclass(frozen=True)
class SuffixQuery:
    """A continuation question: which words can extend these n-1 words."""

    words: tuple
    want_position: str = "any"  # any | initial | middle | final

    def surfaces(self) -> tuple[str, ...]:
        return tuple(w if isinstance(w, str) else w.surface for w in self.words)


class MddTrie:
    """Reduced MDD per position type, all of the same order n.

    Read-only after build; successor lookups go through a per-instance memo
    keyed by (position, suffix), which is safe for concurrent readers.
    """

    def __init__(self, order: int, by_position: dict[Position, Mdd]):
        self.order = order
        self.by_position = by_position
        self._walk_cache: dict[tuple[Position, tuple[int, ...]], int | None] = {}

    # -- id-level machinery shared with the compiler ----------------------

    def node_after(self, position: Position, prefix_ids: tuple[int, ...]) -> int | None:
        """Node index reached by walking prefix_ids from the root; None when
        the walk falls off the trie. Memoized per prefix."""
        key = (position, prefix_ids)
        hit = self._walk_cache.get(key, _MISS)
        if hit is not _MISS:
            return hit
        mdd = self.by_position[position]
        node = 0
        depth = 0
        if prefix_ids:
            parent = self._walk_cache.get((position, prefix_ids[:-1]), _MISS)
            if parent is not _MISS:
                if parent is None:
                    self._walk_cache[key] = None
                    return None
                node = mdd.arcs[len(prefix_ids) - 1][parent].get(prefix_ids[-1])
                self._walk_cache[key] = node
                return node
        for depth, lid in enumerate(prefix_ids):
            node = mdd.arcs[depth][node].get(lid)
            if node is None:
                break
        self._walk_cache[key] = node
        return node

    def arc_ids_after(self, position: Position, prefix_ids: tuple[int, ...]) -> dict:
        """Outgoing arcs (label id -> child) after walking the prefix."""
        if len(prefix_ids) >= self.order:
            raise ArityError("prefix as long as the trie order has no arcs")
        node = self.node_after(position, prefix_ids)
        if node is None:
            return {}
        return self.by_position[position].arcs[len(prefix_ids)][node]

    # -- public queries ----------------------------------------------------

    def successors(self, query: SuffixQuery) -> set[Token]:
        """Words w such that (query.words + w) is stored with a compatible
        position; empty when the suffix walk leaves the trie."""
        surfaces = query.surfaces()
        if len(surfaces) != self.order - 1:
            raise ArityError(
                f"suffix of {len(surfaces)} words against order-{self.order} trie"
            )
        ids = tuple(LABELS.lookup(s) for s in surfaces)
        if any(i is None for i in ids):
            return set()
        if query.want_position == "any":
            positions = _POSITIONS
        else:
            positions = (Position(query.want_position),)
        found: set[Token] = set()
        for position in positions:
            for lid in self.arc_ids_after(position, ids):
                found.add(Token(LABELS.label(lid)))
        return found

    def membership(self, g: NGram) -> bool:
        """True iff g was stored word-for-word under its position type."""
        if g.n != self.order:
            raise ArityError(f"order-{g.n} n-gram against order-{self.order} trie")
        ids = tuple(LABELS.lookup(s) for s in g.surfaces)
        if any(i is None for i in ids):
            return False
        node = self.node_after(g.position, ids[:-1])
        if node is None:
            return False
        return ids[-1] in self.by_position[g.position].arcs[self.order - 1][node]

    def path_counts(self) -> dict[str, int]:
        return {p.value: self.by_position[p].count_paths() for p in _POSITIONS}

    def vocabulary_ids(self) -> set[int]:
        used: set[int] = set()
        for mdd in self.by_position.values():
            used |= mdd.labels_used()
        return used


def _build_position_mdd(id_tuples: set[tuple[int, ...]], order: int) -> Mdd:
    """Prefix-tree construction from sorted tuples, then reduction."""
    mdd = Mdd(order)
    if not id_tuples:
        return mdd
    rows = sorted(id_tuples)
    last = order - 1
    path_nodes = [0] * order
    prev: tuple[int, ...] | None = None
    for row in rows:
        common = 0
        if prev is not None:
            while common < last and row[common] == prev[common]:
                common += 1
        node = path_nodes[common]
        for depth in range(common, order):
            lid = row[depth]
            if depth == last:
                mdd.arcs[depth][node][lid] = TT
            else:
                child = mdd._new_node(depth + 1)
                mdd.arcs[depth][node][lid] = child
                path_nodes[depth + 1] = child
                node = child
        prev = row
    return reduce(mdd)


def build_trie(ngrams: Iterable[NGram], order: int | None = None) -> MddTrie:
    """Insert every n-gram as a path in the trie of its position type and
    reduce. All inputs must share one order; pass `order` explicitly to
    build an empty trie."""
    buckets: dict[Position, set[tuple[int, ...]]] = {p: set() for p in _POSITIONS}
    for g in ngrams:
        if order is None:
            order = g.n
        elif g.n != order:
            raise MixedArityError(f"mixed n-gram orders {order} and {g.n}")
        buckets[g.position].add(tuple(LABELS.intern(s) for s in g.surfaces))
    if order is None:
        raise MixedArityError("cannot infer the order of an empty n-gram set")
    return MddTrie(order, {p: _build_position_mdd(buckets[p], order) for p in _POSITIONS})


# -- serialization -----------------------------------------------------------


def _label_checksum(trie: MddTrie) -> str:
    words = sorted(str(LABELS.label(lid)) for lid in trie.vocabulary_ids())
    digest = hashlib.sha256("\n".join(words).encode("utf-8")).hexdigest()
    return digest


def save_bundle(trie: MddTrie, directory) -> None:
    """A trie bundle is three MDD files plus a manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for position in _POSITIONS:
        save_mdd(trie.by_position[position], directory / f"{position.value}.mdd.gz")
    manifest = {
        "format_version": BUNDLE_VERSION,
        "order": trie.order,
        "paths": trie.path_counts(),
        "label_checksum": _label_checksum(trie),
    }
    (directory / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_bundle(directory) -> MddTrie:
    directory = Path(directory)
    try:
        manifest = json.loads((directory / "manifest.json").read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise FormatError(f"{directory} is not a trie bundle (no manifest)") from None
    if manifest.get("format_version") != BUNDLE_VERSION:
        raise FormatError(f"unsupported bundle version {manifest.get('format_version')}")
    order = int(manifest["order"])
    loaded = {p: load_mdd(directory / f"{p.value}.mdd.gz") for p in _POSITIONS}
    for p, mdd in loaded.items():
        if mdd.num_layers != order:
            raise FormatError(
                f"{p.value} trie has {mdd.num_layers} layers, manifest says {order}"
            )
    trie = MddTrie(order, loaded)
    if trie.path_counts() != manifest["paths"]:
        raise FormatError("bundle path counts disagree with manifest")
    if _label_checksum(trie) != manifest["label_checksum"]:
        raise FormatError("bundle label checksum disagrees with manifest")
    return trie
