"""Layered deterministic reduced ordered MDDs.

An MDD here is a rooted DAG organized in layers. Every arc goes from layer
``i`` to layer ``i+1`` and carries a label (a word, or an integer for sum
diagrams); arcs leaving the last layer all end at the unique terminal ``tt``.
Every root-to-terminal path spells out one solution tuple, so the diagram is
a compressed representation of a tuple set. Determinism (no node has two
outgoing arcs with the same label) is enforced by construction: arcs are
stored as ``dict[label_id, child_index]``.

Instances are plain single-writer structures: build or mutate them from one
thread, then treat them as immutable. Reads (counting, enumeration,
intersection inputs) are safe to share.
"""

from __future__ import annotations

import gzip
import io
import urllib.parse
from typing import Callable, Hashable, Iterable, Iterator, Sequence

from .errors import ArityError, FormatError

Label = Hashable

# The empty word used by the sentence compiler for padding arcs. Interned
# first so its id is stable across the process.
EPSILON: str = ""

# Child index used by arcs that leave the last layer.
TT: int = 0


class LabelTable:
    """Process-wide label interning: one string (or int) object per label."""

    __slots__ = ("_ids", "_labels")

    def __init__(self) -> None:
        self._ids: dict[Label, int] = {}
        self._labels: list[Label] = []
        self.intern(EPSILON)

    def __len__(self) -> int:
        return len(self._labels)

    def intern(self, label: Label) -> int:
        lid = self._ids.get(label)
        if lid is None:
            lid = len(self._labels)
            self._ids[label] = lid
            self._labels.append(label)
        return lid

    def lookup(self, label: Label) -> int | None:
        return self._ids.get(label)

    def label(self, lid: int) -> Label:
        return self._labels[lid]


LABELS = LabelTable()
EPSILON_ID = LABELS.intern(EPSILON)


def label_sort_key(lid: int) -> tuple:
    """Deterministic enumeration order: integers numerically, then strings
    lexicographically."""
    label = LABELS.label(lid)
    if isinstance(label, bool) or not isinstance(label, int):
        return (1, str(label))
    return (0, label)


class Mdd:
    """A layered MDD with ``num_layers`` variables.

    ``arcs[i][j]`` is the arc dict of node ``j`` in layer ``i``; values are
    node indices in layer ``i+1`` (or ``TT`` for the last layer). The root is
    node 0 of layer 0 and always exists; an MDD with an arcless root encodes
    the empty tuple set.
    """

    __slots__ = ("num_layers", "arcs", "_indeg")

    def __init__(self, num_layers: int):
        if num_layers < 1:
            raise ValueError("an MDD needs at least one layer")
        self.num_layers = num_layers
        self.arcs: list[list[dict[int, int]]] = [[] for _ in range(num_layers)]
        self.arcs[0].append({})
        self._indeg: list[list[int]] | None = None

    # -- basic accounting -------------------------------------------------

    def node_count(self) -> int:
        """Allocated decision nodes (terminal excluded)."""
        return sum(len(layer) for layer in self.arcs)

    def arc_count(self) -> int:
        return sum(len(node) for layer in self.arcs for node in layer)

    def labels_used(self) -> set[int]:
        used: set[int] = set()
        for layer in self.arcs:
            for node in layer:
                used.update(node.keys())
        return used

    # -- construction ------------------------------------------------------

    def _new_node(self, layer: int, node_arcs: dict[int, int] | None = None) -> int:
        arena = self.arcs[layer]
        arena.append({} if node_arcs is None else node_arcs)
        if self._indeg is not None:
            self._indeg[layer].append(0)
        return len(arena) - 1

    def _compute_indegrees(self) -> list[list[int]]:
        indeg = [[0] * len(layer) for layer in self.arcs]
        for i in range(self.num_layers - 1):
            nxt = indeg[i + 1]
            for node in self.arcs[i]:
                for child in node.values():
                    nxt[child] += 1
        return indeg

    def insert_tuple(self, labels: Sequence[Label]) -> "Mdd":
        """Add one solution path, sharing prefixes with existing paths.

        Never removes a path. Nodes whose suffix is shared with other paths
        are cloned before modification, so inserting into a reduced MDD
        cannot leak the new suffix into unrelated prefixes.
        """
        if len(labels) != self.num_layers:
            raise ArityError(
                f"tuple of length {len(labels)} into {self.num_layers}-layer MDD"
            )
        if self._indeg is None:
            self._indeg = self._compute_indegrees()
        indeg = self._indeg
        last = self.num_layers - 1
        cur = 0
        for i, label in enumerate(labels):
            lid = LABELS.intern(label)
            node = self.arcs[i][cur]
            child = node.get(lid)
            if i == last:
                node[lid] = TT
                break
            if child is None:
                child = self._new_node(i + 1)
                node[lid] = child
                indeg[i + 1][child] = 1
            elif indeg[i + 1][child] > 1:
                # shared suffix: split off a private copy before descending
                indeg[i + 1][child] -= 1
                clone = self._new_node(i + 1, dict(self.arcs[i + 1][child]))
                indeg[i + 1][clone] = 1
                if i + 1 < last:
                    grandkids = indeg[i + 2]
                    for gc in self.arcs[i + 1][clone].values():
                        grandkids[gc] += 1
                node[lid] = clone
                child = clone
            cur = child
        return self

    # -- counting and enumeration ------------------------------------------

    def count_paths(self) -> int:
        """Exact number of root-to-terminal paths (arbitrary precision)."""
        counts = [1]  # virtual terminal layer
        for i in range(self.num_layers - 1, -1, -1):
            counts = [
                sum(counts[child] for child in node.values()) for node in self.arcs[i]
            ]
        return counts[0]

    def iter_paths(self, limit: int | None = None) -> Iterator[tuple[Label, ...]]:
        """Yield solution tuples depth-first in deterministic label order."""
        if limit is not None and limit <= 0:
            return
        rank = {lid: k for k, lid in enumerate(sorted(self.labels_used(), key=label_sort_key))}
        last = self.num_layers - 1

        def ordered(node: dict[int, int]) -> list[tuple[int, int]]:
            return sorted(node.items(), key=lambda kv: rank[kv[0]])

        emitted = 0
        stack = [iter(ordered(self.arcs[0][0]))]
        path: list[int] = []
        children: list[int] = []
        while stack:
            try:
                lid, child = next(stack[-1])
            except StopIteration:
                stack.pop()
                if path:
                    path.pop()
                    children.pop()
                continue
            if len(stack) - 1 == last:
                yield tuple(LABELS.label(p) for p in path) + (LABELS.label(lid),)
                emitted += 1
                if limit is not None and emitted >= limit:
                    return
            else:
                path.append(lid)
                children.append(child)
                stack.append(iter(ordered(self.arcs[len(stack)][child])))

    def enumerate_paths(
        self,
        limit: int | None = None,
        visit: Callable[[tuple[Label, ...]], None] | None = None,
    ) -> int:
        """Feed each solution tuple to ``visit``; returns how many were emitted."""
        n = 0
        for path in self.iter_paths(limit):
            if visit is not None:
                visit(path)
            n += 1
        return n

    def structurally_equal(self, other: "Mdd") -> bool:
        return self.num_layers == other.num_layers and self.arcs == other.arcs


# -- reduction ---------------------------------------------------------------


def reduce(mdd: Mdd) -> Mdd:
    """Return the canonical reduced form of ``mdd``.

    Bottom-up signature hashing merges nodes with identical outgoing arc
    sets (pReduce); nodes that cannot reach the terminal disappear. The
    output is renumbered by a label-ordered top-down walk, so two MDDs with
    the same path set reduce to structurally identical objects.
    """
    r = mdd.num_layers
    # group[i][j] = merged-node id of old node j, or None if dead
    group: list[list[int | None]] = [[] for _ in range(r)]
    group_sigs: list[list[tuple[tuple[int, int], ...]]] = [[] for _ in range(r)]
    next_groups: list[int | None] = []
    for i in range(r - 1, -1, -1):
        sig_ids: dict[tuple[tuple[int, int], ...], int] = {}
        sigs: list[tuple[tuple[int, int], ...]] = []
        mapped: list[int | None] = []
        for node in mdd.arcs[i]:
            if i == r - 1:
                sig = tuple((lid, TT) for lid in sorted(node))
            else:
                sig = tuple(
                    sorted(
                        (lid, g)
                        for lid, child in node.items()
                        if (g := next_groups[child]) is not None
                    )
                )
            if not sig:
                mapped.append(None)
                continue
            gid = sig_ids.get(sig)
            if gid is None:
                gid = len(sigs)
                sig_ids[sig] = gid
                sigs.append(sig)
            mapped.append(gid)
        group[i] = mapped
        group_sigs[i] = sigs
        next_groups = mapped

    out = Mdd(r)
    root_group = group[0][0]
    if root_group is None:
        return out

    rank = {lid: k for k, lid in enumerate(sorted(mdd.labels_used(), key=label_sort_key))}
    # top-down relabeling; children get indices in first-visited order, and
    # visits follow label order, so the output numbering is canonical
    layer_order: list[int] = [root_group]
    for i in range(r):
        sigs = group_sigs[i]
        arena = out.arcs[i]
        child_index: dict[int, int] = {}
        child_order: list[int] = []
        for j, gid in enumerate(layer_order):
            node = arena[j]
            for lid, child_gid in sorted(sigs[gid], key=lambda a: rank[a[0]]):
                if i == r - 1:
                    node[lid] = TT
                    continue
                cj = child_index.get(child_gid)
                if cj is None:
                    cj = len(child_order)
                    child_index[child_gid] = cj
                    child_order.append(child_gid)
                    out._new_node(i + 1)
                node[lid] = cj
        layer_order = child_order
    return out


def intersect(a: Mdd, b: Mdd) -> Mdd:
    """MDD whose path set is exactly ``paths(a) & paths(b)``."""
    if a.num_layers != b.num_layers:
        raise ArityError(
            f"cannot intersect {a.num_layers}-layer with {b.num_layers}-layer MDD"
        )
    r = a.num_layers
    raw = Mdd(r)
    frontier: dict[tuple[int, int], int] = {(0, 0): 0}
    for i in range(r):
        nxt: dict[tuple[int, int], int] = {}
        for (ja, jb), jo in frontier.items():
            na = a.arcs[i][ja]
            nb = b.arcs[i][jb]
            if len(nb) < len(na):
                na, nb = nb, na
                swap = True
            else:
                swap = False
            node = raw.arcs[i][jo]
            for lid, c1 in na.items():
                c2 = nb.get(lid)
                if c2 is None:
                    continue
                if i == r - 1:
                    node[lid] = TT
                    continue
                key = (c2, c1) if swap else (c1, c2)
                jn = nxt.get(key)
                if jn is None:
                    jn = raw._new_node(i + 1)
                    nxt[key] = jn
                node[lid] = jn
        frontier = nxt
        if not frontier and i < r - 1:
            break
    # pair construction can leave dead branches; reduce also trims them
    return reduce(raw)


def build_sum_mdd(domains: Sequence[Iterable[int]], lo: int, hi: int) -> Mdd:
    """Reduced MDD of all tuples ``(v1..vr)`` with ``vi`` in ``domains[i]``
    and ``lo <= sum(vi) <= hi``. Infeasible bounds give an empty MDD."""
    doms = [sorted(set(d)) for d in domains]
    if not doms or any(not d for d in doms):
        raise ValueError("domains must be non-empty")
    r = len(doms)
    suffix_min = [0] * (r + 1)
    suffix_max = [0] * (r + 1)
    for i in range(r - 1, -1, -1):
        suffix_min[i] = suffix_min[i + 1] + doms[i][0]
        suffix_max[i] = suffix_max[i + 1] + doms[i][-1]
    raw = Mdd(r)
    frontier: dict[int, int] = {0: 0}
    for i in range(r):
        nxt: dict[int, int] = {}
        for total, j in frontier.items():
            node = raw.arcs[i][j]
            for v in doms[i]:
                t2 = total + v
                if t2 + suffix_min[i + 1] > hi or t2 + suffix_max[i + 1] < lo:
                    continue
                lid = LABELS.intern(v)
                if i == r - 1:
                    node[lid] = TT
                    continue
                jn = nxt.get(t2)
                if jn is None:
                    jn = raw._new_node(i + 1)
                    nxt[t2] = jn
                node[lid] = jn
        frontier = nxt
    return reduce(raw)


def validate(mdd: Mdd) -> list[str]:
    """Structural audit; empty list means valid.

    Duplicate-label arcs cannot be represented (arcs are keyed by label),
    so the checks cover what remains: arc targets in range, every node
    reachable from the root, and every node co-reachable with the terminal.
    """
    problems: list[str] = []
    r = mdd.num_layers
    if not mdd.arcs[0]:
        return ["missing root node"]
    for i, layer in enumerate(mdd.arcs):
        limit = 1 if i == r - 1 else len(mdd.arcs[i + 1])
        for j, node in enumerate(layer):
            for lid, child in node.items():
                if lid < 0 or lid >= len(LABELS):
                    problems.append(f"layer {i} node {j}: unknown label id {lid}")
                if i == r - 1:
                    if child != TT:
                        problems.append(
                            f"layer {i} node {j}: terminal arc must point at tt"
                        )
                elif not 0 <= child < limit:
                    problems.append(
                        f"layer {i} node {j}: arc target {child} outside layer {i + 1}"
                    )
    if problems:
        return problems
    reachable: list[set[int]] = [set() for _ in range(r)]
    reachable[0].add(0)
    for i in range(r - 1):
        for j in reachable[i]:
            reachable[i + 1].update(mdd.arcs[i][j].values())
    coreach: list[set[int]] = [set() for _ in range(r)]
    coreach[r - 1] = {j for j, node in enumerate(mdd.arcs[r - 1]) if node}
    for i in range(r - 2, -1, -1):
        good = coreach[i + 1]
        coreach[i] = {
            j
            for j, node in enumerate(mdd.arcs[i])
            if any(c in good for c in node.values())
        }
    for i, layer in enumerate(mdd.arcs):
        for j in range(len(layer)):
            if i == 0 and j == 0:
                if layer[j] and j not in coreach[i]:
                    problems.append("root cannot reach tt despite having arcs")
                continue
            if j not in reachable[i]:
                problems.append(f"layer {i} node {j}: unreachable from root")
            elif j not in coreach[i]:
                problems.append(f"layer {i} node {j}: no path to tt")
    return problems


# -- serialization -----------------------------------------------------------

_MAGIC = "mddtext-mdd 1"


def _encode_label(label: Label) -> str:
    if isinstance(label, bool) or not isinstance(label, (int, str)):
        raise FormatError(f"cannot serialize label of type {type(label).__name__}")
    if isinstance(label, int):
        return f"i {label}"
    return "s " + urllib.parse.quote(label, safe="")


def _decode_label(text: str, line_no: int) -> Label:
    kind, _, payload = text.partition(" ")
    if kind == "i":
        return int(payload)
    if kind == "s":
        return urllib.parse.unquote(payload)
    raise FormatError(f"bad label record {text!r}", line_no)


class _GzipTextWriter(io.TextIOWrapper):
    """Gzip text writer with the header mtime pinned to zero, so identical
    structures serialize to identical bytes."""

    def __init__(self, path):
        self._raw = open(path, "wb")
        gz = gzip.GzipFile(fileobj=self._raw, mode="wb", mtime=0)
        super().__init__(gz, encoding="utf-8")

    def close(self):
        try:
            super().close()
        finally:
            self._raw.close()


def _open_text(path, mode: str) -> io.TextIOBase:
    if str(path).endswith(".gz"):
        if mode == "w":
            return _GzipTextWriter(path)
        return gzip.open(path, mode + "t", encoding="utf-8")
    return open(path, mode, encoding="utf-8")


def save_mdd(mdd: Mdd, path) -> None:
    """Write a versioned text dump; byte-identical for identical structure."""
    used = sorted(mdd.labels_used(), key=label_sort_key)
    local = {lid: k for k, lid in enumerate(used)}
    with _open_text(path, "w") as fh:
        fh.write(f"{_MAGIC}\n")
        fh.write(f"layers {mdd.num_layers}\n")
        fh.write(f"labels {len(used)}\n")
        for lid in used:
            fh.write(_encode_label(LABELS.label(lid)) + "\n")
        for i, layer in enumerate(mdd.arcs):
            fh.write(f"layer {i} {len(layer)}\n")
            for node in layer:
                fh.write(
                    " ".join(
                        f"{local[lid]}:{child}"
                        for lid, child in sorted(
                            node.items(), key=lambda kv: local[kv[0]]
                        )
                    )
                    + "\n"
                )


def load_mdd(path) -> Mdd:
    with _open_text(path, "r") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != _MAGIC:
        raise FormatError(f"{path}: not a {_MAGIC!r} file")
    pos = 1

    def expect(prefix: str) -> list[str]:
        nonlocal pos
        if pos >= len(lines) or not lines[pos].startswith(prefix):
            raise FormatError(f"expected {prefix!r} record", pos + 1)
        parts = lines[pos].split()
        pos += 1
        return parts

    num_layers = int(expect("layers")[1])
    n_labels = int(expect("labels")[1])
    local_to_global: list[int] = []
    for _ in range(n_labels):
        local_to_global.append(LABELS.intern(_decode_label(lines[pos], pos + 1)))
        pos += 1
    mdd = Mdd(num_layers)
    for i in range(num_layers):
        header = expect("layer")
        count = int(header[2])
        while len(mdd.arcs[i]) < count:
            mdd._new_node(i)
        for j in range(count):
            line = lines[pos]
            pos += 1
            node = mdd.arcs[i][j]
            if not line:
                continue
            for rec in line.split(" "):
                lid_s, _, child_s = rec.partition(":")
                node[local_to_global[int(lid_s)]] = int(child_s)
    return mdd
