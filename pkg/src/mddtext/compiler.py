"""Compile the n-gram tries into the MDD of all rule-satisfying sentences.

The main route, `unfold`, expands the trie along the succession rule while
propagating constraint state through node keys: the trie suffix, the running
character total, the set of display configurations still open for the
emitted prefix, and whether the last complete window may end the sentence.
Partial sentences with equal state are merged into one node, which is what
keeps the diagram from growing like a tree.

Sentences shorter than the maximum word count are padded with empty-word
arcs; after an empty word only empty words may follow, so each solution path
is a sentence followed by padding.

`compile_via_intersection` builds one MDD per rule over the full vocabulary
and intersects them with a plain succession MDD. It is slower and hungrier
but modular, and serves as an independent construction of the same set.
"""

from __future__ import annotations

import resource
import time
from dataclasses import dataclass
from typing import Callable, Iterator

from .corpus import Position
from .mdd import EPSILON, EPSILON_ID, LABELS, Mdd, TT, intersect, reduce
from .rules import FontMetrics, RuleConfig, line_window_int
from .trie import MddTrie

_TERM = object()  # padding chain marker inside frontier dicts


class _Costs:
    """Per-label character and width costs, cached by label id."""

    def __init__(self, fonts: FontMetrics):
        self._fonts = fonts
        self._chars: dict[int, int] = {}
        self._widths: dict[int, int] = {}

    def chars(self, lid: int) -> int:
        c = self._chars.get(lid)
        if c is None:
            c = self._chars[lid] = len(LABELS.label(lid))
        return c

    def width(self, lid: int) -> int:
        w = self._widths.get(lid)
        if w is None:
            w = self._widths[lid] = self._fonts.width_of(LABELS.label(lid))
        return w


class _Windows:
    """Integer justification windows indexed by gap count."""

    def __init__(self, cfg: RuleConfig):
        self.cfg = cfg
        self.lo: list[int] = []
        self.hi: list[int] = []
        for gaps in range(cfg.max_words + 1):
            lo, hi = line_window_int(cfg, gaps)
            self.lo.append(lo)
            self.hi.append(hi)

    def evolve(self, cfgs: frozenset, width: int, n_lines: int) -> frozenset:
        """All display configurations after appending one word of the given
        width: either the word joins the current line, or the line closes
        (if justifiable) and the word opens the next one."""
        if not cfgs:
            return frozenset({(0, width, 0)}) if width <= self.hi[0] else frozenset()
        out = set()
        lo, hi = self.lo, self.hi
        for li, w, g in cfgs:
            w2 = w + width
            if w2 <= hi[g + 1]:
                out.add((li, w2, g + 1))
            if li + 1 < n_lines and lo[g] <= w <= hi[g] and width <= hi[0]:
                out.add((li + 1, width, 0))
        return frozenset(out)

    def closable(self, cfgs: frozenset, n_lines: int) -> bool:
        last = n_lines - 1
        return any(
            li == last and self.lo[g] <= w <= self.hi[g] for li, w, g in cfgs
        )


def _char_feasible(
    char_sum: int, emitted: int, cfg: RuleConfig, min_len: int, max_len: int
) -> bool:
    """Can the running character total still hit the budget exactly with a
    legal number of further words? Bounds use the trie's shortest and
    longest word lengths (+1 for the space each further word brings)."""
    need = cfg.char_budget - char_sum
    if need < 0:
        return False
    k_lo = max(0, cfg.min_words - emitted)
    k_hi = cfg.max_words - emitted
    if k_lo == 0 and need == 0:
        return True
    if k_hi < 1:
        return False
    lo_k = max(1, k_lo, -(-need // (max_len + 1)))  # ceil division
    hi_k = min(k_hi, need // (min_len + 1))
    return lo_k <= hi_k


def unfold(trie: MddTrie, cfg: RuleConfig, fonts: FontMetrics) -> Mdd:
    """Solution MDD over cfg.max_words layers.

    Every path, padding stripped, is a sentence whose length-n windows are
    stored n-grams (first initial, last final), whose word count sits in the
    configured window, whose character total (spaces included) equals the
    budget exactly, and which fits the justified-display rule; conversely
    every such recombination of the stored n-grams is a path.
    """
    cfg.check()
    n = trie.order
    r = cfg.max_words
    costs = _Costs(fonts)
    windows = _Windows(cfg)
    vocab = [lid for lid in trie.vocabulary_ids() if lid != EPSILON_ID]
    if not vocab:
        return Mdd(r)
    word_lens = [costs.chars(lid) for lid in vocab]
    min_len, max_len = min(word_lens), max(word_lens)
    non_terminal = {s.lower() for s in cfg.non_terminal_words}

    def may_end(lid: int) -> bool:
        return str(LABELS.label(lid)).lower() not in non_terminal

    mdd = Mdd(r)
    root = ((), 0, frozenset(), False)
    frontier: dict = {root: 0}
    for c in range(r):
        last = c == r - 1
        nxt: dict = {}

        def target(state) -> int:
            j = nxt.get(state)
            if j is None:
                j = mdd._new_node(c + 1)
                nxt[state] = j
            return j

        for state, j in frontier.items():
            node = mdd.arcs[c][j]
            if state is _TERM:
                node[EPSILON_ID] = TT if last else target(_TERM)
                continue
            words, char_sum, cfgs, final_ok = state
            emitted = c + 1
            if c < n:
                # the first window comes from the initial trie only
                arcs = trie.arc_ids_after(Position.INITIAL, words)
                fin_arcs = {}
            else:
                arcs = trie.arc_ids_after(Position.MIDDLE, words)
                fin_arcs = trie.arc_ids_after(Position.FINAL, words)
            for lid in arcs.keys() | fin_arcs.keys():
                char2 = char_sum + costs.chars(lid) + (1 if c else 0)
                if not _char_feasible(char2, emitted, cfg, min_len, max_len):
                    continue
                cfgs2 = windows.evolve(cfgs, costs.width(lid), cfg.n_lines)
                if not cfgs2:
                    continue
                if c < n:
                    if emitted == n:
                        final_ok2 = (
                            lid in trie.arc_ids_after(Position.FINAL, words)
                            and may_end(lid)
                        )
                        words2 = (words + (lid,))[1:]
                    else:
                        final_ok2 = False
                        words2 = words + (lid,)
                    continuable = True
                else:
                    final_ok2 = lid in fin_arcs and may_end(lid)
                    continuable = lid in arcs
                    words2 = words[1:] + (lid,)
                closes = (
                    final_ok2
                    and cfg.min_words <= emitted
                    and char2 == cfg.char_budget
                    and windows.closable(cfgs2, cfg.n_lines)
                )
                if last:
                    if closes:
                        node[lid] = TT
                elif continuable:
                    node[lid] = target((words2, char2, cfgs2, final_ok2))
                elif closes:
                    # window stored as final only: the sentence ends on this
                    # word, so the arc feeds straight into the padding chain
                    node[lid] = target(_TERM)
            if (
                final_ok
                and cfg.min_words <= c
                and char_sum == cfg.char_budget
                and windows.closable(cfgs, cfg.n_lines)
            ):
                node[EPSILON_ID] = TT if last else target(_TERM)
        frontier = nxt
    return reduce(mdd)


def iter_sentences(mdd: Mdd, limit: int | None = None) -> Iterator[tuple[str, ...]]:
    """Paths with the padding stripped: plain word tuples."""
    for path in mdd.iter_paths(limit):
        yield tuple(w for w in path if w != EPSILON)


def sentence_text(words) -> str:
    """Display form: words joined by single spaces, final period appended."""
    return " ".join(str(w) for w in words) + "."


# -- modular route: one MDD per rule, intersected --------------------------


def _build_scan_mdd(
    vocab: list[int],
    r: int,
    init_state,
    step: Callable,
    can_close: Callable,
) -> Mdd:
    """Generic layered DP over word arcs with empty-word padding.

    `step(state, lid, layer)` returns the follow-up state or None to prune;
    `can_close(state, emitted)` says whether a sentence may end after
    `emitted` words. Padding starts exactly at closing points and runs
    through to the terminal.
    """
    mdd = Mdd(r)
    frontier: dict = {init_state: 0}
    for c in range(r):
        last = c == r - 1
        nxt: dict = {}

        def target(state) -> int:
            j = nxt.get(state)
            if j is None:
                j = mdd._new_node(c + 1)
                nxt[state] = j
            return j

        for state, j in frontier.items():
            node = mdd.arcs[c][j]
            if state is _TERM:
                node[EPSILON_ID] = TT if last else target(_TERM)
                continue
            for lid in vocab:
                s2 = step(state, lid, c)
                if s2 is None:
                    continue
                if last:
                    if can_close(s2, c + 1):
                        node[lid] = TT
                else:
                    node[lid] = target(s2)
            if can_close(state, c):
                node[EPSILON_ID] = TT if last else target(_TERM)
        frontier = nxt
    return reduce(mdd)


def build_succession_mdd(trie: MddTrie, cfg: RuleConfig) -> Mdd:
    """Chaining structure only: windows are stored n-grams with correct
    position typing and the last word may end a sentence. No length,
    character, or display constraints (beyond the layer count)."""
    cfg.check()
    n = trie.order
    r = cfg.max_words
    non_terminal = {s.lower() for s in cfg.non_terminal_words}

    def may_end(lid: int) -> bool:
        return str(LABELS.label(lid)).lower() not in non_terminal

    mdd = Mdd(r)
    frontier: dict = {((), False): 0}
    for c in range(r):
        last = c == r - 1
        nxt: dict = {}

        def target(state) -> int:
            j = nxt.get(state)
            if j is None:
                j = mdd._new_node(c + 1)
                nxt[state] = j
            return j

        for state, j in frontier.items():
            node = mdd.arcs[c][j]
            if state is _TERM:
                node[EPSILON_ID] = TT if last else target(_TERM)
                continue
            words, final_ok = state
            emitted = c + 1
            if c < n:
                arcs = trie.arc_ids_after(Position.INITIAL, words)
                fin_arcs = {}
            else:
                arcs = trie.arc_ids_after(Position.MIDDLE, words)
                fin_arcs = trie.arc_ids_after(Position.FINAL, words)
            for lid in arcs.keys() | fin_arcs.keys():
                if c < n:
                    if emitted == n:
                        final_ok2 = (
                            lid in trie.arc_ids_after(Position.FINAL, words)
                            and may_end(lid)
                        )
                        words2 = (words + (lid,))[1:]
                    else:
                        final_ok2 = False
                        words2 = words + (lid,)
                    continuable = True
                else:
                    final_ok2 = lid in fin_arcs and may_end(lid)
                    continuable = lid in arcs
                    words2 = words[1:] + (lid,)
                if last:
                    if final_ok2:
                        node[lid] = TT
                elif continuable:
                    node[lid] = target((words2, final_ok2))
                elif final_ok2:
                    node[lid] = target(_TERM)
            if final_ok:
                node[EPSILON_ID] = TT if last else target(_TERM)
        frontier = nxt
    return reduce(mdd)


def build_word_count_mdd(vocab: list[int], cfg: RuleConfig) -> Mdd:
    """Number of non-padding words within [min_words, max_words]."""
    cfg.check()
    return _build_scan_mdd(
        vocab,
        cfg.max_words,
        0,
        lambda count, lid, layer: count + 1,
        lambda count, emitted: cfg.min_words <= count <= cfg.max_words,
    )


def build_char_budget_mdd(vocab: list[int], cfg: RuleConfig) -> Mdd:
    """Characters plus inter-word spaces add up to the budget exactly."""
    cfg.check()
    costs = _Costs(FontMetrics.uniform(1))  # .chars never touches the font

    def step(total, lid, layer):
        t2 = total + costs.chars(lid) + (1 if layer else 0)
        return t2 if t2 <= cfg.char_budget else None

    return _build_scan_mdd(
        vocab,
        cfg.max_words,
        0,
        step,
        lambda total, emitted: total == cfg.char_budget,
    )


def build_display_mdd(vocab: list[int], cfg: RuleConfig, fonts: FontMetrics) -> Mdd:
    """Some split into exactly n_lines justifiable lines exists."""
    cfg.check()
    costs = _Costs(fonts)
    windows = _Windows(cfg)

    def step(cfgs, lid, layer):
        cfgs2 = windows.evolve(cfgs, costs.width(lid), cfg.n_lines)
        return cfgs2 or None

    return _build_scan_mdd(
        vocab,
        cfg.max_words,
        frozenset(),
        step,
        lambda cfgs, emitted: windows.closable(cfgs, cfg.n_lines),
    )


def compile_via_intersection(trie: MddTrie, cfg: RuleConfig, fonts: FontMetrics) -> Mdd:
    """Same path set as `unfold`, assembled by intersecting one MDD per
    rule. Kept as a cross-check; costs more time and memory."""
    cfg.check()
    succession = build_succession_mdd(trie, cfg)
    vocab = sorted(lid for lid in trie.vocabulary_ids() if lid != EPSILON_ID)
    if not vocab:
        return Mdd(cfg.max_words)
    out = intersect(succession, build_word_count_mdd(vocab, cfg))
    out = intersect(out, build_char_budget_mdd(vocab, cfg))
    out = intersect(out, build_display_mdd(vocab, cfg, fonts))
    return out


# -- reporting ---------------------------------------------------------------


@dataclass(frozen=True)
class MddStats:
    arcs: int
    nodes: int
    solutions: int
    structure_bytes: int
    peak_resident_bytes: int
    elapsed_seconds: float | None = None

    def as_dict(self) -> dict:
        return {
            "arcs": self.arcs,
            "nodes": self.nodes,
            "solutions": str(self.solutions),
            "structure_bytes": self.structure_bytes,
            "peak_resident_bytes": self.peak_resident_bytes,
            "elapsed_seconds": self.elapsed_seconds,
        }


def stats(mdd: Mdd, elapsed_seconds: float | None = None) -> MddStats:
    """Exact arc/node/solution counts plus coarse memory figures.

    The structure estimate charges each node and arc its rough CPython
    container cost; peak resident memory is the process high-water mark."""
    arcs = mdd.arc_count()
    nodes = mdd.node_count()
    return MddStats(
        arcs=arcs,
        nodes=nodes,
        solutions=mdd.count_paths(),
        structure_bytes=96 * nodes + 100 * arcs,
        peak_resident_bytes=resource.getrusage(resource.RUSAGE_SELF).ru_maxrss * 1024,
        elapsed_seconds=elapsed_seconds,
    )


class Timer:
    """Tiny wall-clock helper for stage timing."""

    def __init__(self) -> None:
        self.start = time.perf_counter()

    def elapsed(self) -> float:
        return time.perf_counter() - self.start
