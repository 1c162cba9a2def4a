"""Sentence rule parameters and the standalone rule validator.

The numeric rules a standardized sentence must satisfy: a word-count window,
an exact character budget (spaces included, final period excluded), and a
display rule requiring the sentence to fit on a fixed number of justified
lines with inter-word space stretch inside a legal band.

All width arithmetic is integer or exact rational. Comparing a line's summed
word widths against the justification window never touches floats.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction

from .errors import ConfigError, FormatError

# Punctuation that disqualifies a sentence when it appears inside the body.
# The dot catches embedded ellipses; the terminal mark is not part of the body.
DEFAULT_FORBIDDEN_PUNCT = frozenset('.,;:!?"«»“”()[]—_/\\*')


class ApostrophePolicy(enum.Enum):
    KEEP = "keep"  # elided forms such as l'école stay one token
    SPLIT = "split"  # split after the apostrophe: l' + école


@dataclass(frozen=True)
class RuleConfig:
    """All numeric rule parameters.

    Width-bearing fields (box_width, space_width) are in integer width
    units, e.g. milli-ems taken from a font metrics file.
    """

    min_words: int = 9
    max_words: int = 15
    char_budget: int = 59
    n_lines: int = 3
    space_min_factor: Fraction = Fraction("0.80")
    space_max_factor: Fraction = Fraction("1.25")
    box_width: int = 200
    space_width: int = 10
    forbidden_punct: frozenset = DEFAULT_FORBIDDEN_PUNCT
    non_terminal_words: frozenset = frozenset()
    apostrophe_policy: ApostrophePolicy = ApostrophePolicy.KEEP

    def check(self) -> None:
        if not 0 < self.min_words <= self.max_words:
            raise ConfigError("need 0 < min_words <= max_words")
        if self.n_lines < 1:
            raise ConfigError("n_lines must be at least 1")
        if self.char_budget < 1:
            raise ConfigError("char_budget must be positive")
        if not self.space_min_factor < self.space_max_factor:
            raise ConfigError("space_min_factor must be below space_max_factor")
        if self.box_width <= 0 or self.space_width <= 0:
            raise ConfigError("box_width and space_width must be positive")


@dataclass(frozen=True)
class FontMetrics:
    """Per-character advance widths in integer width units."""

    widths: dict
    default_width: int | None = None

    @classmethod
    def uniform(cls, width: int = 10) -> "FontMetrics":
        return cls(widths={}, default_width=width)

    def width_of_char(self, ch: str) -> int:
        w = self.widths.get(ch, self.default_width)
        if w is None:
            raise ConfigError(f"no width for character {ch!r} and no default width")
        return w

    def width_of(self, word: str) -> int:
        return sum(self.width_of_char(c) for c in word)


def load_font_metrics(path) -> tuple[FontMetrics, dict]:
    """Read a metrics file: lines "char<TAB>width", plus directive lines
    "#space_width N" / "#box_width N" / "#default_width N". Returns the
    metrics and the rule overrides found in directives."""
    widths: dict[str, int] = {}
    default_width: int | None = None
    overrides: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if len(parts) != 2 or parts[0] not in (
                    "space_width",
                    "box_width",
                    "default_width",
                ):
                    raise FormatError(f"unknown directive {line!r}", line_no)
                try:
                    value = int(parts[1])
                except ValueError:
                    raise FormatError(f"bad integer in {line!r}", line_no) from None
                if parts[0] == "default_width":
                    default_width = value
                else:
                    overrides[parts[0]] = value
                continue
            cells = line.split("\t")
            if len(cells) != 2 or len(cells[0]) != 1:
                raise FormatError(f"expected 'char<TAB>width', got {line!r}", line_no)
            try:
                w = int(cells[1])
            except ValueError:
                raise FormatError(f"bad width in {line!r}", line_no) from None
            if w <= 0:
                raise FormatError("widths must be positive", line_no)
            widths[cells[0]] = w
    return FontMetrics(widths=widths, default_width=default_width), overrides


def line_window(cfg: RuleConfig, gaps: int) -> tuple[Fraction, Fraction]:
    """Interval of summed word widths W such that a line with `gaps`
    inter-word gaps can be stretched to exactly the box width:
    W + gaps * f * space_width = box_width for some legal factor f."""
    if gaps < 0:
        raise ValueError("gaps must be >= 0")
    lo = Fraction(cfg.box_width) - cfg.space_max_factor * gaps * cfg.space_width
    hi = Fraction(cfg.box_width) - cfg.space_min_factor * gaps * cfg.space_width
    return lo, hi


def line_window_int(cfg: RuleConfig, gaps: int) -> tuple[int, int]:
    """Same window, tightened to the integers it actually contains."""
    lo, hi = line_window(cfg, gaps)
    return math.ceil(lo), math.floor(hi)


@dataclass(frozen=True)
class SentenceVerdict:
    """Outcome of the standalone rule check, one flag per numeric rule."""

    word_count_ok: bool
    char_budget_ok: bool
    display_ok: bool
    line_breaks: tuple[int, ...] | None = None
    word_count: int = 0
    char_count: int = 0

    @property
    def passed(self) -> bool:
        return self.word_count_ok and self.char_budget_ok and self.display_ok


def _surface(word) -> str:
    return word if isinstance(word, str) else word.surface


def find_line_breaks(
    word_widths: list[int], cfg: RuleConfig
) -> tuple[int, ...] | None:
    """First (lexicographically) split of the words into exactly cfg.n_lines
    justifiable lines, as a tuple of break indices; None when infeasible."""
    n = len(word_widths)
    prefix = [0]
    for w in word_widths:
        prefix.append(prefix[-1] + w)

    def line_ok(a: int, b: int) -> bool:
        lo, hi = line_window_int(cfg, b - a - 1)
        return lo <= prefix[b] - prefix[a] <= hi

    memo: dict[tuple[int, int], tuple[int, ...] | None] = {}

    def solve(start: int, lines_left: int) -> tuple[int, ...] | None:
        key = (start, lines_left)
        if key in memo:
            return memo[key]
        result = None
        if lines_left == 1:
            if start < n and line_ok(start, n):
                result = ()
        else:
            for cut in range(start + 1, n - lines_left + 2):
                if line_ok(start, cut):
                    rest = solve(cut, lines_left - 1)
                    if rest is not None:
                        result = (cut, *rest)
                        break
        memo[key] = result
        return result

    return solve(0, cfg.n_lines)


def check_sentence(words, cfg: RuleConfig, fonts: FontMetrics) -> SentenceVerdict:
    """Evaluate the numeric rules directly on a word sequence.

    Deliberately ignorant of tries and diagrams so it can serve as an
    independent cross-check of the compiler's output.
    """
    surfaces = [_surface(w) for w in words]
    count = len(surfaces)
    chars = sum(len(s) for s in surfaces) + max(0, count - 1)
    word_count_ok = cfg.min_words <= count <= cfg.max_words
    char_budget_ok = chars == cfg.char_budget
    breaks = None
    if count:
        breaks = find_line_breaks([fonts.width_of(s) for s in surfaces], cfg)
    return SentenceVerdict(
        word_count_ok=word_count_ok,
        char_budget_ok=char_budget_ok,
        display_ok=breaks is not None,
        line_breaks=breaks,
        word_count=count,
        char_count=chars,
    )
