"""Corpus ingestion: sentence segmentation, rule filtering, tokenization,
and position-typed n-gram extraction.

Sentences are split out of raw book text, screened against the grammatical
and lexical rules (declarative form, no internal punctuation, no proper
nouns, lexicon membership), tokenized, and cut into n-grams tagged by
their position in the sentence: initial (starting a sentence), middle, or
final (ending it).
"""

from __future__ import annotations

import enum
import re
import unicodedata
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import FormatError, TokenizationError
from .rules import ApostrophePolicy, RuleConfig

_TERMINALS = ".?!"
_WORD_EXTRA_CHARS = "-'’"
# elisions split off when the policy asks for it: l'école -> l' école
_ELISION_RE = re.compile(r"^([A-Za-zÀ-ÿ]{1,2}['’])(.+)$")


class Position(enum.Enum):
    INITIAL = "initial"
    MIDDLE = "middle"
    FINAL = "final"


class Reason(enum.Enum):
    OK = "ok"
    NOT_DECLARATIVE = "not_declarative"
    FORBIDDEN_PUNCTUATION = "forbidden_punctuation"
    PROPER_NOUN = "proper_noun"
    OUT_OF_LEXICON = "out_of_lexicon"
    TOO_SHORT = "too_short"


@dataclass(frozen=True)
class FilterReport:
    accepted: bool
    reason: Reason

    def __post_init__(self):
        assert self.accepted == (self.reason is Reason.OK)


@dataclass(frozen=True)
class RawSentence:
    text: str
    source_id: str = ""
    index: int = 0


@dataclass(frozen=True)
class Token:
    surface: str

    @property
    def char_len(self) -> int:
        return len(self.surface)

    def __str__(self) -> str:
        return self.surface


@dataclass(frozen=True)
class NGram:
    words: tuple[Token, ...]
    position: Position

    @property
    def n(self) -> int:
        return len(self.words)

    @property
    def surfaces(self) -> tuple[str, ...]:
        return tuple(t.surface for t in self.words)


class CasePolicy(enum.Enum):
    FOLD = "fold"  # lookups on the lowercased form
    EXACT = "exact"


@dataclass(frozen=True)
class Lexicon:
    allowed_lemmas: frozenset
    inflection_map: dict = field(default_factory=dict)
    case_policy: CasePolicy = CasePolicy.FOLD

    def lemma_of(self, surface: str) -> str:
        if self.case_policy is CasePolicy.EXACT:
            return self.inflection_map.get(surface, surface)
        for key in (surface, surface.lower()):
            lemma = self.inflection_map.get(key)
            if lemma is not None:
                return lemma
        return surface.lower()

    def resolves(self, surface: str) -> bool:
        return self.lemma_of(surface) in self.allowed_lemmas


def build_lexicon(lemma_file, inflection_file=None) -> Lexicon:
    """Load the allowed-lemma list (one per line) and an optional
    surface-to-lemma TSV. Raises FormatError with the offending line number
    on malformed rows or on inflections pointing outside the lemma set."""
    lemmas = set()
    with open(lemma_file, encoding="utf-8") as fh:
        for raw in fh:
            lemma = raw.strip()
            if lemma:
                lemmas.add(lemma.lower())
    inflections: dict[str, str] = {}
    if inflection_file is not None:
        with open(inflection_file, encoding="utf-8") as fh:
            for line_no, raw in enumerate(fh, start=1):
                line = raw.rstrip("\n")
                if not line.strip():
                    continue
                cells = line.split("\t")
                if len(cells) != 2 or not cells[0] or not cells[1]:
                    raise FormatError(
                        f"expected 'surface<TAB>lemma', got {line!r}", line_no
                    )
                surface, lemma = cells[0].lower(), cells[1].lower()
                if lemma not in lemmas:
                    raise FormatError(
                        f"inflection target {lemma!r} is not in the lemma list",
                        line_no,
                    )
                inflections[surface] = lemma
    return Lexicon(allowed_lemmas=frozenset(lemmas), inflection_map=inflections)


def segment_sentences(text: str, source_id: str = "") -> list[RawSentence]:
    """Split text on single terminal marks. Runs of two or more marks
    (ellipses, interrobangs) do not end a sentence; they stay inside it and
    are rejected later by the punctuation filter."""
    text = unicodedata.normalize("NFC", text)
    out: list[RawSentence] = []
    start = 0
    for m in re.finditer(r"[.?!]+", text):
        if m.end() - m.start() != 1:
            continue
        chunk = text[start : m.end()].strip()
        start = m.end()
        if chunk:
            out.append(RawSentence(chunk, source_id, len(out)))
    tail = text[start:].strip()
    if tail and tail[-1] in _TERMINALS:
        out.append(RawSentence(tail, source_id, len(out)))
    return out


def _split_words(body: str, cfg: RuleConfig) -> list[str]:
    pieces: list[str] = []
    for piece in body.split():
        if cfg.apostrophe_policy is ApostrophePolicy.SPLIT:
            m = _ELISION_RE.match(piece)
            if m:
                pieces.extend(m.groups())
                continue
        pieces.append(piece)
    return pieces


def _check_word_chars(word: str) -> None:
    if not any(ch.isalnum() for ch in word):
        raise TokenizationError(f"{word!r} has no word characters")
    for ch in word:
        if not (ch.isalnum() or ch in _WORD_EXTRA_CHARS):
            raise TokenizationError(f"forbidden character {ch!r} in {word!r}")


def filter_sentence(
    s: RawSentence, lex: Lexicon, cfg: RuleConfig, min_tokens: int = 2
) -> FilterReport:
    """Screen one segmented sentence against the grammatical and lexical
    rules. Every outcome is a report; nothing raises."""

    def reject(reason: Reason) -> FilterReport:
        return FilterReport(accepted=False, reason=reason)

    text = s.text.strip()
    if not text or text[-1] not in _TERMINALS or text[-1] in "?!":
        return reject(Reason.NOT_DECLARATIVE)
    body = text[:-1]
    if any(ch in cfg.forbidden_punct for ch in body):
        return reject(Reason.FORBIDDEN_PUNCTUATION)
    try:
        words = _split_words(body, cfg)
        for w in words:
            _check_word_chars(w)
    except TokenizationError:
        return reject(Reason.FORBIDDEN_PUNCTUATION)
    if len(words) < min_tokens:
        return reject(Reason.TOO_SHORT)
    for i, w in enumerate(words):
        if i > 0 and w[:1].isupper() and not lex.resolves(w):
            return reject(Reason.PROPER_NOUN)
    for w in words:
        if not lex.resolves(w):
            return reject(Reason.OUT_OF_LEXICON)
    return FilterReport(accepted=True, reason=Reason.OK)


def tokenize(s: RawSentence, cfg: RuleConfig) -> list[Token]:
    """Whitespace tokenization with the terminal mark stripped. The first
    token keeps its capitalization; hyphens and apostrophes stay inside
    their token."""
    text = s.text.strip()
    body = text[:-1] if text and text[-1] in _TERMINALS else text
    words = _split_words(body, cfg)
    for w in words:
        _check_word_chars(w)
    return [Token(w) for w in words]


def extract_ngrams(tokens: Sequence[Token], n: int) -> list[NGram]:
    """All length-n windows, position-typed. A sentence of exactly n tokens
    yields the same window twice, once initial and once final."""
    if n < 2:
        raise ValueError("n-gram order must be at least 2")
    if len(tokens) < n:
        return []
    out: list[NGram] = []
    last_start = len(tokens) - n
    for i in range(last_start + 1):
        window = tuple(tokens[i : i + n])
        if i == 0:
            out.append(NGram(window, Position.INITIAL))
            if last_start == 0:
                out.append(NGram(window, Position.FINAL))
        elif i == last_start:
            out.append(NGram(window, Position.FINAL))
        else:
            out.append(NGram(window, Position.MIDDLE))
    return out


# -- directory-level pipeline --------------------------------------------


def extract_from_text(
    text: str,
    source_id: str,
    lex: Lexicon,
    cfg: RuleConfig,
    n: int,
) -> tuple[list[NGram], Counter]:
    """Segment, filter, tokenize and n-gram one document. The counter tallies
    filter outcomes by reason name."""
    ngrams: list[NGram] = []
    tally: Counter = Counter()
    for sentence in segment_sentences(text, source_id):
        report = filter_sentence(sentence, lex, cfg, min_tokens=n)
        tally[report.reason.value] += 1
        if not report.accepted:
            continue
        ngrams.extend(extract_ngrams(tokenize(sentence, cfg), n))
    return ngrams, tally


def _extract_file(args) -> tuple[list[NGram], Counter]:
    path, lex, cfg, n = args
    text = Path(path).read_text(encoding="utf-8")
    return extract_from_text(text, Path(path).name, lex, cfg, n)


def extract_corpus_dir(
    corpus_dir,
    lex: Lexicon,
    cfg: RuleConfig,
    n: int,
    jobs: int = 1,
) -> tuple[list[NGram], dict]:
    """Process every .txt file under corpus_dir; file order and the merged
    n-gram set are deterministic. Files are independent, so they can be
    handled by worker processes; the merge stays single-threaded."""
    files = sorted(Path(corpus_dir).glob("*.txt"))
    tally: Counter = Counter()
    merged: dict[tuple, NGram] = {}
    tasks = [(str(p), lex, cfg, n) for p in files]
    if jobs > 1 and len(files) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_extract_file, tasks))
    else:
        results = [_extract_file(t) for t in tasks]
    for ngrams, file_tally in results:
        tally.update(file_tally)
        for g in ngrams:
            merged.setdefault((g.position.value, g.surfaces), g)
    report = {
        "files": len(files),
        "sentences": int(sum(tally.values())),
        "accepted_sentences": int(tally.get(Reason.OK.value, 0)),
        "rejections": {
            r.value: int(tally.get(r.value, 0)) for r in Reason if r is not Reason.OK
        },
        "ngrams": len(merged),
    }
    return list(merged.values()), report


def corpus_token_sentences(
    corpus_dir, lex: Lexicon, cfg: RuleConfig, min_tokens: int = 2
):
    """Token sequences of every accepted sentence, e.g. for scorer training."""
    for path in sorted(Path(corpus_dir).glob("*.txt")):
        text = path.read_text(encoding="utf-8")
        for sentence in segment_sentences(text, path.name):
            if filter_sentence(sentence, lex, cfg, min_tokens).accepted:
                yield tokenize(sentence, cfg)


def write_ngram_file(ngrams: Iterable[NGram], path) -> None:
    """One record per line: "position<TAB>w1 w2 ... wn", sorted for
    reproducible bytes."""
    records = sorted(
        (g.position.value, " ".join(g.surfaces))
        for g in ngrams
    )
    with open(path, "w", encoding="utf-8") as fh:
        for position, words in records:
            fh.write(f"{position}\t{words}\n")


def read_ngram_file(path) -> list[NGram]:
    out: list[NGram] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            cells = line.split("\t")
            if len(cells) != 2:
                raise FormatError(f"expected 'position<TAB>words', got {line!r}", line_no)
            try:
                position = Position(cells[0])
            except ValueError:
                raise FormatError(f"unknown position {cells[0]!r}", line_no) from None
            words = tuple(Token(w) for w in cells[1].split(" ") if w)
            if not words:
                raise FormatError("empty n-gram", line_no)
            out.append(NGram(words, position))
    return out
