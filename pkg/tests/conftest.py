from pathlib import Path

import pytest

from mddtext.corpus import Position, build_lexicon, extract_corpus_dir
from mddtext.rules import RuleConfig, load_font_metrics
from mddtext.trie import build_trie

FIXTURE_DIR = Path(__file__).parent / "data" / "fixture"

# frozen desk-scale rule parameters for the fixture corpus; the oracle found
# 49 solutions (12 and 13 words) for these at the time the corpus was frozen
FIXTURE_MIN_WORDS = 9
FIXTURE_MAX_WORDS = 13
FIXTURE_CHAR_BUDGET = 50
FIXTURE_N = 3


def fixture_char_width(c: str) -> int:
    # the formula tests/data/fixture/font.tsv was generated from
    return 8 + (ord(c.lower()) % 5)


def fixture_word_width(word: str) -> int:
    return sum(fixture_char_width(c) for c in word)


@pytest.fixture(scope="session")
def fixture_dir() -> Path:
    return FIXTURE_DIR


@pytest.fixture(scope="session")
def fixture_lexicon():
    return build_lexicon(FIXTURE_DIR / "lexicon.txt", FIXTURE_DIR / "inflections.tsv")


@pytest.fixture(scope="session")
def fixture_fonts():
    fonts, overrides = load_font_metrics(FIXTURE_DIR / "font.tsv")
    assert overrides == {"box_width": 155, "space_width": 10}
    return fonts


@pytest.fixture(scope="session")
def fixture_cfg(fixture_fonts) -> RuleConfig:
    return RuleConfig(
        min_words=FIXTURE_MIN_WORDS,
        max_words=FIXTURE_MAX_WORDS,
        char_budget=FIXTURE_CHAR_BUDGET,
        n_lines=3,
        box_width=155,
        space_width=10,
    )


@pytest.fixture(scope="session")
def fixture_ngrams(fixture_lexicon, fixture_cfg):
    ngrams, report = extract_corpus_dir(
        FIXTURE_DIR / "corpus", fixture_lexicon, fixture_cfg, FIXTURE_N
    )
    assert report["rejections"]["out_of_lexicon"] == 0
    return ngrams


@pytest.fixture(scope="session")
def fixture_gram_sets(fixture_ngrams):
    """Plain tuple sets per position, for oracle consumption."""
    sets = {Position.INITIAL: set(), Position.MIDDLE: set(), Position.FINAL: set()}
    for g in fixture_ngrams:
        sets[g.position].add(g.surfaces)
    return sets


@pytest.fixture(scope="session")
def fixture_trie(fixture_ngrams):
    return build_trie(fixture_ngrams)
