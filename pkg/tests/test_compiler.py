import dataclasses

import pytest

from mddtext.compiler import (
    build_char_budget_mdd,
    build_succession_mdd,
    compile_via_intersection,
    iter_sentences,
    sentence_text,
    stats,
    unfold,
)
from mddtext.corpus import Position
from mddtext.mdd import EPSILON, EPSILON_ID, Mdd, intersect, validate
from mddtext.rules import RuleConfig, check_sentence
from mddtext.trie import build_trie

from _oracles import generate_and_test
from conftest import FIXTURE_N, fixture_word_width


def oracle_solutions(gram_sets, cfg, rules=("words", "chars", "display"), non_terminal=()):
    return generate_and_test(
        gram_sets[Position.INITIAL],
        gram_sets[Position.MIDDLE],
        gram_sets[Position.FINAL],
        n=FIXTURE_N,
        min_words=cfg.min_words,
        max_words=cfg.max_words,
        char_budget=cfg.char_budget,
        n_lines=cfg.n_lines,
        box_width=cfg.box_width,
        space_width=cfg.space_width,
        min_factor=cfg.space_min_factor,
        max_factor=cfg.space_max_factor,
        width_of=fixture_word_width,
        non_terminal=non_terminal,
        check_rules=rules,
    )


@pytest.fixture(scope="module")
def solution_mdd(fixture_trie, fixture_cfg, fixture_fonts):
    return unfold(fixture_trie, fixture_cfg, fixture_fonts)


@pytest.fixture(scope="module")
def oracle_set(fixture_gram_sets, fixture_cfg):
    return oracle_solutions(fixture_gram_sets, fixture_cfg)


def test_unfold_matches_brute_force_exactly(solution_mdd, oracle_set):
    got = set(iter_sentences(solution_mdd))
    assert got == oracle_set
    assert len(got) >= 20  # the fixture is meant to be non-trivial
    assert len({len(s) for s in got}) >= 2  # more than one sentence length


def test_unfold_structurally_valid(solution_mdd):
    assert validate(solution_mdd) == []


def test_infeasible_budgets_give_empty_mdd(fixture_trie, fixture_cfg, fixture_fonts):
    for budget in (10, 200):
        cfg = dataclasses.replace(fixture_cfg, char_budget=budget)
        assert unfold(fixture_trie, cfg, fixture_fonts).count_paths() == 0


def test_epsilon_discipline_and_char_identity(solution_mdd, fixture_cfg):
    for path in solution_mdd.iter_paths():
        saw_epsilon = False
        for label in path:
            if label == EPSILON:
                saw_epsilon = True
            else:
                assert not saw_epsilon, "real word after padding"
        words = [w for w in path if w != EPSILON]
        chars = sum(len(w) for w in words) + len(words) - 1
        assert chars == fixture_cfg.char_budget


def test_every_solution_passes_the_validator(solution_mdd, fixture_cfg, fixture_fonts):
    count = 0
    for words in iter_sentences(solution_mdd):
        verdict = check_sentence(words, fixture_cfg, fixture_fonts)
        assert verdict.passed, words
        count += 1
    assert count == solution_mdd.count_paths()


def test_near_misses_rejected_and_absent(
    solution_mdd, fixture_gram_sets, fixture_cfg, fixture_fonts
):
    solutions = set(iter_sentences(solution_mdd))

    # wrong word counts: trie-valid chains of 8 and 14 words
    for count in (fixture_cfg.min_words - 1, fixture_cfg.max_words + 1):
        cfg = dataclasses.replace(
            fixture_cfg, min_words=count, max_words=count, char_budget=10**6
        )
        chains = oracle_solutions(fixture_gram_sets, cfg, rules=("words",))
        assert chains, f"fixture cannot produce {count}-word chains"
        for words in chains:
            verdict = check_sentence(words, fixture_cfg, fixture_fonts)
            assert not verdict.word_count_ok and not verdict.passed
            assert words not in solutions

    # off-by-one character budgets
    near = set()
    for budget in (fixture_cfg.char_budget - 1, fixture_cfg.char_budget + 1):
        cfg = dataclasses.replace(fixture_cfg, char_budget=budget)
        near |= oracle_solutions(fixture_gram_sets, cfg, rules=("words", "chars", "display"))
    assert near, "fixture cannot produce off-by-one-budget sentences"
    for words in near:
        verdict = check_sentence(words, fixture_cfg, fixture_fonts)
        assert not verdict.char_budget_ok and not verdict.passed
        assert words not in solutions

    # right words and chars, but no legal three-line split
    loose = oracle_solutions(fixture_gram_sets, fixture_cfg, rules=("words", "chars"))
    infeasible = {
        w
        for w in loose
        if not check_sentence(w, fixture_cfg, fixture_fonts).display_ok
    }
    assert infeasible, "fixture has no width-infeasible near misses"
    assert infeasible.isdisjoint(solutions)


def test_intersection_route_equals_unfold(
    fixture_trie, fixture_cfg, fixture_fonts, solution_mdd
):
    other = compile_via_intersection(fixture_trie, fixture_cfg, fixture_fonts)
    assert other.structurally_equal(solution_mdd)


def test_char_rule_alone_equals_succession_x_sum(
    fixture_trie, fixture_gram_sets, fixture_cfg
):
    from mddtext.mdd import LABELS

    succession = build_succession_mdd(fixture_trie, fixture_cfg)
    vocab = sorted(lid for lid in fixture_trie.vocabulary_ids() if lid != EPSILON_ID)
    chars = build_char_budget_mdd(vocab, fixture_cfg)
    got = {
        tuple(w for w in path if w != EPSILON)
        for path in intersect(succession, chars).iter_paths()
    }
    cfg = dataclasses.replace(fixture_cfg, min_words=1)
    expected = generate_and_test(
        fixture_gram_sets[Position.INITIAL],
        fixture_gram_sets[Position.MIDDLE],
        fixture_gram_sets[Position.FINAL],
        n=FIXTURE_N,
        min_words=1,
        max_words=cfg.max_words,
        char_budget=cfg.char_budget,
        n_lines=cfg.n_lines,
        box_width=cfg.box_width,
        space_width=cfg.space_width,
        min_factor=cfg.space_min_factor,
        max_factor=cfg.space_max_factor,
        width_of=fixture_word_width,
        check_rules=("chars",),
    )
    assert got == expected


def test_empty_trie_compiles_to_empty(fixture_cfg, fixture_fonts):
    trie = build_trie([], order=3)
    assert unfold(trie, fixture_cfg, fixture_fonts).count_paths() == 0
    assert compile_via_intersection(trie, fixture_cfg, fixture_fonts).count_paths() == 0


def test_non_terminal_words_block_endings(
    fixture_trie, fixture_cfg, fixture_fonts, fixture_gram_sets, solution_mdd
):
    enders = {words[-1] for words in iter_sentences(solution_mdd)}
    blocked = sorted(enders)[0]
    cfg = dataclasses.replace(
        fixture_cfg, non_terminal_words=frozenset({blocked})
    )
    got = set(iter_sentences(unfold(fixture_trie, cfg, fixture_fonts)))
    expected = oracle_solutions(fixture_gram_sets, cfg, non_terminal=(blocked,))
    assert got == expected
    assert all(words[-1] != blocked for words in got)
    assert got < set(iter_sentences(solution_mdd))


def test_tightening_never_adds_solutions(
    fixture_trie, fixture_cfg, fixture_fonts, solution_mdd
):
    base = set(iter_sentences(solution_mdd))
    tighter_words = dataclasses.replace(
        fixture_cfg,
        min_words=fixture_cfg.min_words + 1,
        max_words=fixture_cfg.max_words - 1,
    )
    got = set(iter_sentences(unfold(fixture_trie, tighter_words, fixture_fonts)))
    assert got <= base
    # a budget nudge selects a different, possibly disjoint set; it must
    # never resurrect sentences failing the base rules
    for words in got:
        assert fixture_cfg.min_words + 1 <= len(words) <= fixture_cfg.max_words - 1


def test_stats_reports_exact_counts(solution_mdd):
    report = stats(solution_mdd, elapsed_seconds=1.25)
    assert report.solutions == solution_mdd.count_paths()
    assert report.arcs == solution_mdd.arc_count()
    assert report.nodes == solution_mdd.node_count()
    assert report.elapsed_seconds == 1.25
    assert report.peak_resident_bytes > 0
    empty = stats(Mdd(3))
    assert empty.arcs == 0 and empty.solutions == 0


def test_sentence_text_appends_period():
    assert sentence_text(("The", "cat")) == "The cat."
