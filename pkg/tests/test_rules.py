from fractions import Fraction

import pytest

from mddtext.errors import ConfigError, FormatError
from mddtext.rules import (
    FontMetrics,
    RuleConfig,
    check_sentence,
    find_line_breaks,
    line_window,
    line_window_int,
    load_font_metrics,
)

from _oracles import display_splits, line_feasible


def test_line_window_arithmetic():
    cfg = RuleConfig(box_width=100, space_width=5)
    lo, hi = line_window(cfg, 2)
    assert (lo, hi) == (Fraction("87.5"), Fraction(92))
    assert lo <= 88 <= hi
    assert line_window(cfg, 0) == (Fraction(100), Fraction(100))
    assert line_window_int(cfg, 2) == (88, 92)


def test_line_window_matches_stretch_scan():
    cfg = RuleConfig()  # box 200, space 10, factors 0.80..1.25
    for gaps in range(6):
        lo, hi = line_window(cfg, gaps)
        for w in range(100, 260):
            feasible = line_feasible(
                [w], gaps, cfg.box_width, cfg.space_width, "0.80", "1.25"
            )
            assert feasible == (lo <= w <= hi)


def test_config_validation():
    with pytest.raises(ConfigError):
        RuleConfig(min_words=10, max_words=9).check()
    with pytest.raises(ConfigError):
        RuleConfig(space_min_factor=Fraction(2), space_max_factor=Fraction(1)).check()
    with pytest.raises(ConfigError):
        RuleConfig(box_width=0).check()
    RuleConfig().check()


def test_char_budget_exact_example():
    # 12 words, lengths 4,5,3,5,4,2,5,4,3,4,3,6 = 48 chars + 11 spaces = 59
    lengths = [4, 5, 3, 5, 4, 2, 5, 4, 3, 4, 3, 6]
    words = ["x" * k for k in lengths]
    cfg = RuleConfig(box_width=10**9, space_width=1)  # display trivially wide
    verdict = check_sentence(words, cfg, FontMetrics.uniform(1))
    assert verdict.char_count == 59
    assert verdict.char_budget_ok
    assert verdict.word_count_ok


def test_word_count_window():
    cfg = RuleConfig()
    fonts = FontMetrics.uniform()
    assert not check_sentence(["word"] * 8, cfg, fonts).word_count_ok
    assert check_sentence(["word"] * 9, cfg, fonts).word_count_ok
    assert not check_sentence(["word"] * 16, cfg, fonts).word_count_ok


def test_display_breaks_match_brute_force():
    fonts = FontMetrics.uniform(10)
    cfg = RuleConfig(box_width=120, space_width=10, n_lines=3)
    words = ["abc", "de", "fgh", "ab", "abcd", "ef", "ghi", "ab", "cde"]
    widths = [fonts.width_of(w) for w in words]
    verdict = check_sentence(words, cfg, fonts)
    oracle = display_splits(widths, 3, 120, 10, "0.80", "1.25")
    assert verdict.display_ok == bool(oracle)
    if oracle:
        assert verdict.line_breaks == min(oracle)


def test_display_infeasible():
    fonts = FontMetrics.uniform(10)
    cfg = RuleConfig(box_width=50, space_width=10, n_lines=3)
    verdict = check_sentence(["aaaaaaaaaa"] * 3, cfg, fonts)  # each word too wide
    assert not verdict.display_ok
    assert verdict.line_breaks is None


def test_find_line_breaks_prefers_first_split():
    cfg = RuleConfig(box_width=20, space_width=10, n_lines=2,
                     space_min_factor=Fraction(0), space_max_factor=Fraction(2))
    # (1,) is out: a one-word line with zero gaps must equal the box width.
    # (2,) is the first feasible cut and should win over (3,).
    oracle = display_splits([10, 10, 10, 10], 2, 20, 10, 0, 2)
    assert min(oracle) == (2,)
    assert find_line_breaks([10, 10, 10, 10], cfg) == (2,)


def test_font_metrics_lookup_and_defaults():
    fm = FontMetrics(widths={"a": 4, "b": 6})
    assert fm.width_of("ab") == 10
    with pytest.raises(ConfigError):
        fm.width_of("abc")
    assert FontMetrics(widths={"a": 4}, default_width=5).width_of("ax") == 9


def test_load_font_metrics(tmp_path):
    path = tmp_path / "fm.tsv"
    path.write_text(
        "#box_width 1730\n#space_width 25\n#default_width 50\na\t44\nb\t51\n",
        encoding="utf-8",
    )
    fm, overrides = load_font_metrics(path)
    assert overrides == {"box_width": 1730, "space_width": 25}
    assert fm.width_of("ab") == 95
    assert fm.width_of("az") == 94  # z falls back to the default width

    bad = tmp_path / "bad.tsv"
    bad.write_text("ab\t10\n", encoding="utf-8")
    with pytest.raises(FormatError):
        load_font_metrics(bad)
