import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from osnbias.sentiment import (Lexicon, LexiconError, load_lexicon, score_text,
                               tokenize)


@pytest.fixture
def lex():
    return Lexicon(entries={"good": 1.0, "bad": -1.0, "great": 2.0},
                   negators=frozenset({"not", "never"}))


class TestLoadLexicon:
    def test_basic(self, tmp_path):
        path = tmp_path / "lex.tsv"
        path.write_text("good\t1.0\nbad\t-1.0\n")
        lex = load_lexicon(path)
        assert lex.entries == {"good": 1.0, "bad": -1.0}
        assert lex.duplicate_warnings == 0

    def test_empty_file_scores_zero(self, tmp_path):
        path = tmp_path / "lex.tsv"
        path.write_text("")
        lex = load_lexicon(path)
        assert lex.entries == {}
        assert score_text("good great bad", lex) == 0.0

    def test_duplicate_last_wins(self, tmp_path):
        path = tmp_path / "lex.tsv"
        path.write_text("good\t1.0\ngood\t0.5\n")
        lex = load_lexicon(path)
        assert lex.entries["good"] == 0.5
        assert lex.duplicate_warnings == 1

    def test_negator_column(self, tmp_path):
        path = tmp_path / "lex.tsv"
        path.write_text("good\t1.0\nnot\t0\tNEG\n")
        lex = load_lexicon(path)
        assert "not" in lex.negators
        assert "not" not in lex.entries

    def test_non_numeric_polarity_fatal(self, tmp_path):
        path = tmp_path / "lex.tsv"
        path.write_text("good\tone\n")
        with pytest.raises(LexiconError, match=":1:"):
            load_lexicon(path)


class TestTokenize:
    def test_sentences_and_tokens(self):
        assert tokenize("Good food. Bad wait!") == [["good", "food"],
                                                    ["bad", "wait"]]

    def test_empty(self):
        assert tokenize("") == []

    def test_apostrophe_splits(self):
        assert tokenize("don't stop") == [["don", "t", "stop"]]

    def test_empty_sentences_dropped(self):
        assert tokenize("...!?") == []


class TestScoreText:
    def test_single_term(self, lex):
        assert score_text("good", lex) == 1.0

    def test_empty_text(self, lex):
        assert score_text("", lex) == 0.0

    def test_negated_term(self, lex):
        assert score_text("not good", lex) == pytest.approx(-1 / math.sqrt(2))

    def test_negation_window_is_four_tokens(self, lex):
        # negator 5 tokens before the term has no effect
        far = "not a b c d good"
        assert score_text(far, lex) == pytest.approx(1 / math.sqrt(6))
        near = "not a b c good"
        assert score_text(near, lex) == pytest.approx(-1 / math.sqrt(5))

    def test_negation_does_not_cross_sentences(self, lex):
        assert score_text("not it. good", lex) == pytest.approx(0.5)

    def test_sentence_mean_aggregation(self, lex):
        # two sentences scoring 1 and -1 average to 0
        assert score_text("good. bad.", lex) == pytest.approx(0.0)

    def test_sqrt_length_normalization(self, lex):
        assert score_text("good good good good", lex) == pytest.approx(4 / 2)

    def test_no_lexicon_terms_scores_zero(self, lex):
        assert score_text("completely neutral words here", lex) == 0.0


@given(st.text(max_size=200), st.floats(-4, 4, allow_nan=False))
def test_linearity_in_lexicon(text, c):
    base = Lexicon(entries={"good": 1.0, "bad": -1.0}, negators=frozenset({"not"}))
    scaled = Lexicon(entries={k: c * v for k, v in base.entries.items()},
                     negators=base.negators)
    assert score_text(text, scaled) == pytest.approx(c * score_text(text, base))


@given(st.text(max_size=200))
def test_sign_flip(text):
    base = Lexicon(entries={"good": 1.0, "bad": -0.5}, negators=frozenset({"not"}))
    flipped = Lexicon(entries={k: -v for k, v in base.entries.items()},
                      negators=base.negators)
    assert score_text(text, flipped) == pytest.approx(-score_text(text, base))


@given(st.text(max_size=200))
def test_determinism(text):
    lex = Lexicon(entries={"good": 1.0, "bad": -1.0}, negators=frozenset({"not"}))
    assert score_text(text, lex) == score_text(text, lex)
