"""Tokenizer behavior: atomic specials, punctuation splitting, count stability."""

import numpy as np

from veridict.tokenizer import STRUCTURAL_TAGS, count_tokens, tokenize


class TestBasicSplitting:
    def test_words_and_punctuation(self):
        assert tokenize("a b, c.") == ["a", "b", ",", "c", "."]

    def test_empty_string(self):
        assert tokenize("") == []

    def test_whitespace_only(self):
        assert tokenize(" \t\n") == []

    def test_punctuation_is_single_characters(self):
        assert tokenize("wait...") == ["wait", ".", ".", "."]

    def test_unicode_word_characters_stay_joined(self):
        assert tokenize("cafe naive") == ["cafe", "naive"]


class TestSpecials:
    def test_structural_tags_survive_as_units(self):
        text = "<think> x </think> <answer> y </answer>"
        toks = tokenize(text)
        for tag in STRUCTURAL_TAGS:
            assert tag in toks

    def test_tags_without_protection_shatter(self):
        toks = tokenize("<think>", specials=())
        assert toks == ["<", "think", ">"]

    def test_longer_specials_win_over_shorter(self):
        toks = tokenize("</think>", specials=("</think>", "<think>"))
        assert toks == ["</think>"]

    def test_custom_special_kept_atomic(self):
        toks = tokenize("the AI-Polish verdict", specials=("AI-Polish",))
        assert "AI-Polish" in toks

    def test_specials_inside_words_do_not_leak(self):
        # A special embedded in a longer word run still matches eagerly at
        # its own position; the regex alternation puts specials first.
        toks = tokenize("x<answer>y", specials=STRUCTURAL_TAGS)
        assert toks == ["x", "<answer>", "y"]


class TestCountTokens:
    def test_count_matches_len(self):
        text = "<think> alpha beta </think> <answer> Human </answer>"
        assert count_tokens(text) == len(tokenize(text))

    def test_concatenation_is_superadditive_under_glue(self):
        # Joining with a space never merges tokens, so counts add exactly.
        rng = np.random.default_rng(7)
        words = ["alpha", "beta,", "gamma.", "<think>", "x9"]
        for _ in range(50):
            a = " ".join(rng.choice(words, size=3))
            b = " ".join(rng.choice(words, size=4))
            assert count_tokens(a + " " + b) == count_tokens(a) + count_tokens(b)
