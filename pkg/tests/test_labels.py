"""Label taxonomies, answer normalization, and binary unification."""

import pytest

from veridict.labels import (
    BINARY,
    DISPLAY,
    THREE,
    UNPARSEABLE,
    Label,
    gold_class,
    normalize_answer,
    taxonomy_by_name,
    unify_binary,
)


class TestTaxonomy:
    def test_binary_menu(self):
        assert BINARY.menu() == "Human or AI"

    def test_three_menu(self):
        assert THREE.menu() == "Human, AI-Polish, or AI-Native"

    def test_membership(self):
        assert "Human" in BINARY
        assert "AI-Polish" not in BINARY
        assert "AI-Polish" in THREE

    def test_lookup_by_name(self):
        assert taxonomy_by_name("binary") is BINARY
        assert taxonomy_by_name("three") is THREE

    def test_unknown_name_raises(self):
        with pytest.raises(ValueError):
            taxonomy_by_name("quaternary")


class TestNormalizeAnswer:
    def test_exact_match(self):
        assert normalize_answer("Human", BINARY) == "Human"

    def test_case_and_whitespace(self):
        assert normalize_answer("  hUmAn \n", BINARY) == "Human"

    def test_hyphen_insensitive(self):
        assert normalize_answer("ai polish", THREE) == "AI-Polish"
        assert normalize_answer("AIPOLISH", THREE) == "AI-Polish"

    def test_non_member_is_none(self):
        assert normalize_answer("AI-Polish", BINARY) is None
        assert normalize_answer("robot", BINARY) is None

    def test_empty_is_none(self):
        assert normalize_answer("", BINARY) is None
        assert normalize_answer("  ", BINARY) is None

    def test_partial_word_is_none(self):
        assert normalize_answer("Humanity", BINARY) is None


class TestUnifyAndGold:
    def test_unify_maps_both_ai_flavors(self):
        assert unify_binary("AI-Native") == "AI"
        assert unify_binary("AI-Polish") == "AI"
        assert unify_binary("AI") == "AI"

    def test_unify_keeps_human_and_sentinel(self):
        assert unify_binary("Human") == "Human"
        assert unify_binary(UNPARSEABLE) == UNPARSEABLE

    def test_gold_class_binary(self):
        assert gold_class(Label.HUMAN, BINARY) == "Human"
        assert gold_class(Label.AI_NATIVE, BINARY) == "AI"
        assert gold_class(Label.AI_POLISH, BINARY) == "AI"

    def test_gold_class_three(self):
        assert gold_class(Label.AI_POLISH, THREE) == "AI-Polish"
        assert gold_class(Label.AI_NATIVE, THREE) == "AI-Native"

    def test_display_covers_all_labels(self):
        assert set(DISPLAY) == set(Label)
