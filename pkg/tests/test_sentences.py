"""Tokenization, variables, skeletons, alignment, values."""

from decimal import Decimal

import pytest

from rulewiki.sentences import (
    EMPTY_BINDING,
    Alignment,
    Binding,
    Constant,
    EmptySentence,
    GroundFact,
    PredicateId,
    SentencePattern,
    UnboundVariable,
    Value,
    Variable,
    align,
    generalize,
    instantiate,
    match,
    parse_sentence,
    render_partial,
    skeleton_of,
)


# --- tokenization -----------------------------------------------------------


def test_words_split_on_whitespace_only():
    p = parse_sentence("the  retailer\tterm some-x")
    assert [t.text for t in p.tokens[:3]] == ["the", "retailer", "term"]
    assert p.tokens[3].name == "x"


def test_some_prefix_introduces_variable():
    p = parse_sentence("some-person is happy")
    assert isinstance(p.tokens[0], Variable)
    assert p.tokens[0].name == "person"


def test_that_prefix_is_also_a_variable():
    p = parse_sentence("that-person is happy")
    assert isinstance(p.tokens[0], Variable)
    assert p.tokens[0].name == "person"


def test_punctuation_is_part_of_the_word():
    p = parse_sentence("a , b .")
    assert [t.text for t in p.tokens] == ["a", ",", "b", "."]


def test_case_sensitive_words():
    a = skeleton_of(parse_sentence("Alice is Happy"))
    b = skeleton_of(parse_sentence("alice is happy"))
    assert a != b


def test_empty_sentence_rejected():
    with pytest.raises(EmptySentence):
        parse_sentence("   ")


def test_bare_some_and_that_are_plain_words():
    p = parse_sentence("some of that")
    assert all(isinstance(t, Constant) for t in p.tokens)


def test_hyphenated_variable_names_keep_inner_hyphens():
    p = parse_sentence("some-long-fraction is big")
    assert p.tokens[0].name == "long-fraction"


# --- skeletons and identity -------------------------------------------------


def test_skeleton_ignores_variable_names():
    a = skeleton_of(parse_sentence("some-x likes some-y"))
    b = skeleton_of(parse_sentence("some-a likes some-b"))
    assert a == b


def test_skeleton_distinguishes_hole_positions():
    a = skeleton_of(parse_sentence("some-x likes mary"))
    b = skeleton_of(parse_sentence("john likes some-y"))
    assert a != b


def test_generalized_text_normalizes_prefixes():
    p = parse_sentence("some-x likes that-x and that-y")
    assert p.generalized_text() == "some-x likes some-x and some-y"


def test_sort_key_orders_by_text():
    a = skeleton_of(parse_sentence("apple is red"))
    b = skeleton_of(parse_sentence("banana is red"))
    assert sorted([b, a], key=lambda s: s.sort_key()) == [a, b]


def test_pattern_text_round_trip():
    text = "the retailer term some-item1 and that-item1 agree"
    assert parse_sentence(text).text == text


def test_pattern_variables_in_order_without_duplicates():
    p = parse_sentence("some-a likes some-b and that-a")
    assert p.variables == ("a", "b")


# --- values -----------------------------------------------------------------


def test_value_equality_is_textual():
    assert Value("01") != Value("1")
    assert Value("1.0") != Value("1")


def test_value_numeric_parses_decimals():
    assert Value("4.50").numeric == Decimal("4.50")
    assert Value("-7").numeric == Decimal("-7")
    assert Value("y-base").numeric is None


def test_value_text_preserved_verbatim():
    assert Value("Workstations/Desktops").text == "Workstations/Desktops"


# --- instantiation and matching --------------------------------------------


def test_instantiate_builds_ground_fact():
    p = parse_sentence("some-x likes some-y")
    f = instantiate(p, Binding({"x": Value("ada"), "y": Value("bo")}))
    assert f.text == "ada likes bo"
    assert f.args == (Value("ada"), Value("bo"))


def test_instantiate_requires_all_variables_bound():
    p = parse_sentence("some-x likes some-y")
    with pytest.raises(UnboundVariable):
        instantiate(p, Binding({"x": Value("ada")}))


def test_match_binds_variables():
    p = parse_sentence("some-x likes some-y")
    f = instantiate(p, Binding({"x": Value("ada"), "y": Value("bo")}))
    b = match(p, f)
    assert b is not None
    assert b["x"] == Value("ada")
    assert b["y"] == Value("bo")


def test_match_repeated_variable_requires_equal_values():
    p = parse_sentence("some-x likes that-x")
    base = parse_sentence("some-a likes some-b")
    same = instantiate(base, Binding({"a": Value("ada"), "b": Value("ada")}))
    diff = instantiate(base, Binding({"a": Value("ada"), "b": Value("bo")}))
    assert match(p, same) is not None
    assert match(p, diff) is None


def test_match_word_at_hole_filters():
    p = parse_sentence("ada likes some-y")
    base = parse_sentence("some-a likes some-b")
    fact = instantiate(base, Binding({"a": Value("ada"), "b": Value("bo")}))
    other = instantiate(base, Binding({"a": Value("cy"), "b": Value("bo")}))
    a = align(p, skeleton_of(base))
    assert a is not None
    assert a.read_args(fact.args, EMPTY_BINDING) is not None
    assert a.read_args(other.args, EMPTY_BINDING) is None


def test_align_requires_same_length_and_words():
    p = parse_sentence("some-x likes some-y")
    assert align(p, skeleton_of(parse_sentence("some-a hates some-b"))) is None
    assert align(p, skeleton_of(parse_sentence("some-a likes some-b a lot"))) is None


def test_align_rejects_generalization():
    # a word in the target where the pattern has a variable would generalize
    p = parse_sentence("some-x likes some-y")
    target = skeleton_of(parse_sentence("ada likes some-b"))
    assert align(p, target) is None


def test_generalize_replaces_holes_with_fresh_variables():
    skel = skeleton_of(parse_sentence("some-a likes some-b"))
    p = generalize(skel)
    assert p.text == "some-value-1 likes some-value-2"
    assert skeleton_of(p) == skel


def test_render_partial_keeps_unbound_variables():
    p = parse_sentence("some-x likes some-y")
    out = render_partial(p, Binding({"x": Value("ada")}))
    assert out == "ada likes some-y"


def test_binding_extended_is_consistent():
    b = Binding({"x": Value("ada")})
    assert b.extended("x", Value("ada")) is b or b.extended("x", Value("ada")) == b
    assert b.extended("x", Value("bo")) is None
    c = b.extended("y", Value("bo"))
    assert c["y"] == Value("bo")
    assert "y" not in b


def test_multi_word_value_round_trip():
    p = parse_sentence("some-title is a title")
    f = instantiate(p, Binding({"title": Value("An Overview of RDF Query Languages")}))
    assert f.text == "An Overview of RDF Query Languages is a title"
    assert f.args == (Value("An Overview of RDF Query Languages"),)
