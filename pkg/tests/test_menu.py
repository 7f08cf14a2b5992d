"""Question menus: layered browsing, keyword search, constraint editing."""

import pytest

from rulewiki.engine import Approx, Equals, Range, Value, solve
from rulewiki.menus import UnknownVariable, build_menu, search, specialize
from rulewiki.rulebook import parse_rulebase, parse_sentence

from conftest import answer_texts, fixture_rulebase


# --- layers -----------------------------------------------------------------


def test_top_layer_holds_the_headline_question():
    layers = build_menu(fixture_rulebase("fixture4"))
    assert layers[0].rank == 0
    texts = [p.generalized_text() for p in layers[0].entries]
    assert (
        "for estimated demand some-id some-fraction of the order will be "
        "some-product from some-refinery"
    ) in texts


def test_layer_ranks_ascend_without_gaps():
    layers = build_menu(fixture_rulebase("fixture4"))
    assert [layer.rank for layer in layers] == list(range(len(layers)))


def test_no_predicate_appears_in_two_layers():
    layers = build_menu(fixture_rulebase("fixture4"))
    seen = set()
    for layer in layers:
        for pattern in layer.entries:
            text = pattern.generalized_text()
            assert text not in seen
            seen.add(text)


def test_base_tables_sit_in_the_deepest_layer():
    layers = build_menu(fixture_rulebase("fixture4"))
    deepest = [p.generalized_text() for p in layers[-1].entries]
    assert (
        "refinery some-refinery has some-amount gallons of base product "
        "some-product"
    ) in deepest


def test_intermediate_conclusions_sit_between():
    layers = build_menu(fixture_rulebase("fixture4"))
    middle = [p.generalized_text() for p in layers[1].entries]
    assert (
        "for demand some-id the refineries have altogether some-total "
        "gallons of acceptable base products"
    ) in middle


def test_tables_only_rulebase_has_single_layer():
    rb = parse_rulebase("some-a likes some-b\n=====\nada | bo\n")
    layers = build_menu(rb)
    assert len(layers) == 1
    assert [p.generalized_text() for p in layers[0].entries] == [
        "some-a likes some-b"
    ]


def test_every_defined_predicate_is_listed_once():
    rb = fixture_rulebase("fixture2")
    layers = build_menu(rb)
    texts = [p.generalized_text() for layer in layers for p in layer.entries]
    assert len(texts) == len(set(texts)) == len(rb.predicates())


# --- search -----------------------------------------------------------------


def test_search_ranks_matching_sentence_first():
    hits = search(fixture_rulebase("fixture2"), "authors email")
    assert hits[0].pattern.generalized_text() == (
        "some-name is an author , with email some-email , of some-title"
    )
    assert hits[0].score > hits[1].score


def test_search_returns_all_entries_scored():
    rb = fixture_rulebase("fixture2")
    hits = search(rb, "zzz qqq")
    assert len(hits) == len(rb.predicates())
    assert all(h.score == 0.0 for h in hits)


def test_search_is_case_insensitive_on_words():
    hits = search(fixture_rulebase("fixture2"), "EMAIL")
    assert hits[0].pattern.generalized_text().startswith("some-name is an author")


# --- specialize -------------------------------------------------------------


def test_specialize_builds_runnable_query():
    rb = parse_rulebase(
        "some-p is aged some-n\n=====\nada | 34\nbo | 7\ncarlos | 51\n"
    )
    q = specialize(
        parse_sentence("some-p is aged some-n"), [("n", Equals(Value("7")))]
    )
    assert answer_texts(solve(rb, q)) == [("bo", "7")]


def test_specialize_accepts_range_and_approx():
    rb = parse_rulebase(
        "some-p is aged some-n\n=====\nada | 34\nbo | 7\ncarlos | 51\n"
    )
    q = specialize(
        parse_sentence("some-p is aged some-n"),
        [
            ("n", Range(minimum=Value("10"), maximum=Value("60"))),
            ("p", Approx(text="carlso", max_distance=2)),
        ],
    )
    assert answer_texts(solve(rb, q)) == [("carlos", "51")]


def test_specialize_rejects_unknown_variable():
    with pytest.raises(UnknownVariable):
        specialize(
            parse_sentence("some-p is aged some-n"),
            [("zzz", Equals(Value("7")))],
        )
