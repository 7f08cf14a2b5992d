"""Shared fixtures: the bundled example rulebases and their lead questions."""

from __future__ import annotations

from pathlib import Path

import pytest

from rulewiki.rulebook import Rulebase, parse_rulebase

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
GOLDEN = Path(__file__).resolve().parent / "golden"

# The question each bundled rulebase was written to answer.
QUESTIONS = {
    "fixture1": (
        "the retailer term some-item1 and the manufacturer term some-item2 "
        "agree - they are of type some-class"
    ),
    "fixture2": "some-name is an author , with email some-email , of some-title",
    "fixture3": (
        "some-tag names a collection of distinct items of type some-type "
        "that includes some-item"
    ),
    "fixture4": (
        "for estimated demand some-id some-fraction of the order will be "
        "some-product from some-refinery"
    ),
    "fixture5": "some-C is a part_of the continuant class some-C1",
}


def fixture_source(name: str) -> str:
    return (FIXTURES / f"{name}.ee").read_text()


def fixture_rulebase(name: str) -> Rulebase:
    return parse_rulebase(fixture_source(name))


@pytest.fixture
def source(request):
    return fixture_source(request.param)


def answer_texts(table) -> list[tuple[str, ...]]:
    """Rows of an AnswerTable as plain text tuples."""
    return [tuple(v.text for v in row) for row in table.rows]
