"""File-backed storage: revisions, ingestion, configuration."""

import threading
from pathlib import Path

import pytest

from rulewiki.engine import Query, solve
from rulewiki.rulebook import ParseError, parse_rulebase, parse_sentence
from rulewiki.workspace import (
    TRIPLE_HEADING,
    BadConfig,
    BadTriple,
    InvalidId,
    RevisionConflict,
    UnknownRulebase,
    WidthMismatch,
    Workspace,
    WorkspaceConfig,
    load_config,
    parse_config,
)

from conftest import FIXTURES, QUESTIONS, answer_texts, fixture_source


@pytest.fixture
def ws(tmp_path):
    return Workspace(tmp_path / "wiki")


SMALL = "some-a likes some-b\n=====\nada | bo\n"


# --- revisions --------------------------------------------------------------


def test_first_save_expects_revision_zero(ws):
    entry = ws.save("demo", SMALL, expected_revision=0)
    assert entry.revision == 1
    assert ws.load("demo").source == SMALL


def test_updated_at_is_utc_iso(ws):
    entry = ws.save("demo", SMALL, expected_revision=0)
    assert entry.updated_at.endswith("+00:00")
    assert "T" in entry.updated_at


def test_stale_save_raises_conflict(ws):
    ws.save("demo", SMALL, expected_revision=0)
    ws.save("demo", SMALL + "cy | dee\n", expected_revision=1)
    with pytest.raises(RevisionConflict) as e:
        ws.save("demo", SMALL, expected_revision=1)
    assert e.value.current == 2
    assert e.value.expected == 1
    # the stored content is untouched
    assert "cy | dee" in ws.load("demo").source


def test_concurrent_saves_one_winner(ws):
    ws.save("demo", SMALL, expected_revision=0)
    outcomes = []

    def racer(tag):
        try:
            ws.save("demo", SMALL + f"{tag} | x\n", expected_revision=1)
            outcomes.append(("win", tag))
        except RevisionConflict:
            outcomes.append(("lose", tag))

    threads = [
        threading.Thread(target=racer, args=(t,)) for t in ("t1", "t2", "t3")
    ]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert sorted(o for o, _ in outcomes) == ["lose", "lose", "win"]
    assert ws.load("demo").revision == 2


def test_reopen_preserves_everything(ws, tmp_path):
    ws.save("demo", SMALL, expected_revision=0)
    ws.ingest_rows("demo", "some-x scored some-n", [["ada", "3"]], "scores")
    again = Workspace(tmp_path / "wiki")
    assert again.ids() == ["demo"]
    assert again.load("demo").revision == 2
    assert [t.name for t in again.tables("demo")] == ["scores"]


def test_unknown_and_invalid_ids(ws):
    with pytest.raises(UnknownRulebase):
        ws.load("missing")
    for bad in ("../evil", "", "a b", ".hidden"):
        with pytest.raises(InvalidId):
            ws.save(bad, SMALL, expected_revision=0)
    assert not ws.exists("missing")


def test_ids_are_sorted(ws):
    for rid in ("zeta", "alpha", "mid"):
        ws.save(rid, SMALL, expected_revision=0)
    assert ws.ids() == ["alpha", "mid", "zeta"]


# --- diagnostics ------------------------------------------------------------


def test_broken_source_still_saves(ws):
    ws.save("demo", SMALL, expected_revision=0)
    broken = "some-a likes some-b\n=====\nada | bo | cy\n"
    entry = ws.save("demo", broken, expected_revision=1)
    assert entry.revision == 2
    assert ws.load("demo").source == broken
    assert any("ERROR" in line for line in ws.diagnostics("demo"))
    with pytest.raises(ParseError):
        ws.rulebase("demo")


def test_clean_source_has_empty_diagnostics(ws):
    ws.save("demo", SMALL, expected_revision=0)
    assert ws.diagnostics("demo") == []


# --- table ingestion --------------------------------------------------------


def test_ingest_rows_creates_side_table(ws):
    ws.save("demo", "", expected_revision=0)
    table = ws.ingest_rows(
        "demo", "some-x scored some-n", [["ada", "3"], ["bo", "4"]], "scores"
    )
    assert table.name == "scores"
    assert ws.load("demo").revision == 2
    rb = ws.rulebase("demo")
    assert answer_texts(solve(rb, Query(parse_sentence("some-x scored some-n")))) == [
        ("ada", "3"),
        ("bo", "4"),
    ]


def test_ingest_rows_checks_width(ws):
    ws.save("demo", "", expected_revision=0)
    with pytest.raises(WidthMismatch):
        ws.ingest_rows("demo", "some-x scored some-n", [["ada"]], "scores")


def test_tsv_cells_survive_tabs_newlines_backslashes(ws, tmp_path):
    ws.save("demo", "", expected_revision=0)
    tricky = [["a\tb", "c\nd"], ["back\\slash", "plain"]]
    ws.ingest_rows("demo", "some-x notes some-n", tricky, "notes")
    again = Workspace(tmp_path / "wiki")
    (table,) = again.tables("demo")
    assert [[v.text for v in row] for row in table.rows] == tricky


# --- N-Triples ingestion ----------------------------------------------------


def test_ntriples_terms_are_unwrapped(ws):
    ws.save("demo", "", expected_revision=0)
    n = ws.ingest_ntriples(
        "demo",
        "triples",
        [
            '<Paper> <fact#:title> "An Overview of RDF Query Languages" .',
            "_:d1 <rdf:_1> <http://example.org/x> .",
        ],
    )
    assert n == 2
    (table,) = ws.tables("demo")
    assert table.heading.text == TRIPLE_HEADING
    rows = [[v.text for v in r] for r in table.rows]
    assert rows == [
        ["Paper", "fact#:title", "An Overview of RDF Query Languages"],
        ["__d1", "rdf:_1", "http://example.org/x"],
    ]


def test_ntriples_literal_keeps_inner_quotes(ws):
    ws.save("demo", "", expected_revision=0)
    ws.ingest_ntriples(
        "demo", "triples", ['<a> <said> "she said "hi" twice" .']
    )
    (table,) = ws.tables("demo")
    assert table.rows[0][2].text == 'she said "hi" twice'


def test_ntriples_rejects_garbage_with_line_number(ws):
    ws.save("demo", "", expected_revision=0)
    with pytest.raises(BadTriple) as e:
        ws.ingest_ntriples("demo", "triples", ["fine", "also fine"])
    assert e.value.line == 1


def test_ntriples_skips_comments_and_blanks(ws):
    ws.save("demo", "", expected_revision=0)
    n = ws.ingest_ntriples(
        "demo",
        "triples",
        ["# a comment", "", "<a> <b> <c> ."],
    )
    assert n == 1


def test_ingested_triples_match_embedded_table(ws):
    source = fixture_source("fixture2")
    rule_only = source.split("some-subject is related by")[0].rstrip() + "\n"
    ws.save("authors", rule_only, expected_revision=0)
    lines = (FIXTURES / "fixture2.nt").read_text().splitlines()
    assert ws.ingest_ntriples("authors", "triples", lines) == 5
    q = Query(parse_sentence(QUESTIONS["fixture2"]))
    from_triples = solve(ws.rulebase("authors"), q)
    from_source = solve(parse_rulebase(source), q)
    assert from_triples.rows == from_source.rows
    assert answer_texts(from_triples) == [
        (
            "Jeen Broekstra",
            "jbroeks@cs.vu.nl",
            "An Overview of RDF Query Languages",
        )
    ]


# --- configuration ----------------------------------------------------------


def test_config_defaults():
    c = WorkspaceConfig()
    assert c.root == Path("workspace")
    assert c.port == 8077
    assert c.sources == {}


def test_config_parses_all_sections():
    c = parse_config(
        "root = /data/wiki\nport = 9000\n\n"
        "[limits]\nmax_fixpoint_rounds = 500\nmax_derived_facts = 2000\n\n"
        "[source warehouse]\ndriver = postgres\ndatabase = erp\n"
        "host = db.internal\ncredentials_ref = vault:erp-read\n"
    )
    assert c.root == Path("/data/wiki")
    assert c.port == 9000
    assert c.limits.max_fixpoint_rounds == 500
    assert c.limits.max_derived_facts == 2000
    assert c.sources["warehouse"].driver == "postgres"
    assert c.sources["warehouse"].credentials_ref == "vault:erp-read"


@pytest.mark.parametrize(
    "text,fragment",
    [
        ("zzz = 1\n", "unknown key"),
        ("[limits]\nzzz = 1\n", "unknown limits key"),
        ("[weird]\n", "unknown section"),
        ("port = abc\n", "port must be an integer"),
        ("[source a]\ndriver = x\nzzz = 1\n", "unknown source key"),
    ],
)
def test_config_rejects_unknown_entries(text, fragment):
    with pytest.raises(BadConfig) as e:
        parse_config(text)
    assert fragment in str(e.value)


def test_load_config_reads_file(tmp_path):
    path = tmp_path / "wiki.conf"
    path.write_text("port = 8123\n")
    assert load_config(path).port == 8123
