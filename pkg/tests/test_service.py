"""HTTP API: CRUD with revisions, querying, explanations, error model."""

import importlib.util
import json
import random
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from rulewiki.service import create_app
from rulewiki.workspace import Workspace

from conftest import QUESTIONS, fixture_source

RECORDED = Path(__file__).resolve().parent / "recorded_api"


@pytest.fixture
def client(tmp_path):
    return TestClient(create_app(Workspace(tmp_path / "wiki")))


@pytest.fixture
def authors(client):
    """A client with the author-extraction rulebase saved as 'authors'."""
    r = client.put(
        "/api/rulebases/authors",
        json={"source": fixture_source("fixture2")},
        headers={"If-Match": "0"},
    )
    assert r.status_code == 200
    return client


def put(client, rid, source, revision):
    return client.put(
        f"/api/rulebases/{rid}",
        json={"source": source},
        headers={"If-Match": str(revision)},
    )


# --- CRUD and revisions -----------------------------------------------------


def test_empty_workspace_lists_nothing(client):
    assert client.get("/api/rulebases").json() == {"rulebases": []}


def test_save_and_fetch_round_trip(authors):
    r = authors.get("/api/rulebases/authors")
    body = r.json()
    assert body["revision"] == 1
    assert body["source"] == fixture_source("fixture2")
    assert body["diagnostics"] == []


def test_save_requires_if_match(client):
    r = client.put("/api/rulebases/x", json={"source": ""})
    assert r.status_code == 428
    assert r.json()["code"] == "missing_precondition"


def test_save_with_garbled_if_match(client):
    r = client.put(
        "/api/rulebases/x", json={"source": ""}, headers={"If-Match": "abc"}
    )
    assert r.status_code == 400
    assert r.json()["code"] == "bad_precondition"


def test_stale_save_reports_current_revision(authors):
    r = put(authors, "authors", "", 7)
    assert r.status_code == 409
    body = r.json()
    assert body["code"] == "revision_conflict"
    assert body["details"] == {"current_revision": 1, "expected_revision": 7}


def test_quoted_etag_accepted(authors):
    r = authors.put(
        "/api/rulebases/authors",
        json={"source": fixture_source("fixture2")},
        headers={"If-Match": '"1"'},
    )
    assert r.status_code == 200
    assert r.json()["revision"] == 2


def test_invalid_id_rejected(client):
    r = put(client, "bad id", "", 0)
    assert r.status_code == 400
    assert r.json()["code"] == "invalid_id"


def test_unknown_rulebase_404(client):
    r = client.get("/api/rulebases/nope")
    assert r.status_code == 404
    assert r.json()["code"] == "unknown_rulebase"


def test_malformed_body_is_422(client):
    r = client.put(
        "/api/rulebases/x", json={"src": "oops"}, headers={"If-Match": "0"}
    )
    assert r.status_code == 422
    assert r.json()["code"] == "invalid_body"


def test_broken_source_saves_with_diagnostics(client):
    r = put(client, "x", "some-a likes some-b\n=====\nada | bo | cy\n", 0)
    assert r.status_code == 200
    assert any("ERROR" in d for d in r.json()["diagnostics"])


# --- validation -------------------------------------------------------------


def test_validate_reports_ok(authors):
    body = authors.post("/api/rulebases/authors/validate", json={}).json()
    assert body["ok"] is True
    assert body["safety"]["is_safe"] is True
    assert body["stratification"]["is_stratified"] is True
    assert body["stratification"]["strata"]


def test_validate_reports_unsafe_without_erroring(client):
    put(client, "x", "some-a is here\n-----\nthat-a meets some-stranger\n", 0)
    body = client.post("/api/rulebases/x/validate", json={}).json()
    assert body["ok"] is False
    assert body["safety"]["is_safe"] is False
    assert "stranger" in body["safety"]["rendered"]


def test_validate_reports_negation_cycle(client):
    put(
        client,
        "x",
        "some-t is a town\n=====\nspringfield\n\n"
        "some-t is a town\nnot : that-t is dry\n-----\nthat-t is dry\n",
        0,
    )
    body = client.post("/api/rulebases/x/validate", json={}).json()
    assert body["ok"] is False
    assert body["stratification"]["is_stratified"] is False
    assert body["stratification"]["cycle"]


def test_validate_surfaces_parse_errors(client):
    put(client, "x", "some-a likes some-b\n=====\nada | bo | cy\n", 0)
    body = client.post("/api/rulebases/x/validate", json={}).json()
    assert body["ok"] is False
    assert body["parse_error"]["line"] == 3


# --- menus ------------------------------------------------------------------


def test_menu_layers(authors):
    body = authors.get("/api/rulebases/authors/menu").json()
    assert body["layers"][0]["rank"] == 0
    assert body["layers"][0]["entries"] == [QUESTIONS["fixture2"]]


def test_menu_search_ranks_author_question_first(authors):
    body = authors.post(
        "/api/rulebases/authors/menu/search", json={"text": "authors email"}
    ).json()
    assert body["matches"][0]["pattern"] == QUESTIONS["fixture2"]
    assert body["matches"][0]["score"] > body["matches"][1]["score"]


# --- queries ----------------------------------------------------------------


def test_query_returns_rows_and_explanations(authors):
    body = authors.post(
        "/api/rulebases/authors/query",
        json={"question": QUESTIONS["fixture2"]},
    ).json()
    assert body["columns"] == ["name", "email", "title"]
    assert body["rows"] == [
        [
            "Jeen Broekstra",
            "jbroeks@cs.vu.nl",
            "An Overview of RDF Query Languages",
        ]
    ]
    assert len(body["explanations"]) == 1
    assert body["rendered"]


def test_query_constraints_filter(client):
    put(
        client,
        "ages",
        "some-p is aged some-n\n=====\nada | 34\nbo | 7\ncarlos | 51\n",
        0,
    )
    body = client.post(
        "/api/rulebases/ages/query",
        json={
            "question": "some-p is aged some-n",
            "constraints": [
                {"variable": "n", "kind": "range", "minimum": "10", "maximum": "40"}
            ],
        },
    ).json()
    assert body["rows"] == [["ada", "34"]]


def test_query_constraint_accepts_prefixed_variable(client):
    put(client, "ages", "some-p is aged some-n\n=====\nbo | 7\n", 0)
    body = client.post(
        "/api/rulebases/ages/query",
        json={
            "question": "some-p is aged some-n",
            "constraints": [
                {"variable": "some-n", "kind": "equals", "value": "7"}
            ],
        },
    ).json()
    assert body["rows"] == [["bo", "7"]]


def test_query_unknown_constraint_variable(authors):
    r = authors.post(
        "/api/rulebases/authors/query",
        json={
            "question": QUESTIONS["fixture2"],
            "constraints": [{"variable": "zzz", "kind": "equals", "value": "x"}],
        },
    )
    assert r.status_code == 400
    assert r.json()["code"] == "unknown_variable"


def test_query_on_unsafe_rulebase_is_422(client):
    put(client, "x", "some-a is here\n-----\nthat-a meets some-stranger\n", 0)
    r = client.post(
        "/api/rulebases/x/query", json={"question": "some-a meets some-b"}
    )
    assert r.status_code == 422
    assert r.json()["code"] == "not_safe"


def test_query_on_unparsable_rulebase_is_400(client):
    put(client, "x", "some-a likes some-b\n=====\nada | bo | cy\n", 0)
    r = client.post(
        "/api/rulebases/x/query", json={"question": "some-a likes some-b"}
    )
    assert r.status_code == 400
    assert r.json()["code"] == "parse_error"
    assert r.json()["details"]["line"] == 3


# --- explanations -----------------------------------------------------------


def test_explain_proof_shape(authors):
    body = authors.post(
        "/api/rulebases/authors/explain",
        json={"goal": QUESTIONS["fixture2"]},
    ).json()
    assert body["kind"] == "proof"
    assert body["root"]["kind"] == "rule"
    assert len(body["root"]["children"]) == 5
    assert body["text"].splitlines()[-1] == (
        "Jeen Broekstra is an author , with email jbroeks@cs.vu.nl , of "
        "An Overview of RDF Query Languages"
    )
    assert "<details" in body["html"]


def test_explain_failure_shape(authors):
    body = authors.post(
        "/api/rulebases/authors/explain",
        json={
            "goal": (
                "Adrian Walker is an author , with email some-email , "
                "of some-title"
            )
        },
    ).json()
    assert body["kind"] == "failure"
    assert body["text"].endswith("[not shown]")
    assert "[missing]" in body["text"]


def test_explain_node_drill_down(authors):
    root = authors.post(
        "/api/rulebases/authors/explain",
        json={"goal": QUESTIONS["fixture2"]},
    ).json()["root"]
    child = root["children"][0]
    node = authors.get(
        f"/api/rulebases/authors/explain/node/{child['id']}"
    ).json()
    assert node["id"] == child["id"]
    assert node["kind"] == "table-row"


def test_explain_node_ids_stable_across_requests(authors):
    a = authors.post(
        "/api/rulebases/authors/explain", json={"goal": QUESTIONS["fixture2"]}
    ).json()["root"]["id"]
    b = authors.post(
        "/api/rulebases/authors/explain", json={"goal": QUESTIONS["fixture2"]}
    ).json()["root"]["id"]
    assert a == b


def test_explain_unknown_goal_404(authors):
    r = authors.post(
        "/api/rulebases/authors/explain", json={"goal": "total gibberish here"}
    )
    assert r.status_code == 404
    assert r.json()["code"] == "unknown_predicate"


def test_explain_unknown_node_404(authors):
    r = authors.get("/api/rulebases/authors/explain/node/" + "0" * 16)
    assert r.status_code == 404
    assert r.json()["code"] == "unknown_node"


def test_explanations_refresh_after_save(client):
    put(client, "x", "some-a likes some-b\n=====\nada | bo\n", 0)
    first = client.post(
        "/api/rulebases/x/explain", json={"goal": "ada likes bo"}
    ).json()
    assert first["kind"] == "proof"
    put(client, "x", "some-a likes some-b\n=====\ncy | dee\n", 1)
    second = client.post(
        "/api/rulebases/x/explain", json={"goal": "ada likes bo"}
    ).json()
    assert second["kind"] == "failure"


# --- sql --------------------------------------------------------------------


def test_sql_endpoint_returns_plan(authors):
    body = authors.post(
        "/api/rulebases/authors/sql",
        json={"question": "some-s is related by some-p to some-o"},
    ).json()
    assert body["dialect"] == "ansi-92"
    assert "SELECT DISTINCT" in body["sql"]
    assert body["columns"] == ["s", "p", "o"]
    assert body["mappings"][0]["relation"] == "is_related_by_to"


# --- ui ---------------------------------------------------------------------


def test_root_serves_fallback_page(client):
    r = client.get("/")
    assert r.status_code == 200
    assert "<html" in r.text.lower()


# --- recordings stay honest -------------------------------------------------


def _normalized_live_responses():
    spec = importlib.util.spec_from_file_location(
        "record_api",
        Path(__file__).resolve().parent.parent / "scripts" / "record_api.py",
    )
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    import tempfile

    workspace = Workspace(Path(tempfile.mkdtemp()) / "wiki")
    live_client = TestClient(create_app(workspace))
    out = {}
    for name, response in mod.capture(
        live_client, fixture_source("fixture2")
    ).items():
        out[name] = {
            "status": response.status_code,
            "body": mod.normalize(response.json()),
        }
    return out


def test_recorded_api_matches_live_service():
    live = _normalized_live_responses()
    stored = {
        path.stem: json.loads(path.read_text())
        for path in sorted(RECORDED.glob("*.json"))
    }
    assert stored, "run scripts/record_api.py to create the recordings"
    assert set(stored) == set(live)
    for name in sorted(live):
        assert stored[name] == live[name], (
            f"recorded_api/{name}.json is stale; re-run scripts/record_api.py"
        )


# --- robustness -------------------------------------------------------------


def test_no_internal_errors_on_fuzzed_requests(authors):
    rng = random.Random(42)
    words = [
        "some-x", "likes", "ada", "=====", "not", ":", "|", "---",
        "total", "of", "each", "éé", "<b>", "'", '"', "\\", "0",
    ]

    def junk():
        return " ".join(rng.choice(words) for _ in range(rng.randint(1, 8)))

    paths = [
        lambda: authors.get(f"/api/rulebases/{rng.choice(['authors', 'zz', 'bad id'])}"),
        lambda: authors.post(
            "/api/rulebases/authors/query", json={"question": junk()}
        ),
        lambda: authors.post(
            "/api/rulebases/authors/explain", json={"goal": junk()}
        ),
        lambda: authors.post(
            "/api/rulebases/authors/menu/search", json={"text": junk()}
        ),
        lambda: authors.post(
            "/api/rulebases/authors/sql", json={"question": junk()}
        ),
        lambda: authors.put(
            "/api/rulebases/authors",
            json={"source": junk()},
            headers={"If-Match": rng.choice(["0", "1", "abc", '"9"'])},
        ),
        lambda: authors.get(
            f"/api/rulebases/authors/explain/node/{junk()[:12]}"
        ),
    ]
    for _ in range(120):
        response = rng.choice(paths)()
        assert response.status_code < 500, response.text
        if response.status_code >= 400:
            assert "code" in response.json()
