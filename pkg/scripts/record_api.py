#!/usr/bin/env python3
"""Record canonical HTTP API responses into tests/recorded_api/.

The recordings are consumed twice: the Python suite asserts the live service
still produces them (so they cannot go stale), and the web client's tests run
against them instead of a live server.  Timestamps are normalized so the
files only change when behavior does.

Run from the repository root:  python3 scripts/record_api.py
"""

import json
import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from rulewiki.service import create_app
from rulewiki.workspace import Workspace

ROOT = Path(__file__).resolve().parent.parent
OUT = ROOT / "tests" / "recorded_api"
PLACEHOLDER_TS = "2026-01-01T00:00:00+00:00"

AUTHOR_QUESTION = (
    "some-name is an author , with email some-email , of some-title"
)
MISSING_AUTHOR_GOAL = (
    "Adrian Walker is an author , with email some-email , of some-title"
)


def normalize(payload):
    if isinstance(payload, dict):
        return {
            k: (
                PLACEHOLDER_TS
                if k == "updated_at"
                else normalize(v)
            )
            for k, v in payload.items()
        }
    if isinstance(payload, list):
        return [normalize(v) for v in payload]
    return payload


def record(name, response):
    OUT.mkdir(parents=True, exist_ok=True)
    body = {
        "status": response.status_code,
        "body": normalize(response.json()),
    }
    path = OUT / f"{name}.json"
    path.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")
    return path


def capture(client: TestClient, source: str) -> dict[str, object]:
    responses = {}
    responses["save"] = client.put(
        "/api/rulebases/authors",
        json={"source": source},
        headers={"If-Match": "0"},
    )
    responses["list"] = client.get("/api/rulebases")
    responses["get"] = client.get("/api/rulebases/authors")
    responses["validate"] = client.post(
        "/api/rulebases/authors/validate", json={}
    )
    responses["menu"] = client.get("/api/rulebases/authors/menu")
    responses["search"] = client.post(
        "/api/rulebases/authors/menu/search", json={"text": "authors email"}
    )
    responses["query"] = client.post(
        "/api/rulebases/authors/query", json={"question": AUTHOR_QUESTION}
    )
    responses["explain_proof"] = client.post(
        "/api/rulebases/authors/explain", json={"goal": AUTHOR_QUESTION}
    )
    node_id = responses["explain_proof"].json()["root"]["id"]
    responses["explain_node"] = client.get(
        f"/api/rulebases/authors/explain/node/{node_id}"
    )
    responses["explain_failure"] = client.post(
        "/api/rulebases/authors/explain", json={"goal": MISSING_AUTHOR_GOAL}
    )
    responses["sql"] = client.post(
        "/api/rulebases/authors/sql",
        json={"question": "some-s is related by some-p to some-o"},
    )
    responses["error_conflict"] = client.put(
        "/api/rulebases/authors",
        json={"source": source},
        headers={"If-Match": "7"},
    )
    responses["error_unknown"] = client.get("/api/rulebases/nope")
    return responses


def main():
    workspace = Workspace(Path(tempfile.mkdtemp()) / "wiki")
    client = TestClient(create_app(workspace))
    source = (ROOT / "fixtures" / "fixture2.ee").read_text()
    for name, response in capture(client, source).items():
        path = record(name, response)
        print(f"wrote {path.relative_to(ROOT)}")


if __name__ == "__main__":
    main()
