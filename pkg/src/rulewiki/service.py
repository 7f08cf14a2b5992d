"""HTTP face of the wiki: editing, validation, questions, explanations.

Every response is JSON except the static UI.  Errors always carry the same
body shape — ``{"code": ..., "message": ..., "details": ...}`` — so clients
can branch on ``code`` without parsing prose.  Revision checks use the
``If-Match`` header: a stale save is refused with 409 and the current
revision, never silently overwritten.
"""

from __future__ import annotations

from collections import OrderedDict
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Optional

from fastapi import FastAPI, Header, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import HTMLResponse, JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel
from starlette.exceptions import HTTPException as StarletteHTTPException

from .engine import (
    AnswerTable,
    Approx,
    EngineLimits,
    Equals,
    LimitExceeded,
    NotSafe,
    NotStratified,
    Query,
    Range,
    TypeMismatch,
    solve,
)
from .explain import (
    Explainer,
    FailureNode,
    NegationCheck,
    ProofNode,
    RuleStep,
    TableRow,
    UnknownNode,
    UnknownPredicate,
    render,
)
from .menus import UnknownVariable, build_menu, search
from .rulebook import ParseError, Rulebase
from .sentences import Value, parse_sentence
from .sqlgen import SqlPlan, UnmappedPredicate, UnsupportedInSql, compile_sql
from .validation import check_rulebase_safety, stratify
from .workspace import (
    InvalidId,
    RevisionConflict,
    UnknownRulebase,
    Workspace,
)


class ApiError(Exception):
    def __init__(
        self,
        status: int,
        code: str,
        message: str,
        details: Optional[dict[str, Any]] = None,
    ):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.details = details

    def response(self) -> JSONResponse:
        body: dict[str, Any] = {"code": self.code, "message": self.message}
        if self.details is not None:
            body["details"] = self.details
        return JSONResponse(status_code=self.status, content=body)


@contextmanager
def _domain_errors():
    """Translate domain exceptions into the stable error body."""
    try:
        yield
    except ApiError:
        raise
    except InvalidId as exc:
        raise ApiError(400, "invalid_id", str(exc)) from exc
    except UnknownRulebase as exc:
        raise ApiError(404, "unknown_rulebase", str(exc)) from exc
    except RevisionConflict as exc:
        raise ApiError(
            409,
            "revision_conflict",
            str(exc),
            {"current_revision": exc.current, "expected_revision": exc.expected},
        ) from exc
    except ParseError as exc:
        raise ApiError(
            400, "parse_error", str(exc), {"line": exc.line}
        ) from exc
    except NotSafe as exc:
        raise ApiError(
            422,
            "not_safe",
            "the rulebase has unsafe rules",
            {
                "errors": [e.render() for e in exc.report.errors],
                "warnings": [w.render() for w in exc.report.warnings],
            },
        ) from exc
    except NotStratified as exc:
        raise ApiError(
            422,
            "not_stratified",
            "negation or aggregation depends on itself through a cycle",
            {
                "cycle": [r.label for r in exc.stratification.cycle_witness or ()],
                "rendered": exc.stratification.render(),
            },
        ) from exc
    except LimitExceeded as exc:
        raise ApiError(
            422,
            "limit_exceeded",
            str(exc),
            {"what": exc.what, "limit": exc.limit},
        ) from exc
    except TypeMismatch as exc:
        raise ApiError(422, "type_mismatch", str(exc)) from exc
    except UnknownVariable as exc:
        raise ApiError(
            400, "unknown_variable", str(exc), {"variable": exc.name}
        ) from exc
    except UnknownPredicate as exc:
        raise ApiError(404, "unknown_predicate", str(exc)) from exc
    except UnknownNode as exc:
        raise ApiError(404, "unknown_node", str(exc)) from exc
    except UnmappedPredicate as exc:
        raise ApiError(422, "unmapped_predicate", str(exc)) from exc
    except UnsupportedInSql as exc:
        raise ApiError(422, "unsupported_in_sql", str(exc)) from exc


# ---------------------------------------------------------------------------
# request bodies
# ---------------------------------------------------------------------------


class SaveBody(BaseModel):
    source: str


class SearchBody(BaseModel):
    text: str


class ConstraintBody(BaseModel):
    variable: str
    kind: str  # equals | range | approx
    value: Optional[str] = None
    minimum: Optional[str] = None
    maximum: Optional[str] = None
    text: Optional[str] = None
    max_distance: int = 2


class QueryBody(BaseModel):
    question: str
    constraints: list[ConstraintBody] = []


class ExplainBody(BaseModel):
    goal: str


class SqlBody(BaseModel):
    question: str


# ---------------------------------------------------------------------------
# serialization helpers
# ---------------------------------------------------------------------------


def _entry_json(entry) -> dict[str, Any]:
    return {
        "id": entry.id,
        "revision": entry.revision,
        "updated_at": entry.updated_at,
    }


def _node_kind(node: ProofNode) -> str:
    if isinstance(node.kind, RuleStep):
        return "rule"
    if isinstance(node.kind, TableRow):
        return "table-row"
    if isinstance(node.kind, NegationCheck):
        return "negation"
    return "builtin"


def _node_json(node: ProofNode) -> dict[str, Any]:
    out: dict[str, Any] = {
        "id": node.node_id,
        "kind": _node_kind(node),
        "text": node.text,
    }
    if node.conclusion is not None:
        out["conclusion"] = node.conclusion.text
    if isinstance(node.kind, RuleStep):
        out["rule"] = node.kind.rule.label
        out["children"] = [
            {"id": c.node_id, "kind": _node_kind(c), "text": c.text}
            for c in node.kind.children
        ]
    else:
        out["children"] = []
    if isinstance(node.kind, TableRow):
        out["table"] = node.kind.table
        out["row"] = node.kind.row
    if isinstance(node.kind, NegationCheck) and node.kind.failure is not None:
        out["failure"] = _failure_json(node.kind.failure)
    return out


def _failure_json(node: FailureNode) -> dict[str, Any]:
    return {
        "goal": node.goal.text,
        "attempts": [
            {
                "rule": a.rule.label,
                "satisfied": list(a.satisfied),
                "missing": list(a.missing),
                "conclusion": a.conclusion,
                "note": a.note,
            }
            for a in node.attempts
        ],
    }


def _answers_json(
    answers: AnswerTable, explainer: Explainer
) -> dict[str, Any]:
    return {
        "columns": list(answers.columns),
        "rows": [[v.text for v in row] for row in answers.rows],
        "explanations": [
            explainer.explain(fact).node_id for fact in answers.row_facts
        ],
        "rendered": answers.render(),
        "diagnostics": list(answers.diagnostics),
    }


def _parse_constraints(
    body: QueryBody, pattern
) -> tuple[tuple[str, Any], ...]:
    known = set(pattern.variables)
    out = []
    for c in body.constraints:
        name = c.variable
        if name.startswith(("some-", "that-")):
            name = name[5:]
        if name not in known:
            raise ApiError(
                400,
                "unknown_variable",
                f"the question has no variable named {c.variable!r}",
                {"variable": c.variable},
            )
        if c.kind == "equals":
            if c.value is None:
                raise ApiError(400, "invalid_constraint", "equals needs a value")
            out.append((name, Equals(Value(c.value))))
        elif c.kind == "range":
            out.append(
                (
                    name,
                    Range(
                        minimum=Value(c.minimum) if c.minimum is not None else None,
                        maximum=Value(c.maximum) if c.maximum is not None else None,
                    ),
                )
            )
        elif c.kind == "approx":
            if c.text is None:
                raise ApiError(400, "invalid_constraint", "approx needs text")
            out.append((name, Approx(c.text, c.max_distance)))
        else:
            raise ApiError(
                400,
                "invalid_constraint",
                f"unknown constraint kind {c.kind!r}",
                {"kind": c.kind},
            )
    return tuple(out)


class _ExplainerCache:
    """One explainer per (rulebase, revision); old revisions age out."""

    def __init__(self, capacity: int = 8):
        self.capacity = capacity
        self._cache: OrderedDict[tuple[str, int], Explainer] = OrderedDict()

    def get(
        self, key: tuple[str, int], rb: Rulebase, limits: EngineLimits
    ) -> Explainer:
        if key in self._cache:
            self._cache.move_to_end(key)
            return self._cache[key]
        explainer = Explainer(rb, limits)
        self._cache[key] = explainer
        while len(self._cache) > self.capacity:
            self._cache.popitem(last=False)
        return explainer


_FALLBACK_PAGE = """<!doctype html>
<html><head><title>Executable English wiki</title></head>
<body>
<h1>Executable English wiki</h1>
<p>The web UI is not built.  The JSON API is live:</p>
<ul>
<li><code>GET /api/rulebases</code></li>
<li><code>GET /api/rulebases/{id}</code> / <code>PUT</code> with <code>If-Match</code></li>
<li><code>POST /api/rulebases/{id}/query</code> with <code>{"question": "..."}</code></li>
<li><code>POST /api/rulebases/{id}/explain</code> with <code>{"goal": "..."}</code></li>
</ul>
</body></html>
"""


def create_app(
    workspace: Workspace,
    limits: EngineLimits = EngineLimits(),
    ui_dir: Optional[Path] = None,
) -> FastAPI:
    app = FastAPI(title="Executable English wiki", docs_url="/api/docs")
    explainers = _ExplainerCache()

    @app.exception_handler(ApiError)
    async def _api_error(request: Request, exc: ApiError):
        return exc.response()

    @app.exception_handler(RequestValidationError)
    async def _invalid_body(request: Request, exc: RequestValidationError):
        return ApiError(
            422,
            "invalid_body",
            "the request body does not match the expected shape",
            {"errors": [str(e.get("msg", e)) for e in exc.errors()]},
        ).response()

    @app.exception_handler(StarletteHTTPException)
    async def _http_error(request: Request, exc: StarletteHTTPException):
        return ApiError(
            exc.status_code, "http_error", str(exc.detail)
        ).response()

    def entry_and_rulebase(rulebase_id: str):
        with _domain_errors():
            entry = workspace.load(rulebase_id)
            return entry, workspace.rulebase(rulebase_id)

    def explainer_for(rulebase_id: str, entry, rb) -> Explainer:
        with _domain_errors():
            return explainers.get((rulebase_id, entry.revision), rb, limits)

    # -- editing -----------------------------------------------------------

    @app.get("/api/rulebases")
    def list_rulebases():
        with _domain_errors():
            entries = [workspace.load(i) for i in workspace.ids()]
        return {"rulebases": [_entry_json(e) for e in entries]}

    @app.get("/api/rulebases/{rulebase_id}")
    def get_rulebase(rulebase_id: str):
        with _domain_errors():
            entry = workspace.load(rulebase_id)
            diagnostics = workspace.diagnostics(rulebase_id)
        out = _entry_json(entry)
        out["source"] = entry.source
        out["diagnostics"] = diagnostics
        return out

    @app.put("/api/rulebases/{rulebase_id}")
    def put_rulebase(
        rulebase_id: str,
        body: SaveBody,
        if_match: Optional[str] = Header(default=None),
    ):
        if if_match is None:
            raise ApiError(
                428,
                "missing_precondition",
                "PUT requires an If-Match header carrying the revision "
                "the edit was based on (0 for a new rulebase)",
            )
        try:
            expected = int(if_match.strip().strip('"'))
        except ValueError:
            raise ApiError(
                400, "bad_precondition", f"If-Match must be a revision number, got {if_match!r}"
            ) from None
        with _domain_errors():
            entry = workspace.save(rulebase_id, body.source, expected)
            diagnostics = workspace.diagnostics(rulebase_id)
        out = _entry_json(entry)
        out["diagnostics"] = diagnostics
        return out

    # -- validation --------------------------------------------------------

    @app.post("/api/rulebases/{rulebase_id}/validate")
    def validate(rulebase_id: str):
        with _domain_errors():
            entry = workspace.load(rulebase_id)
        try:
            with _domain_errors():
                rb = workspace.rulebase(rulebase_id)
        except ApiError as exc:
            if exc.code != "parse_error":
                raise
            return {
                "ok": False,
                "parse_error": {"message": exc.message, **(exc.details or {})},
                "diagnostics": workspace.diagnostics(rulebase_id),
            }
        safety = check_rulebase_safety(rb)
        strat = stratify(rb)
        return {
            "ok": safety.is_safe and strat.is_stratified,
            "diagnostics": [d.render() for d in rb.diagnostics],
            "safety": {
                "is_safe": safety.is_safe,
                "errors": [e.render() for e in safety.errors],
                "warnings": [w.render() for w in safety.warnings],
                "rendered": safety.render(),
            },
            "stratification": {
                "is_stratified": strat.is_stratified,
                "strata": {p.text: n for p, n in sorted(
                    strat.stratum.items(), key=lambda kv: (kv[1], kv[0].sort_key())
                )},
                "cycle": [r.label for r in strat.cycle_witness or ()],
                "rendered": strat.render(),
            },
        }

    # -- menus -------------------------------------------------------------

    @app.get("/api/rulebases/{rulebase_id}/menu")
    def menu(rulebase_id: str):
        _, rb = entry_and_rulebase(rulebase_id)
        with _domain_errors():
            layers = build_menu(rb)
        return {
            "layers": [
                {
                    "rank": layer.rank,
                    "entries": [p.generalized_text() for p in layer.entries],
                }
                for layer in layers
            ]
        }

    @app.post("/api/rulebases/{rulebase_id}/menu/search")
    def menu_search(rulebase_id: str, body: SearchBody):
        _, rb = entry_and_rulebase(rulebase_id)
        with _domain_errors():
            ranked = search(rb, body.text)
        return {
            "matches": [
                {"pattern": r.pattern.generalized_text(), "score": r.score}
                for r in ranked
            ]
        }

    # -- questions ---------------------------------------------------------

    @app.post("/api/rulebases/{rulebase_id}/query")
    def query(rulebase_id: str, body: QueryBody):
        entry, rb = entry_and_rulebase(rulebase_id)
        with _domain_errors():
            pattern = parse_sentence(body.question)
            q = Query(pattern, _parse_constraints(body, pattern))
            answers = solve(rb, q, limits)
            explainer = explainer_for(rulebase_id, entry, rb)
            return _answers_json(answers, explainer)

    # -- explanations ------------------------------------------------------

    @app.post("/api/rulebases/{rulebase_id}/explain")
    def explain(rulebase_id: str, body: ExplainBody):
        entry, rb = entry_and_rulebase(rulebase_id)
        with _domain_errors():
            goal = parse_sentence(body.goal)
            explainer = explainer_for(rulebase_id, entry, rb)
            matches = explainer.matching_facts(goal)
            if matches:
                node = explainer.explain(matches[0])
                return {
                    "kind": "proof",
                    "root": _node_json(node),
                    "text": render(node, "text"),
                    "html": render(node, "html"),
                }
            failure = explainer.explain_failure(goal)
            return {
                "kind": "failure",
                "failure": _failure_json(failure),
                "text": render(failure, "text"),
                "html": render(failure, "html"),
            }

    @app.get("/api/rulebases/{rulebase_id}/explain/node/{node_id}")
    def explain_node(rulebase_id: str, node_id: str):
        entry, rb = entry_and_rulebase(rulebase_id)
        with _domain_errors():
            explainer = explainer_for(rulebase_id, entry, rb)
            node = explainer.node(node_id)
            return _node_json(node)

    # -- SQL preview -------------------------------------------------------

    @app.post("/api/rulebases/{rulebase_id}/sql")
    def sql_preview(rulebase_id: str, body: SqlBody):
        _, rb = entry_and_rulebase(rulebase_id)
        with _domain_errors():
            pattern = parse_sentence(body.question)
            plan: SqlPlan = compile_sql(rb, Query(pattern))
        return {
            "sql": plan.sql,
            "dialect": plan.dialect,
            "columns": list(plan.columns),
            "in_engine": sorted(p.text for p in plan.in_engine),
            "fetches": [
                {
                    "predicate": f.predicate.text,
                    "columns": list(f.columns),
                    "sql": f.sql,
                }
                for f in plan.fetches
            ],
            "mappings": [
                {
                    "predicate": m.predicate.text,
                    "relation": m.relation,
                    "columns": list(m.columns),
                    "source": m.source,
                }
                for m in sorted(plan.mappings, key=lambda m: m.relation)
            ],
        }

    # -- static UI ---------------------------------------------------------

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")
    else:

        @app.get("/", include_in_schema=False)
        def index():
            return HTMLResponse(_FALLBACK_PAGE)

    return app
