"""Command line driver: validate, ask, explain, menus, SQL, ingest, serve.

Exit codes: 0 success, 1 domain problem (bad rules, no such rulebase,
unanswerable request — diagnostics printed), 2 usage error (argparse).
A failed proof is *not* an error: ``explain`` prints the failure rendering
and exits 0, because "here is why not" is a successful answer.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional

from .engine import (
    EngineLimits,
    LimitExceeded,
    NotSafe,
    NotStratified,
    Query,
    TypeMismatch,
    solve,
)
from .explain import Explainer, UnknownPredicate, render
from .menus import build_menu, search
from .rulebook import ParseError, Rulebase, parse_rulebase
from .sentences import parse_sentence
from .sqlgen import (
    BadMapping,
    UnmappedPredicate,
    UnsupportedInSql,
    compile_sql,
    default_mappings,
    parse_mappings,
)
from .validation import check_rulebase_safety, stratify
from .workspace import (
    BadConfig,
    BadTriple,
    InvalidId,
    RevisionConflict,
    UnknownRulebase,
    WidthMismatch,
    Workspace,
    WorkspaceConfig,
    load_config,
)


class DomainError(Exception):
    """Printed to stderr; exit code 1."""


def _parse_limits(text: str) -> EngineLimits:
    values = {}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        key, sep, value = part.partition("=")
        if not sep or key.strip() not in ("rounds", "facts"):
            raise argparse.ArgumentTypeError(
                f"--limits takes rounds=N,facts=M, got {part!r}"
            )
        try:
            values[key.strip()] = int(value.strip())
        except ValueError:
            raise argparse.ArgumentTypeError(
                f"{key.strip()} must be an integer, got {value.strip()!r}"
            ) from None
    kwargs = {}
    if "rounds" in values:
        kwargs["max_fixpoint_rounds"] = values["rounds"]
    if "facts" in values:
        kwargs["max_derived_facts"] = values["facts"]
    try:
        return EngineLimits(**kwargs)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _load_rulebase(path: str) -> Rulebase:
    file = Path(path)
    try:
        text = file.read_text(encoding="utf-8")
    except OSError as exc:
        raise DomainError(f"cannot read {path}: {exc.strerror or exc}") from exc
    try:
        return parse_rulebase(text)
    except ParseError as exc:
        raise DomainError(f"{path}: {exc}") from exc


def _load_workspace(config_path: Optional[str]) -> tuple[Workspace, WorkspaceConfig]:
    if config_path is None:
        config = WorkspaceConfig()
    else:
        try:
            config = load_config(Path(config_path))
        except OSError as exc:
            raise DomainError(
                f"cannot read {config_path}: {exc.strerror or exc}"
            ) from exc
        except BadConfig as exc:
            raise DomainError(f"{config_path}: {exc}") from exc
    return Workspace(config.root), config


def _emit(args, payload: dict, text: str) -> None:
    if args.format == "json":
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(text)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _cmd_validate(args) -> int:
    file = Path(args.rulebase)
    try:
        text = file.read_text(encoding="utf-8")
    except OSError as exc:
        raise DomainError(f"cannot read {args.rulebase}: {exc.strerror or exc}")
    try:
        rb = parse_rulebase(text)
    except ParseError as exc:
        payload = {"ok": False, "parse_error": {"line": exc.line, "message": str(exc)}}
        _emit(args, payload, f"ERROR {exc}")
        return 1
    safety = check_rulebase_safety(rb)
    strat = stratify(rb)
    ok = safety.is_safe and strat.is_stratified
    lines = [d.render() for d in rb.diagnostics]
    report = safety.render()
    if report:
        lines.append(report)
    if not strat.is_stratified:
        lines.append("not stratified; negation or aggregation cycles through:")
        lines.extend(f"  {r.label}" for r in strat.cycle_witness or ())
    lines.append(
        f"ok: {len(rb.rules)} rule(s), {len(rb.tables)} table(s)" if ok else "invalid"
    )
    payload = {
        "ok": ok,
        "diagnostics": [d.render() for d in rb.diagnostics],
        "safety": {
            "is_safe": safety.is_safe,
            "errors": [e.render() for e in safety.errors],
            "warnings": [w.render() for w in safety.warnings],
        },
        "stratification": {
            "is_stratified": strat.is_stratified,
            "cycle": [r.label for r in strat.cycle_witness or ()],
        },
    }
    _emit(args, payload, "\n".join(lines))
    return 0 if ok else 1


def _cmd_ask(args) -> int:
    rb = _load_rulebase(args.rulebase)
    pattern = _parse_question(args.question)
    answers = solve(rb, Query(pattern), args.limits)
    payload = {
        "columns": list(answers.columns),
        "rows": [[v.text for v in row] for row in answers.rows],
        "diagnostics": list(answers.diagnostics),
    }
    text = answers.render()
    if answers.diagnostics:
        text += "\n" + "\n".join(answers.diagnostics)
    _emit(args, payload, text)
    return 0


def _cmd_explain(args) -> int:
    rb = _load_rulebase(args.rulebase)
    goal = _parse_question(args.goal)
    explainer = Explainer(rb, args.limits)
    matches = explainer.matching_facts(goal)
    if matches:
        node = explainer.explain(matches[0])
        _emit(
            args,
            {"kind": "proof", "text": render(node, "text"), "root": node.node_id},
            render(node, "text"),
        )
    else:
        failure = explainer.explain_failure(goal)
        _emit(
            args,
            {"kind": "failure", "text": render(failure, "text")},
            render(failure, "text"),
        )
    return 0


def _cmd_menu(args) -> int:
    rb = _load_rulebase(args.rulebase)
    if args.search is not None:
        ranked = search(rb, args.search)
        payload = {
            "matches": [
                {"pattern": r.pattern.generalized_text(), "score": r.score}
                for r in ranked
            ]
        }
        text = "\n".join(
            f"{r.score:6.3f}  {r.pattern.generalized_text()}" for r in ranked
        ) or "no matches"
        _emit(args, payload, text)
        return 0
    layers = build_menu(rb)
    payload = {
        "layers": [
            {
                "rank": layer.rank,
                "entries": [p.generalized_text() for p in layer.entries],
            }
            for layer in layers
        ]
    }
    lines = []
    for layer in layers:
        lines.append(f"layer {layer.rank}:")
        lines.extend(f"  {p.generalized_text()}" for p in layer.entries)
    _emit(args, payload, "\n".join(lines) if lines else "empty menu")
    return 0


def _cmd_sql(args) -> int:
    rb = _load_rulebase(args.rulebase)
    pattern = _parse_question(args.question)
    mappings = default_mappings(rb)
    if args.map is not None:
        try:
            text = Path(args.map).read_text(encoding="utf-8")
        except OSError as exc:
            raise DomainError(f"cannot read {args.map}: {exc.strerror or exc}")
        try:
            mappings.update(parse_mappings(text))
        except BadMapping as exc:
            raise DomainError(f"{args.map}: {exc}") from exc
    plan = compile_sql(rb, Query(pattern), mappings)
    payload = {
        "sql": plan.sql,
        "dialect": plan.dialect,
        "columns": list(plan.columns),
        "in_engine": sorted(p.text for p in plan.in_engine),
    }
    text = plan.sql
    if plan.in_engine:
        text += "\n\n-- evaluated in the engine, not in SQL:\n" + "\n".join(
            f"--   {p}" for p in sorted(x.text for x in plan.in_engine)
        )
    _emit(args, payload, text)
    return 0


def _cmd_ingest(args) -> int:
    workspace, _ = _load_workspace(args.config)
    file = Path(args.data)
    try:
        text = file.read_text(encoding="utf-8")
    except OSError as exc:
        raise DomainError(f"cannot read {args.data}: {exc.strerror or exc}")
    table_name = args.table or file.stem
    if file.suffix == ".nt" or args.triples:
        count = workspace.ingest_ntriples(
            args.id, table_name, text.split("\n")
        )
        entry = workspace.load(args.id)
        print(
            f"ingested {count} triple(s) into table {table_name!r} "
            f"of {args.id!r} (revision {entry.revision})"
        )
        return 0
    lines = [l for l in text.split("\n") if l.strip()]
    if args.heading is not None:
        heading, rows_from = args.heading, 0
    else:
        if not lines:
            raise DomainError(f"{args.data} is empty and no --heading was given")
        heading, rows_from = lines[0], 1
    rows = [line.split("\t") for line in lines[rows_from:]]
    table = workspace.ingest_rows(args.id, heading, rows, table_name)
    entry = workspace.load(args.id)
    print(
        f"table {table.name!r} of {args.id!r} now has {len(table.rows)} row(s) "
        f"(revision {entry.revision})"
    )
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    workspace, config = _load_workspace(args.config)
    port = args.port if args.port is not None else config.port
    ui_dir = Path(args.ui) if args.ui else None
    app = create_app(workspace, config.limits, ui_dir)
    uvicorn.run(app, host=args.host, port=port)
    return 0


def _parse_question(text: str):
    try:
        return parse_sentence(text)
    except ValueError as exc:
        raise DomainError(f"bad sentence: {exc}") from exc


# ---------------------------------------------------------------------------
# argument surface
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rulewiki",
        description="Executable-English rulebases: validate, ask, explain, "
        "compile to SQL, ingest data, serve the wiki.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, limits=False):
        p.add_argument(
            "--format", choices=("text", "json"), default="text",
            help="output format (default: text)",
        )
        if limits:
            p.add_argument(
                "--limits", type=_parse_limits, default=EngineLimits(),
                metavar="rounds=N,facts=M",
                help="evaluation ceilings",
            )

    p = sub.add_parser("validate", help="check a rulebase file")
    p.add_argument("rulebase", help="path to a rulebase file")
    common(p)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("ask", help="answer a question against a rulebase file")
    p.add_argument("rulebase")
    p.add_argument("question", help="sentence with some-/that- variables")
    common(p, limits=True)
    p.set_defaults(func=_cmd_ask)

    p = sub.add_parser(
        "explain", help="why a sentence holds — or why it does not"
    )
    p.add_argument("rulebase")
    p.add_argument("goal", help="the sentence to explain")
    common(p, limits=True)
    p.set_defaults(func=_cmd_explain)

    p = sub.add_parser("menu", help="browse question patterns by layer")
    p.add_argument("rulebase")
    p.add_argument("--search", metavar="TEXT", help="rank patterns against text")
    common(p)
    p.set_defaults(func=_cmd_menu)

    p = sub.add_parser("sql", help="compile a question to SQL")
    p.add_argument("rulebase")
    p.add_argument("question")
    p.add_argument("--map", metavar="FILE", help="relational mapping file")
    common(p)
    p.set_defaults(func=_cmd_sql)

    p = sub.add_parser("ingest", help="load rows or N-Triples into a workspace")
    p.add_argument("id", help="rulebase id inside the workspace")
    p.add_argument("data", help="data file (.nt for triples, else TSV)")
    p.add_argument("--table", help="stored table name (default: file stem)")
    p.add_argument("--heading", help="heading sentence for TSV rows")
    p.add_argument(
        "--triples", action="store_true",
        help="treat the file as N-Triples regardless of suffix",
    )
    p.add_argument("--config", metavar="FILE", help="workspace configuration")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--config", metavar="FILE", help="workspace configuration")
    p.add_argument("--port", type=int, help="override the configured port")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--ui", metavar="DIR", help="directory with built UI files")
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (
        ParseError,
        NotSafe,
        NotStratified,
        LimitExceeded,
        TypeMismatch,
        UnknownPredicate,
        UnmappedPredicate,
        UnsupportedInSql,
        UnknownRulebase,
        InvalidId,
        RevisionConflict,
        BadTriple,
        WidthMismatch,
    ) as exc:
        if isinstance(exc, NotSafe):
            print(exc.report.render(), file=sys.stderr)
        elif isinstance(exc, NotStratified):
            print(exc.stratification.render(), file=sys.stderr)
        else:
            print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
