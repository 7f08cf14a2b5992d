"""Compiling rulebases to portable SQL and running them against databases.

Every non-recursive, arithmetic-free predicate compiles to one statement in
a conservative ANSI-92 subset: a UNION of one SELECT DISTINCT per rule,
joins for shared variables, equality filters for inline constants, NOT
EXISTS for negated premises, and GROUP BY subqueries for aggregation.

Recursive predicates, rules using arithmetic (kept out of SQL so decimal
results stay exact), and everything depending on them run in the engine on
top of the fetched SQL results — that hybrid split is recorded in the plan.
"""

from __future__ import annotations

import re
import sqlite3
import time
from dataclasses import dataclass, field
from typing import Optional, Protocol

from .engine import (
    AnswerTable,
    EngineLimits,
    Query,
    relevant_predicates,
    solve,
    validate_for_query,
)
from .rulebook import (
    Aggregate,
    Builtin,
    FactTable,
    Negated,
    Positive,
    Rule,
    Rulebase,
    premise_variables,
    resolve,
)
from .sentences import (
    PredicateId,
    SentencePattern,
    Value,
    Variable,
    generalize,
    parse_sentence,
    skeleton_of,
)
from .validation import recursive_components


class UnmappedPredicate(ValueError):
    def __init__(self, predicate: PredicateId):
        super().__init__(
            f"no relational mapping for stored predicate {predicate.text!r}"
        )
        self.predicate = predicate


class UnsupportedInSql(ValueError):
    def __init__(self, op: str):
        super().__init__(f"{op!r} has no rendering in the ANSI-92 subset")
        self.op = op


class DbUnavailable(RuntimeError):
    def __init__(self, attempts: int, cause: Exception):
        super().__init__(
            f"database unavailable after {attempts} attempt(s): {cause}"
        )
        self.attempts = attempts
        self.cause = cause


class SchemaMismatch(ValueError):
    def __init__(
        self, relation: str, expected: tuple[str, ...], found: tuple[str, ...]
    ):
        missing = [c for c in expected if c not in found]
        super().__init__(
            f"relation {relation!r} is missing column(s) "
            f"{', '.join(repr(m) for m in missing)}: "
            f"expected {list(expected)}, found {list(found)}"
        )
        self.relation = relation
        self.expected = expected
        self.found = found


@dataclass(frozen=True)
class TableMapping:
    predicate: PredicateId
    relation: str
    columns: tuple[str, ...]  # one per hole, in hole order
    source: str = "embedded"  # or an external source name

    def __post_init__(self):
        if len(self.columns) != self.predicate.arity:
            raise ValueError(
                f"{len(self.columns)} columns mapped for arity "
                f"{self.predicate.arity} predicate {self.predicate.text!r}"
            )


@dataclass(frozen=True)
class Fetch:
    predicate: PredicateId
    sql: str
    columns: tuple[str, ...]  # result column names, in hole order


@dataclass(frozen=True)
class SqlPlan:
    query: Query
    fetches: tuple[Fetch, ...]
    in_engine: tuple[PredicateId, ...]  # evaluated by the engine, not SQL
    engine_rules: tuple[Rule, ...]
    mappings: tuple[TableMapping, ...]  # the mappings the fetches rely on
    columns: tuple[str, ...]  # answer columns = the query's variables
    dialect: str = "ansi-92"

    @property
    def sql(self) -> str:
        return ";\n\n".join(f.sql for f in self.fetches)


class DbClient(Protocol):
    def execute(
        self, sql: str
    ) -> tuple[tuple[str, ...], list[tuple[str, ...]]]:
        """Run one statement; return (column names, rows with text cells)."""


# ---------------------------------------------------------------------------
# mappings
# ---------------------------------------------------------------------------

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


def _ident(name: str) -> str:
    if _IDENT_RE.match(name):
        return name
    return '"' + name.replace('"', '""') + '"'


def _literal(text: str) -> str:
    return "'" + text.replace("'", "''") + "'"


def _slug(words: list[str]) -> str:
    cleaned = [re.sub(r"[^A-Za-z0-9]+", "", w).lower() for w in words]
    return "_".join(c for c in cleaned if c) or "facts"


def default_mappings(rb: Rulebase, source: str = "embedded") -> dict[PredicateId, TableMapping]:
    """One mapping per stored table: relation from the heading's words,
    columns from its variable names."""
    out: dict[PredicateId, TableMapping] = {}
    used: set[str] = set()
    for table in rb.tables:
        words = [w for w in table.predicate.skeleton if w is not None]
        base = _slug(words)
        relation = base
        n = 2
        while relation in used:
            relation = f"{base}_{n}"
            n += 1
        used.add(relation)
        columns = tuple(
            t.name.replace("-", "_")
            for t in table.heading.tokens
            if isinstance(t, Variable)
        )
        out[table.predicate] = TableMapping(
            predicate=table.predicate,
            relation=relation,
            columns=columns,
            source=source,
        )
    return out


class BadMapping(ValueError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


_MAPPING_KEYS = {"relation", "columns", "source"}


def parse_mappings(text: str) -> dict[PredicateId, TableMapping]:
    """Read a mapping file: one ``[map <heading sentence>]`` section per
    stored predicate, with ``relation``, comma-separated ``columns`` and an
    optional ``source`` name.  The section heading uses the same ``some-``
    variable syntax as the wiki itself.
    """
    out: dict[PredicateId, TableMapping] = {}
    heading_line = 0
    predicate: Optional[PredicateId] = None
    values: dict[str, str] = {}

    def flush():
        nonlocal predicate, values
        if predicate is not None:
            if "relation" not in values or "columns" not in values:
                raise BadMapping(
                    heading_line, "a mapping needs 'relation' and 'columns'"
                )
            columns = tuple(
                c.strip() for c in values["columns"].split(",") if c.strip()
            )
            try:
                out[predicate] = TableMapping(
                    predicate=predicate,
                    relation=values["relation"],
                    columns=columns,
                    source=values.get("source", "embedded"),
                )
            except ValueError as exc:
                raise BadMapping(heading_line, str(exc)) from None
        predicate = None
        values = {}

    for number, raw in enumerate(text.split("\n"), start=1):
        line = raw.strip()
        if not line or line.startswith(("#", ";")):
            continue
        if line.startswith("[") and line.endswith("]"):
            flush()
            header = line[1:-1].strip()
            if not header.startswith("map ") or not header[4:].strip():
                raise BadMapping(number, f"unknown section [{header}]")
            try:
                pattern = parse_sentence(header[4:].strip())
            except ValueError as exc:
                raise BadMapping(number, str(exc)) from None
            predicate = skeleton_of(pattern)
            heading_line = number
            continue
        if "=" not in line:
            raise BadMapping(number, f"expected 'key = value', got {line!r}")
        if predicate is None:
            raise BadMapping(number, "settings must follow a [map …] heading")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _MAPPING_KEYS:
            raise BadMapping(number, f"unknown mapping key {key!r}")
        values[key] = value.strip()
    flush()
    return out


# ---------------------------------------------------------------------------
# compilation
# ---------------------------------------------------------------------------


class _Compiler:
    def __init__(
        self,
        rb: Rulebase,
        mappings: dict[PredicateId, TableMapping],
        sql_side: set[PredicateId],
    ):
        self.rb = rb
        self.mappings = mappings
        self.sql_side = sql_side
        self.used: dict[PredicateId, TableMapping] = {}

    def predicate_sql(self, predicate: PredicateId) -> str:
        """The predicate's full extension: stored rows UNION one SELECT per rule."""
        branches = []
        if self.rb.table_for(predicate) is not None:
            branches.append(self.base_sql(predicate))
        for rule in self.rb.rules_for(predicate):
            branches.append(self.rule_sql(rule))
        if not branches:
            # defined by alignment only; nothing stores or concludes it
            raise UnmappedPredicate(predicate)
        return "\nUNION\n".join(branches)

    def base_sql(self, predicate: PredicateId) -> str:
        mapping = self.mappings.get(predicate)
        if mapping is None:
            raise UnmappedPredicate(predicate)
        self.used[predicate] = mapping
        cols = ", ".join(
            f"{_ident(c)} AS c{i}" for i, c in enumerate(mapping.columns, 1)
        )
        return f"SELECT DISTINCT {cols} FROM {_ident(mapping.relation)}"

    def _premise_relation(self, pattern: SentencePattern, alias: str) -> tuple[str, list[tuple[str, str]], list[str]]:
        """FROM item for one positive/negated premise.

        Returns (from_sql, slot sites, constant filters): sites pair each
        variable occurrence with its aliased column; filters pin inline
        values.  A premise that reads several predicates becomes a UNION
        subquery projecting the premise's own variable layout.
        """
        resolutions = resolve(self.rb, pattern)
        if not resolutions:
            # reads nothing: an empty relation with the right width
            names = pattern.variables
            cols = ", ".join(f"'' AS v{i}" for i in range(1, len(names) + 1))
            empty = (
                f"(SELECT {cols or '1 AS v0'} "
                f"FROM (SELECT 1 AS one) never WHERE 1 = 0) {alias}"
            )
            sites = [(name, f"{alias}.v{i}") for i, name in enumerate(names, 1)]
            return empty, sites, []

        if len(resolutions) == 1:
            predicate, alignment = resolutions[0]
            source = self._reference(predicate)
            sites: list[tuple[str, str]] = []
            filters: list[str] = []
            for i, slot in enumerate(alignment.slots, 1):
                column = f"{alias}.c{i}"
                if isinstance(slot, Value):
                    filters.append(f"{column} = {_literal(slot.text)}")
                else:
                    sites.append((slot, column))
            return f"{source} {alias}", sites, filters

        # several readable predicates: project each onto the premise variables
        names = pattern.variables
        branches = []
        for predicate, alignment in resolutions:
            projection = []
            where = []
            seen: dict[str, str] = {}
            for i, slot in enumerate(alignment.slots, 1):
                column = f"t.c{i}"
                if isinstance(slot, Value):
                    where.append(f"{column} = {_literal(slot.text)}")
                elif slot in seen:
                    where.append(f"{column} = {seen[slot]}")
                else:
                    seen[slot] = column
            for j, name in enumerate(names, 1):
                projection.append(f"{seen[name]} AS v{j}")
            sql = (
                f"SELECT DISTINCT {', '.join(projection)} "
                f"FROM {self._reference(predicate)} t"
            )
            if where:
                sql += " WHERE " + " AND ".join(where)
            branches.append(sql)
        union = "\nUNION\n".join(branches)
        sites = [(name, f"{alias}.v{i}") for i, name in enumerate(names, 1)]
        return f"({union}) {alias}", sites, []

    def _reference(self, predicate: PredicateId) -> str:
        """How a premise refers to a predicate: a relation or a subquery."""
        table = self.rb.table_for(predicate)
        has_rules = bool(self.rb.rules_for(predicate))
        if table is not None and not has_rules:
            return "(" + self.base_sql(predicate) + ")"
        return "(" + self.predicate_sql(predicate) + ")"

    def rule_sql(self, rule: Rule) -> str:
        if rule.premises and isinstance(rule.premises[-1], Aggregate):
            return self._aggregate_rule_sql(rule)
        return self._plain_rule_sql(rule)

    def _body_parts(
        self, premises
    ) -> tuple[list[str], list[str], dict[str, str]]:
        """FROM items, WHERE conditions, and variable sites for a body."""
        from_items: list[str] = []
        where: list[str] = []
        site: dict[str, str] = {}
        for index, premise in enumerate(premises, 1):
            alias = f"t{index}"
            if isinstance(premise, Positive):
                item, sites, filters = self._premise_relation(
                    premise.pattern, alias
                )
                from_items.append(item)
                where.extend(filters)
                for name, column in sites:
                    if name in site:
                        where.append(f"{column} = {site[name]}")
                    else:
                        site[name] = column
            elif isinstance(premise, Negated):
                where.append(self._not_exists(premise.pattern, alias, site))
            elif isinstance(premise, Builtin):
                raise UnsupportedInSql(premise.call.op)
            else:
                raise UnsupportedInSql("aggregate in mid-body")
        return from_items, where, site

    def _not_exists(
        self, pattern: SentencePattern, alias: str, site: dict[str, str]
    ) -> str:
        clauses = []
        for k, (predicate, alignment) in enumerate(resolve(self.rb, pattern)):
            inner_alias = f"{alias}n{k + 1}"
            conditions = []
            for i, slot in enumerate(alignment.slots, 1):
                column = f"{inner_alias}.c{i}"
                if isinstance(slot, Value):
                    conditions.append(f"{column} = {_literal(slot.text)}")
                else:
                    conditions.append(f"{column} = {site[slot]}")
            where = " AND ".join(conditions) or "1 = 1"
            clauses.append(
                "NOT EXISTS (SELECT 1 FROM "
                f"{self._reference(predicate)} {inner_alias} WHERE {where})"
            )
        if not clauses:
            return "1 = 1"  # negating the unreadable always holds
        return " AND ".join(clauses)

    def _projection(self, rule: Rule, site: dict[str, str]) -> str:
        parts = []
        i = 0
        for token in rule.conclusion.tokens:
            if isinstance(token, Variable):
                i += 1
                parts.append(f"{site[token.name]} AS c{i}")
        # a conclusion with no variables still needs one output column; its
        # rows collapse to "the sentence holds"
        return ", ".join(parts) or "1 AS c1"

    def _plain_rule_sql(self, rule: Rule) -> str:
        from_items, where, site = self._body_parts(rule.premises)
        if not from_items:
            raise UnsupportedInSql("rule without a positive premise")
        sql = (
            f"SELECT DISTINCT {self._projection(rule, site)}"
            f"\nFROM {', '.join(from_items)}"
        )
        if where:
            sql += "\nWHERE " + " AND ".join(where)
        return sql

    def _aggregate_rule_sql(self, rule: Rule) -> str:
        call = rule.premises[-1].call
        body = rule.premises[:-1]
        from_items, where, site = self._body_parts(body)
        if not from_items:
            raise UnsupportedInSql("aggregate over an empty body")
        body_vars: list[str] = []
        for premise in body:
            for name in premise_variables(premise):
                if name not in body_vars:
                    body_vars.append(name)
        inner_cols = ", ".join(
            f"{site[name]} AS {_var_col(name)}" for name in body_vars
        )
        inner = f"SELECT DISTINCT {inner_cols}\nFROM {', '.join(from_items)}"
        if where:
            inner += "\nWHERE " + " AND ".join(where)

        fn = {"sum": "SUM", "count": "COUNT", "max": "MAX", "min": "MIN"}[call.fn]
        if call.fn == "count":
            aggregate = "COUNT(*)"
        else:
            aggregate = f"{fn}(CAST(b.{_var_col(call.operand.name)} AS NUMERIC))"
        group_vars = [
            name
            for name in rule.conclusion.variables
            if name != call.output.name
        ]
        parts = []
        i = 0
        for token in rule.conclusion.tokens:
            if isinstance(token, Variable):
                i += 1
                if token.name == call.output.name:
                    parts.append(f"{aggregate} AS c{i}")
                else:
                    parts.append(f"b.{_var_col(token.name)} AS c{i}")
        sql = f"SELECT {', '.join(parts)}\nFROM (\n{inner}\n) b"
        if group_vars:
            sql += "\nGROUP BY " + ", ".join(
                f"b.{_var_col(name)}" for name in group_vars
            )
        return sql


def _var_col(name: str) -> str:
    return "v_" + re.sub(r"[^A-Za-z0-9]", "_", name)


def _uses_arithmetic(rule: Rule) -> bool:
    return any(isinstance(p, Builtin) for p in rule.premises)


def compile_sql(
    rb: Rulebase,
    q: Query,
    mappings: Optional[dict[PredicateId, TableMapping]] = None,
) -> SqlPlan:
    """Split the query between SQL and the engine and emit the statements.

    Recursive predicates and arithmetic-using rules (and everything that
    reads them) are marked in-engine; the rest of the reachable predicates
    become SQL fetches: stored relations directly, derived predicates as
    UNION-of-SELECT statements.  Without an explicit mapping every stored
    table is treated as an embedded relation named after its heading.
    """
    if mappings is None:
        mappings = default_mappings(rb)
    validate_for_query(rb)
    seeds = tuple(p for p, _ in resolve(rb, q.pattern))
    relevant = relevant_predicates(rb, seeds)

    in_engine: set[PredicateId] = set()
    for component in recursive_components(rb):
        in_engine.update(component & relevant)
    for rule in rb.rules:
        if rule.head in relevant and _uses_arithmetic(rule):
            in_engine.add(rule.head)
    # close upward: anything reading an in-engine predicate joins it
    changed = True
    while changed:
        changed = False
        for rule in rb.rules:
            if rule.head not in relevant or rule.head in in_engine:
                continue
            reads: set[PredicateId] = set()
            for premise in rule.premises:
                if isinstance(premise, (Positive, Negated)):
                    reads.update(p for p, _ in resolve(rb, premise.pattern))
            if reads & in_engine:
                in_engine.add(rule.head)
                changed = True

    sql_side = {p for p in relevant if p not in in_engine}
    compiler = _Compiler(rb, mappings, sql_side)

    engine_rules = tuple(
        r for r in rb.rules if r.head in in_engine and r.head in relevant
    )
    # what the engine part must read from SQL: sql-side premises of its
    # rules, the query itself, and stored rows of in-engine predicates
    frontier: list[PredicateId] = []

    def need(predicate: PredicateId):
        if predicate in sql_side and predicate not in frontier:
            frontier.append(predicate)

    for predicate in seeds:
        need(predicate)
    for rule in engine_rules:
        for premise in rule.premises:
            if isinstance(premise, (Positive, Negated)):
                for predicate, _ in resolve(rb, premise.pattern):
                    need(predicate)
    stored_in_engine: list[PredicateId] = []
    for predicate in in_engine:
        if rb.table_for(predicate) is not None:
            stored_in_engine.append(predicate)
    stored_in_engine.sort(key=lambda p: p.sort_key())

    fetches: list[Fetch] = []

    def columns_for(predicate: PredicateId) -> tuple[str, ...]:
        return tuple(f"c{i}" for i in range(1, predicate.arity + 1))

    for predicate in frontier:
        has_rules = bool(rb.rules_for(predicate))
        if has_rules:
            sql = compiler.predicate_sql(predicate)
        else:
            sql = compiler.base_sql(predicate)
        fetches.append(Fetch(predicate, sql, columns_for(predicate)))
    for predicate in stored_in_engine:
        fetches.append(
            Fetch(predicate, compiler.base_sql(predicate), columns_for(predicate))
        )

    return SqlPlan(
        query=q,
        fetches=tuple(fetches),
        in_engine=tuple(sorted(in_engine, key=lambda p: p.sort_key())),
        engine_rules=engine_rules,
        mappings=tuple(compiler.used.values()),
        columns=q.pattern.variables,
    )


# ---------------------------------------------------------------------------
# execution
# ---------------------------------------------------------------------------


class SqliteClient:
    """The embedded engine behind ``source = embedded`` mappings."""

    def __init__(self, connection: sqlite3.Connection):
        self.connection = connection

    def execute(self, sql: str) -> tuple[tuple[str, ...], list[tuple[str, ...]]]:
        cursor = self.connection.execute(sql)
        columns = tuple(d[0] for d in cursor.description or ())
        rows = [
            tuple("" if cell is None else str(cell) for cell in row)
            for row in cursor.fetchall()
        ]
        return columns, rows


def embedded_client(
    rb: Rulebase, mappings: dict[PredicateId, TableMapping]
) -> SqliteClient:
    """Materialize the rulebase's stored tables into in-memory SQLite."""
    connection = sqlite3.connect(":memory:")
    for table in rb.tables:
        mapping = mappings.get(table.predicate)
        if mapping is None:
            continue
        columns = ", ".join(f"{_ident(c)} TEXT" for c in mapping.columns)
        connection.execute(f"CREATE TABLE {_ident(mapping.relation)} ({columns})")
        placeholders = ", ".join("?" for _ in mapping.columns)
        connection.executemany(
            f"INSERT INTO {_ident(mapping.relation)} VALUES ({placeholders})",
            [tuple(v.text for v in row) for row in table.rows],
        )
    connection.commit()
    return SqliteClient(connection)


def _execute_with_retry(
    client: DbClient, sql: str, retries: int, backoff: float
) -> tuple[tuple[str, ...], list[tuple[str, ...]]]:
    attempts = 0
    while True:
        attempts += 1
        try:
            return client.execute(sql)
        except (SchemaMismatch, UnmappedPredicate):
            raise
        except Exception as exc:  # driver errors vary by client
            if attempts > retries:
                raise DbUnavailable(attempts, exc) from exc
            if backoff:
                time.sleep(backoff)


def verify_schema(
    client: DbClient,
    mappings,
    retries: int = 3,
    backoff: float = 0.0,
) -> None:
    """Check every mapped relation exposes its declared columns."""
    for mapping in mappings:
        columns, _ = _execute_with_retry(
            client,
            f"SELECT * FROM {_ident(mapping.relation)} WHERE 1 = 0",
            retries,
            backoff,
        )
        found = tuple(columns)
        if any(c not in found for c in mapping.columns):
            raise SchemaMismatch(mapping.relation, mapping.columns, found)


def run_hybrid(
    plan: SqlPlan,
    client: DbClient,
    limits: EngineLimits = EngineLimits(),
    retries: int = 3,
    backoff: float = 0.0,
) -> AnswerTable:
    """Fetch the SQL side, finish in the engine, return solve-equal answers."""
    verify_schema(client, plan.mappings, retries, backoff)
    tables: list[FactTable] = []
    fetched: set[PredicateId] = set()
    for fetch in plan.fetches:
        if fetch.predicate in fetched:
            continue
        fetched.add(fetch.predicate)
        _, rows = _execute_with_retry(client, fetch.sql, retries, backoff)
        if fetch.predicate.arity == 0:
            # SQL can't return zero columns; any row means "it holds"
            value_rows = ((),) if rows else ()
        else:
            value_rows = tuple(
                tuple(Value(cell) for cell in row) for row in rows
            )
        heading = generalize(fetch.predicate)
        tables.append(FactTable(heading=heading, rows=value_rows))
    reduced = Rulebase(rules=plan.engine_rules, tables=tuple(tables))
    return solve(reduced, plan.query, limits)
