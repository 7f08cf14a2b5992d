"""Brute-force reference evaluator (test oracle).

``solve_reference`` computes the same perfect model as ``engine.solve`` but
with a deliberately different strategy so that the two can cross-check each
other:

* no relevance restriction — the whole rulebase is evaluated;
* naive fixpoint — every rule is re-run against the full fact set each
  round, instead of semi-naive deltas;
* product-style joins — positive premises are enumerated one candidate fact
  at a time over the complete extensions, then arithmetic premises run in
  written order, then negations are checked, then the aggregate (if any) is
  applied.

It shares only the directly unit-tested primitives with the engine
(sentence alignment, builtin arithmetic, stratification) and none of the
evaluation machinery.  Intended for desk-scale rulebases only.
"""

from __future__ import annotations

from decimal import Decimal, localcontext
from typing import Optional

from .engine import (
    ARITH_PRECISION,
    AnswerTable,
    EngineLimits,
    LimitExceeded,
    Provenance,
    Query,
    TypeMismatch,
    eval_builtin,
    format_decimal,
    satisfies,
    validate_for_query,
)
from .rulebook import (
    Aggregate,
    Builtin,
    Negated,
    Positive,
    Rule,
    Rulebase,
    premise_variables,
    resolve,
)
from .sentences import (
    EMPTY_BINDING,
    Binding,
    GroundFact,
    PredicateId,
    Value,
    Variable,
)

Facts = dict[PredicateId, set[tuple[Value, ...]]]


def _positive_bindings(
    rb: Rulebase, rule: Rule, facts: Facts
) -> list[Binding]:
    """All bindings satisfying the rule's positive premises.

    Enumerated premise by premise over the *complete* extensions — a plain
    nested product with merge-on-conflict, no deltas and no reordering.
    """
    partial = [EMPTY_BINDING]
    for premise in rule.premises:
        if not isinstance(premise, Positive):
            continue
        nxt: list[Binding] = []
        for binding in partial:
            for predicate, alignment in resolve(rb, premise.pattern):
                for args in facts.get(predicate, ()):
                    extended = alignment.read_args(args, binding)
                    if extended is not None:
                        nxt.append(extended)
        partial = nxt
        if not partial:
            break
    return partial


def _apply_builtins(
    rule: Rule, bindings: list[Binding], diagnostics: list[str]
) -> list[Binding]:
    out = bindings
    for premise in rule.premises:
        if not isinstance(premise, Builtin):
            continue
        nxt = []
        for binding in out:
            extended = eval_builtin(premise.call, binding, diagnostics)
            if extended is not None:
                nxt.append(extended)
        out = nxt
    return out


def _passes_negations(
    rb: Rulebase, rule: Rule, binding: Binding, facts: Facts
) -> bool:
    for premise in rule.premises:
        if not isinstance(premise, Negated):
            continue
        for predicate, alignment in resolve(rb, premise.pattern):
            args = alignment.ground_args(binding)
            if args is None or args in facts.get(predicate, ()):
                return False
    return True


def _body_bindings(
    rb: Rulebase, rule: Rule, facts: Facts, diagnostics: list[str]
) -> list[Binding]:
    bindings = _positive_bindings(rb, rule, facts)
    bindings = _apply_builtins(rule, bindings, diagnostics)
    return [
        b for b in bindings if _passes_negations(rb, rule, b, facts)
    ]


def _aggregate_bindings(
    rb: Rulebase, rule: Rule, facts: Facts, diagnostics: list[str]
) -> list[Binding]:
    call = rule.premises[-1].call
    body = Rule(
        premises=rule.premises[:-1],
        conclusion=rule.conclusion,
        line_start=rule.line_start,
        line_end=rule.line_end,
        rid=rule.rid,
    )
    body_vars: list[str] = []
    for premise in body.premises:
        for name in premise_variables(premise):
            if name not in body_vars:
                body_vars.append(name)
    distinct = {
        tuple(b[name] for name in body_vars): b
        for b in _body_bindings(rb, body, facts, diagnostics)
    }
    group_vars = [
        name for name in rule.conclusion.variables if name != call.output.name
    ]
    groups: dict[tuple[Value, ...], list[Binding]] = {}
    for key in distinct:
        binding = distinct[key]
        gkey = tuple(binding[name] for name in group_vars)
        groups.setdefault(gkey, []).append(binding)
    out: list[Binding] = []
    for gkey, members in groups.items():
        operands = [b[call.operand.name] for b in members]
        if call.fn == "count":
            result = Value(str(len(operands)))
        else:
            numbers = []
            for v in operands:
                if v.numeric is None:
                    raise TypeMismatch(
                        f"{v.text!r} is not a number under "
                        f"{call.pattern.text!r} in {rule.label}"
                    )
                numbers.append(v.numeric)
            with localcontext() as ctx:
                ctx.prec = ARITH_PRECISION
                if call.fn == "sum":
                    total = sum(numbers, Decimal(0))
                elif call.fn == "max":
                    total = max(numbers)
                else:
                    total = min(numbers)
            result = Value(format_decimal(total))
        extended = Binding(dict(zip(group_vars, gkey))).extended(
            call.output.name, result
        )
        if extended is not None:
            out.append(extended)
    return out


def _conclusion_args(rule: Rule, binding: Binding) -> tuple[Value, ...]:
    return tuple(
        binding[tok.name]
        for tok in rule.conclusion.tokens
        if isinstance(tok, Variable)
    )


def solve_reference(
    rb: Rulebase, q: Query, limits: EngineLimits = EngineLimits()
) -> AnswerTable:
    """Same answers as ``solve``, computed the slow and obvious way."""
    stratification = validate_for_query(rb)
    diagnostics: list[str] = []
    facts: Facts = {}
    total = 0
    for table in rb.tables:
        facts[table.predicate] = set(table.rows)
        total += len(table.rows)
    strata = sorted(set(stratification.stratum.values()))
    rounds = 0
    for s in strata:
        here = [
            rule
            for rule in rb.rules
            if stratification.stratum[rule.head] == s
        ]
        changed = True
        while changed:
            rounds += 1
            if rounds > limits.max_fixpoint_rounds:
                raise LimitExceeded("round", limits.max_fixpoint_rounds)
            changed = False
            for rule in here:
                if rule.premises and isinstance(rule.premises[-1], Aggregate):
                    bindings = _aggregate_bindings(rb, rule, facts, diagnostics)
                else:
                    bindings = _body_bindings(rb, rule, facts, diagnostics)
                known = facts.setdefault(rule.head, set())
                for binding in bindings:
                    args = _conclusion_args(rule, binding)
                    if args not in known:
                        total += 1
                        if total > limits.max_derived_facts:
                            raise LimitExceeded(
                                "fact", limits.max_derived_facts
                            )
                        known.add(args)
                        changed = True
    prov = Provenance(rb)
    prov.facts = {p: dict.fromkeys(s) for p, s in facts.items()}
    prov.diagnostics = diagnostics
    columns = q.pattern.variables
    rows: dict[tuple[Value, ...], GroundFact] = {}
    for predicate, alignment in resolve(rb, q.pattern):
        for args in facts.get(predicate, ()):
            binding = alignment.read_args(args, EMPTY_BINDING)
            if binding is None:
                continue
            mapping = {name: binding[name] for name in columns}
            if not satisfies(mapping, q.constraints):
                continue
            rows.setdefault(
                tuple(mapping[name] for name in columns),
                GroundFact(predicate, args),
            )
    ordered = sorted(rows, key=lambda r: tuple(v.text for v in r))
    return AnswerTable(
        columns=columns,
        rows=tuple(ordered),
        row_facts=tuple(rows[r] for r in ordered),
        provenance=prov,
        diagnostics=tuple(diagnostics),
    )
