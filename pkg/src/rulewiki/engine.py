"""Query evaluation under the declarative, stratified semantics.

Answers are the ground instances of the question pattern that hold in the
perfect model of the rulebase: strata are computed bottom-up, negation and
aggregation only ever look at completed lower strata, and the result is the
same for any textual ordering of the rules.

``solve`` is query-directed: it first restricts the rulebase to the
predicates reachable from the question, then runs a semi-naive fixpoint per
stratum.  Arithmetic can mint fresh values (quotients), so a rulebase is not
guaranteed finite; the round and fact limits turn potential divergence into
a reported error instead of a hang.

The independent test oracle lives in ``naive.py`` and must agree with
``solve`` wherever both complete.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal, localcontext
from typing import Iterator, Optional, Union

from .rulebook import (
    Aggregate,
    AggregateCall,
    Builtin,
    BuiltinCall,
    Negated,
    Positive,
    Premise,
    Rule,
    Rulebase,
    premise_variables,
    resolve,
)
from .sentences import (
    EMPTY_BINDING,
    Alignment,
    Binding,
    GroundFact,
    PredicateId,
    SentencePattern,
    Value,
    Variable,
    instantiate,
    render_partial,
    skeleton_of,
)
from .validation import (
    SafetyReport,
    Stratification,
    check_rulebase_safety,
    stratify,
)

ARITH_PRECISION = 50  # significant digits for quotients ("long fractions")


class NotSafe(ValueError):
    def __init__(self, report: SafetyReport):
        super().__init__("rulebase is not safe:\n" + report.render())
        self.report = report


class NotStratified(ValueError):
    def __init__(self, stratification: Stratification):
        super().__init__(
            "rulebase is not stratified:\n" + stratification.render()
        )
        self.stratification = stratification


class LimitExceeded(RuntimeError):
    def __init__(self, what: str, limit: int):
        super().__init__(f"evaluation exceeded {what} limit of {limit}")
        self.what = what
        self.limit = limit


class TypeMismatch(ValueError):
    pass


@dataclass(frozen=True)
class EngineLimits:
    max_fixpoint_rounds: int = 10_000
    max_derived_facts: int = 1_000_000

    def __post_init__(self):
        if self.max_fixpoint_rounds <= 0 or self.max_derived_facts <= 0:
            raise ValueError("engine limits must be positive")


@dataclass(frozen=True)
class Equals:
    value: Value


@dataclass(frozen=True)
class Range:
    minimum: Optional[Value] = None
    maximum: Optional[Value] = None


@dataclass(frozen=True)
class Approx:
    text: str
    max_distance: int = 2


Constraint = Union[Equals, Range, Approx]


@dataclass(frozen=True)
class Query:
    pattern: SentencePattern
    constraints: tuple[tuple[str, Constraint], ...] = ()


# ---------------------------------------------------------------------------
# provenance records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FactSupport:
    predicate: PredicateId
    args: tuple[Value, ...]

    @property
    def fact(self) -> GroundFact:
        return GroundFact(self.predicate, self.args)


@dataclass(frozen=True)
class BuiltinSupport:
    text: str  # the evaluated sentence, e.g. "600 / 1000 = 0.6"


@dataclass(frozen=True)
class NegationSupport:
    text: str  # "not : ..." rendered ground
    checked: tuple[FactSupport, ...]  # fact shapes verified absent
    goal: Optional[GroundFact] = None  # the absent instance, premise-worded


@dataclass(frozen=True)
class AggregateSupport:
    text: str  # aggregate sentence with the result filled in
    members: tuple[tuple["Support", ...], ...]  # supports per body solution


Support = Union[FactSupport, BuiltinSupport, NegationSupport, AggregateSupport]


@dataclass(frozen=True)
class Derivation:
    rule: Rule
    supports: tuple[Support, ...]  # one per premise, in premise order


# Extensions are kept as insertion-ordered dicts (args -> None) rather than
# sets so that evaluation order — and with it the recorded provenance — is
# identical across processes regardless of hash randomization.
FactSet = dict[tuple[Value, ...], None]


class Provenance:
    """The model computed by a solve, plus one justification per derived fact."""

    def __init__(self, rulebase: Rulebase):
        self.rulebase = rulebase
        self.facts: dict[PredicateId, FactSet] = {}
        self.derivations: dict[tuple[PredicateId, tuple[Value, ...]], Derivation] = {}
        self.diagnostics: list[str] = []

    def holds(self, predicate: PredicateId, args: tuple[Value, ...]) -> bool:
        return args in self.facts.get(predicate, ())

    def derivation_of(self, fact: GroundFact) -> Optional[Derivation]:
        return self.derivations.get((fact.predicate, fact.args))

    def table_row(self, fact: GroundFact) -> Optional[tuple[str, int]]:
        """(table display name, row index) when the fact is a stored row."""
        table = self.rulebase.table_for(fact.predicate)
        if table is None:
            return None
        for i, row in enumerate(table.rows):
            if row == fact.args:
                return (table.name or table.predicate.text, i)
        return None


@dataclass(frozen=True)
class AnswerTable:
    columns: tuple[str, ...]
    rows: tuple[tuple[Value, ...], ...]  # duplicate-free, sorted by text
    row_facts: tuple[GroundFact, ...]  # provenance handle per row
    provenance: Provenance
    diagnostics: tuple[str, ...] = ()

    def render(self) -> str:
        """Aligned text table; byte-stable for a given answer set."""
        if not self.rows:
            return "no answers"
        widths = [len(c) for c in self.columns]
        for row in self.rows:
            for i, v in enumerate(row):
                widths[i] = max(widths[i], len(v.text))
        header = " | ".join(c.ljust(w) for c, w in zip(self.columns, widths))
        sep = "-+-".join("-" * w for w in widths)
        body = [
            " | ".join(v.text.ljust(w) for v, w in zip(row, widths)).rstrip()
            for row in self.rows
        ]
        return "\n".join([header.rstrip(), sep] + body)


# ---------------------------------------------------------------------------
# builtins
# ---------------------------------------------------------------------------


def compare_values(a: Value, b: Value) -> int:
    """Numeric comparison when both sides are numerals, else lexicographic."""
    an, bn = a.numeric, b.numeric
    if an is not None and bn is not None:
        return -1 if an < bn else (1 if an > bn else 0)
    return -1 if a.text < b.text else (1 if a.text > b.text else 0)


def format_decimal(d: Decimal) -> str:
    """Plain (non-scientific) text for computed numbers."""
    text = format(d, "f")
    return text


def _numeric_input(call: BuiltinCall, operand, b: Binding) -> Decimal:
    value = operand if isinstance(operand, Value) else b[operand.name]
    n = value.numeric
    if n is None:
        raise TypeMismatch(
            f"{value.text!r} is not a number in {call.pattern.text!r}"
        )
    return n


def _operand_value(operand, b: Binding) -> Value:
    return operand if isinstance(operand, Value) else b[operand.name]


def eval_builtin(
    call: BuiltinCall, b: Binding, diagnostics: Optional[list[str]] = None
) -> Optional[Binding]:
    """Evaluate one arithmetic/comparison premise under a binding.

    Returns the (possibly extended) binding when the premise holds, None
    when it does not.  Division by zero fails the premise and records a
    diagnostic; a non-numeric arithmetic input raises TypeMismatch.
    """
    if call.op in ("lt", "le", "gt", "ge", "ne"):
        a = _operand_value(call.inputs[0], b)
        c = _operand_value(call.inputs[1], b)
        cmp = compare_values(a, c)
        ok = {
            "lt": cmp < 0,
            "le": cmp <= 0,
            "gt": cmp > 0,
            "ge": cmp >= 0,
            "ne": cmp != 0,
        }[call.op]
        return b if ok else None

    with localcontext() as ctx:
        ctx.prec = ARITH_PRECISION
        if call.op == "round":
            a = _numeric_input(call, call.inputs[0], b)
            places = _numeric_input(call, call.inputs[1], b)
            if places != places.to_integral_value() or places < 0:
                raise TypeMismatch(
                    f"{places} is not a whole number of places in "
                    f"{call.pattern.text!r}"
                )
            quantum = Decimal(1).scaleb(-int(places))
            result = a.quantize(quantum, rounding=ROUND_HALF_UP)
        else:
            a = _numeric_input(call, call.inputs[0], b)
            c = _numeric_input(call, call.inputs[1], b)
            if call.op == "add":
                result = a + c
            elif call.op == "sub":
                result = a - c
            elif call.op == "mul":
                result = a * c
            else:  # div
                if c == 0:
                    if diagnostics is not None:
                        diagnostics.append(
                            f"division by zero: {render_partial(call.pattern, b)}"
                        )
                    return None
                result = a / c

    value = Value(format_decimal(result))
    if call.output is not None:
        return b.extended(call.output.name, value)
    expected = call.expected
    if expected is None:
        return None
    if expected.is_numeric and value.is_numeric:
        return b if expected.numeric == value.numeric else None
    return b if expected == value else None


def render_builtin(call: BuiltinCall, b: Binding) -> str:
    return render_partial(call.pattern, b)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


class _Budget:
    def __init__(self, limits: EngineLimits):
        self.limits = limits
        self.rounds = 0
        self.facts = 0

    def spend_round(self):
        self.rounds += 1
        if self.rounds > self.limits.max_fixpoint_rounds:
            raise LimitExceeded("round", self.limits.max_fixpoint_rounds)

    def spend_fact(self):
        self.facts += 1
        if self.facts > self.limits.max_derived_facts:
            raise LimitExceeded("fact", self.limits.max_derived_facts)


@dataclass
class _CompiledPremise:
    premise: Premise
    resolutions: tuple[tuple[PredicateId, Alignment], ...] = ()


@dataclass
class _CompiledRule:
    rule: Rule
    premises: list[_CompiledPremise]
    conclusion_predicate: PredicateId


def _compile_rules(rb: Rulebase, rules) -> list[_CompiledRule]:
    compiled = []
    for rule in rules:
        premises = []
        for p in rule.premises:
            if isinstance(p, (Positive, Negated)):
                premises.append(_CompiledPremise(p, resolve(rb, p.pattern)))
            else:
                premises.append(_CompiledPremise(p))
        compiled.append(_CompiledRule(rule, premises, rule.head))
    return compiled


def relevant_predicates(
    rb: Rulebase, seeds: tuple[PredicateId, ...]
) -> set[PredicateId]:
    """Predicates reachable from the seeds through rule bodies."""
    relevant: set[PredicateId] = set()
    frontier = list(seeds)
    while frontier:
        pred = frontier.pop()
        if pred in relevant:
            continue
        relevant.add(pred)
        for rule in rb.rules_for(pred):
            for p in rule.premises:
                if isinstance(p, (Positive, Negated)):
                    for dep, _ in resolve(rb, p.pattern):
                        if dep not in relevant:
                            frontier.append(dep)
    return relevant


def _solutions(
    compiled: list[_CompiledPremise],
    prov: Provenance,
    budget: _Budget,
    delta_at: Optional[int] = None,
    delta: Optional[dict[PredicateId, FactSet]] = None,
) -> Iterator[tuple[Binding, list[Support]]]:
    """Left-to-right join over the premises.

    With ``delta_at`` set, that positive premise only reads facts from the
    last round's delta (the semi-naive restriction).
    """

    def walk(i: int, binding: Binding, supports: list[Support]):
        if i == len(compiled):
            yield binding, supports
            return
        cp = compiled[i]
        p = cp.premise
        if isinstance(p, Positive):
            for predicate, alignment in cp.resolutions:
                if i == delta_at:
                    source = delta.get(predicate, ()) if delta else ()
                else:
                    source = prov.facts.get(predicate, ())
                # snapshot: recursive rules extend this extension mid-join
                for args in list(source):
                    extended = alignment.read_args(args, binding)
                    if extended is not None:
                        yield from walk(
                            i + 1,
                            extended,
                            supports + [FactSupport(predicate, args)],
                        )
        elif isinstance(p, Negated):
            checked = []
            for predicate, alignment in cp.resolutions:
                args = alignment.ground_args(binding)
                if args is None:
                    return  # unsafe rulebases never get here
                if prov.holds(predicate, args):
                    return
                checked.append(FactSupport(predicate, args))
            text = "not : " + render_partial(p.pattern, binding)
            instance = instantiate(p.pattern, binding)
            yield from walk(
                i + 1,
                binding,
                supports + [NegationSupport(text, tuple(checked), instance)],
            )
        elif isinstance(p, Builtin):
            extended = eval_builtin(p.call, binding, prov.diagnostics)
            if extended is not None:
                yield from walk(
                    i + 1,
                    extended,
                    supports + [BuiltinSupport(render_builtin(p.call, extended))],
                )
        else:  # Aggregate premises are handled at rule level
            raise AssertionError("aggregate premise inside join")

    yield from walk(0, EMPTY_BINDING, [])


def _conclude(
    cr: _CompiledRule,
    binding: Binding,
    supports: list[Support],
    prov: Provenance,
    budget: _Budget,
    added: dict[PredicateId, FactSet],
) -> None:
    # conclusion args follow skeleton hole order (occurrence order, with
    # repeated variables filling several holes)
    ordered = []
    for tok in cr.rule.conclusion.tokens:
        if isinstance(tok, Variable):
            ordered.append(binding[tok.name])
    fact_args = tuple(ordered)
    known = prov.facts.setdefault(cr.conclusion_predicate, {})
    if fact_args in known:
        return
    budget.spend_fact()
    known[fact_args] = None
    added.setdefault(cr.conclusion_predicate, {})[fact_args] = None
    key = (cr.conclusion_predicate, fact_args)
    if key not in prov.derivations:
        prov.derivations[key] = Derivation(cr.rule, tuple(supports))


def _aggregate_solutions(
    cr: _CompiledRule, prov: Provenance, budget: _Budget
) -> Iterator[tuple[Binding, list[Support]]]:
    """Evaluate a rule whose last premise aggregates its body solutions."""
    call: AggregateCall = cr.premises[-1].premise.call
    body = cr.premises[:-1]
    body_vars: list[str] = []
    for cp in body:
        for name in premise_variables(cp.premise):
            if name not in body_vars:
                body_vars.append(name)
    # distinct body solutions, projected on every body variable
    projected: dict[tuple[Value, ...], tuple[Binding, list[Support]]] = {}
    for binding, supports in _solutions(body, prov, budget):
        key = tuple(binding[name] for name in body_vars)
        if key not in projected:
            projected[key] = (binding, supports)
    group_vars = [
        name for name in cr.rule.conclusion.variables if name != call.output.name
    ]
    groups: dict[tuple[Value, ...], list[tuple[Binding, list[Support]]]] = {}
    order: list[tuple[Value, ...]] = []
    for key in sorted(projected, key=lambda k: tuple(v.text for v in k)):
        binding, supports = projected[key]
        gkey = tuple(binding[name] for name in group_vars)
        if gkey not in groups:
            groups[gkey] = []
            order.append(gkey)
        groups[gkey].append((binding, supports))
    for gkey in order:
        members = groups[gkey]
        operand_values = [b[call.operand.name] for b, _ in members]
        if call.fn == "count":
            result = Value(str(len(members)))
        else:
            numbers = []
            for v in operand_values:
                if v.numeric is None:
                    raise TypeMismatch(
                        f"{v.text!r} is not a number under "
                        f"{call.pattern.text!r} in {cr.rule.label}"
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
        agg_binding = Binding(dict(zip(group_vars, gkey))).extended(
            call.output.name, result
        )
        if agg_binding is None:  # output value clashes with a group variable
            continue
        text = render_partial(call.pattern, agg_binding)
        support = AggregateSupport(text, tuple(tuple(s) for _, s in members))
        yield agg_binding, [support]


def _evaluate(
    rb: Rulebase,
    stratification: Stratification,
    relevant: set[PredicateId],
    limits: EngineLimits,
) -> Provenance:
    prov = Provenance(rb)
    budget = _Budget(limits)
    for table in rb.tables:
        if table.predicate in relevant:
            prov.facts[table.predicate] = dict.fromkeys(table.rows)
    rules = [r for r in rb.rules if r.head in relevant]
    compiled = _compile_rules(rb, rules)
    strata = sorted({stratification.stratum[r.conclusion_predicate] for r in compiled})
    for s in strata:
        here = [cr for cr in compiled if stratification.stratum[cr.conclusion_predicate] == s]
        agg_rules = [cr for cr in here if isinstance(cr.premises[-1].premise, Aggregate)]
        loop_rules = [cr for cr in here if cr not in agg_rules]
        # aggregate inputs live strictly below this stratum, so one pass is
        # complete
        budget.spend_round()
        added: dict[PredicateId, FactSet] = {}
        for cr in agg_rules:
            for binding, supports in _aggregate_solutions(cr, prov, budget):
                _conclude(cr, binding, supports, prov, budget, added)
        for cr in loop_rules:
            for binding, supports in _solutions(cr.premises, prov, budget):
                _conclude(cr, binding, supports, prov, budget, added)
        delta = added
        heads_here = {cr.conclusion_predicate for cr in loop_rules}
        while delta:
            budget.spend_round()
            added = {}
            for cr in loop_rules:
                for i, cp in enumerate(cr.premises):
                    if not isinstance(cp.premise, Positive):
                        continue
                    if not any(pred in delta for pred, _ in cp.resolutions):
                        continue
                    for binding, supports in _solutions(
                        cr.premises, prov, budget, delta_at=i, delta=delta
                    ):
                        _conclude(cr, binding, supports, prov, budget, added)
            delta = added
    return prov


def _passes(value: Value, constraint: Constraint) -> bool:
    if isinstance(constraint, Equals):
        return value == constraint.value
    if isinstance(constraint, Range):
        if constraint.minimum is not None and compare_values(value, constraint.minimum) < 0:
            return False
        if constraint.maximum is not None and compare_values(value, constraint.maximum) > 0:
            return False
        return True
    return levenshtein(value.text, constraint.text) <= constraint.max_distance


def satisfies(row: dict[str, Value], constraints) -> bool:
    return all(
        name in row and _passes(row[name], c) for name, c in constraints
    )


def levenshtein(a: str, b: str) -> int:
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            cost = 0 if ca == cb else 1
            current.append(
                min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + cost)
            )
        previous = current
    return previous[-1]


def _collect_answers(
    rb: Rulebase, q: Query, prov: Provenance
) -> AnswerTable:
    columns = q.pattern.variables
    rows: dict[tuple[Value, ...], GroundFact] = {}
    for predicate, alignment in resolve(rb, q.pattern):
        for args in prov.facts.get(predicate, ()):
            binding = alignment.read_args(args, EMPTY_BINDING)
            if binding is None:
                continue
            mapping = {name: binding[name] for name in columns}
            if not satisfies(mapping, q.constraints):
                continue
            row = tuple(mapping[name] for name in columns)
            rows.setdefault(row, GroundFact(predicate, args))
    ordered = sorted(rows, key=lambda r: tuple(v.text for v in r))
    return AnswerTable(
        columns=columns,
        rows=tuple(ordered),
        row_facts=tuple(rows[r] for r in ordered),
        provenance=prov,
        diagnostics=tuple(prov.diagnostics),
    )


def validate_for_query(rb: Rulebase) -> Stratification:
    """Raise NotSafe/NotStratified unless the rulebase may be queried."""
    report = check_rulebase_safety(rb)
    if not report.is_safe:
        raise NotSafe(report)
    stratification = stratify(rb)
    if not stratification.is_stratified:
        raise NotStratified(stratification)
    return stratification


def solve(
    rb: Rulebase, q: Query, limits: EngineLimits = EngineLimits()
) -> AnswerTable:
    """All ground instances of the question true in the perfect model.

    Query-directed: only predicates reachable from the question are
    evaluated.  Raises NotSafe/NotStratified for invalid rulebases and
    LimitExceeded when the round or fact caps are hit.
    """
    stratification = validate_for_query(rb)
    seeds = tuple(pred for pred, _ in resolve(rb, q.pattern))
    relevant = relevant_predicates(rb, seeds)
    prov = _evaluate(rb, stratification, relevant, limits)
    return _collect_answers(rb, q, prov)


def model_of(
    rb: Rulebase, limits: EngineLimits = EngineLimits()
) -> Provenance:
    """The full perfect model with provenance (used by the explainer)."""
    stratification = validate_for_query(rb)
    relevant = relevant_predicates(rb, rb.predicates())
    return _evaluate(rb, stratification, relevant, limits)
