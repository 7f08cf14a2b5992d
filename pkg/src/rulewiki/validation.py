"""Static checks on a rulebase: range restriction and stratification.

Safety: every conclusion variable must be bound inside the rule -- by a
plain (positive) premise, or as the output of an arithmetic or aggregate
premise.  Variables of a negated premise must be bound by an *earlier*
plain premise; arithmetic inputs must be bound before they are used.

Stratification: no predicate may depend on its own negation, directly or
through a chain of other rules.  Aggregation counts as negation here: a
total is only meaningful over a completed relation.  When a negation cycle
exists, the offending rules are reported instead of a stratum map.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .rulebook import (
    Aggregate,
    Builtin,
    Negated,
    Positive,
    Rule,
    Rulebase,
    resolve,
)
from .sentences import PredicateId, Variable


@dataclass(frozen=True)
class SafetyError:
    rule_label: str
    variable: str
    reason: str

    def render(self) -> str:
        return f"ERROR {self.rule_label} {self.variable} {self.reason}"


@dataclass(frozen=True)
class SafetyWarning:
    rule_label: str
    variable: str
    reason: str

    def render(self) -> str:
        return f"WARNING {self.rule_label} {self.variable} {self.reason}"


@dataclass(frozen=True)
class SafetyReport:
    errors: tuple[SafetyError, ...] = ()
    warnings: tuple[SafetyWarning, ...] = ()

    @property
    def is_safe(self) -> bool:
        return not self.errors

    def render(self) -> str:
        """One diagnostic per line, errors before warnings, stable order."""
        lines = [e.render() for e in self.errors]
        lines += [w.render() for w in self.warnings]
        return "\n".join(lines)

    def merged(self, other: "SafetyReport") -> "SafetyReport":
        return SafetyReport(
            self.errors + other.errors, self.warnings + other.warnings
        )


@dataclass(frozen=True)
class Stratification:
    stratum: dict[PredicateId, int] = field(default_factory=dict)
    cycle_witness: Optional[tuple[Rule, ...]] = None

    @property
    def is_stratified(self) -> bool:
        return self.cycle_witness is None

    def render(self) -> str:
        if self.cycle_witness is not None:
            lines = ["ERROR these rules make a conclusion depend on its own negation:"]
            for r in self.cycle_witness:
                lines.append(f"  {r.label} {r.conclusion.text}")
            return "\n".join(lines)
        lines = []
        for pred in sorted(self.stratum, key=lambda p: (self.stratum[p], p.sort_key())):
            lines.append(f"stratum {self.stratum[pred]}: {pred.text}")
        return "\n".join(lines)


def check_safety(rule: Rule) -> SafetyReport:
    """Range-restriction check for a single rule."""
    errors: list[SafetyError] = []
    warnings: list[SafetyWarning] = []

    positive_anywhere: set[str] = set()
    for p in rule.premises:
        if isinstance(p, Positive):
            positive_anywhere.update(p.pattern.variables)

    bound: set[str] = set()  # grows premise by premise
    outputs: set[str] = set()  # arithmetic/aggregate outputs
    for p in rule.premises:
        if isinstance(p, Positive):
            bound.update(p.pattern.variables)
        elif isinstance(p, Negated):
            for name in p.pattern.variables:
                if name not in bound:
                    errors.append(
                        SafetyError(
                            rule.label,
                            name,
                            "a negated sentence may only use variables "
                            "mentioned in earlier plain premises",
                        )
                    )
        elif isinstance(p, Builtin):
            for name in p.call.input_variables:
                if name not in bound:
                    errors.append(
                        SafetyError(
                            rule.label,
                            name,
                            "an arithmetic input must be bound by an earlier "
                            "plain premise or an earlier result",
                        )
                    )
            if p.call.output is not None:
                bound.add(p.call.output.name)
                outputs.add(p.call.output.name)
        elif isinstance(p, Aggregate):
            if p.call.operand.name not in bound:
                errors.append(
                    SafetyError(
                        rule.label,
                        p.call.operand.name,
                        "the aggregated variable must be bound by an earlier "
                        "plain premise",
                    )
                )
            bound.add(p.call.output.name)
            outputs.add(p.call.output.name)

    for name in rule.conclusion.variables:
        if name not in positive_anywhere and name not in outputs:
            errors.append(
                SafetyError(
                    rule.label,
                    name,
                    "a conclusion variable must appear in a plain premise "
                    "of the same rule (or be a computed result)",
                )
            )

    # style lint: that-x before any some-x in reading order
    introduced: set[str] = set()
    flagged: set[str] = set()
    patterns = [
        p.pattern if isinstance(p, (Positive, Negated)) else p.call.pattern
        for p in rule.premises
    ] + [rule.conclusion]
    for pattern in patterns:
        for tok in pattern.tokens:
            if isinstance(tok, Variable):
                if not tok.introduces and tok.name not in introduced:
                    if tok.name not in flagged:
                        warnings.append(
                            SafetyWarning(
                                rule.label,
                                tok.name,
                                f"that-{tok.name} appears before any "
                                f"some-{tok.name} in this rule",
                            )
                        )
                        flagged.add(tok.name)
                introduced.add(tok.name)
    return SafetyReport(tuple(errors), tuple(warnings))


def check_rulebase_safety(rb: Rulebase) -> SafetyReport:
    report = SafetyReport()
    for rule in rb.rules:
        report = report.merged(check_safety(rule))
    warnings = list(report.warnings)
    for rule in rb.rules:
        for p in rule.premises:
            if isinstance(p, (Positive, Negated)) and not resolve(rb, p.pattern):
                warnings.append(
                    SafetyWarning(
                        rule.label,
                        "-",
                        f"premise {p.pattern.text!r} matches no table heading "
                        "or rule conclusion, so it can never hold",
                    )
                )
    return SafetyReport(report.errors, tuple(warnings))


def dependency_edges(rb: Rulebase) -> list[tuple[PredicateId, PredicateId, bool, Rule]]:
    """Edges conclusion -> premise predicate; strict=True under negation or
    when the rule aggregates (its inputs must be complete)."""
    edges = []
    for rule in rb.rules:
        head = rule.head
        aggregating = any(isinstance(p, Aggregate) for p in rule.premises)
        for p in rule.premises:
            if isinstance(p, (Positive, Negated)):
                strict = aggregating or isinstance(p, Negated)
                for predicate, _ in resolve(rb, p.pattern):
                    edges.append((head, predicate, strict, rule))
    return edges


def stratify(rb: Rulebase) -> Stratification:
    """Least stratification, or the rules witnessing a negation cycle."""
    predicates = list(rb.predicates())
    edges = dependency_edges(rb)
    stratum = {p: 0 for p in predicates}
    # Bellman-Ford style relaxation; more than |predicates| raises means a
    # cycle through a strict edge.
    for _ in range(len(predicates) + 1):
        changed = False
        for head, dep, strict, _rule in edges:
            need = stratum[dep] + 1 if strict else stratum[dep]
            if stratum[head] < need:
                stratum[head] = need
                changed = True
        if not changed:
            return Stratification(stratum=stratum)

    witness = _cycle_rules(predicates, edges)
    return Stratification(cycle_witness=witness)


def _tarjan_sccs(
    predicates: list[PredicateId], adjacency: dict[PredicateId, set[PredicateId]]
) -> list[set[PredicateId]]:
    index: dict[PredicateId, int] = {}
    low: dict[PredicateId, int] = {}
    on_stack: set[PredicateId] = set()
    stack: list[PredicateId] = []
    sccs: list[set[PredicateId]] = []
    counter = [0]

    def neighbors(v: PredicateId):
        return iter(sorted(adjacency.get(v, ()), key=lambda p: p.sort_key()))

    def strongconnect(v: PredicateId):
        work = [(v, neighbors(v))]
        index[v] = low[v] = counter[0]
        counter[0] += 1
        stack.append(v)
        on_stack.add(v)
        while work:
            node, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter[0]
                    counter[0] += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, neighbors(w)))
                    advanced = True
                    break
                if w in on_stack:
                    low[node] = min(low[node], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                component = set()
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    component.add(w)
                    if w == node:
                        break
                sccs.append(component)

    for p in sorted(predicates, key=lambda q: q.sort_key()):
        if p not in index:
            strongconnect(p)
    return sccs


def _cycle_rules(predicates, edges) -> tuple[Rule, ...]:
    """Rules contributing an edge inside a strongly connected component that
    contains a strict edge."""
    adjacency: dict[PredicateId, set[PredicateId]] = {p: set() for p in predicates}
    for head, dep, _strict, _rule in edges:
        adjacency[head].add(dep)
    offending: list[Rule] = []
    for component in _tarjan_sccs(predicates, adjacency):
        has_strict = any(
            strict and head in component and dep in component
            for head, dep, strict, _ in edges
        )
        if not has_strict:
            continue
        for head, dep, _strict, rule in edges:
            if head in component and dep in component and rule not in offending:
                offending.append(rule)
    offending.sort(key=lambda r: r.rid)
    return tuple(offending)


def recursive_components(rb: Rulebase) -> list[set[PredicateId]]:
    """Strongly connected components that are genuinely recursive: more than
    one predicate, or a self-loop."""
    predicates = list(rb.predicates())
    edges = dependency_edges(rb)
    adjacency: dict[PredicateId, set[PredicateId]] = {p: set() for p in predicates}
    self_loop: set[PredicateId] = set()
    for head, dep, _strict, _rule in edges:
        adjacency[head].add(dep)
        if head == dep:
            self_loop.add(head)
    sccs = _tarjan_sccs(predicates, adjacency)
    return [c for c in sccs if len(c) > 1 or (len(c) == 1 and next(iter(c)) in self_loop)]
