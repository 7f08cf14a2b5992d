"""Step-by-step English explanations of answers and of missing answers.

An answer is explained by its proof tree: each step shows the premises that
fired a rule, a horizontal line, and the concluded sentence — all in the
rulebase's own English.  Steps are content-addressed so a client can drill
down into any premise without the server materializing the whole tree.

A missing answer is explained per rule: the longest prefix of premises that
can still be satisfied is shown normally, the rest are marked "[missing]",
and the conclusion is marked "[not shown]".
"""

from __future__ import annotations

import hashlib
import html as _html
from dataclasses import dataclass
from typing import Optional, Union

from .engine import (
    AggregateSupport,
    BuiltinSupport,
    EngineLimits,
    FactSupport,
    NegationSupport,
    Provenance,
    _aggregate_solutions,
    _Budget,
    _compile_rules,
    eval_builtin,
    model_of,
)
from .rulebook import (
    Aggregate,
    Builtin,
    Negated,
    Positive,
    Rule,
    Rulebase,
    resolve,
)
from .sentences import (
    EMPTY_BINDING,
    Binding,
    Constant,
    GroundFact,
    SentencePattern,
    Value,
    Variable,
    align,
    render_partial,
)

DEFAULT_FAILURE_BUDGET = 10_000


class NotDerivable(ValueError):
    def __init__(self, fact: GroundFact):
        super().__init__(f"{fact.text!r} does not hold in this rulebase")
        self.fact = fact


class UnknownPredicate(ValueError):
    def __init__(self, pattern: SentencePattern):
        super().__init__(
            f"nothing in the rulebase defines a sentence like {pattern.text!r}"
        )
        self.pattern = pattern


class UnknownNode(KeyError):
    def __init__(self, node_id: str):
        super().__init__(node_id)
        self.node_id = node_id


# ---------------------------------------------------------------------------
# node shapes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RuleStep:
    rule: Rule
    children: tuple["ProofNode", ...]  # one per premise, in premise order


@dataclass(frozen=True)
class TableRow:
    table: str
    row: int


@dataclass(frozen=True)
class BuiltinStep:
    text: str  # the evaluated sentence, e.g. "600 / 1000 = 0.6"


@dataclass(frozen=True)
class NegationCheck:
    text: str  # "not : …", rendered ground
    failure: Optional["FailureNode"] = None


Kind = Union[RuleStep, TableRow, BuiltinStep, NegationCheck]


@dataclass(frozen=True)
class ProofNode:
    text: str  # rendered English for this step
    kind: Kind
    node_id: str
    conclusion: Optional[GroundFact] = None  # set for rule steps and table rows


@dataclass(frozen=True)
class FailureAttempt:
    rule: Rule
    satisfied: tuple[str, ...]  # rendered premises, in premise order …
    missing: tuple[str, ...]  # … satisfied first, then the missing tail
    conclusion: str  # the conclusion under the best binding found
    note: str = "not shown"


@dataclass(frozen=True)
class FailureNode:
    goal: SentencePattern
    attempts: tuple[FailureAttempt, ...]


def _node_id(parts: tuple[str, ...]) -> str:
    return hashlib.sha256("\x1f".join(parts).encode()).hexdigest()[:16]


def _premise_text(premise, binding: Binding) -> str:
    if isinstance(premise, Negated):
        return "not : " + render_partial(premise.pattern, binding)
    if isinstance(premise, (Builtin, Aggregate)):
        return render_partial(premise.call.pattern, binding)
    return render_partial(premise.pattern, binding)


# ---------------------------------------------------------------------------
# the explainer
# ---------------------------------------------------------------------------


class Explainer:
    """Builds proof trees and failure explanations over one computed model.

    Construction evaluates the rulebase once; after that all methods are
    read-only, so one instance may serve concurrent requests.
    """

    def __init__(self, rb: Rulebase, limits: EngineLimits = EngineLimits()):
        self.rulebase = rb
        self.provenance: Provenance = model_of(rb, limits)
        self._nodes: dict[str, ProofNode] = {}
        self._by_fact: dict[tuple, ProofNode] = {}
        self._fact_index: Optional[dict[str, GroundFact]] = None

    # -- proofs ------------------------------------------------------------

    def explain(self, fact: GroundFact) -> ProofNode:
        if not self.provenance.holds(fact.predicate, fact.args):
            raise NotDerivable(fact)
        return self._node_for(fact)

    def matching_facts(self, goal: SentencePattern) -> list[GroundFact]:
        """Model facts the goal sentence reads, in text order.

        A ground goal matches at most the fact it spells out; a goal with
        variables matches every answer it would have as a question.  Goals
        whose multi-word values hide the predicate are re-fitted first.
        """
        out = []
        seen = set()
        for candidate in refit(self.rulebase, goal):
            for predicate, alignment in resolve(self.rulebase, candidate):
                for args in self.provenance.facts.get(predicate, ()):
                    if alignment.read_args(args, EMPTY_BINDING) is not None:
                        fact = GroundFact(predicate, args)
                        if (predicate, args) not in seen:
                            seen.add((predicate, args))
                            out.append(fact)
        out.sort(key=lambda f: f.sort_key())
        return out

    def node(self, node_id: str) -> ProofNode:
        """Fetch any step by its content hash, building only its subtree."""
        found = self._nodes.get(node_id)
        if found is not None:
            return found
        if self._fact_index is None:
            index: dict[str, GroundFact] = {}
            for predicate, extension in self.provenance.facts.items():
                for args in extension:
                    f = GroundFact(predicate, args)
                    index[self._fact_node_id(f)] = f
            self._fact_index = index
        fact = self._fact_index.get(node_id)
        if fact is None:
            raise UnknownNode(node_id)
        self._node_for(fact)
        return self._nodes[node_id]

    def _fact_node_id(self, fact: GroundFact) -> str:
        row = self.provenance.table_row(fact)
        texts = tuple(v.text for v in fact.args)
        if row is not None:
            return _node_id(("table", row[0], fact.predicate.text) + texts)
        derivation = self.provenance.derivation_of(fact)
        rid = str(derivation.rule.rid) if derivation else "?"
        return _node_id(("rule", rid, fact.predicate.text) + texts)

    def _register(self, node: ProofNode) -> ProofNode:
        self._nodes.setdefault(node.node_id, node)
        return node

    def _node_for(self, fact: GroundFact) -> ProofNode:
        key = (fact.predicate, fact.args)
        cached = self._by_fact.get(key)
        if cached is not None:
            return cached
        row = self.provenance.table_row(fact)
        if row is not None:
            node = ProofNode(
                text=fact.text,
                kind=TableRow(table=row[0], row=row[1]),
                node_id=self._fact_node_id(fact),
                conclusion=fact,
            )
        else:
            derivation = self.provenance.derivation_of(fact)
            if derivation is None:
                raise NotDerivable(fact)
            children = self._children_of(derivation)
            node = ProofNode(
                text=fact.text,
                kind=RuleStep(rule=derivation.rule, children=children),
                node_id=self._fact_node_id(fact),
                conclusion=fact,
            )
        self._by_fact[key] = node
        return self._register(node)

    def _children_of(self, derivation) -> tuple[ProofNode, ...]:
        supports = derivation.supports
        if len(supports) == 1 and isinstance(supports[0], AggregateSupport):
            # an aggregate rule carries one support for the whole body: every
            # contributing solution premise by premise (shared premises shown
            # once), then the aggregate sentence itself as an evaluated step
            agg = supports[0]
            flattened: list = []
            seen_keys: set = set()
            for member in agg.members:
                for support in member:
                    key = (
                        ("fact", support.fact)
                        if isinstance(support, FactSupport)
                        else (type(support).__name__, support.text)
                    )
                    if key not in seen_keys:
                        seen_keys.add(key)
                        flattened.append(support)
            supports = tuple(flattened) + (agg,)
        children = []
        for support in supports:
            if isinstance(support, FactSupport):
                children.append(self._node_for(support.fact))
            elif isinstance(support, BuiltinSupport):
                children.append(
                    self._register(
                        ProofNode(
                            text=support.text,
                            kind=BuiltinStep(support.text),
                            node_id=_node_id(("builtin", support.text)),
                        )
                    )
                )
            elif isinstance(support, NegationSupport):
                children.append(
                    self._register(
                        ProofNode(
                            text=support.text,
                            kind=NegationCheck(
                                support.text,
                                self._negation_failure(support),
                            ),
                            node_id=_node_id(("not", support.text)),
                        )
                    )
                )
            else:  # AggregateSupport
                children.append(
                    self._register(
                        ProofNode(
                            text=support.text,
                            kind=BuiltinStep(support.text),
                            node_id=_node_id(("aggregate", support.text)),
                        )
                    )
                )
        return tuple(children)

    def _negation_failure(self, support: NegationSupport) -> Optional[FailureNode]:
        if support.goal is None:
            return None
        try:
            return self.explain_failure(support.goal.sentence)
        except (UnknownPredicate, ValueError):
            return None

    # -- failures ----------------------------------------------------------

    def explain_failure(
        self,
        goal: Union[SentencePattern, GroundFact],
        budget: int = DEFAULT_FAILURE_BUDGET,
    ) -> FailureNode:
        pattern = goal.sentence if isinstance(goal, GroundFact) else goal
        candidates = refit(self.rulebase, pattern)
        if not candidates:
            raise UnknownPredicate(pattern)
        if any(self.matching_facts(c) for c in candidates):
            raise ValueError(
                f"{render_partial(pattern, EMPTY_BINDING)!r} holds; "
                "it has a proof, not a failure explanation"
            )
        pattern = candidates[0]
        resolutions = resolve(self.rulebase, pattern)
        heads = {predicate for predicate, _ in resolutions}
        remaining = [budget]
        attempts = []
        for rule in self.rulebase.rules:
            if rule.head not in heads:
                continue
            pinned = self._pin(pattern, rule)
            if pinned is None:
                continue  # this rule can never conclude the goal
            attempts.append(self._attempt(rule, pinned, remaining))
        return FailureNode(goal=pattern, attempts=tuple(attempts))

    def _pin(self, goal: SentencePattern, rule: Rule) -> Optional[Binding]:
        """Bind the rule's conclusion variables to the goal's inline values."""
        alignment = align(goal, rule.head)
        if alignment is None:
            return None
        binding: Optional[Binding] = EMPTY_BINDING
        holes = [t for t in rule.conclusion.tokens if isinstance(t, Variable)]
        for var, slot in zip(holes, alignment.slots):
            if isinstance(slot, Value):
                binding = binding.extended(var.name, slot)
                if binding is None:
                    return None
        return binding

    def _attempt(
        self, rule: Rule, pinned: Binding, remaining: list[int]
    ) -> FailureAttempt:
        """Longest satisfiable premise prefix under the pinned binding.

        Breadth-first over premises: level k holds every binding satisfying
        the first k premises, deduplicated, until a level is empty or the
        exploration budget runs out.  The reported binding is the smallest
        of the deepest level, compared on value text.
        """
        levels = [pinned]
        satisfied = 0
        for i, premise in enumerate(rule.premises):
            nxt: dict[tuple, Binding] = {}

            def keep(binding: Binding) -> bool:
                key = tuple(sorted((n, v.text) for n, v in binding.items()))
                if key not in nxt:
                    nxt[key] = binding
                    remaining[0] -= 1
                return remaining[0] > 0

            exhausted = not self._extend(premise, rule, levels, keep)
            if not nxt:
                break
            satisfied = i + 1
            levels = list(nxt.values())
            if exhausted:
                break
        best = min(
            levels,
            key=lambda b: tuple(sorted((n, v.text) for n, v in b.items())),
        )
        rendered = [_premise_text(p, best) for p in rule.premises]
        return FailureAttempt(
            rule=rule,
            satisfied=tuple(rendered[:satisfied]),
            missing=tuple(rendered[satisfied:]),
            conclusion=render_partial(rule.conclusion, best),
        )

    def _extend(self, premise, rule: Rule, levels, keep) -> bool:
        """Feed extensions of ``levels`` through ``keep``; False when the
        budget runs out mid-way."""
        facts = self.provenance.facts
        if isinstance(premise, Positive):
            resolutions = resolve(self.rulebase, premise.pattern)
            for binding in levels:
                for predicate, alignment in resolutions:
                    for args in facts.get(predicate, ()):
                        extended = alignment.read_args(args, binding)
                        if extended is not None and not keep(extended):
                            return False
        elif isinstance(premise, Negated):
            resolutions = resolve(self.rulebase, premise.pattern)
            for binding in levels:
                absent = True
                for predicate, alignment in resolutions:
                    args = alignment.ground_args(binding)
                    if args is None or args in facts.get(predicate, ()):
                        absent = False
                        break
                if absent and not keep(binding):
                    return False
        elif isinstance(premise, Builtin):
            for binding in levels:
                extended = eval_builtin(premise.call, binding)
                if extended is not None and not keep(extended):
                    return False
        else:  # Aggregate: merge the rule's aggregate results over the model
            for result in self._aggregate_results(rule):
                for binding in levels:
                    merged = binding.merged(result)
                    if merged is not None and not keep(merged):
                        return False
        return True

    def _aggregate_results(self, rule: Rule) -> list[Binding]:
        compiled = _compile_rules(self.rulebase, [rule])[0]
        budget = _Budget(EngineLimits())
        return [
            binding
            for binding, _ in _aggregate_solutions(
                compiled, self.provenance, budget
            )
        ]


# ---------------------------------------------------------------------------
# goal re-fitting
# ---------------------------------------------------------------------------


def refit(rb: Rulebase, pattern: SentencePattern) -> list[SentencePattern]:
    """Re-segment a sentence whose multi-word values hide its predicate.

    Whitespace cannot show where a value like a paper title ends: spelled
    out in full, the sentence has more words than the predicate has slots.
    When a goal matches no predicate as written, this retries every defined
    predicate, letting each hole absorb one or more consecutive words.  A
    goal that already matches is returned unchanged; otherwise the fitted
    variants come back in predicate order (possibly none).
    """
    if resolve(rb, pattern):
        return [pattern]
    out = []
    seen = set()
    for predicate in sorted(rb.predicates(), key=lambda p: p.sort_key()):
        fitted = _fit(pattern.tokens, predicate.skeleton)
        if fitted is not None and fitted.text not in seen:
            seen.add(fitted.text)
            out.append(fitted)
    return out


def _fit(tokens: tuple, skeleton: tuple) -> Optional[SentencePattern]:
    """Segment goal tokens against a skeleton; None when they cannot line up.

    Fixed skeleton words must appear verbatim; a hole takes one variable or
    a run of one-or-more words (joined into a single value).  Runs are tried
    shortest-first, so of several segmentations the leftmost-shortest wins.
    """

    def fit_from(i: int, j: int) -> Optional[list]:
        if j == len(skeleton):
            return [] if i == len(tokens) else None
        if i == len(tokens):
            return None
        word = skeleton[j]
        token = tokens[i]
        if word is not None:
            if isinstance(token, Constant) and token.text == word:
                rest = fit_from(i + 1, j + 1)
                if rest is not None:
                    return [token] + rest
            return None
        if isinstance(token, Variable):
            rest = fit_from(i + 1, j + 1)
            return None if rest is None else [token] + rest
        for end in range(i + 1, len(tokens) + 1):
            if end > i + 1 and isinstance(tokens[end - 1], Variable):
                break
            rest = fit_from(end, j + 1)
            if rest is not None:
                joined = " ".join(t.text for t in tokens[i:end])
                return [Constant(joined)] + rest
        return None

    fitted = fit_from(0, 0)
    return None if fitted is None else SentencePattern(tuple(fitted))


# ---------------------------------------------------------------------------
# module-level conveniences
# ---------------------------------------------------------------------------


def explain(
    rb: Rulebase, fact: GroundFact, limits: EngineLimits = EngineLimits()
) -> ProofNode:
    return Explainer(rb, limits).explain(fact)


def explain_failure(
    rb: Rulebase,
    goal: Union[SentencePattern, GroundFact],
    budget: int = DEFAULT_FAILURE_BUDGET,
    limits: EngineLimits = EngineLimits(),
) -> FailureNode:
    return Explainer(rb, limits).explain_failure(goal, budget)


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------


def _render_proof_text(node: ProofNode) -> str:
    if not isinstance(node.kind, RuleStep):
        return node.text
    lines = [child.text for child in node.kind.children]
    lines.append("---")
    lines.append(node.text)
    return "\n".join(lines)


def _render_failure_text(node: FailureNode) -> str:
    goal_line = render_partial(node.goal, EMPTY_BINDING) + " [not shown]"
    if not node.attempts:
        return goal_line
    blocks = []
    for attempt in node.attempts:
        lines = list(attempt.satisfied)
        lines.extend(line + " [missing]" for line in attempt.missing)
        lines.append("---")
        lines.append(f"{attempt.conclusion} [{attempt.note}]")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks)


def _render_proof_html(node: ProofNode) -> str:
    text = _html.escape(node.text)
    if not isinstance(node.kind, RuleStep):
        css = {
            TableRow: "table-row",
            BuiltinStep: "builtin",
            NegationCheck: "negation",
        }[type(node.kind)]
        return f'<div id="pf-{node.node_id}" class="proof-leaf {css}">{text}</div>'
    children = "\n".join(
        _render_proof_html(child) for child in node.kind.children
    )
    return (
        f'<details id="pf-{node.node_id}" class="proof-step" open>'
        f"<summary>{text}</summary>\n"
        f'<div class="premises">\n{children}\n</div>'
        f"</details>"
    )


def _render_failure_html(node: FailureNode) -> str:
    goal = _html.escape(render_partial(node.goal, EMPTY_BINDING))
    parts = [f'<section class="failure"><p class="goal">{goal} '
             f'<em>[not shown]</em></p>']
    for attempt in node.attempts:
        lines = [
            f'<li class="satisfied">{_html.escape(s)}</li>'
            for s in attempt.satisfied
        ]
        lines.extend(
            f'<li class="missing">{_html.escape(m)} <em>[missing]</em></li>'
            for m in attempt.missing
        )
        items = "\n".join(lines)
        parts.append(
            f'<div class="attempt" data-rule="{attempt.rule.label}">'
        )
        parts.append(f"<ul>\n{items}\n</ul>")
        parts.append(
            f'<p class="conclusion">{_html.escape(attempt.conclusion)} '
            f"<em>[{attempt.note}]</em></p></div>"
        )
    parts.append("</section>")
    return "\n".join(parts)


def render(node: Union[ProofNode, FailureNode], format: str = "text") -> str:
    """One proof step (premises, a ``---`` line, conclusion) or one failure
    report, as plain text or as an HTML fragment with ``pf-…`` anchors."""
    if format not in ("text", "html"):
        raise ValueError(f"unknown format {format!r}")
    if isinstance(node, ProofNode):
        return (
            _render_proof_text(node)
            if format == "text"
            else _render_proof_html(node)
        )
    return (
        _render_failure_text(node)
        if format == "text"
        else _render_failure_html(node)
    )
