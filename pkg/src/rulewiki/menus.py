"""Question discovery: layered menus, free-text ranking, specialization.

The menu presents each predicate as a generalized sentence ("some-…" in
every variable position).  The top layer holds the sentences no rule uses
as a premise — the natural questions to ask; each following layer holds the
premises of the layer above, and stored-table headings come last.  Free
text reorders the menu by idf-weighted token cosine.  A chosen sentence is
turned into a runnable query by constraining its variables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .engine import Constraint, Query
from .rulebook import Negated, Positive, Rulebase, resolve
from .sentences import Constant, PredicateId, SentencePattern, Variable


class UnknownVariable(ValueError):
    def __init__(self, name: str, pattern: SentencePattern):
        super().__init__(
            f"{name!r} is not a variable of {pattern.generalized_text()!r}"
        )
        self.name = name


@dataclass(frozen=True)
class MenuLayer:
    rank: int  # 0 = top
    entries: tuple[SentencePattern, ...]  # generalized, textual order


@dataclass(frozen=True)
class RankedEntry:
    pattern: SentencePattern
    score: float


def _representative(rb: Rulebase, predicate: PredicateId) -> SentencePattern:
    """The predicate as a generalized sentence, keeping written variable names."""
    for rule in rb.rules:
        if rule.head == predicate:
            return _generalized(rule.conclusion)
    for table in rb.tables:
        if table.predicate == predicate:
            return _generalized(table.heading)
    # fall back to numbered variables for a predicate with no source text
    n = 0
    tokens = []
    for word in predicate.skeleton:
        if word is None:
            n += 1
            tokens.append(Variable(f"value-{n}", introduces=True))
        else:
            tokens.append(Constant(word))
    return SentencePattern(tuple(tokens))


def _generalized(pattern: SentencePattern) -> SentencePattern:
    return SentencePattern(
        tuple(
            Variable(t.name, introduces=True) if isinstance(t, Variable) else t
            for t in pattern.tokens
        )
    )


def _premise_predicates(rb: Rulebase) -> dict[PredicateId, set[PredicateId]]:
    """head predicate -> predicates its rules read as premises."""
    reads: dict[PredicateId, set[PredicateId]] = {}
    for rule in rb.rules:
        into = reads.setdefault(rule.head, set())
        for premise in rule.premises:
            if isinstance(premise, (Positive, Negated)):
                for predicate, _ in resolve(rb, premise.pattern):
                    into.add(predicate)
    return reads


def build_menu(rb: Rulebase) -> list[MenuLayer]:
    """Partition every predicate into menu layers.

    Layer 0: rule conclusions never read as a premise.  Layer k: premises of
    rules already placed.  Predicates in premise cycles that nothing above
    reaches share one layer, and heading-only predicates form the final
    layer.
    """
    predicates = rb.predicates()
    if not predicates:
        return []
    heads = {rule.head for rule in rb.rules}
    heading_only = [p for p in predicates if p not in heads]
    derived = [p for p in predicates if p in heads]
    reads = _premise_predicates(rb)
    used = set()
    for targets in reads.values():
        used.update(targets)

    layers: list[list[PredicateId]] = []
    placed: set[PredicateId] = set()
    top = [p for p in derived if p not in used]
    if top:
        layers.append(top)
        placed.update(top)
    while True:
        frontier = [
            p
            for p in derived
            if p not in placed
            and any(p in reads.get(h, ()) for h in placed)
        ]
        if not frontier:
            break
        layers.append(frontier)
        placed.update(frontier)
    leftovers = [p for p in derived if p not in placed]
    if leftovers:
        layers.append(leftovers)
    if heading_only:
        layers.append(heading_only)

    out = []
    for rank, members in enumerate(layers):
        entries = sorted(
            (_representative(rb, p) for p in members),
            key=lambda e: e.generalized_text(),
        )
        out.append(MenuLayer(rank=rank, entries=tuple(entries)))
    return out


def _tokens_of(predicate: PredicateId) -> list[str]:
    return [w.lower() for w in predicate.skeleton if w is not None]


def search(rb: Rulebase, text: str) -> list[RankedEntry]:
    """All predicates ranked against the free text.

    Cosine similarity over idf-weighted lowercase word counts; only the
    sentences' fixed words participate, never the variables.  Ties (and a
    query sharing no words) fall back to textual order.
    """
    predicates = rb.predicates()
    if not predicates:
        return []
    docs = {p: _tokens_of(p) for p in predicates}
    df: dict[str, int] = {}
    for tokens in docs.values():
        for token in set(tokens):
            df[token] = df.get(token, 0) + 1
    n = len(predicates)
    idf = {token: math.log(n / count) for token, count in df.items()}

    def vector(tokens: list[str]) -> dict[str, float]:
        counts: dict[str, int] = {}
        for token in tokens:
            if token in idf:
                counts[token] = counts.get(token, 0) + 1
        return {t: c * idf[t] for t, c in counts.items()}

    query = vector(text.lower().split())
    qnorm = math.sqrt(sum(w * w for w in query.values()))
    ranked = []
    for predicate in predicates:
        doc = vector(docs[predicate])
        dnorm = math.sqrt(sum(w * w for w in doc.values()))
        if qnorm == 0 or dnorm == 0:
            score = 0.0
        else:
            dot = sum(w * doc.get(t, 0.0) for t, w in query.items())
            score = dot / (qnorm * dnorm)
        ranked.append(RankedEntry(_representative(rb, predicate), score))
    ranked.sort(key=lambda e: (-e.score, e.pattern.generalized_text()))
    return ranked


def specialize(
    pattern: SentencePattern, edits: list[tuple[str, Constraint]]
) -> Query:
    """A menu sentence plus variable constraints, as a runnable query."""
    for name, _ in edits:
        if name not in pattern.variables:
            raise UnknownVariable(name, pattern)
    return Query(pattern=pattern, constraints=tuple(edits))
