"""Parsing wiki text into rules and fact tables.

The text grammar is deliberately tiny.  Blocks are separated by blank lines.
A block containing a line of dashes is a rule: premises above the line, one
conclusion below it.  A block whose second line is a line of equals signs is
a fact table: the first line is the heading sentence, the rest are rows with
``|``-separated cells.  Anything else is left alone with a shape warning --
the wiki keeps drafts.

Premise lines starting with ``not :`` are negated.  After sentence parsing,
a handful of exact skeletons are recognized as arithmetic, comparison and
aggregation builtins; a sentence that differs from those skeletons in any
word is an ordinary predicate, so the vocabulary stays open.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Union

from .sentences import (
    Alignment,
    Constant,
    PredicateId,
    SentencePattern,
    Value,
    Variable,
    align,
    parse_sentence,
    skeleton_of,
)


class ParseError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line
        self.reason = message


@dataclass(frozen=True)
class Diagnostic:
    level: str  # "warning" or "error"
    line_start: int
    line_end: int
    message: str

    def render(self) -> str:
        span = (
            str(self.line_start)
            if self.line_start == self.line_end
            else f"{self.line_start}-{self.line_end}"
        )
        return f"{self.level.upper()} lines {span}: {self.message}"


# builtin surface skeletons; <> positions are the argument slots
_ARITH_OPS = {"+": "add", "-": "sub", "*": "mul", "/": "div"}

_COMPARE_TEMPLATES = {
    ("is", "less", "than"): "lt",
    ("is", "at", "most"): "le",
    ("is", "greater", "than"): "gt",
    ("is", "at", "least"): "ge",
    ("is", "not", "equal", "to"): "ne",
}

_ROUND_WORDS = ("rounded", "to")
_ROUND_TAIL = ("places", "after", "the", "decimal", "point", "is")

_AGGREGATE_WORDS = {
    "total": "sum",
    "count": "count",
    "maximum": "max",
    "minimum": "min",
}

Operand = Union[Variable, Value]


@dataclass(frozen=True)
class BuiltinCall:
    op: str  # add sub mul div round lt le gt ge ne
    inputs: tuple[Operand, ...]
    output: Optional[Variable]
    pattern: SentencePattern  # the surface sentence, for rendering
    expected: Optional[Value] = None  # inline value in the result position

    @property
    def input_variables(self) -> tuple[str, ...]:
        return tuple(i.name for i in self.inputs if isinstance(i, Variable))


@dataclass(frozen=True)
class AggregateCall:
    fn: str  # sum count max min
    operand: Variable
    output: Variable
    pattern: SentencePattern


@dataclass(frozen=True)
class Positive:
    pattern: SentencePattern


@dataclass(frozen=True)
class Negated:
    pattern: SentencePattern


@dataclass(frozen=True)
class Builtin:
    call: BuiltinCall


@dataclass(frozen=True)
class Aggregate:
    call: AggregateCall


Premise = Union[Positive, Negated, Builtin, Aggregate]


def premise_variables(p: Premise) -> tuple[str, ...]:
    if isinstance(p, (Positive, Negated)):
        return p.pattern.variables
    if isinstance(p, Builtin):
        names = list(p.call.input_variables)
        if p.call.output is not None and p.call.output.name not in names:
            names.append(p.call.output.name)
        return tuple(names)
    names = [p.call.operand.name]
    if p.call.output.name not in names:
        names.append(p.call.output.name)
    return tuple(names)


@dataclass(frozen=True)
class Rule:
    premises: tuple[Premise, ...]
    conclusion: SentencePattern
    line_start: int
    line_end: int
    rid: int = 0  # ordinal in the rulebase, assigned by the parser

    @property
    def label(self) -> str:
        return f"rule@{self.line_start}-{self.line_end}"

    @property
    def head(self) -> PredicateId:
        return skeleton_of(self.conclusion)


@dataclass(frozen=True)
class FactTable:
    heading: SentencePattern
    rows: tuple[tuple[Value, ...], ...]
    name: Optional[str] = None

    def __post_init__(self):
        arity = skeleton_of(self.heading).arity
        for row in self.rows:
            if len(row) != arity:
                raise ValueError(
                    f"row width {len(row)} does not match heading arity {arity}"
                )

    @property
    def predicate(self) -> PredicateId:
        return skeleton_of(self.heading)


@dataclass(frozen=True)
class Rulebase:
    rules: tuple[Rule, ...] = ()
    tables: tuple[FactTable, ...] = ()
    diagnostics: tuple[Diagnostic, ...] = ()

    def __post_init__(self):
        seen: dict[PredicateId, int] = {}
        for t in self.tables:
            if t.predicate in seen:
                raise ValueError(
                    f"two fact tables share the heading {t.predicate.text!r}"
                )
            seen[t.predicate] = 1

    def table_for(self, predicate: PredicateId) -> Optional[FactTable]:
        for t in self.tables:
            if t.predicate == predicate:
                return t
        return None

    def rules_for(self, predicate: PredicateId) -> tuple[Rule, ...]:
        return tuple(r for r in self.rules if r.head == predicate)

    def predicates(self) -> tuple[PredicateId, ...]:
        """Every predicate with a definition: rule conclusions, then headings."""
        out: list[PredicateId] = []
        for r in self.rules:
            if r.head not in out:
                out.append(r.head)
        for t in self.tables:
            if t.predicate not in out:
                out.append(t.predicate)
        return tuple(out)

    def with_tables(self, extra: list[FactTable]) -> "Rulebase":
        """A copy with extra tables merged in (rows union on shared headings)."""
        merged = {t.predicate: t for t in self.tables}
        for t in extra:
            old = merged.get(t.predicate)
            if old is None:
                merged[t.predicate] = t
            else:
                rows = list(old.rows)
                for row in t.rows:
                    if row not in rows:
                        rows.append(row)
                merged[t.predicate] = FactTable(
                    old.heading, tuple(rows), old.name or t.name
                )
        return replace(self, tables=tuple(merged.values()))


def resolve(rb: Rulebase, pattern: SentencePattern) -> tuple[tuple[PredicateId, Alignment], ...]:
    """The defined predicates a pattern can read, with their alignments.

    A pattern reads its own skeleton when that predicate is defined, and any
    defined predicate it specializes (an inline word standing at one of the
    predicate's holes, as in "is related by fact#:title to").  A pattern that
    resolves to nothing simply has an empty extension.
    """
    out = []
    for predicate in rb.predicates():
        alignment = align(pattern, predicate)
        if alignment is not None:
            out.append((predicate, alignment))
    return tuple(out)


def _is_underline(line: str) -> bool:
    s = line.strip()
    return len(s) >= 3 and set(s) == {"-"}


def _is_table_mark(line: str) -> bool:
    s = line.strip()
    return len(s) >= 3 and set(s) == {"="}


def recognize_builtin(pattern: SentencePattern) -> Optional[BuiltinCall]:
    """Exact skeleton match for the arithmetic/comparison forms.

    ``<a> + <b> = <c>`` and friends, the two-place rounding sentence, and the
    five comparison wordings.  Argument slots accept a variable or a word
    (taken as an inline value).
    """
    toks = pattern.tokens

    def operand(i: int) -> Operand:
        t = toks[i]
        return t if isinstance(t, Variable) else Value(t.text)

    def word(i: int) -> Optional[str]:
        t = toks[i]
        return t.text if isinstance(t, Constant) else None

    def result_slot(i: int) -> dict:
        out = toks[i]
        if isinstance(out, Variable):
            return {"output": out, "expected": None}
        return {"output": None, "expected": Value(out.text)}

    if len(toks) == 5 and word(1) in _ARITH_OPS and word(3) == "=":
        return BuiltinCall(
            op=_ARITH_OPS[word(1)],
            inputs=(operand(0), operand(2)),
            pattern=pattern,
            **result_slot(4),
        )
    # <a> rounded to <n> places after the decimal point is <c>
    if (
        len(toks) == 11
        and tuple(word(i) for i in (1, 2)) == _ROUND_WORDS
        and tuple(word(i) for i in range(4, 10)) == _ROUND_TAIL
    ):
        return BuiltinCall(
            op="round",
            inputs=(operand(0), operand(3)),
            pattern=pattern,
            **result_slot(10),
        )
    for words, op in _COMPARE_TEMPLATES.items():
        if len(toks) == 2 + len(words) and tuple(
            word(i) for i in range(1, 1 + len(words))
        ) == tuple(words):
            return BuiltinCall(
                op=op,
                inputs=(operand(0), operand(len(toks) - 1)),
                output=None,
                pattern=pattern,
            )
    return None


def recognize_aggregate(pattern: SentencePattern) -> Optional[AggregateCall]:
    """``<out> is the <total|count|maximum|minimum> of each <operand>``."""
    toks = pattern.tokens
    if len(toks) != 7:
        return None
    words = [t.text if isinstance(t, Constant) else None for t in toks]
    if (
        words[1] == "is"
        and words[2] == "the"
        and words[3] in _AGGREGATE_WORDS
        and words[4] == "of"
        and words[5] == "each"
        and isinstance(toks[0], Variable)
        and isinstance(toks[6], Variable)
    ):
        return AggregateCall(
            fn=_AGGREGATE_WORDS[words[3]],
            operand=toks[6],
            output=toks[0],
            pattern=pattern,
        )
    return None


def parse_premise(line: str) -> Premise:
    words = line.split()
    if len(words) > 2 and words[0] == "not" and words[1] == ":":
        return Negated(parse_sentence(" ".join(words[2:])))
    pattern = parse_sentence(line)
    agg = recognize_aggregate(pattern)
    if agg is not None:
        return Aggregate(agg)
    builtin = recognize_builtin(pattern)
    if builtin is not None:
        return Builtin(builtin)
    return Positive(pattern)


def _parse_rule_block(lines: list[tuple[int, str]], rid: int) -> Rule:
    underlines = [i for i, (_, text) in enumerate(lines) if _is_underline(text)]
    if len(underlines) > 1:
        raise ParseError("a rule may only contain one underline", lines[underlines[1]][0])
    cut = underlines[0]
    first_line = lines[0][0]
    if cut == 0:
        raise ParseError("rule has an underline but no premises above it", first_line)
    below = lines[cut + 1:]
    if not below:
        raise ParseError("rule is missing its conclusion below the underline", lines[cut][0])
    if len(below) > 1:
        raise ParseError("a rule must have exactly one conclusion line", below[1][0])
    premises = []
    for lineno, text in lines[:cut]:
        try:
            premises.append(parse_premise(text))
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from exc
    agg_positions = [i for i, p in enumerate(premises) if isinstance(p, Aggregate)]
    if len(agg_positions) > 1:
        raise ParseError("a rule may only use one aggregate premise", lines[agg_positions[1]][0])
    if agg_positions and agg_positions[0] != len(premises) - 1:
        raise ParseError(
            "the aggregate premise must be the last premise",
            lines[agg_positions[0]][0],
        )
    conclusion = parse_sentence(below[0][1])
    return Rule(
        premises=tuple(premises),
        conclusion=conclusion,
        line_start=first_line,
        line_end=below[0][0],
        rid=rid,
    )


def _parse_table_block(lines: list[tuple[int, str]]) -> FactTable:
    heading_line, heading_text = lines[0]
    heading = parse_sentence(heading_text)
    arity = skeleton_of(heading).arity
    rows = []
    for lineno, text in lines[2:]:
        cells = [c.strip() for c in text.split("|")]
        if len(cells) != arity:
            raise ParseError(
                f"row has {len(cells)} cells but the heading has "
                f"{arity} place holders",
                lineno,
            )
        if any(not c for c in cells):
            raise ParseError("empty table cell", lineno)
        row = tuple(Value(c) for c in cells)
        if row not in rows:
            rows.append(row)
    return FactTable(heading=heading, rows=tuple(rows))


def parse_rulebase(text: str) -> Rulebase:
    """Parse wiki source into a rulebase.

    Raises ParseError (with a line number) for malformed rule or table
    blocks; blocks that are neither get a shape warning and are skipped.
    """
    lines = text.split("\n")
    blocks: list[list[tuple[int, str]]] = []
    current: list[tuple[int, str]] = []
    for i, raw in enumerate(lines, start=1):
        if raw.strip():
            current.append((i, raw))
        elif current:
            blocks.append(current)
            current = []
    if current:
        blocks.append(current)

    rules: list[Rule] = []
    tables: list[FactTable] = []
    diagnostics: list[Diagnostic] = []
    merged: dict[PredicateId, FactTable] = {}
    for block in blocks:
        if any(_is_underline(text) for _, text in block):
            rules.append(_parse_rule_block(block, rid=len(rules)))
        elif len(block) >= 2 and _is_table_mark(block[1][1]):
            table = _parse_table_block(block)
            old = merged.get(table.predicate)
            if old is None:
                merged[table.predicate] = table
                tables.append(table)
            else:
                rows = list(old.rows)
                for row in table.rows:
                    if row not in rows:
                        rows.append(row)
                updated = FactTable(old.heading, tuple(rows), old.name)
                merged[table.predicate] = updated
                tables[tables.index(old)] = updated
        else:
            diagnostics.append(
                Diagnostic(
                    level="warning",
                    line_start=block[0][0],
                    line_end=block[-1][0],
                    message=(
                        "this block is neither a rule (sentences, an "
                        "underline, one conclusion) nor a table (heading, "
                        "a ===== line, rows); it was ignored"
                    ),
                )
            )
    return Rulebase(tuple(rules), tuple(tables), tuple(diagnostics))


def _premise_line(p: Premise) -> str:
    if isinstance(p, Negated):
        return "not : " + p.pattern.text
    if isinstance(p, Positive):
        return p.pattern.text
    if isinstance(p, Builtin):
        return p.call.pattern.text
    return p.call.pattern.text


def serialize(rb: Rulebase) -> str:
    """Render a rulebase back to wiki source.

    Parsing the output gives back the same rules and tables; diagnostics are
    derived data and are not serialized.
    """
    blocks: list[str] = []
    for rule in rb.rules:
        lines = [_premise_line(p) for p in rule.premises]
        lines.append("-----")
        lines.append(rule.conclusion.text)
        blocks.append("\n".join(lines))
    for table in rb.tables:
        lines = [table.heading.text, "=" * max(5, len(table.heading.text))]
        for row in table.rows:
            lines.append(" | ".join(v.text for v in row))
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"


def structurally_equal(a: Rulebase, b: Rulebase) -> bool:
    """Equality on rules and tables, ignoring line numbers, names, diagnostics."""
    if len(a.rules) != len(b.rules) or len(a.tables) != len(b.tables):
        return False
    for ra, rb_ in zip(a.rules, b.rules):
        if ra.premises != rb_.premises or ra.conclusion != rb_.conclusion:
            return False
    for ta, tb in zip(a.tables, b.tables):
        if ta.heading != tb.heading or ta.rows != tb.rows:
            return False
    return True
