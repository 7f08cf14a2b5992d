"""Sentences as predicates.

An English sentence is a whitespace-separated token sequence.  Tokens whose
text starts with ``some-`` or ``that-`` are variables; everything else is an
ordinary word.  The sentence's *skeleton* (words with variables blanked out)
is its predicate identity: two sentences with the same skeleton talk about
the same relation, no matter how the variables are named.

There is deliberately no dictionary, no grammar and no case folding here.
A sentence means exactly what it says; punctuation is just another word when
it is space-separated.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from typing import Iterator, Optional, Union

SOME_PREFIX = "some-"
THAT_PREFIX = "that-"

HOLE_MARK = "○"  # ○ used when displaying skeletons

_NUMERAL_RE = re.compile(r"[+-]?(?:\d+(?:\.\d+)?|\.\d+)\Z")


class EmptySentence(ValueError):
    """Raised when a sentence has no tokens at all."""


class UnboundVariable(KeyError):
    def __init__(self, name: str):
        super().__init__(name)
        self.name = name

    def __str__(self) -> str:
        return f"variable {self.name!r} is not bound"


@dataclass(frozen=True)
class Constant:
    text: str


@dataclass(frozen=True)
class Variable:
    name: str
    introduces: bool = True  # True for some-, False for that-

    @property
    def surface(self) -> str:
        return (SOME_PREFIX if self.introduces else THAT_PREFIX) + self.name


PatternToken = Union[Constant, Variable]


@dataclass(frozen=True)
class PredicateId:
    """Skeleton of a sentence: word tokens with ``None`` at variable holes."""

    skeleton: tuple[Optional[str], ...]

    @property
    def arity(self) -> int:
        return sum(1 for t in self.skeleton if t is None)

    @property
    def text(self) -> str:
        return " ".join(HOLE_MARK if t is None else t for t in self.skeleton)

    def __str__(self) -> str:
        return self.text

    def sort_key(self) -> tuple:
        return tuple(t if t is not None else "" for t in self.skeleton)


@dataclass(frozen=True)
class Value:
    """A cell value: text, plus an exact-decimal reading when it is a numeral.

    Values compare and hash by text; ``1`` and ``1.0`` are different values
    even though they are numerically equal.  Numeric equality only matters
    inside comparison builtins.
    """

    text: str

    @property
    def numeric(self) -> Optional[Decimal]:
        if _NUMERAL_RE.match(self.text):
            try:
                return Decimal(self.text)
            except InvalidOperation:  # pragma: no cover - regex keeps this out
                return None
        return None

    @property
    def is_numeric(self) -> bool:
        return self.numeric is not None

    def __str__(self) -> str:
        return self.text


@dataclass(frozen=True)
class SentencePattern:
    tokens: tuple[PatternToken, ...]

    def __post_init__(self):
        if not self.tokens:
            raise EmptySentence("a sentence needs at least one token")

    @property
    def variables(self) -> tuple[str, ...]:
        """Variable names in first-appearance order, without duplicates."""
        seen: list[str] = []
        for t in self.tokens:
            if isinstance(t, Variable) and t.name not in seen:
                seen.append(t.name)
        return tuple(seen)

    @property
    def is_ground(self) -> bool:
        return not any(isinstance(t, Variable) for t in self.tokens)

    @property
    def text(self) -> str:
        return " ".join(
            t.surface if isinstance(t, Variable) else t.text for t in self.tokens
        )

    def generalized_text(self) -> str:
        """The sentence with every variable shown in its ``some-`` form."""
        return " ".join(
            SOME_PREFIX + t.name if isinstance(t, Variable) else t.text
            for t in self.tokens
        )

    def __str__(self) -> str:
        return self.text


@dataclass(frozen=True)
class GroundFact:
    predicate: PredicateId
    args: tuple[Value, ...]

    def __post_init__(self):
        if len(self.args) != self.predicate.arity:
            raise ValueError(
                f"fact has {len(self.args)} args for arity "
                f"{self.predicate.arity} predicate {self.predicate.text!r}"
            )

    @property
    def text(self) -> str:
        """The rendered English sentence (derived, never the storage form)."""
        args = iter(self.args)
        return " ".join(
            next(args).text if t is None else t for t in self.predicate.skeleton
        )

    @property
    def sentence(self) -> SentencePattern:
        """The fact as an all-constant pattern, built positionally.

        Not a re-parse: an argument whose text contains spaces stays one
        token, so the pattern keeps the fact's predicate shape.
        """
        args = iter(self.args)
        return SentencePattern(
            tuple(
                Constant(next(args).text) if t is None else Constant(t)
                for t in self.predicate.skeleton
            )
        )

    def sort_key(self) -> tuple:
        return tuple(a.text for a in self.args)

    def __str__(self) -> str:
        return self.text


class Binding:
    """An immutable variable-to-value map with cheap extension."""

    __slots__ = ("_map",)

    def __init__(self, mapping: Optional[dict[str, Value]] = None):
        self._map: dict[str, Value] = dict(mapping) if mapping else {}

    def get(self, name: str) -> Optional[Value]:
        return self._map.get(name)

    def __contains__(self, name: str) -> bool:
        return name in self._map

    def __getitem__(self, name: str) -> Value:
        try:
            return self._map[name]
        except KeyError:
            raise UnboundVariable(name) from None

    def extended(self, name: str, value: Value) -> Optional["Binding"]:
        """Bind ``name``; None when it is already bound to a different value."""
        existing = self._map.get(name)
        if existing is not None:
            return self if existing == value else None
        b = Binding(self._map)
        b._map[name] = value
        return b

    def merged(self, other: "Binding") -> Optional["Binding"]:
        b: Optional[Binding] = self
        for name, value in other.items():
            b = b.extended(name, value)
            if b is None:
                return None
        return b

    def restricted(self, names) -> "Binding":
        return Binding({n: v for n, v in self._map.items() if n in names})

    def items(self) -> Iterator[tuple[str, Value]]:
        return iter(self._map.items())

    def names(self):
        return self._map.keys()

    def __len__(self) -> int:
        return len(self._map)

    def __eq__(self, other) -> bool:
        return isinstance(other, Binding) and self._map == other._map

    def __repr__(self) -> str:
        inner = ", ".join(f"{n}={v.text!r}" for n, v in sorted(self._map.items()))
        return f"Binding({inner})"


EMPTY_BINDING = Binding()


def _classify(word: str) -> PatternToken:
    if word.startswith(SOME_PREFIX) and len(word) > len(SOME_PREFIX):
        return Variable(word[len(SOME_PREFIX):], introduces=True)
    if word.startswith(THAT_PREFIX) and len(word) > len(THAT_PREFIX):
        return Variable(word[len(THAT_PREFIX):], introduces=False)
    return Constant(word)


def parse_sentence(line: str) -> SentencePattern:
    """Split a line on whitespace and classify each token.

    Raises EmptySentence for blank input.
    """
    words = line.split()
    if not words:
        raise EmptySentence(f"blank line is not a sentence: {line!r}")
    return SentencePattern(tuple(_classify(w) for w in words))


def skeleton_of(p: SentencePattern) -> PredicateId:
    return PredicateId(
        tuple(None if isinstance(t, Variable) else t.text for t in p.tokens)
    )


def match(p: SentencePattern, f: GroundFact) -> Optional[Binding]:
    """Match a pattern against a fact of the *same* skeleton.

    Hole i binds the pattern's i-th variable occurrence to args[i]; repeated
    variables must receive equal values.  A mismatch is None, not an error.
    """
    if skeleton_of(p) != f.predicate:
        return None
    binding: Optional[Binding] = EMPTY_BINDING
    args = iter(f.args)
    for t in p.tokens:
        if isinstance(t, Variable):
            binding = binding.extended(t.name, next(args))
            if binding is None:
                return None
    return binding


def instantiate(p: SentencePattern, b: Binding) -> GroundFact:
    """Apply a binding covering all of p's variables; returns the ground fact.

    The rendered English string is ``instantiate(p, b).text``.
    Raises UnboundVariable when the binding misses a variable.
    """
    args = []
    for t in p.tokens:
        if isinstance(t, Variable):
            args.append(b[t.name])
    return GroundFact(skeleton_of(p), tuple(args))


def render_partial(p: SentencePattern, b: Binding) -> str:
    """Render with whatever is bound; unbound variables keep their some- form."""
    parts = []
    for t in p.tokens:
        if isinstance(t, Variable):
            v = b.get(t.name)
            parts.append(v.text if v is not None else SOME_PREFIX + t.name)
        else:
            parts.append(t.text)
    return " ".join(parts)


@dataclass(frozen=True)
class Alignment:
    """How a pattern reads facts of a more general predicate.

    ``slots`` has one entry per hole of the target predicate: a variable name
    to bind, or a Value the fact's argument must equal.  The identity
    alignment (pattern against its own skeleton) has only variable slots.
    """

    target: PredicateId
    slots: tuple[Union[str, Value], ...]  # str = variable name

    def read(self, f: GroundFact, base: Binding) -> Optional[Binding]:
        """Extend ``base`` so the pattern reads fact ``f``; None on mismatch."""
        if f.predicate != self.target:
            return None
        return self.read_args(f.args, base)

    def read_args(
        self, args: tuple[Value, ...], base: Binding
    ) -> Optional[Binding]:
        binding: Optional[Binding] = base
        for slot, arg in zip(self.slots, args):
            if isinstance(slot, Value):
                if slot != arg:
                    return None
            else:
                binding = binding.extended(slot, arg)
                if binding is None:
                    return None
        return binding

    def ground_args(self, b: Binding) -> Optional[tuple[Value, ...]]:
        """The unique argument tuple this alignment denotes once every
        variable slot is bound; None if any slot is unbound."""
        args = []
        for slot in self.slots:
            if isinstance(slot, Value):
                args.append(slot)
            else:
                v = b.get(slot)
                if v is None:
                    return None
                args.append(v)
        return tuple(args)


def align(p: SentencePattern, target: PredicateId) -> Optional[Alignment]:
    """Align a pattern position-by-position against a target predicate.

    The target must have the same token count.  Target words must be matched
    exactly; at a target hole the pattern may put a variable (binds that
    column) or a single word (an equality filter on that column).  This is
    how a premise written with an inline constant -- "is related by
    fact#:title to" -- reads rows of the generic triple table.
    """
    if len(p.tokens) != len(target.skeleton):
        return None
    slots: list[Union[str, Value]] = []
    for tok, cell in zip(p.tokens, target.skeleton):
        if cell is None:
            if isinstance(tok, Variable):
                slots.append(tok.name)
            else:
                slots.append(Value(tok.text))
        else:
            if not isinstance(tok, Constant) or tok.text != cell:
                return None
    return Alignment(target, tuple(slots))


def generalize(predicate: PredicateId) -> SentencePattern:
    """A pattern for the predicate with fresh ``some-`` variables per hole.

    Hole names count up (value-1, value-2, ...) and avoid the predicate's
    word tokens; used for menus and for materializing fetched relations.
    """
    tokens: list[PatternToken] = []
    n = 0
    for cell in predicate.skeleton:
        if cell is None:
            n += 1
            tokens.append(Variable(f"value-{n}", introduces=True))
        else:
            tokens.append(Constant(cell))
    return SentencePattern(tuple(tokens))
