"""Boolean formulae over ontology atoms.

Concrete syntax::

    expr    := or
    or      := and ('|' and)*
    and     := unary ('&' unary)*
    unary   := ('!' | '¬') unary | primary
    primary := '{' Concept '.' State '}' | 'true' | 'false' | '(' expr ')'

The last ``.`` inside the braces separates concept from state, so concept
names may contain spaces but not dots.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Mapping, Union

__all__ = [
    "Atom",
    "Const",
    "Not",
    "And",
    "Or",
    "Expr",
    "TRUE",
    "FALSE",
    "ExprSyntaxError",
    "MissingAtomError",
    "parse_expr",
    "parse_atom",
    "evaluate",
    "atoms",
    "canonical",
    "conjoin",
]

_FORBIDDEN = frozenset(".{}")


class ExprSyntaxError(ValueError):
    """Malformed expression text; carries a 1-based line and column."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{line}:{column}: {message}")
        self.message = message
        self.line = line
        self.column = column


class MissingAtomError(KeyError):
    def __init__(self, atom: Atom):
        super().__init__(f"no value for atom {atom}")
        self.atom = atom

    def __str__(self) -> str:
        return self.args[0]


class _Ops:
    # operator sugar shared by every node type
    def __and__(self, other: Expr) -> And:
        return And(self, other)  # type: ignore[arg-type]

    def __or__(self, other: Expr) -> Or:
        return Or(self, other)  # type: ignore[arg-type]

    def __invert__(self) -> Not:
        return Not(self)  # type: ignore[arg-type]

    def __str__(self) -> str:
        return canonical(self)  # type: ignore[arg-type]


@dataclass(frozen=True, order=True)
class Atom(_Ops):
    concept: str
    state: str

    def __post_init__(self) -> None:
        for field_name in ("concept", "state"):
            raw = getattr(self, field_name)
            if not isinstance(raw, str):
                raise TypeError(f"atom {field_name} must be text, got {raw!r}")
            value = raw.strip()
            if not value:
                raise ValueError(f"atom {field_name} is empty")
            bad = _FORBIDDEN.intersection(value)
            if bad:
                raise ValueError(
                    f"atom {field_name} {value!r} contains forbidden character(s) "
                    + " ".join(repr(c) for c in sorted(bad))
                )
            object.__setattr__(self, field_name, value)

    @property
    def text(self) -> str:
        return f"{{{self.concept}.{self.state}}}"


@dataclass(frozen=True)
class Const(_Ops):
    value: bool


@dataclass(frozen=True)
class Not(_Ops):
    operand: Expr


@dataclass(frozen=True)
class And(_Ops):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Or(_Ops):
    left: Expr
    right: Expr


Expr = Union[Atom, Const, Not, And, Or]

TRUE = Const(True)
FALSE = Const(False)


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


@dataclass
class _Token:
    kind: str  # one of: atom ( ) ! & | true false end
    text: str
    line: int
    column: int


def _tokenize(text: str, line: int, column: int) -> list[_Token]:
    tokens: list[_Token] = []
    i = 0
    n = len(text)

    def advance(ch: str) -> None:
        nonlocal line, column
        if ch == "\n":
            line += 1
            column = 1
        else:
            column += 1

    while i < n:
        ch = text[i]
        if ch.isspace():
            advance(ch)
            i += 1
        elif ch == "{":
            start_line, start_col = line, column
            j = i + 1
            while j < n and text[j] not in "{}":
                j += 1
            if j >= n:
                raise ExprSyntaxError("unbalanced braces: '{' is never closed", start_line, start_col)
            if text[j] == "{":
                raise ExprSyntaxError("unbalanced braces: nested '{' inside atom", start_line, start_col)
            tokens.append(_Token("atom", text[i + 1 : j], start_line, start_col))
            for c in text[i : j + 1]:
                advance(c)
            i = j + 1
        elif ch == "}":
            raise ExprSyntaxError("unbalanced braces: unexpected '}'", line, column)
        elif ch in "()&|!":
            tokens.append(_Token(ch, ch, line, column))
            advance(ch)
            i += 1
        elif ch == "¬":
            tokens.append(_Token("!", ch, line, column))
            advance(ch)
            i += 1
        elif ch.isalpha():
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            if word not in ("true", "false"):
                raise ExprSyntaxError(f"unexpected word {word!r}", line, column)
            tokens.append(_Token(word, word, line, column))
            for c in word:
                advance(c)
            i = j
        else:
            raise ExprSyntaxError(f"unexpected character {ch!r}", line, column)
    tokens.append(_Token("end", "", line, column))
    return tokens


def parse_atom(body: str, line: int = 1, column: int = 1) -> Atom:
    """Build an atom from the text between the braces."""
    concept, dot, state = body.rpartition(".")
    if not dot:
        raise ExprSyntaxError(f"atom {{{body}}} has no '.' between concept and state", line, column)
    try:
        return Atom(concept, state)
    except ValueError as exc:
        raise ExprSyntaxError(f"bad atom {{{body}}}: {exc}", line, column) from None


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0

    @property
    def current(self) -> _Token:
        return self.tokens[self.pos]

    def take(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def parse(self) -> Expr:
        node = self.disjunction()
        tok = self.current
        if tok.kind != "end":
            if tok.kind == ")":
                raise ExprSyntaxError("unbalanced parentheses: unexpected ')'", tok.line, tok.column)
            raise ExprSyntaxError(f"unexpected {tok.text!r}", tok.line, tok.column)
        return node

    def disjunction(self) -> Expr:
        node = self.conjunction()
        while self.current.kind == "|":
            self.take()
            node = Or(node, self.conjunction())
        return node

    def conjunction(self) -> Expr:
        node = self.unary()
        while self.current.kind == "&":
            self.take()
            node = And(node, self.unary())
        return node

    def unary(self) -> Expr:
        if self.current.kind == "!":
            self.take()
            return Not(self.unary())
        return self.primary()

    def primary(self) -> Expr:
        tok = self.take()
        if tok.kind == "atom":
            return parse_atom(tok.text, tok.line, tok.column)
        if tok.kind == "true":
            return TRUE
        if tok.kind == "false":
            return FALSE
        if tok.kind == "(":
            node = self.disjunction()
            close = self.take()
            if close.kind != ")":
                raise ExprSyntaxError(
                    f"unbalanced parentheses: '(' at {tok.line}:{tok.column} is never closed",
                    close.line,
                    close.column,
                )
            return node
        if tok.kind == "end":
            raise ExprSyntaxError("unexpected end of expression", tok.line, tok.column)
        raise ExprSyntaxError(f"unexpected {tok.text!r}", tok.line, tok.column)


def parse_expr(text: str, line: int = 1, column: int = 1) -> Expr:
    """Parse expression source into a tree.

    ``line`` and ``column`` give the position of ``text[0]`` in an enclosing
    document so that error locations point into that document.
    """
    return _Parser(_tokenize(text, line, column)).parse()


# ---------------------------------------------------------------------------
# Semantics
# ---------------------------------------------------------------------------


def evaluate(expr: Expr, valuation: Mapping[Atom, bool]) -> bool:
    if isinstance(expr, Atom):
        try:
            return bool(valuation[expr])
        except KeyError:
            raise MissingAtomError(expr) from None
    if isinstance(expr, Const):
        return expr.value
    if isinstance(expr, Not):
        return not evaluate(expr.operand, valuation)
    if isinstance(expr, And):
        # both sides are evaluated so a missing atom is always reported
        left = evaluate(expr.left, valuation)
        right = evaluate(expr.right, valuation)
        return left and right
    if isinstance(expr, Or):
        left = evaluate(expr.left, valuation)
        right = evaluate(expr.right, valuation)
        return left or right
    raise TypeError(f"not an expression: {expr!r}")


def _walk(expr: Expr) -> Iterator[Atom]:
    stack = [expr]
    while stack:
        node = stack.pop()
        if isinstance(node, Atom):
            yield node
        elif isinstance(node, Not):
            stack.append(node.operand)
        elif isinstance(node, (And, Or)):
            stack.append(node.right)
            stack.append(node.left)


def atoms(expr: Expr) -> frozenset[Atom]:
    return frozenset(_walk(expr))


def ordered_atoms(expr: Expr) -> list[Atom]:
    """Atoms in left-to-right order of first occurrence."""
    seen: dict[Atom, None] = {}
    for a in _walk(expr):
        seen.setdefault(a, None)
    return list(seen)


def canonical(expr: Expr) -> str:
    """Fully parenthesised rendering; ``parse_expr`` inverts it exactly."""
    if isinstance(expr, Atom):
        return expr.text
    if isinstance(expr, Const):
        return "true" if expr.value else "false"
    if isinstance(expr, Not):
        return f"!({canonical(expr.operand)})"
    if isinstance(expr, And):
        return f"({canonical(expr.left)} & {canonical(expr.right)})"
    if isinstance(expr, Or):
        return f"({canonical(expr.left)} | {canonical(expr.right)})"
    raise TypeError(f"not an expression: {expr!r}")


def conjoin(exprs) -> Expr:
    """Left-nested conjunction in the given order; TRUE when empty."""
    result: Expr | None = None
    for e in exprs:
        result = e if result is None else And(result, e)
    return TRUE if result is None else result
