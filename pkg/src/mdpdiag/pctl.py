"""State and path formulas for probabilistic safety checking.

The surface grammar covers an upper/lower-threshold probability operator
around a single (weak) until path formula over propositional state
formulas:

    P<=0.5 [ (a|b) U (c&d) ]      P<0.1 [ x U<=12 y ]      P<=0 [ a W b ]

Disjunction is part of the state-formula grammar here even though minimal
presentations derive it from negation and conjunction; cause extraction
treats it as a first-class connective.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Optional, AbstractSet, Collection

from .errors import DomainError, ParseError


# -- abstract syntax -------------------------------------------------------


class StateFormula:
    __slots__ = ()


@dataclass(frozen=True)
class TrueFormula(StateFormula):
    def __str__(self):
        return "true"


@dataclass(frozen=True)
class FalseFormula(StateFormula):
    def __str__(self):
        return "false"


TRUE = TrueFormula()
FALSE = FalseFormula()


@dataclass(frozen=True)
class Atom(StateFormula):
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Not(StateFormula):
    child: StateFormula

    def __str__(self):
        return f"!{_wrap(self.child, tight=True)}"


@dataclass(frozen=True)
class And(StateFormula):
    left: StateFormula
    right: StateFormula

    def __str__(self):
        return f"{_wrap(self.left, tight=True)} & {_wrap(self.right, tight=True)}"


@dataclass(frozen=True)
class Or(StateFormula):
    left: StateFormula
    right: StateFormula

    def __str__(self):
        l = _wrap(self.left)
        r = _wrap(self.right)
        return f"{l} | {r}"


def _wrap(phi: StateFormula, tight: bool = False) -> str:
    # Parenthesize just enough for the printed form to reparse identically.
    if isinstance(phi, Or) or (tight and isinstance(phi, And)):
        return f"({phi})"
    return str(phi)


@dataclass(frozen=True)
class PathFormula:
    """left U right, optionally step-bounded; op is 'U' or 'W'."""

    left: StateFormula
    right: StateFormula
    op: str = "U"
    bound: Optional[int] = None

    def __post_init__(self):
        if self.op not in ("U", "W"):
            raise DomainError(f"path operator must be 'U' or 'W', got {self.op!r}")
        if self.bound is not None and self.bound < 0:
            raise DomainError(f"step bound must be nonnegative, got {self.bound}")

    def __str__(self):
        op = self.op if self.bound is None else f"{self.op}<={self.bound}"
        return f"{_until_operand(self.left)} {op} {_until_operand(self.right)}"


def _until_operand(phi: StateFormula) -> str:
    if isinstance(phi, (And, Or)):
        return f"({phi})"
    return str(phi)


@dataclass(frozen=True)
class PropertySpec:
    """P <comparison> <threshold> [ <path formula> ]."""

    comparison: str
    threshold: float
    path: PathFormula

    def __post_init__(self):
        if self.comparison not in ("<", "<=", ">", ">="):
            raise DomainError(f"unsupported comparison {self.comparison!r}")
        if not 0.0 <= self.threshold <= 1.0:
            raise DomainError(f"threshold must lie in [0, 1], got {self.threshold}")

    def __str__(self):
        return f"P{self.comparison}{_fmt_number(self.threshold)} [ {self.path} ]"


def _fmt_number(x: float) -> str:
    return repr(x) if x != int(x) else repr(int(x))


def format_property(spec: PropertySpec) -> str:
    return str(spec)


def atoms_of(phi: StateFormula) -> frozenset[str]:
    if isinstance(phi, Atom):
        return frozenset((phi.name,))
    if isinstance(phi, Not):
        return atoms_of(phi.child)
    if isinstance(phi, (And, Or)):
        return atoms_of(phi.left) | atoms_of(phi.right)
    return frozenset()


def path_atoms(psi: PathFormula) -> frozenset[str]:
    return atoms_of(psi.left) | atoms_of(psi.right)


# -- evaluation ------------------------------------------------------------


def eval_state_formula(labels: Mapping[int, AbstractSet[str]], s: int,
                       phi: StateFormula,
                       known_aps: Optional[Collection[str]] = None) -> bool:
    """Evaluate phi at state s under the given labelling.

    When known_aps is supplied, an atom outside it raises DomainError;
    otherwise unknown atoms are simply false at every state.
    """
    if isinstance(phi, TrueFormula):
        return True
    if isinstance(phi, FalseFormula):
        return False
    if isinstance(phi, Atom):
        if known_aps is not None and phi.name not in known_aps:
            raise DomainError(f"unknown atomic proposition {phi.name!r}")
        return phi.name in labels.get(s, frozenset())
    if isinstance(phi, Not):
        return not eval_state_formula(labels, s, phi.child, known_aps)
    if isinstance(phi, And):
        return (eval_state_formula(labels, s, phi.left, known_aps)
                and eval_state_formula(labels, s, phi.right, known_aps))
    if isinstance(phi, Or):
        return (eval_state_formula(labels, s, phi.left, known_aps)
                or eval_state_formula(labels, s, phi.right, known_aps))
    raise DomainError(f"not a state formula: {phi!r}")


def eval_path_formula(labels: Mapping[int, AbstractSet[str]],
                      states: tuple[int, ...], psi: PathFormula,
                      known_aps: Optional[Collection[str]] = None) -> bool:
    """Evaluate psi on a finite state sequence.

    Until holds iff some position within the bound satisfies the right
    operand with all earlier positions satisfying the left one. Weak until
    additionally holds when every inspected position satisfies the left
    operand; it is judged on the finite sequence only.
    """
    limit = len(states) - 1
    if psi.bound is not None:
        limit = min(limit, psi.bound)
    for j in range(limit + 1):
        if eval_state_formula(labels, states[j], psi.right, known_aps):
            return True
        if not eval_state_formula(labels, states[j], psi.left, known_aps):
            return False
    return psi.op == "W"


# -- negation normal form --------------------------------------------------


def to_nnf(phi: StateFormula) -> StateFormula:
    """Push negations down to atoms; output uses only literals, & and |."""
    if isinstance(phi, (TrueFormula, FalseFormula, Atom)):
        return phi
    if isinstance(phi, And):
        return And(to_nnf(phi.left), to_nnf(phi.right))
    if isinstance(phi, Or):
        return Or(to_nnf(phi.left), to_nnf(phi.right))
    if isinstance(phi, Not):
        child = phi.child
        if isinstance(child, TrueFormula):
            return FALSE
        if isinstance(child, FalseFormula):
            return TRUE
        if isinstance(child, Atom):
            return phi
        if isinstance(child, Not):
            return to_nnf(child.child)
        if isinstance(child, And):
            return Or(to_nnf(Not(child.left)), to_nnf(Not(child.right)))
        if isinstance(child, Or):
            return And(to_nnf(Not(child.left)), to_nnf(Not(child.right)))
    raise DomainError(f"not a state formula: {phi!r}")


def is_nnf(phi: StateFormula) -> bool:
    if isinstance(phi, Not):
        return isinstance(phi.child, Atom)
    if isinstance(phi, (And, Or)):
        return is_nnf(phi.left) and is_nnf(phi.right)
    return isinstance(phi, (TrueFormula, FalseFormula, Atom))


# -- parsing ---------------------------------------------------------------

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)
  | (?P<cmp><=|>=|<|>)
  | (?P<punct>[\[\]()&|!])
  | (?P<quoted>"[^"\n]*")
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
""", re.VERBOSE)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    line: int
    column: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}",
                             line=line, column=col)
        kind = m.lastgroup
        lexeme = m.group()
        if kind != "ws":
            tokens.append(_Token(kind, lexeme, line, col))
        newlines = lexeme.count("\n")
        if newlines:
            line += newlines
            col = len(lexeme) - lexeme.rfind("\n")
        else:
            col += len(lexeme)
        pos = m.end()
    tokens.append(_Token("eof", "", line, col))
    return tokens


class _PropertyParser:
    def __init__(self, tokens, defined_labels=None):
        self.tokens = tokens
        self.pos = 0
        self.defined_labels = defined_labels

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def error(self, message, tok=None):
        tok = tok or self.peek()
        raise ParseError(message, line=tok.line, column=tok.column)

    def expect(self, text):
        tok = self.peek()
        if tok.text != text:
            shown = tok.text or "end of input"
            self.error(f"expected {text!r}, got {shown!r}")
        return self.advance()

    def parse_property(self) -> PropertySpec:
        tok = self.peek()
        if tok.kind != "ident" or tok.text != "P":
            self.error("a property starts with 'P'")
        self.advance()
        cmp_tok = self.peek()
        if cmp_tok.kind != "cmp":
            self.error("expected a comparison after 'P'")
        self.advance()
        num_tok = self.peek()
        if num_tok.kind != "num":
            self.error("expected a probability threshold")
        self.advance()
        threshold = float(num_tok.text)
        if not 0.0 <= threshold <= 1.0:
            self.error(f"threshold {num_tok.text} outside [0, 1]", num_tok)
        self.expect("[")
        path = self.parse_path()
        self.expect("]")
        tok = self.peek()
        if tok.kind != "eof":
            self.error(f"trailing input {tok.text!r}")
        return PropertySpec(cmp_tok.text, threshold, path)

    def parse_path(self) -> PathFormula:
        left = self.parse_or()
        op_tok = self.peek()
        if op_tok.kind != "ident" or op_tok.text not in ("U", "W"):
            self.error("expected 'U' or 'W' between state formulas")
        self.advance()
        bound = None
        if self.peek().text == "<=":
            self.advance()
            num_tok = self.peek()
            if num_tok.kind != "num" or "." in num_tok.text or "e" in num_tok.text.lower():
                self.error("step bound must be a nonnegative integer")
            self.advance()
            bound = int(num_tok.text)
        right = self.parse_or()
        return PathFormula(left, right, op_tok.text, bound)

    def parse_or(self) -> StateFormula:
        phi = self.parse_and()
        while self.peek().text == "|":
            self.advance()
            phi = Or(phi, self.parse_and())
        return phi

    def parse_and(self) -> StateFormula:
        phi = self.parse_not()
        while self.peek().text == "&":
            self.advance()
            phi = And(phi, self.parse_not())
        return phi

    def parse_not(self) -> StateFormula:
        if self.peek().text == "!":
            self.advance()
            return Not(self.parse_not())
        return self.parse_primary()

    def parse_primary(self) -> StateFormula:
        tok = self.peek()
        if tok.text == "(":
            self.advance()
            phi = self.parse_or()
            self.expect(")")
            return phi
        if tok.kind == "quoted":
            self.advance()
            name = tok.text[1:-1]
            if self.defined_labels is None:
                self.error(f"quoted label {tok.text} used without a label table", tok)
            if name not in self.defined_labels:
                self.error(f"undefined label {tok.text}", tok)
            return Atom(name)
        if tok.kind == "ident":
            if tok.text == "true":
                self.advance()
                return TRUE
            if tok.text == "false":
                self.advance()
                return FALSE
            if tok.text in ("U", "W"):
                self.error(f"{tok.text!r} is reserved for path operators", tok)
            if tok.text == "P" and self.tokens[self.pos + 1].kind == "cmp":
                self.error("nested probability operators are not supported", tok)
            self.advance()
            return Atom(tok.text)
        shown = tok.text or "end of input"
        self.error(f"expected a state formula, got {shown!r}")


def parse_property(text: str,
                   defined_labels: Optional[Collection[str]] = None) -> PropertySpec:
    """Parse a property string; see the module docstring for the grammar.

    defined_labels lists the names quoted labels may resolve to (for models
    built from guarded-command programs, their label definitions; for
    explicit models, the atomic propositions of the labelling).
    """
    return _PropertyParser(_tokenize(text), defined_labels).parse_property()


def parse_state_formula(text: str,
                        defined_labels: Optional[Collection[str]] = None) -> StateFormula:
    parser = _PropertyParser(_tokenize(text), defined_labels)
    phi = parser.parse_or()
    tok = parser.peek()
    if tok.kind != "eof":
        parser.error(f"trailing input {tok.text!r}")
    return phi
