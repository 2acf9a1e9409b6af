"""Guarded-command programs and their elaboration into explicit MDPs.

A program is a set of modules over bounded integer variables:

    const int K = 1;
    module station
      s : [0..4] init 0;
      [send] (s=0) -> 0.9:(s'=1) + 0.1:(s'=0);
      []     (s=1) -> (s'=2);
    endmodule
    label "done" = (s=2);

Commands with the same non-empty action label synchronize across every
module whose alphabet contains the label (one enabled command per such
module fires jointly, probabilities multiply); unlabelled commands
interleave on their own. Elaboration explores the reachable valuations
breadth-first, so building the same program twice yields identical state
numbering, and records for every transition the source commands it came
from.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from itertools import product
from typing import Mapping, Optional

from .errors import BudgetError, DomainError, ParseError
from .mdp import Mdp

DEFAULT_STATE_CAP = 1_000_000

_KEYWORDS = {"module", "endmodule", "const", "int", "double", "init",
             "label", "true", "false", "min", "max"}

_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


# -- expression syntax -------------------------------------------------------


class Expr:
    __slots__ = ()


@dataclass(frozen=True)
class Num(Expr):
    value: object  # int or float


@dataclass(frozen=True)
class BoolLit(Expr):
    value: bool


@dataclass(frozen=True)
class Name(Expr):
    ident: str


@dataclass(frozen=True)
class Unary(Expr):
    op: str  # '-' or '!'
    child: Expr


@dataclass(frozen=True)
class Binary(Expr):
    op: str  # + - * = != < <= > >= & |
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Call(Expr):
    func: str  # min or max
    args: tuple[Expr, ...]


def _names_in(expr: Expr) -> set[str]:
    if isinstance(expr, Name):
        return {expr.ident}
    if isinstance(expr, Unary):
        return _names_in(expr.child)
    if isinstance(expr, Binary):
        return _names_in(expr.left) | _names_in(expr.right)
    if isinstance(expr, Call):
        out: set[str] = set()
        for a in expr.args:
            out |= _names_in(a)
        return out
    return set()


def eval_expr(expr: Expr, env: Mapping[str, object], line: Optional[int] = None,
              filename: Optional[str] = None):
    """Evaluate under env; integers and booleans stay distinct types."""

    def err(msg):
        raise ParseError(msg, line=line, filename=filename)

    def number(e):
        v = rec(e)
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            err("expected a numeric operand")
        return v

    def boolean(e):
        v = rec(e)
        if not isinstance(v, bool):
            err("expected a boolean operand")
        return v

    def rec(e):
        if isinstance(e, Num):
            return e.value
        if isinstance(e, BoolLit):
            return e.value
        if isinstance(e, Name):
            try:
                return env[e.ident]
            except KeyError:
                err(f"unknown identifier {e.ident!r}")
        if isinstance(e, Unary):
            return -number(e.child) if e.op == "-" else not boolean(e.child)
        if isinstance(e, Call):
            vals = [number(a) for a in e.args]
            return min(vals) if e.func == "min" else max(vals)
        if isinstance(e, Binary):
            op = e.op
            if op in ("&", "|"):
                l = boolean(e.left)
                # no short-circuit: both sides must be well-typed
                r = boolean(e.right)
                return (l and r) if op == "&" else (l or r)
            l = number(e.left)
            r = number(e.right)
            if op == "+":
                return l + r
            if op == "-":
                return l - r
            if op == "*":
                return l * r
            if op == "=":
                return l == r
            if op == "!=":
                return l != r
            if op == "<":
                return l < r
            if op == "<=":
                return l <= r
            if op == ">":
                return l > r
            if op == ">=":
                return l >= r
        err(f"cannot evaluate expression node {e!r}")

    return rec(expr)


# -- program syntax ----------------------------------------------------------


@dataclass(frozen=True)
class ConstDef:
    name: str
    kind: str  # 'int' or 'double'
    expr: Optional[Expr]
    line: int


@dataclass(frozen=True)
class VarDecl:
    name: str
    low: Expr
    high: Expr
    init: Optional[Expr]
    line: int


@dataclass(frozen=True)
class Assignment:
    var: str
    expr: Expr


@dataclass(frozen=True)
class Update:
    prob: Optional[Expr]  # None means probability one
    assignments: tuple[Assignment, ...]


@dataclass(frozen=True)
class Command:
    label: str  # '' for an unlabelled, interleaving command
    guard: Expr
    updates: tuple[Update, ...]
    line: int


@dataclass(frozen=True)
class ModuleDef:
    name: str
    variables: tuple[VarDecl, ...]
    commands: tuple[Command, ...]
    line: int


@dataclass(frozen=True)
class LabelDef:
    name: str
    expr: Expr
    line: int


@dataclass(frozen=True)
class Program:
    constants: tuple[ConstDef, ...]
    modules: tuple[ModuleDef, ...]
    labels: tuple[LabelDef, ...]
    filename: Optional[str] = None

    def label_names(self) -> tuple[str, ...]:
        return tuple(l.name for l in self.labels)


# -- tokenizer ---------------------------------------------------------------

_PM_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+|//[^\n]*)
  | (?P<num>\d+\.\d+(?:[eE][-+]?\d+)?|\d+[eE][-+]?\d+|\d+)
  | (?P<op>->|\.\.|!=|<=|>=|[+\-*=<>:;,&|!()\[\]'])
  | (?P<quoted>"[^"\n]*")
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
""", re.VERBOSE)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    line: int
    column: int


def _tokenize_program(text: str, filename=None) -> list[_Tok]:
    toks = []
    line, col, pos = 1, 1, 0
    while pos < len(text):
        m = _PM_TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}",
                             line=line, column=col, filename=filename)
        kind = m.lastgroup
        lexeme = m.group()
        if kind != "ws":
            toks.append(_Tok(kind, lexeme, line, col))
        newlines = lexeme.count("\n")
        if newlines:
            line += newlines
            col = len(lexeme) - lexeme.rfind("\n")
        else:
            col += len(lexeme)
        pos = m.end()
    toks.append(_Tok("eof", "", line, col))
    return toks


class _ProgramParser:
    def __init__(self, tokens, filename=None):
        self.toks = tokens
        self.pos = 0
        self.filename = filename

    def peek(self) -> _Tok:
        return self.toks[self.pos]

    def advance(self) -> _Tok:
        t = self.toks[self.pos]
        if t.kind != "eof":
            self.pos += 1
        return t

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        raise ParseError(msg, line=tok.line, column=tok.column,
                         filename=self.filename)

    def expect(self, text):
        t = self.peek()
        if t.text != text:
            shown = t.text or "end of input"
            self.error(f"expected {text!r}, got {shown!r}")
        return self.advance()

    def expect_ident(self, what="an identifier"):
        t = self.peek()
        if t.kind != "ident" or t.text in _KEYWORDS:
            shown = t.text or "end of input"
            self.error(f"expected {what}, got {shown!r}")
        return self.advance()

    # items

    def parse_program(self) -> Program:
        constants, modules, labels = [], [], []
        while True:
            t = self.peek()
            if t.kind == "eof":
                break
            if t.text == "const":
                constants.append(self.parse_const())
            elif t.text == "module":
                modules.append(self.parse_module())
            elif t.text == "label":
                labels.append(self.parse_label())
            else:
                self.error(f"expected 'const', 'module' or 'label', got {t.text!r}")
        if not modules:
            raise ParseError("program declares no module", filename=self.filename)
        return Program(tuple(constants), tuple(modules), tuple(labels),
                       self.filename)

    def parse_const(self) -> ConstDef:
        start = self.expect("const")
        t = self.peek()
        if t.text not in ("int", "double"):
            self.error(f"expected 'int' or 'double', got {t.text!r}")
        kind = self.advance().text
        name = self.expect_ident("a constant name").text
        expr = None
        if self.peek().text == "=":
            self.advance()
            expr = self.parse_expr()
        self.expect(";")
        return ConstDef(name, kind, expr, start.line)

    def parse_module(self) -> ModuleDef:
        start = self.expect("module")
        name = self.expect_ident("a module name").text
        variables, commands = [], []
        while True:
            t = self.peek()
            if t.text == "endmodule":
                self.advance()
                break
            if t.kind == "eof":
                self.error(f"module {name!r} is missing 'endmodule'", start)
            if t.text == "[":
                commands.append(self.parse_command())
            elif t.kind == "ident" and t.text not in _KEYWORDS:
                variables.append(self.parse_vardecl())
            else:
                self.error(f"expected a variable declaration or a command, "
                           f"got {t.text!r}")
        return ModuleDef(name, tuple(variables), tuple(commands), start.line)

    def parse_vardecl(self) -> VarDecl:
        name_tok = self.expect_ident("a variable name")
        self.expect(":")
        self.expect("[")
        low = self.parse_expr()
        self.expect("..")
        high = self.parse_expr()
        self.expect("]")
        init = None
        if self.peek().text == "init":
            self.advance()
            init = self.parse_expr()
        self.expect(";")
        return VarDecl(name_tok.text, low, high, init, name_tok.line)

    def parse_command(self) -> Command:
        start = self.expect("[")
        label = ""
        if self.peek().text != "]":
            label = self.expect_ident("an action label").text
        self.expect("]")
        guard = self.parse_expr()
        self.expect("->")
        updates = [self.parse_update()]
        while self.peek().text == "+":
            self.advance()
            updates.append(self.parse_update())
        self.expect(";")
        return Command(label, guard, tuple(updates), start.line)

    def parse_update(self) -> Update:
        # A probability prefix 'expr :' is optional; detect it by scanning
        # ahead for a ':' before the update body starts with '(' or 'true'.
        save = self.pos
        prob = None
        try:
            prob = self.parse_expr()
        except ParseError:
            self.pos = save
        if prob is not None and self.peek().text == ":":
            self.advance()
        else:
            self.pos = save
            prob = None
        if self.peek().text == "true":
            self.advance()
            return Update(prob, ())
        assignments = [self.parse_assignment()]
        while self.peek().text == "&":
            self.advance()
            assignments.append(self.parse_assignment())
        return Update(prob, tuple(assignments))

    def parse_assignment(self) -> Assignment:
        self.expect("(")
        var = self.expect_ident("a variable name").text
        self.expect("'")
        self.expect("=")
        expr = self.parse_expr()
        self.expect(")")
        return Assignment(var, expr)

    def parse_label(self) -> LabelDef:
        start = self.expect("label")
        t = self.peek()
        if t.kind != "quoted":
            self.error("expected a quoted label name")
        self.advance()
        name = t.text[1:-1]
        if not _NAME_RE.match(name):
            self.error(f"label name {name!r} must be a plain identifier", t)
        self.expect("=")
        expr = self.parse_expr()
        self.expect(";")
        return LabelDef(name, expr, start.line)

    # expressions, loosest binding first

    def parse_expr(self) -> Expr:
        return self.parse_bool_or()

    def parse_bool_or(self) -> Expr:
        e = self.parse_bool_and()
        while self.peek().text == "|":
            self.advance()
            e = Binary("|", e, self.parse_bool_and())
        return e

    def parse_bool_and(self) -> Expr:
        e = self.parse_bool_not()
        while self.peek().text == "&":
            self.advance()
            e = Binary("&", e, self.parse_bool_not())
        return e

    def parse_bool_not(self) -> Expr:
        if self.peek().text == "!":
            self.advance()
            return Unary("!", self.parse_bool_not())
        return self.parse_comparison()

    def parse_comparison(self) -> Expr:
        e = self.parse_arith()
        t = self.peek()
        if t.text in ("=", "!=", "<", "<=", ">", ">="):
            self.advance()
            return Binary(t.text, e, self.parse_arith())
        return e

    def parse_arith(self) -> Expr:
        e = self.parse_term()
        while self.peek().text in ("+", "-"):
            op = self.advance().text
            e = Binary(op, e, self.parse_term())
        return e

    def parse_term(self) -> Expr:
        e = self.parse_factor()
        while self.peek().text == "*":
            self.advance()
            e = Binary("*", e, self.parse_factor())
        return e

    def parse_factor(self) -> Expr:
        t = self.peek()
        if t.text == "(":
            self.advance()
            e = self.parse_bool_or()
            self.expect(")")
            return e
        if t.text == "-":
            self.advance()
            return Unary("-", self.parse_factor())
        if t.kind == "num":
            self.advance()
            if "." in t.text or "e" in t.text or "E" in t.text:
                return Num(float(t.text))
            return Num(int(t.text))
        if t.text == "true":
            self.advance()
            return BoolLit(True)
        if t.text == "false":
            self.advance()
            return BoolLit(False)
        if t.text in ("min", "max"):
            self.advance()
            self.expect("(")
            args = [self.parse_expr()]
            while self.peek().text == ",":
                self.advance()
                args.append(self.parse_expr())
            self.expect(")")
            if len(args) < 2:
                self.error(f"{t.text} needs at least two arguments", t)
            return Call(t.text, tuple(args))
        if t.kind == "ident" and t.text not in _KEYWORDS:
            self.advance()
            return Name(t.text)
        shown = t.text or "end of input"
        self.error(f"expected an expression, got {shown!r}")


def parse_program(text: str, filename: Optional[str] = None) -> Program:
    return _ProgramParser(_tokenize_program(text, filename), filename).parse_program()


# -- constant folding and validation ----------------------------------------


def fold_constants(program: Program,
                   overrides: Optional[Mapping[str, object]] = None) -> dict:
    """Resolve constant definitions in declaration order.

    overrides replace defining expressions by name; overriding an
    undeclared constant, or leaving a definition-less constant without an
    override, is a DomainError.
    """
    overrides = dict(overrides or {})
    values: dict[str, object] = {}
    for c in program.constants:
        if c.name in values:
            raise ParseError(f"constant {c.name!r} defined twice",
                             line=c.line, filename=program.filename)
        if c.name in overrides:
            value = overrides.pop(c.name)
        elif c.expr is not None:
            value = eval_expr(c.expr, values, c.line, program.filename)
        else:
            raise DomainError(f"constant {c.name!r} has no value; supply one")
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ParseError(f"constant {c.name!r} must be numeric",
                             line=c.line, filename=program.filename)
        if c.kind == "int":
            if isinstance(value, float):
                if value != int(value):
                    raise DomainError(
                        f"constant {c.name!r} is declared int, got {value!r}")
                value = int(value)
        else:
            value = float(value)
        values[c.name] = value
    if overrides:
        extra = ", ".join(sorted(overrides))
        raise DomainError(f"override for undeclared constant(s): {extra}")
    return values


@dataclass(frozen=True)
class _ReadyCommand:
    module: str
    label: str
    label_index: int  # position among same-label commands of the module
    guard: Expr
    updates: tuple[tuple[float, tuple[Assignment, ...]], ...]
    line: int
    action: Optional[str]  # fixed action name for unlabelled commands


@dataclass
class _ReadyProgram:
    consts: dict
    var_order: tuple[str, ...]
    bounds: dict[str, tuple[int, int]]
    init: dict[str, int]
    owner: dict[str, str]
    modules: tuple[str, ...]
    by_label: dict[str, dict[str, list[_ReadyCommand]]]  # label -> module -> cmds
    internal: tuple[_ReadyCommand, ...]
    label_order: tuple[str, ...]
    labels: tuple[LabelDef, ...]
    filename: Optional[str]


def _prepare(program: Program, consts: dict) -> _ReadyProgram:
    fn = program.filename
    seen_modules = set()
    var_order: list[str] = []
    bounds: dict[str, tuple[int, int]] = {}
    init: dict[str, int] = {}
    owner: dict[str, str] = {}
    for mod in program.modules:
        if mod.name in seen_modules:
            raise ParseError(f"module {mod.name!r} defined twice",
                             line=mod.line, filename=fn)
        seen_modules.add(mod.name)
        for decl in mod.variables:
            if decl.name in owner or decl.name in consts:
                raise ParseError(f"name {decl.name!r} is already in use",
                                 line=decl.line, filename=fn)
            low = eval_expr(decl.low, consts, decl.line, fn)
            high = eval_expr(decl.high, consts, decl.line, fn)
            if not isinstance(low, int) or not isinstance(high, int) \
                    or isinstance(low, bool) or isinstance(high, bool):
                raise ParseError(f"bounds of {decl.name!r} must be integers",
                                 line=decl.line, filename=fn)
            if low > high:
                raise ParseError(f"empty range [{low}..{high}] for {decl.name!r}",
                                 line=decl.line, filename=fn)
            start = low
            if decl.init is not None:
                start = eval_expr(decl.init, consts, decl.line, fn)
                if not isinstance(start, int) or isinstance(start, bool):
                    raise ParseError(f"initial value of {decl.name!r} must be "
                                     "an integer", line=decl.line, filename=fn)
            if not low <= start <= high:
                raise ParseError(f"initial value {start} of {decl.name!r} "
                                 f"escapes [{low}..{high}]",
                                 line=decl.line, filename=fn)
            owner[decl.name] = mod.name
            var_order.append(decl.name)
            bounds[decl.name] = (low, high)
            init[decl.name] = start

    scope = set(owner) | set(consts)

    def check_scope(expr, line):
        for ident in sorted(_names_in(expr)):
            if ident not in scope:
                raise ParseError(f"unknown identifier {ident!r}",
                                 line=line, filename=fn)

    by_label: dict[str, dict[str, list[_ReadyCommand]]] = {}
    label_order: list[str] = []
    internal: list[_ReadyCommand] = []
    internal_line_counts: dict[tuple[str, int], int] = {}
    for mod in program.modules:
        group_counts: dict[str, int] = {}
        for cmd in mod.commands:
            check_scope(cmd.guard, cmd.line)
            probs = []
            for upd in cmd.updates:
                if upd.prob is None:
                    p = 1.0
                else:
                    for ident in sorted(_names_in(upd.prob)):
                        if ident not in consts:
                            raise ParseError(
                                f"branch probability must be constant, "
                                f"found {ident!r}", line=cmd.line, filename=fn)
                    p = eval_expr(upd.prob, consts, cmd.line, fn)
                if isinstance(p, bool) or not isinstance(p, (int, float)):
                    raise ParseError("branch probability must be numeric",
                                     line=cmd.line, filename=fn)
                p = float(p)
                if p <= 0.0:
                    raise ParseError(f"branch probability {p!r} must be "
                                     "positive", line=cmd.line, filename=fn)
                assigned = set()
                for a in upd.assignments:
                    if a.var not in owner:
                        raise ParseError(f"assignment to unknown variable "
                                         f"{a.var!r}", line=cmd.line, filename=fn)
                    if owner[a.var] != mod.name:
                        raise ParseError(
                            f"module {mod.name!r} may not assign {a.var!r} "
                            f"owned by {owner[a.var]!r}",
                            line=cmd.line, filename=fn)
                    if a.var in assigned:
                        raise ParseError(f"variable {a.var!r} assigned twice "
                                         "in one update", line=cmd.line,
                                         filename=fn)
                    assigned.add(a.var)
                    check_scope(a.expr, cmd.line)
                probs.append((p, upd.assignments))
            total = sum(p for p, _ in probs)
            if abs(total - 1.0) > 1e-9:
                raise ParseError(f"update probabilities sum to {total!r}, "
                                 "expected 1", line=cmd.line, filename=fn)
            if cmd.label:
                idx = group_counts.get(cmd.label, 0)
                group_counts[cmd.label] = idx + 1
                ready = _ReadyCommand(mod.name, cmd.label, idx, cmd.guard,
                                      tuple(probs), cmd.line, None)
                if cmd.label not in by_label:
                    by_label[cmd.label] = {}
                    label_order.append(cmd.label)
                by_label[cmd.label].setdefault(mod.name, []).append(ready)
            else:
                key = (mod.name, cmd.line)
                k = internal_line_counts.get(key, 0)
                internal_line_counts[key] = k + 1
                action = f"{mod.name}:{cmd.line}"
                if k:
                    action = f"{action}#{k}"
                internal.append(_ReadyCommand(mod.name, "", 0, cmd.guard,
                                              tuple(probs), cmd.line, action))

    seen_labels = set()
    for ldef in program.labels:
        if ldef.name in seen_labels:
            raise ParseError(f"label {ldef.name!r} defined twice",
                             line=ldef.line, filename=fn)
        seen_labels.add(ldef.name)
        check_scope(ldef.expr, ldef.line)

    return _ReadyProgram(consts, tuple(var_order), bounds, init, owner,
                         tuple(m.name for m in program.modules), by_label,
                         tuple(internal), tuple(label_order), program.labels, fn)


# -- elaboration -------------------------------------------------------------


class SourceMap:
    """Transition provenance: (state, action id, successor) to the set of
    guarded commands, as (module name, line) pairs, that produced it."""

    def __init__(self, mapping: dict):
        self._map = mapping

    def lookup(self, s: int, aid: int, t: int) -> tuple[tuple[str, int], ...]:
        return self._map.get((s, aid, t), ())

    def __len__(self):
        return len(self._map)

    def items(self):
        return self._map.items()

    @staticmethod
    def display_action(name: str) -> str:
        """Reported label of a possibly disambiguated action name."""
        return name.split("#", 1)[0]


def build_mdp(program: Program,
              constants: Optional[Mapping[str, object]] = None,
              state_cap: int = DEFAULT_STATE_CAP) -> tuple[Mdp, SourceMap]:
    """Explore the program's reachable state space into an explicit MDP.

    Nondeterministic alternatives arising from several enabled commands
    (or command combinations under synchronization) with the same label
    become distinct actions named label#i or label#i.j...; unlabelled
    commands act under a module:line name. Raises BudgetError when more
    than state_cap states become reachable and DomainError when an update
    drives a variable out of its range, naming the command line and the
    offending valuation.
    """
    consts = fold_constants(program, constants)
    ready = _prepare(program, consts)
    fn = ready.filename
    var_order = ready.var_order

    def as_tuple(valuation: dict) -> tuple[int, ...]:
        return tuple(valuation[v] for v in var_order)

    def describe(valuation: dict) -> str:
        return ",".join(f"{v}={valuation[v]}" for v in var_order)

    init_val = dict(ready.init)
    ids: dict[tuple[int, ...], int] = {as_tuple(init_val): 0}
    valuations: list[dict] = [init_val]
    transitions: dict[tuple[int, str], list[tuple[int, float]]] = {}
    sources: dict[tuple[int, str, int], set[tuple[str, int]]] = {}

    def intern_state(valuation: dict) -> int:
        key = as_tuple(valuation)
        sid = ids.get(key)
        if sid is None:
            sid = len(valuations)
            if sid >= state_cap:
                raise BudgetError(f"state space exceeds the cap of "
                                  f"{state_cap} states")
            ids[key] = sid
            valuations.append(valuation)
        return sid

    def fire(sid: int, env: dict, action: str, combo: tuple[_ReadyCommand, ...]):
        current = valuations[sid]
        dist: dict[tuple[int, ...], float] = {}  # insertion order is firing order
        targets: dict[tuple[int, ...], dict] = {}
        for branches in product(*(c.updates for c in combo)):
            prob = 1.0
            target = dict(current)
            for cmd, (p, assignments) in zip(combo, branches):
                prob *= p
                for a in assignments:
                    value = eval_expr(a.expr, env, cmd.line, fn)
                    if isinstance(value, bool) or not isinstance(value, int):
                        raise ParseError(f"update of {a.var!r} must be an "
                                         "integer", line=cmd.line, filename=fn)
                    low, high = ready.bounds[a.var]
                    if not low <= value <= high:
                        raise DomainError(
                            f"line {cmd.line}: update {a.var}'={value} leaves "
                            f"[{low}..{high}] at state {describe(current)}")
                    target[a.var] = value
            key = as_tuple(target)
            if key in dist:
                dist[key] += prob
            else:
                dist[key] = prob
                targets[key] = target
        out = []
        for key, prob in dist.items():
            tid = intern_state(targets[key])
            out.append((tid, prob))
            src = sources.setdefault((sid, action, tid), set())
            for cmd in combo:
                src.add((cmd.module, cmd.line))
        transitions[(sid, action)] = out

    sid = 0
    while sid < len(valuations):
        env = dict(ready.consts)
        env.update(valuations[sid])
        for label in ready.label_order:
            participants = [m for m in ready.modules
                            if m in ready.by_label[label]]
            enabled: list[list[_ReadyCommand]] = []
            blocked = False
            for m in participants:
                here = [c for c in ready.by_label[label][m]
                        if eval_expr(c.guard, env, c.line, fn) is True]
                if not here:
                    blocked = True
                    break
                enabled.append(here)
            if blocked:
                continue
            for combo in product(*enabled):
                sig = tuple(c.label_index for c in combo)
                if any(sig):
                    action = label + "#" + ".".join(str(i) for i in sig)
                else:
                    action = label
                fire(sid, env, action, combo)
        for cmd in ready.internal:
            if eval_expr(cmd.guard, env, cmd.line, fn) is True:
                fire(sid, env, cmd.action, (cmd,))
        sid += 1

    labels: dict[int, set[str]] = {}
    known_aps = [l.name for l in ready.labels]
    for s, valuation in enumerate(valuations):
        env = dict(ready.consts)
        env.update(valuation)
        here = set()
        for ldef in ready.labels:
            value = eval_expr(ldef.expr, env, ldef.line, fn)
            if not isinstance(value, bool):
                raise ParseError(f"label {ldef.name!r} must be boolean",
                                 line=ldef.line, filename=fn)
            if value:
                here.add(ldef.name)
        if here:
            labels[s] = here

    state_names = tuple(describe(v) for v in valuations)
    m = Mdp(len(valuations), 0, transitions, labels, state_names)
    # register defined labels that hold nowhere, so properties naming them
    # evaluate to false instead of erroring on an unknown proposition
    for name in known_aps:
        m._intern_ap(name)

    src_by_id: dict[tuple[int, int, int], tuple[tuple[str, int], ...]] = {}
    for (s, action, t), cmds in sources.items():
        src_by_id[(s, m.action_id(action), t)] = tuple(sorted(cmds))
    return m, SourceMap(src_by_id)
