"""Cause and blame diagnosis of probabilistic counterexamples.

Guided by structural-equation notions of causality: a literal of the
property holding at a counterexample state is a cause when flipping it
(possibly together with a few other propositions at that state) would
invalidate the counterexample. Its degree of responsibility is 1/(k+1)
where k is the number of helper flips needed; the degree of blame of an
action aggregates, over its transitions inside the counterexample, the
best responsibility found at each successor weighted by the probability
mass crossing that transition.

Cause extraction itself is syntactic and cheap: it walks the negation
normal form of the guard/target formulas once per state, granting full
responsibility through conjunctions and splitting it at disjunctions whose
two sides both hold. A brute-force semantic oracle (responsibility_oracle)
is provided to cross-check the syntactic degrees on small alphabets.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import combinations
from typing import Mapping, Optional

from .counterexample import Counterexample, counterexample_to_dict
from .checker import mass_exceeds
from .errors import BudgetError, DomainError
from .pctl import (And, Atom, FalseFormula, Not, Or, PropertySpec, StateFormula,
                   TrueFormula, eval_path_formula, eval_state_formula,
                   format_property, path_atoms, to_nnf)

# Absolute tolerance for "these two probability masses coincide" tests in
# the structural propositions; masses are sums of path probabilities, so
# genuinely different sums differ by at least one path's probability.
MASS_EQ_TOL = 1e-12

DEFAULT_ORACLE_VAR_CAP = 20


# -- probability masses ------------------------------------------------------


def state_mass(cx: Counterexample, s: int) -> float:
    """Probability mass of the counterexample paths that visit s."""
    return sum(wp.probability for wp in cx.paths if s in wp.path.states)


def transition_mass(cx: Counterexample, s: int, aid: int, t: int) -> float:
    """Mass of the paths taking the step s -aid-> t at least once."""
    total = 0.0
    for wp in cx.paths:
        for _, u, a, v in wp.path.steps():
            if u == s and a == aid and v == t:
                total += wp.probability
                break
    return total


def _all_masses(cx: Counterexample, counter: list[int]):
    smass: dict[int, float] = {}
    tmass: dict[tuple[int, int, int], float] = {}
    for wp in cx.paths:
        for s in sorted(set(wp.path.states)):
            smass[s] = smass.get(s, 0.0) + wp.probability
            counter[0] += 1
        steps = sorted({(u, a, v) for _, u, a, v in wp.path.steps()})
        for key in steps:
            tmass[key] = tmass.get(key, 0.0) + wp.probability
            counter[0] += 1
    return smass, tmass


# -- cause extraction --------------------------------------------------------


@dataclass(frozen=True)
class Cause:
    """A property literal holding at a counterexample state, with its
    degree of responsibility and the mass of the paths through the state."""

    state: int
    ap: str
    value: bool
    dr: float
    origin: str  # "guard", "target", or "both"
    mass: float = 0.0
    normalized_mass: float = 0.0

    @property
    def literal(self) -> str:
        return self.ap if self.value else f"!{self.ap}"

    @property
    def score(self) -> float:
        """Ranking weight: responsibility times absolute mass."""
        return self.dr * self.mass

    def describe(self) -> str:
        return f"({self.state}, {self.literal})"


def find_causes(s: int, labels: Mapping[int, frozenset[str]],
                phi: StateFormula, w: int = 0,
                _counter: Optional[list[int]] = None
                ) -> dict[tuple[str, bool], float]:
    """Literals of phi that support its truth at s, with responsibilities.

    phi must be in negation normal form and hold at s (DomainError
    otherwise). w counts the disjunctions already split on the way down:
    every literal reached at depth w gets degree 1/(w+1), conjunctions
    pass w through, and a disjunction whose both sides hold recurses into
    both at w+1. Constant true contributes no causes. Duplicate literals
    keep their largest degree.
    """
    if _counter is not None:
        _counter[0] += 1
    if isinstance(phi, TrueFormula):
        return {}
    if isinstance(phi, FalseFormula):
        raise DomainError(f"formula does not hold at state {s}")
    if isinstance(phi, Atom):
        if phi.name in labels.get(s, frozenset()):
            return {(phi.name, True): 1.0 / (w + 1)}
        raise DomainError(f"formula does not hold at state {s}: "
                          f"{phi.name} is false there")
    if isinstance(phi, Not):
        if not isinstance(phi.child, Atom):
            raise DomainError("cause extraction needs negation normal form")
        if phi.child.name not in labels.get(s, frozenset()):
            return {(phi.child.name, False): 1.0 / (w + 1)}
        raise DomainError(f"formula does not hold at state {s}: "
                          f"{phi.child.name} is true there")
    if isinstance(phi, And):
        out = find_causes(s, labels, phi.left, w, _counter)
        for lit, dr in find_causes(s, labels, phi.right, w, _counter).items():
            if dr > out.get(lit, 0.0):
                out[lit] = dr
        return out
    if isinstance(phi, Or):
        left_holds = eval_state_formula(labels, s, phi.left)
        right_holds = eval_state_formula(labels, s, phi.right)
        if left_holds and right_holds:
            out = find_causes(s, labels, phi.left, w + 1, _counter)
            for lit, dr in find_causes(s, labels, phi.right, w + 1, _counter).items():
                if dr > out.get(lit, 0.0):
                    out[lit] = dr
            return out
        if left_holds:
            return find_causes(s, labels, phi.left, w, _counter)
        if right_holds:
            return find_causes(s, labels, phi.right, w, _counter)
        raise DomainError(f"formula does not hold at state {s}")
    raise DomainError(f"not a state formula: {phi!r}")


def _flip_labels(labels: Mapping[int, frozenset[str]], s: int,
                 aps: set[str]) -> dict[int, frozenset[str]]:
    out = dict(labels)
    out[s] = frozenset(set(out.get(s, frozenset())) ^ aps)
    return out


def _satisfying_mass(cx: Counterexample,
                     labels: Mapping[int, frozenset[str]]) -> float:
    return sum(wp.probability for wp in cx.paths
               if eval_path_formula(labels, wp.path.states, cx.spec.path))


def _check_literal(cx: Counterexample, s: int, literal: tuple[str, bool]):
    ap, value = literal
    actual = ap in cx.labels.get(s, frozenset())
    if actual != value:
        raise DomainError(f"literal {ap if value else '!' + ap} does not "
                          f"describe state {s}")


def is_critical(cx: Counterexample, s: int, literal: tuple[str, bool]) -> bool:
    """Does flipping the literal at every occurrence of s invalidate cx?

    The flip is applied to the state's labelling, every path is re-judged
    under full finite until semantics (a flip may create an earlier target
    state, which still counts as satisfaction), and the counterexample is
    invalid once the still-satisfying mass no longer witnesses the
    violation.
    """
    _check_literal(cx, s, literal)
    flipped = _flip_labels(cx.labels, s, {literal[0]})
    return not mass_exceeds(cx.spec, _satisfying_mass(cx, flipped))


def responsibility_oracle(cx: Counterexample, s: int,
                          literal: tuple[str, bool],
                          var_cap: int = DEFAULT_ORACLE_VAR_CAP
                          ) -> Optional[float]:
    """Semantic degree of responsibility of the literal at s, or None.

    Searches subsets W of the property's other propositions in increasing
    size; the degree is 1/(|W|+1) for the smallest W whose flip at s leaves
    the counterexample valid while the additional flip of the literal
    invalidates it. Exponential in the alphabet, hence the var_cap guard.
    """
    _check_literal(cx, s, literal)
    ap = literal[0]
    alphabet = sorted(path_atoms(cx.spec.path))
    if len(alphabet) > var_cap:
        raise BudgetError(f"oracle alphabet has {len(alphabet)} propositions, "
                          f"cap is {var_cap}")
    others = [a for a in alphabet if a != ap]
    for size in range(len(others) + 1):
        for group in combinations(others, size):
            world = _flip_labels(cx.labels, s, set(group))
            if not mass_exceeds(cx.spec, _satisfying_mass(cx, world)):
                continue  # these flips alone already invalidate
            beyond = _flip_labels(world, s, {ap})
            if not mass_exceeds(cx.spec, _satisfying_mass(cx, beyond)):
                return 1.0 / (size + 1)
    return None


def collect_causes(cx: Counterexample,
                   _counter: Optional[list[int]] = None
                   ) -> dict[tuple[int, str, bool], Cause]:
    """All causes of the counterexample, deduplicated per (state, literal).

    Final path states contribute causes of the until target, interior
    states of the until guard. A literal reached from both roles keeps the
    larger degree and origin "both". Masses are left at zero; the report
    generator fills them in.
    """
    counter = _counter if _counter is not None else [0]
    phi1 = to_nnf(cx.spec.path.left)
    phi2 = to_nnf(cx.spec.path.right)
    per_state: dict[tuple[int, str], dict] = {}
    out: dict[tuple[int, str, bool], Cause] = {}
    for wp in cx.paths:
        states = wp.path.states
        for pos, s in enumerate(states):
            role = "target" if pos == len(states) - 1 else "guard"
            cache_key = (s, role)
            found = per_state.get(cache_key)
            if found is None:
                phi = phi2 if role == "target" else phi1
                found = find_causes(s, cx.labels, phi, 0, counter)
                per_state[cache_key] = found
            for (ap, value), dr in found.items():
                key = (s, ap, value)
                prev = out.get(key)
                if prev is None:
                    out[key] = Cause(s, ap, value, dr, role)
                elif prev.origin != role or dr > prev.dr:
                    origin = prev.origin if prev.origin == role else "both"
                    out[key] = Cause(s, ap, value, max(prev.dr, dr), origin)
    return out


def blame(cx: Counterexample, s: int, aid: int,
          causes: Mapping[tuple[int, str, bool], Cause]) -> float:
    """Degree of blame of action aid at state s within cx.

    Sums, over the action's successors inside the counterexample, the
    highest cause responsibility at the successor times the mass of the
    paths crossing that transition. Successors without causes contribute
    nothing.
    """
    best: dict[int, float] = {}
    for (state, _, _), cause in causes.items():
        if cause.dr > best.get(state, 0.0):
            best[state] = cause.dr
    total = 0.0
    for t in sorted({v for wp in cx.paths for _, u, a, v in wp.path.steps()
                     if u == s and a == aid}):
        total += best.get(t, 0.0) * transition_mass(cx, s, aid, t)
    return total


# -- structural propositions -------------------------------------------------


def check_prop1(cx: Counterexample, s: int, aid: int, t: int) -> bool:
    """Transition mass equals state mass exactly when t is the only
    successor of s inside the counterexample. Returns whether that
    biconditional holds on this instance."""
    tm = transition_mass(cx, s, aid, t)
    sm = state_mass(cx, s)
    equal = abs(tm - sm) <= MASS_EQ_TOL
    successors = {v for wp in cx.paths for _, u, a, v in wp.path.steps()
                  if u == s and a == aid}
    unique = successors == {t}
    return equal == unique


def check_prop2(cx: Counterexample, s: int, aid: int) -> bool:
    """Blame equals the total counterexample mass exactly when every path
    crosses this action into a state holding a full-responsibility cause.
    Returns whether that biconditional holds on this instance."""
    causes = collect_causes(cx)
    best: dict[int, float] = {}
    for (state, _, _), cause in causes.items():
        if cause.dr > best.get(state, 0.0):
            best[state] = cause.dr
    db = blame(cx, s, aid, causes)
    equal = abs(db - cx.total_mass) <= MASS_EQ_TOL
    covered = all(
        any(u == s and a == aid and best.get(v, 0.0) == 1.0
            for _, u, a, v in wp.path.steps())
        for wp in cx.paths)
    return equal == covered


# -- report generation -------------------------------------------------------


@dataclass(frozen=True)
class TransitionDiagnosis:
    source: int
    action: int
    target: int
    mass: float
    causes: tuple[Cause, ...]
    commands: tuple[tuple[str, int], ...] = ()


@dataclass(frozen=True)
class BlameEntry:
    state: int
    action: int
    action_label: str
    db: float
    transitions: tuple[TransitionDiagnosis, ...]


@dataclass
class DiagnosisReport:
    spec: PropertySpec
    counterexample: Counterexample
    causes: tuple[Cause, ...]
    entries: tuple[BlameEntry, ...]
    most_responsible: tuple[Cause, ...]
    most_blamed: tuple[BlameEntry, ...]
    pmax: Optional[float] = None
    operation_count: int = 0

    def to_dict(self) -> dict:
        cx_dict = counterexample_to_dict(self.counterexample)
        return {
            "format_version": 1,
            "property": format_property(self.spec),
            "comparison": self.spec.comparison,
            "threshold": self.spec.threshold,
            "pmax": self.pmax,
            "counterexample": {
                "total_mass": cx_dict["total_mass"],
                "paths": cx_dict["paths"],
            },
            "actions": [
                {
                    "state": e.state,
                    "action": e.action_label,
                    "dB": e.db,
                    "transitions": [
                        {
                            "to": t.target,
                            "mass": t.mass,
                            "causes": [_cause_dict(c) for c in t.causes],
                            "source": [{"module": mod, "line": line}
                                       for mod, line in t.commands],
                        }
                        for t in e.transitions
                    ],
                }
                for e in self.entries
            ],
            "most_responsible": [_cause_dict(c) for c in self.most_responsible],
            "most_blamed": [
                {"state": e.state, "action": e.action_label, "dB": e.db}
                for e in self.most_blamed
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def render_text(self, normalize: bool = False) -> str:
        return render_text_report(self, normalize=normalize)


def _cause_dict(c: Cause) -> dict:
    return {
        "state": c.state,
        "literal": c.literal,
        "dR": c.dr,
        "mass": c.mass,
        "normalized_mass": c.normalized_mass,
        "origin": c.origin,
    }


def generate_diagnoses(cx: Counterexample, spec: Optional[PropertySpec] = None,
                       source_map=None, pmax: Optional[float] = None
                       ) -> DiagnosisReport:
    """Rank the counterexample's actions by blame and its causes by
    responsibility times mass.

    Actions are ordered by descending blame, their transitions by the best
    cause score at the target, and causes within a transition by score;
    all remaining ties fall back to state id, action label, then
    proposition name, so reports are deterministic. When a source map is
    given (models built from guarded-command programs), each transition
    carries the (module, line) commands it elaborates.

    Ranking by responsibility times absolute mass orders causes exactly as
    the normalized variant would: normalization divides every score by the
    same total.
    """
    if spec is None:
        spec = cx.spec
    if spec.path.op != "U":
        raise DomainError("diagnosis handles until properties only")
    counter = [0]
    work_cx = cx if spec is cx.spec else Counterexample(
        cx.paths, cx.total_mass, cx.scheduler, spec, cx.labels,
        cx.action_names, cx.state_names)
    causes = collect_causes(work_cx, _counter=counter)
    smass, tmass = _all_masses(work_cx, counter)
    total = work_cx.total_mass

    sized: dict[tuple[int, str, bool], Cause] = {}
    for key, c in causes.items():
        m = smass.get(c.state, 0.0)
        sized[key] = Cause(c.state, c.ap, c.value, c.dr, c.origin, m,
                           m / total if total else 0.0)

    best_dr: dict[int, float] = {}
    by_state: dict[int, list[Cause]] = {}
    for c in sized.values():
        if c.dr > best_dr.get(c.state, 0.0):
            best_dr[c.state] = c.dr
        by_state.setdefault(c.state, []).append(c)
    for cs in by_state.values():
        cs.sort(key=lambda c: (-c.score, c.ap))

    grouped: dict[tuple[int, int], list[tuple[int, float]]] = {}
    for (u, a, v), m in sorted(tmass.items()):
        grouped.setdefault((u, a), []).append((v, m))

    entries = []
    for (u, a), succs in grouped.items():
        db = 0.0
        trans = []
        for v, m in succs:
            counter[0] += 1
            db += best_dr.get(v, 0.0) * m
            commands = ()
            if source_map is not None:
                commands = tuple(source_map.lookup(u, a, v))
            trans.append(TransitionDiagnosis(u, a, v, m,
                                             tuple(by_state.get(v, ())),
                                             commands))
        trans.sort(key=lambda t: (-max((c.score for c in t.causes), default=0.0),
                                  t.target))
        entries.append(BlameEntry(u, a, work_cx.action_name(a), db,
                                  tuple(trans)))
    entries.sort(key=lambda e: (-e.db, e.state, e.action_label))

    ranked = sorted(sized.values(), key=lambda c: (-c.score, c.state, c.ap))
    top_score = ranked[0].score if ranked else 0.0
    most_responsible = tuple(c for c in ranked
                             if abs(c.score - top_score) <= MASS_EQ_TOL)
    top_blame = entries[0].db if entries else 0.0
    most_blamed = tuple(e for e in entries
                        if abs(e.db - top_blame) <= MASS_EQ_TOL)

    return DiagnosisReport(spec, work_cx, tuple(ranked), tuple(entries),
                           most_responsible, most_blamed, pmax=pmax,
                           operation_count=counter[0])


# -- text rendering ----------------------------------------------------------


def _format_path(cx: Counterexample, wp) -> str:
    bits = [cx.state_name(wp.path.states[0])]
    for _, _, a, v in wp.path.steps():
        bits.append(f"-{cx.action_name(a)}-> {cx.state_name(v)}")
    return " ".join(bits)


def _pct(x: float) -> str:
    return f"{100.0 * x:.2f}%"


def render_text_report(report: DiagnosisReport, normalize: bool = False) -> str:
    cx = report.counterexample
    lines = [f"property: {format_property(report.spec)}"]
    if report.pmax is not None:
        lines.append(f"verdict: VIOLATED (Pmax = {report.pmax:.6g}, "
                     f"threshold {report.spec.threshold:g})")
    lines.append(f"counterexample: {len(cx.paths)} paths, "
                 f"total probability {cx.total_mass:.6g}")
    for i, wp in enumerate(cx.paths, start=1):
        lines.append(f"  {i}) {_format_path(cx, wp)}   p={wp.probability:.6g}")
    lines.append("ranked actions by blame:")
    for rank, e in enumerate(report.entries, start=1):
        lines.append(f"  {rank}. action {e.action_label} at state "
                     f"{cx.state_name(e.state)}: dB = {e.db:.6g}")
        for t in e.transitions:
            lines.append(f"       -> {cx.state_name(t.target)}  "
                         f"(mass {t.mass:.6g})")
            for c in t.causes:
                if normalize:
                    shown = (f"normalized mass {c.normalized_mass:.6g}, "
                             f"share {_pct(c.dr * c.normalized_mass)}")
                else:
                    shown = f"mass {c.mass:.6g}, score {c.score:.6g}"
                lines.append(f"          cause {c.describe()}: "
                             f"dR = {c.dr:g}, {shown}")
            for mod, line_no in t.commands:
                lines.append(f"          command: module {mod} line {line_no}")
    if report.most_responsible:
        best = ", ".join(c.describe() for c in report.most_responsible)
        lines.append(f"most responsible cause: {best}")
    if report.most_blamed:
        best = ", ".join(f"{e.action_label} at {cx.state_name(e.state)}"
                         for e in report.most_blamed)
        lines.append(f"most blamed action: {best}")
    return "\n".join(lines) + "\n"
