"""Maximal until probabilities and threshold verdicts for MDPs.

Only upper-threshold properties (P<=p, P<p) are checked directly; a lower
threshold on a path formula is the complement of an upper threshold on the
negated formula and callers are expected to rewrite it that way.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .errors import BudgetError, DomainError
from .mdp import Mdp, Scheduler
from .pctl import PathFormula, PropertySpec, eval_state_formula

DEFAULT_EPSILON = 1e-6
# Extraction treats one-step backups within this of the state value as tied.
SCHEDULER_TIE_TOL = 1e-9


@dataclass
class ValueVector:
    """Per-state maximal until probabilities plus iteration bookkeeping."""

    values: list[float]
    iterations: int
    residual: float
    path: PathFormula
    target_states: frozenset[int]
    zero_states: frozenset[int]


@dataclass
class Verdict:
    holds: bool
    pmax: float
    threshold: float
    comparison: str
    witness: Optional[Scheduler]
    value_vector: ValueVector

    def __str__(self):
        word = "holds" if self.holds else "violated"
        return (f"{word}: Pmax = {self.pmax:.10g} vs "
                f"{self.comparison} {self.threshold:.10g}")


def _sat_sets(m: Mdp, psi: PathFormula):
    labels = m.label_map()
    known = set(m.ap_names)
    sat1 = frozenset(s for s in m.states
                     if eval_state_formula(labels, s, psi.left, known))
    sat2 = frozenset(s for s in m.states
                     if eval_state_formula(labels, s, psi.right, known))
    return sat1, sat2


def _backward_reach(m: Mdp, sat1, sat2) -> frozenset[int]:
    """States that can reach sat2 while moving through sat1 states only."""
    rev: dict[int, list[int]] = {}
    for (s, aid), dist in m.transition_items():
        if s in sat1 and s not in sat2:
            for t, _ in dist:
                rev.setdefault(t, []).append(s)
    reach = set(sat2)
    stack = list(sat2)
    while stack:
        t = stack.pop()
        for s in rev.get(t, ()):
            if s not in reach:
                reach.add(s)
                stack.append(s)
    return frozenset(reach)


def _backup(m: Mdp, s: int, aid: int, values) -> float:
    return sum(p * values[t] for t, p in m.distribution(s, aid))


def compute_pmax(m: Mdp, psi: PathFormula, epsilon: float = DEFAULT_EPSILON,
                 max_iterations: int = 1_000_000) -> ValueVector:
    """Maximal probability of psi from every state, over all schedulers.

    Right-operand states are fixed at one and states that cannot reach one
    through left-operand states at zero; the rest converge by value
    iteration until the sup-norm residual drops below epsilon. A step bound
    runs exactly that many backward steps instead (the result then is the
    optimum over step-dependent choices). Weak until is not supported here.
    """
    if psi.op != "U":
        raise DomainError("only until path formulas have a checked maximal "
                          "probability; weak until is not supported")
    if epsilon <= 0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    sat1, sat2 = _sat_sets(m, psi)

    if psi.bound is not None:
        values = [1.0 if s in sat2 else 0.0 for s in m.states]
        residual = 0.0
        for _ in range(psi.bound):
            nxt = list(values)
            residual = 0.0
            for s in m.states:
                if s in sat2 or s not in sat1:
                    continue
                best = max(_backup(m, s, aid, values)
                           for aid in m.enabled_actions(s))
                residual = max(residual, abs(best - nxt[s]))
                nxt[s] = best
            values = nxt
        zero = frozenset(s for s in m.states if values[s] == 0.0)
        return ValueVector(values, psi.bound, residual, psi, sat2, zero)

    reach = _backward_reach(m, sat1, sat2)
    zero = frozenset(s for s in m.states if s not in reach)
    values = [1.0 if s in sat2 else 0.0 for s in m.states]
    pending = [s for s in m.states if s in reach and s not in sat2]
    iterations = 0
    while True:
        if iterations >= max_iterations:
            raise BudgetError(
                f"value iteration did not reach residual {epsilon} "
                f"within {max_iterations} sweeps")
        iterations += 1
        residual = 0.0
        nxt = list(values)
        for s in pending:
            best = max(_backup(m, s, aid, values) for aid in m.enabled_actions(s))
            residual = max(residual, abs(best - values[s]))
            nxt[s] = best
        values = nxt
        if residual < epsilon:
            break
    return ValueVector(values, iterations, residual, psi, sat2, zero)


def extract_max_scheduler(m: Mdp, vv: ValueVector,
                          tie_tol: float = SCHEDULER_TIE_TOL) -> Scheduler:
    """Pick one value-maximizing action per state.

    Among actions whose one-step backup ties with the state value (within
    tie_tol), the choice is made layer by layer outward from the target
    states so that every chosen action makes progress toward them; a bare
    argmax could otherwise settle on a value-preserving self-loop and the
    induced chain would lose the promised probability mass. Ties within a
    layer go to the lowest action id. Target and zero-value states take
    their lowest enabled action id.
    """
    values = vv.values
    choice: dict[int, int] = {}
    for s in vv.target_states | vv.zero_states:
        acts = m.enabled_actions(s)
        if acts:
            choice[s] = acts[0]
    done = set(vv.target_states)
    remaining = [s for s in m.states
                 if s not in done and s not in vv.zero_states]
    while remaining:
        placed = []
        for s in remaining:
            best = max(_backup(m, s, aid, values) for aid in m.enabled_actions(s))
            pick = None
            for aid in m.enabled_actions(s):
                if _backup(m, s, aid, values) < best - tie_tol:
                    continue
                if any(t in done for t, _ in m.distribution(s, aid)):
                    pick = aid
                    break
            if pick is not None:
                choice[s] = pick
                placed.append(s)
        if not placed:
            # No further progress possible; remaining states cannot reach
            # the targets through tied actions, so any maximizer will do.
            for s in remaining:
                ranked = sorted(m.enabled_actions(s),
                                key=lambda aid: (-_backup(m, s, aid, values), aid))
                choice[s] = ranked[0]
            break
        for s in placed:
            done.add(s)
        remaining = [s for s in remaining if s not in done]
    return Scheduler(choice)


def check_property(m: Mdp, spec: PropertySpec,
                   epsilon: float = DEFAULT_EPSILON) -> Verdict:
    """Decide an upper-threshold property and, when violated, attach a
    probability-maximizing scheduler as witness."""
    if spec.comparison not in ("<=", "<"):
        raise DomainError(
            f"only upper-threshold comparisons are checked, got "
            f"{spec.comparison!r}; rewrite lower thresholds by complementation")
    vv = compute_pmax(m, spec.path, epsilon)
    pmax = vv.values[m.init]
    if spec.comparison == "<=":
        holds = pmax <= spec.threshold
    else:
        holds = pmax < spec.threshold
    witness = None if holds else extract_max_scheduler(m, vv)
    return Verdict(holds, pmax, spec.threshold, spec.comparison, witness, vv)


def mass_exceeds(spec: PropertySpec, mass: float) -> bool:
    """Does this much path probability witness the property's violation?"""
    if spec.comparison == "<=":
        return mass > spec.threshold
    if spec.comparison == "<":
        return mass >= spec.threshold
    raise DomainError(f"not an upper-threshold comparison: {spec.comparison!r}")
