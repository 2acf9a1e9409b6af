"""Explicit-state Markov decision processes, schedulers, and induced chains.

States are dense integers 0..n-1. Action labels and atomic propositions are
interned into dense id tables at construction; instances are treated as
immutable afterwards.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional

from .errors import DomainError, ParseError

# Tolerance for "successor probabilities sum to one" checks.
PROB_SUM_TOL = 1e-9


class Mdp:
    def __init__(self, num_states, init, transitions, labels=None, state_names=None):
        """Build an MDP from plain dictionaries.

        transitions maps (state, action label) to an iterable of
        (successor, probability) pairs. labels maps a state to an iterable
        of atomic proposition names; unlisted states carry no labels.
        state_names is an optional display table used only for reports.
        """
        self.num_states = int(num_states)
        self.init = int(init)
        self.action_names: list[str] = []
        self._action_ids: dict[str, int] = {}
        self._trans: dict[tuple[int, int], tuple[tuple[int, float], ...]] = {}
        self._enabled: dict[int, list[int]] = {}

        for (s, act), dist in transitions.items():
            aid = self._intern_action(str(act))
            key = (int(s), aid)
            if key in self._trans:
                raise DomainError(
                    f"transitions listed twice for state {s} action {act!r}")
            self._trans[key] = tuple((int(t), float(p)) for t, p in dist)
            self._enabled.setdefault(int(s), []).append(aid)
        for acts in self._enabled.values():
            acts.sort()

        self.ap_names: list[str] = []
        self._ap_ids: dict[str, int] = {}
        self._labels: dict[int, frozenset[str]] = {}
        for s, aps in (labels or {}).items():
            names = frozenset(str(a) for a in aps)
            for name in sorted(names):
                self._intern_ap(name)
            if names:
                self._labels[int(s)] = names

        self.state_names = tuple(state_names) if state_names is not None else None

    def _intern_action(self, name: str) -> int:
        aid = self._action_ids.get(name)
        if aid is None:
            aid = len(self.action_names)
            self._action_ids[name] = aid
            self.action_names.append(name)
        return aid

    def _intern_ap(self, name: str) -> int:
        apid = self._ap_ids.get(name)
        if apid is None:
            apid = len(self.ap_names)
            self._ap_ids[name] = apid
            self.ap_names.append(name)
        return apid

    # -- queries ---------------------------------------------------------

    @property
    def states(self) -> range:
        return range(self.num_states)

    def _check_state(self, s: int) -> int:
        if not 0 <= s < self.num_states:
            raise DomainError(f"unknown state id {s}")
        return s

    def action_id(self, name: str) -> int:
        try:
            return self._action_ids[name]
        except KeyError:
            raise DomainError(f"unknown action label {name!r}") from None

    def action_name(self, aid: int) -> str:
        try:
            return self.action_names[aid]
        except IndexError:
            raise DomainError(f"unknown action id {aid}") from None

    def enabled_actions(self, s: int) -> tuple[int, ...]:
        """Action ids with at least one listed successor at s, ascending."""
        self._check_state(s)
        return tuple(self._enabled.get(s, ()))

    def distribution(self, s: int, aid: int) -> tuple[tuple[int, float], ...]:
        self._check_state(s)
        try:
            return self._trans[(s, aid)]
        except KeyError:
            name = self.action_names[aid] if 0 <= aid < len(self.action_names) else aid
            raise DomainError(f"action {name!r} not enabled at state {s}") from None

    def successors(self, s: int, aid: int) -> set[int]:
        return {t for t, _ in self.distribution(s, aid)}

    def labels_of(self, s: int) -> frozenset[str]:
        self._check_state(s)
        return self._labels.get(s, frozenset())

    def label_map(self) -> dict[int, frozenset[str]]:
        """Labels of every state, including empty sets."""
        return {s: self._labels.get(s, frozenset()) for s in self.states}

    def transition_items(self):
        """Iterate ((state, action id), distribution) deterministically."""
        return sorted(self._trans.items())

    def state_name(self, s: int) -> str:
        if self.state_names is not None and 0 <= s < len(self.state_names):
            return self.state_names[s]
        return str(s)


@dataclass(frozen=True)
class Violation:
    """One structural defect found by validate_mdp."""

    kind: str
    detail: str
    state: Optional[int] = None
    action: Optional[str] = None

    def __str__(self):
        where = []
        if self.state is not None:
            where.append(f"state {self.state}")
        if self.action is not None:
            where.append(f"action {self.action!r}")
        prefix = " ".join(where)
        return f"[{self.kind}] {prefix}: {self.detail}" if prefix else f"[{self.kind}] {self.detail}"


def validate_mdp(m: Mdp) -> list[Violation]:
    """Report every breach of the MDP shape; an empty list means valid.

    Checked: init and every transition endpoint in range, strictly positive
    probabilities, no duplicated (state, action, successor) entry, every
    listed distribution summing to one within PROB_SUM_TOL, every state
    having at least one enabled action, and label states in range.
    """
    out = []
    if not 0 <= m.init < m.num_states:
        out.append(Violation("bad-init", f"initial state {m.init} out of range"))
    for (s, aid), dist in m.transition_items():
        name = m.action_names[aid]
        if not 0 <= s < m.num_states:
            out.append(Violation("bad-state-id", f"source {s} out of range",
                                 state=s, action=name))
        seen = set()
        total = 0.0
        for t, p in dist:
            if not 0 <= t < m.num_states:
                out.append(Violation("bad-state-id", f"successor {t} out of range",
                                     state=s, action=name))
            if p <= 0.0:
                out.append(Violation("nonpositive-probability",
                                     f"probability {p!r} to successor {t}",
                                     state=s, action=name))
            if t in seen:
                out.append(Violation("duplicate-transition",
                                     f"successor {t} listed twice",
                                     state=s, action=name))
            seen.add(t)
            total += p
        if abs(total - 1.0) > PROB_SUM_TOL:
            out.append(Violation("distribution-sum",
                                 f"probabilities sum to {total!r}",
                                 state=s, action=name))
    for s in m.states:
        if not m.enabled_actions(s):
            out.append(Violation("no-enabled-action", "state has no enabled action",
                                 state=s))
    for s in m._labels:
        if not 0 <= s < m.num_states:
            out.append(Violation("bad-label-state", f"labelled state {s} out of range",
                                 state=s))
    return out


# -- paths ---------------------------------------------------------------


@dataclass(frozen=True)
class FinitePath:
    """Alternating state/action sequence s0 -a0-> s1 ... -a(n-1)-> sn."""

    states: tuple[int, ...]
    actions: tuple[int, ...]

    def __post_init__(self):
        if len(self.states) == 0:
            raise DomainError("a path needs at least one state")
        if len(self.actions) != len(self.states) - 1:
            raise DomainError(
                f"{len(self.states)} states need {len(self.states) - 1} actions, "
                f"got {len(self.actions)}")

    @property
    def first(self) -> int:
        return self.states[0]

    @property
    def last(self) -> int:
        return self.states[-1]

    def __len__(self):
        return len(self.actions)

    def steps(self):
        """Yield (index, state, action id, successor) per transition taken."""
        for i, aid in enumerate(self.actions):
            yield i, self.states[i], aid, self.states[i + 1]


@dataclass(frozen=True)
class WeightedPath:
    path: FinitePath
    probability: float


def path_probability(m: Mdp, path: FinitePath) -> float:
    """Product of the step probabilities of path through m.

    The empty product (single-state path) is 1.0. A step that does not
    exist in m raises DomainError naming the step index.
    """
    prob = 1.0
    for i, s, aid, t in path.steps():
        try:
            dist = m.distribution(s, aid)
        except DomainError:
            raise DomainError(
                f"step {i}: action id {aid} not enabled at state {s}") from None
        for u, p in dist:
            if u == t:
                prob *= p
                break
        else:
            raise DomainError(
                f"step {i}: no transition from state {s} to {t} under action id {aid}")
    return prob


# -- schedulers and induced chains ---------------------------------------


@dataclass(frozen=True)
class Scheduler:
    """Memoryless deterministic scheduler: state -> chosen action id."""

    choice: Mapping[int, int]

    def action_for(self, s: int) -> int:
        try:
            return self.choice[s]
        except KeyError:
            raise DomainError(f"scheduler undefined at state {s}") from None


class Dtmc:
    """Chain induced by fixing one action per state of an MDP.

    Keeps the original MDP state ids so that paths and diagnoses refer back
    to the source model; only states reachable from init are present.
    provenance maps (state, successor) to the originating action id.
    """

    def __init__(self, states, init, transitions, labels, provenance,
                 action_names, ap_names, state_names=None):
        self.states = tuple(sorted(states))
        self.init = init
        self.transitions = transitions
        self.labels = labels
        self.provenance = provenance
        self.action_names = tuple(action_names)
        self.ap_names = tuple(ap_names)
        self.state_names = state_names

    def labels_of(self, s: int) -> frozenset[str]:
        return self.labels.get(s, frozenset())


def induce_dtmc(m: Mdp, sched: Scheduler) -> Dtmc:
    """Fix sched's action in every state reachable from m.init.

    Raises DomainError if sched misses a reachable state or picks a
    disabled action there.
    """
    reachable = []
    seen = {m.init}
    queue = deque([m.init])
    transitions: dict[int, tuple[tuple[int, float], ...]] = {}
    provenance: dict[tuple[int, int], int] = {}
    while queue:
        s = queue.popleft()
        reachable.append(s)
        aid = sched.action_for(s)
        if aid not in m.enabled_actions(s):
            raise DomainError(
                f"scheduler picks disabled action id {aid} at state {s}")
        merged: dict[int, float] = {}
        for t, p in m.distribution(s, aid):
            merged[t] = merged.get(t, 0.0) + p
        transitions[s] = tuple(merged.items())
        for t in merged:
            provenance[(s, t)] = aid
            if t not in seen:
                seen.add(t)
                queue.append(t)
    labels = {s: m.labels_of(s) for s in reachable}
    return Dtmc(reachable, m.init, transitions, labels, provenance,
                m.action_names, m.ap_names, m.state_names)


# -- external text format --------------------------------------------------


def _content_lines(text):
    """Yield (line number, stripped content) skipping blanks and # comments."""
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield no, line


def parse_explicit_model(text: str, labels_text: Optional[str] = None,
                         filename: Optional[str] = None,
                         labels_filename: Optional[str] = None) -> Mdp:
    """Parse the plain-text transition format.

    Layout: a STATES <n> line, an INIT <s> line, then one
    "<state> <action label> <successor> <probability>" line per transition.
    '#' starts a comment; blank lines are ignored. The optional labels text
    holds "<state>: <ap> <ap> ..." lines.
    """
    lines = list(_content_lines(text))
    if not lines:
        raise ParseError("empty model file", filename=filename)

    def fail(no, msg):
        raise ParseError(msg, line=no, filename=filename)

    no, head = lines[0]
    parts = head.split()
    if len(parts) != 2 or parts[0] != "STATES":
        fail(no, f"expected 'STATES <n>', got {head!r}")
    try:
        num_states = int(parts[1])
    except ValueError:
        fail(no, f"state count must be an integer, got {parts[1]!r}")
    if num_states <= 0:
        fail(no, f"state count must be positive, got {num_states}")

    if len(lines) < 2:
        raise ParseError("missing INIT line", filename=filename)
    no, head = lines[1]
    parts = head.split()
    if len(parts) != 2 or parts[0] != "INIT":
        fail(no, f"expected 'INIT <s>', got {head!r}")
    try:
        init = int(parts[1])
    except ValueError:
        fail(no, f"initial state must be an integer, got {parts[1]!r}")
    if not 0 <= init < num_states:
        fail(no, f"initial state {init} out of range 0..{num_states - 1}")

    transitions: dict[tuple[int, str], list[tuple[int, float]]] = {}
    for no, line in lines[2:]:
        parts = line.split()
        if len(parts) != 4:
            fail(no, f"expected '<s> <action> <s'> <prob>', got {line!r}")
        try:
            s = int(parts[0])
            t = int(parts[2])
        except ValueError:
            fail(no, f"state ids must be integers in {line!r}")
        try:
            p = float(parts[3])
        except ValueError:
            fail(no, f"probability must be a number, got {parts[3]!r}")
        for v in (s, t):
            if not 0 <= v < num_states:
                fail(no, f"state {v} out of range 0..{num_states - 1}")
        transitions.setdefault((s, parts[1]), []).append((t, p))

    labels: dict[int, set[str]] = {}
    if labels_text is not None:
        labels = parse_labels_text(labels_text, num_states, filename=labels_filename)
    return Mdp(num_states, init, transitions, labels)


def parse_labels_text(text: str, num_states: int,
                      filename: Optional[str] = None) -> dict[int, set[str]]:
    labels: dict[int, set[str]] = {}
    for no, line in _content_lines(text):
        head, sep, rest = line.partition(":")
        if not sep:
            raise ParseError(f"expected '<state>: <ap> ...', got {line!r}",
                             line=no, filename=filename)
        try:
            s = int(head.strip())
        except ValueError:
            raise ParseError(f"state id must be an integer, got {head.strip()!r}",
                             line=no, filename=filename) from None
        if not 0 <= s < num_states:
            raise ParseError(f"state {s} out of range 0..{num_states - 1}",
                             line=no, filename=filename)
        labels.setdefault(s, set()).update(rest.split())
    return labels


def serialize_explicit_model(m: Mdp) -> str:
    """Canonical text for m; parsing it back reproduces the same structure."""
    out = [f"STATES {m.num_states}", f"INIT {m.init}"]
    for (s, aid), dist in m.transition_items():
        name = m.action_names[aid]
        for t, p in dist:
            out.append(f"{s} {name} {t} {p!r}")
    return "\n".join(out) + "\n"


def serialize_labels(m: Mdp) -> str:
    out = []
    for s in m.states:
        aps = m.labels_of(s)
        if aps:
            out.append(f"{s}: " + " ".join(sorted(aps)))
    return "\n".join(out) + "\n"
