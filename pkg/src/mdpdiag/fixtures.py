"""Small built-in models used by the test suite and the documentation.

Both fixtures are deliberately tiny enough to verify by hand. demo_mdp is
an eight-state model whose single maximizing scheduler admits six paths
into the bad region; blame_gap_mdp separates "action reaching the most
responsible cause" from "action carrying the most blame".
"""

from __future__ import annotations

from .mdp import Mdp
from .pctl import PropertySpec, parse_property


def demo_mdp() -> Mdp:
    """Eight states, one action each, four probabilistic branch points.

    With the default demo_property, the reachable bad region is the three
    c&d-labelled sinks; satisfying path masses are 0.25, 0.2, 0.15, 0.12,
    0.09 and 0.072, so the maximal violation probability is 0.882.
    """
    transitions = {
        (0, "alpha0"): [(1, 0.25), (2, 0.5), (4, 0.24), (6, 0.01)],
        (1, "alpha1"): [(7, 1.0)],
        (2, "alpha2"): [(3, 0.4), (4, 0.6)],
        (3, "alpha3"): [(3, 1.0)],
        (4, "alpha4"): [(3, 0.3), (5, 0.5), (6, 0.2)],
        (5, "alpha5"): [(5, 1.0)],
        (6, "alpha6"): [(6, 1.0)],
        (7, "alpha7"): [(7, 1.0)],
    }
    labels = {
        0: {"a"},
        1: {"a"},
        2: {"b"},
        3: {"c", "d"},
        4: {"a", "b"},
        5: {"c", "d"},
        7: {"c", "d"},
    }
    return Mdp(8, 0, transitions, labels)


def demo_property() -> PropertySpec:
    return parse_property("P<=0.5 [ (a|b) U (c&d) ]")


def blame_gap_mdp() -> Mdp:
    """Fan-out model where blame and responsibility disagree.

    The initial split sends 0.4 towards a single bad sink and 0.6 towards
    two bad sinks of 0.3 each. The heaviest single cause sits behind the
    0.4 branch, yet the 0.6 branch's action accumulates more blame.
    """
    transitions = {
        (0, "choose"): [(1, 0.4), (2, 0.6)],
        (1, "narrow"): [(3, 1.0)],
        (2, "wide"): [(4, 0.5), (5, 0.5)],
        (3, "stay"): [(3, 1.0)],
        (4, "stay"): [(4, 1.0)],
        (5, "stay"): [(5, 1.0)],
    }
    labels = {3: {"bad"}, 4: {"bad"}, 5: {"bad"}}
    return Mdp(6, 0, transitions, labels)


def blame_gap_property() -> PropertySpec:
    return parse_property("P<=0.9 [ true U bad ]")
