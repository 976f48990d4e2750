"""Small reference models built in code: trinomial, binomial and a redundant two-asset market."""
from __future__ import annotations

from fractions import Fraction

import numpy as np

from .market import Node, Predictable, ScenarioTree

# (xi_1, V0) of the call on the trinomial tree
BANK_VALUES = (Fraction(1, 3), Fraction(1, 6))
# values printed for the half-share numeraire; the recursion and the oracle both give (1/6, 2/15)
PUBLISHED_HALF_SHARE = (Fraction(75, 576), Fraction(471, 4320))
HALF_SHARE_VALUES = (Fraction(1, 6), Fraction(2, 15))
HALF_SHARE_WEIGHT = Fraction(45, 24)  # E[N_1^-2]


def trinomial() -> tuple[ScenarioTree, np.ndarray]:
    """S_0 = 2 moving to 4, 2, 1 with probabilities 1/6, 1/2, 1/3; call struck at 3."""
    nodes = [
        Node("root", 0, None, 1.0, (2.0,)),
        Node("up", 1, "root", 1 / 6, (4.0,)),
        Node("mid", 1, "root", 1 / 2, (2.0,)),
        Node("down", 1, "root", 1 / 3, (1.0,)),
    ]
    tree = ScenarioTree(nodes)
    H = np.maximum(tree.prices[1][:, 0] - 3.0, 0.0)
    return tree, H


def binomial() -> tuple[ScenarioTree, np.ndarray]:
    """Two states 4 and 1 from S_0 = 2; the claim is the stock itself."""
    nodes = [
        Node("root", 0, None, 1.0, (2.0,)),
        Node("up", 1, "root", 0.5, (4.0,)),
        Node("down", 1, "root", 0.5, (1.0,)),
    ]
    tree = ScenarioTree(nodes)
    return tree, tree.prices[1][:, 0].copy()


def redundant() -> tuple[ScenarioTree, np.ndarray]:
    """The trinomial market with the stock listed twice."""
    base, H = trinomial()
    nodes = [Node(nd.id, nd.time, nd.parent, nd.cond_prob, nd.prices * 2) for nd in base.nodes]
    return ScenarioTree(nodes), H


MODELS = {"trinomial": trinomial, "binomial": binomial, "redundant": redundant}


def half_share(tree: ScenarioTree) -> Predictable:
    """eta = 1/2 share at every non-terminal node."""
    return tree.predictable(default=0.5)


def bank(tree: ScenarioTree) -> Predictable:
    return tree.predictable()


GENERATORS = {"bank": bank, "half-share": half_share}
