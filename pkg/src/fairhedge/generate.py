"""Random scenario trees, numeraire generators and claims for tests and benchmarks."""
from __future__ import annotations

import numpy as np

from .market import Node, Predictable, ScenarioTree, gains


MIN_RCOND = 1e-2


def _conditioning(steps, probs):
    centred = steps - probs @ steps
    lam = np.linalg.eigvalsh((centred * probs[:, None]).T @ centred)
    return lam[0] / lam[-1]


def random_tree(rng: np.random.Generator, horizon: int = 2, assets: int = 1,
                max_children: int = 4, vol: float = 0.25, martingale: bool = False) -> ScenarioTree:
    """Recombination-free tree with between ``assets + 1`` and ``max_children`` children per node.

    Each node draws its own drift, so increments are neither martingale nor
    i.i.d.; ``martingale=True`` rescales every sibling group to zero drift.
    """
    lo = assets + 1
    hi = max(lo, max_children)
    nodes = [Node("r", 0, None, 1.0, tuple(float(x) for x in rng.uniform(0.5, 2.0, assets)))]
    frontier = [nodes[0]]
    for t in range(1, horizon + 1):
        nxt = []
        for parent in frontier:
            k = int(rng.integers(lo, hi + 1))
            probs = rng.dirichlet(np.full(k, 2.0))
            probs = np.maximum(probs, 0.02)
            probs /= probs.sum()
            drift = rng.normal(0.0, 0.1, assets)
            base = np.asarray(parent.prices)
            while True:
                steps = np.exp(drift + vol * rng.standard_normal((k, assets)))
                if martingale:
                    steps = steps / (probs @ steps)
                if _conditioning(steps, probs) > MIN_RCOND:
                    break
            for j in range(k):
                child = Node(f"{parent.id}.{j}", t, parent.id, float(probs[j]), tuple(float(x) for x in base * steps[j]))
                nodes.append(child)
                nxt.append(child)
        frontier = nxt
    return ScenarioTree(nodes)


def random_generator(tree: ScenarioTree, rng: np.random.Generator, bound: float = 0.5) -> Predictable:
    """Generator eta scaled so the derivative N' = sum eta_k . dS_k stays within ``bound``."""
    eta = Predictable([rng.normal(size=(tree.size(n), tree.assets)) for n in range(tree.horizon)])
    peak = max(float(np.max(np.abs(g))) for g in gains(tree, eta))
    return eta if peak == 0.0 else eta.scaled(bound / peak)


def random_claim(tree: ScenarioTree, rng: np.random.Generator) -> np.ndarray:
    S = tree.prices[tree.horizon][:, 0]
    return np.maximum(S - np.median(S), 0.0) + 0.1 * rng.standard_normal(tree.n_leaves)


def replicable_claim(tree: ScenarioTree, rng: np.random.Generator) -> tuple[np.ndarray, float, Predictable]:
    """A claim V0 + sum xi_k . dS_k for a random strategy; returns (claim, V0, xi)."""
    xi = Predictable([rng.normal(size=(tree.size(n), tree.assets)) for n in range(tree.horizon)])
    V0 = float(rng.normal())
    return V0 + gains(tree, xi).terminal, V0, xi
