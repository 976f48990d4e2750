"""Global weighted least-squares solution of the hedging problem.

Every (node, asset) holding is a free unknown, so the minimiser of
E[((H - V0 - sum xi_k . dS_k) / N_T)^2] is a plain regression over the leaves.
Path probabilities, increments and the numeraire are recomputed here from the
node records instead of reusing the tree's fold operators, which keeps the
check independent of the code it verifies.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack

from .errors import RankDeficientDesign
from .market import Predictable, ScenarioTree
from .numeraire import NumeraireSpec

RANK_TOL = 1e-10
REPLICABLE_RSS = 1e-18


@dataclass(frozen=True)
class RegressionSystem:
    design: np.ndarray  # (leaves, 1 + d * non-terminal nodes), rows scaled by sqrt(p)/N_T
    target: np.ndarray
    columns: tuple  # ("V0",) then (node id, asset) pairs


@dataclass(frozen=True)
class OracleSolution:
    V0: float
    xi: Predictable
    rss: float
    replicable: bool
    normal_residual: float
    rank: int


@dataclass(frozen=True)
class Comparison:
    V0_deviation: float
    xi_deviation: float
    max_deviation: float
    recursion_objective: float
    oracle_objective: float
    recursion_worse: bool


def _paths(tree: ScenarioTree):
    by_id = {nd.id: nd for nd in tree.nodes}
    paths = []
    for leaf in tree.leaves:
        chain = [by_id[leaf]]
        while chain[-1].parent is not None:
            chain.append(by_id[chain[-1].parent])
        paths.append(chain[::-1])
    return paths


def build_system(tree: ScenarioTree, spec: NumeraireSpec | None, H) -> RegressionSystem:
    H = tree.claim(H)
    d = tree.assets
    inner = [nid for n in range(tree.horizon) for nid in tree.level_ids[n]]
    col_of = {nid: 1 + d * j for j, nid in enumerate(inner)}
    eta = None if spec is None else spec.eta.to_mapping(tree)

    rows = np.zeros((tree.n_leaves, 1 + d * len(inner)))
    target = np.empty(tree.n_leaves)
    for r, chain in enumerate(_paths(tree)):
        prob = 1.0
        numeraire = 1.0
        rows[r, 0] = 1.0
        for prev, node in zip(chain[:-1], chain[1:]):
            prob *= node.cond_prob
            step = np.subtract(node.prices, prev.prices)
            rows[r, col_of[prev.id]:col_of[prev.id] + d] = step
            if eta is not None:
                numeraire += float(np.dot(eta[prev.id], step))
        scale = np.sqrt(prob) / numeraire
        rows[r] *= scale
        target[r] = H[r] * scale
    columns = ("V0",) + tuple((nid, i) for nid in inner for i in range(d))
    return RegressionSystem(rows, target, columns)


def solve_global(tree: ScenarioTree, spec: NumeraireSpec | None, H) -> OracleSolution:
    system = build_system(tree, spec, H)
    A, b = system.design, system.target
    gram = A.T @ A
    rhs = A.T @ b
    p = gram.shape[0]
    tol = RANK_TOL * float(np.max(np.diag(gram)))
    factor, piv, rank, info = lapack.dpstrf(gram, lower=1, tol=tol)
    if info < 0:
        raise ValueError(f"dpstrf argument error {info}")
    if rank < p:
        raise RankDeficientDesign(int(rank), p)
    low = np.tril(factor)
    perm = piv - 1
    y = np.linalg.solve(low, rhs[perm])
    theta = np.empty(p)
    theta[perm] = np.linalg.solve(low.T, y)

    resid = A @ theta - b
    rss = float(resid @ resid)
    d = tree.assets
    steps, k = [], 1
    for n in range(tree.horizon):
        size = tree.size(n)
        steps.append(theta[k:k + d * size].reshape(size, d))
        k += d * size
    return OracleSolution(
        V0=float(theta[0]),
        xi=Predictable(steps),
        rss=rss,
        replicable=rss <= REPLICABLE_RSS,
        normal_residual=float(np.linalg.norm(gram @ theta - rhs)),
        rank=int(rank),
    )


def check_against_recursion(tree: ScenarioTree, spec: NumeraireSpec | None, H, dec, oracle=None) -> Comparison:
    """Compare a decomposition with the global solution (or any other solution exposing V0 and xi)."""
    if oracle is None:
        oracle = solve_global(tree, spec, H)
    dV0 = abs(dec.V0 - oracle.V0)
    dxi = dec.xi.max_abs_diff(oracle.xi)
    rec_obj = _objective(tree, spec, H, dec.V0, dec.xi)
    orc_obj = _objective(tree, spec, H, oracle.V0, oracle.xi)
    return Comparison(
        V0_deviation=dV0,
        xi_deviation=dxi,
        max_deviation=max(dV0, dxi),
        recursion_objective=rec_obj,
        oracle_objective=orc_obj,
        recursion_worse=rec_obj > orc_obj * (1.0 + 1e-10) + REPLICABLE_RSS,
    )


def _objective(tree, spec, H, V0, xi) -> float:
    system = build_system(tree, spec, H)
    theta = np.concatenate([[V0]] + [np.asarray(s).reshape(-1) for s in xi.steps])
    resid = system.design @ theta - system.target
    return float(resid @ resid)
