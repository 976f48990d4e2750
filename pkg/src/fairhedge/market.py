"""Scenario trees, node-indexed processes and conditional operators.

A :class:`ScenarioTree` stores the nodes level by level. Within a level the
children of one parent are contiguous and keep the order in which they were
supplied, so every conditional expectation is a left fold over stored child
order and results are reproducible bit for bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import _backend
from .errors import CoverageError, ModelError, NonPositiveNumeraire, ProbabilityError

PROB_TOL = 1e-12


@dataclass(frozen=True)
class Node:
    id: str
    time: int
    parent: str | None
    cond_prob: float
    prices: tuple[float, ...]


def _frozen(a, dtype=np.float64):
    arr = np.array(a, dtype=dtype)
    arr.flags.writeable = False
    return arr


class ScenarioTree:
    """Finite filtered probability space encoded as a rooted tree.

    Node ``i`` at time ``n`` is addressed by the pair ``(n, i)``; arrays
    attached to a level are indexed the same way. ``offsets[n]`` delimits the
    children of each time-``n`` node inside level ``n + 1``.
    """

    def __init__(self, nodes: Iterable[Node], horizon: int | None = None, assets: int | None = None):
        nodes = list(nodes)
        if not nodes:
            raise ModelError("a scenario tree needs at least a root node")
        by_id: dict[str, Node] = {}
        for node in nodes:
            if node.id in by_id:
                raise ModelError("duplicate node id", node.id)
            by_id[node.id] = node

        roots = [nd for nd in nodes if nd.parent is None]
        if len(roots) != 1:
            raise ModelError(f"expected exactly one root, found {len(roots)}")
        root = roots[0]
        if root.time != 0:
            raise ModelError("the root must sit at time 0", root.id)
        if abs(root.cond_prob - 1.0) > PROB_TOL:
            raise ProbabilityError("the root must carry probability 1", root.id)

        if assets is None:
            assets = len(root.prices)
        if assets < 1:
            raise ModelError("at least one risky asset is required")

        children: dict[str, list[Node]] = {nd.id: [] for nd in nodes}
        for node in nodes:
            if len(node.prices) != assets:
                raise ModelError(f"expected {assets} prices, got {len(node.prices)}", node.id)
            for price in node.prices:
                if not (math.isfinite(price) and price > 0.0):
                    raise ModelError(f"prices must be finite and strictly positive, got {price!r}", node.id)
            if node.parent is None:
                continue
            parent = by_id.get(node.parent)
            if parent is None:
                raise ModelError(f"unknown parent {node.parent!r}", node.id)
            if node.time != parent.time + 1:
                raise ModelError("a node must sit one period after its parent", node.id)
            if not (0.0 < node.cond_prob <= 1.0 + PROB_TOL) or not math.isfinite(node.cond_prob):
                raise ProbabilityError(
                    f"conditional probability must lie in (0, 1], got {node.cond_prob!r}", node.id
                )
            children[parent.id].append(node)

        max_time = max(nd.time for nd in nodes)
        if horizon is None:
            horizon = max_time
        if horizon < 1:
            raise ModelError("the horizon must be at least one period")
        if max_time > horizon:
            raise ModelError(f"node beyond the horizon {horizon}", max(nodes, key=lambda nd: nd.time).id)

        self.horizon = int(horizon)
        self.assets = int(assets)
        self.root = root.id

        level_nodes: list[list[Node]] = [[root]]
        for n in range(self.horizon):
            nxt: list[Node] = []
            for parent in level_nodes[n]:
                kids = children[parent.id]
                if not kids:
                    raise ModelError(f"node at time {n} < {self.horizon} has no children", parent.id)
                total = math.fsum(k.cond_prob for k in kids)
                if abs(total - 1.0) > PROB_TOL:
                    raise ProbabilityError(f"children probabilities sum to {total!r}, not 1", parent.id)
                nxt.extend(kids)
            level_nodes.append(nxt)
        reached = sum(len(lv) for lv in level_nodes)
        if reached != len(nodes):
            seen = {nd.id for lv in level_nodes for nd in lv}
            stray = next(nd.id for nd in nodes if nd.id not in seen)
            raise ModelError("node is not connected to the root", stray)

        self.nodes: tuple[Node, ...] = tuple(nd for lv in level_nodes for nd in lv)
        self.level_ids: tuple[tuple[str, ...], ...] = tuple(tuple(nd.id for nd in lv) for lv in level_nodes)
        self.position: dict[str, tuple[int, int]] = {
            nid: (n, i) for n, ids in enumerate(self.level_ids) for i, nid in enumerate(ids)
        }
        self.cond_prob = tuple(_frozen([nd.cond_prob for nd in lv]) for lv in level_nodes)
        self.prices = tuple(_frozen([nd.prices for nd in lv]).reshape(len(lv), assets) for lv in level_nodes)

        parent_index = [_frozen([], np.int64)]
        offsets = []
        for n in range(1, self.horizon + 1):
            pos = {nid: i for i, nid in enumerate(self.level_ids[n - 1])}
            parent_index.append(_frozen([pos[nd.parent] for nd in level_nodes[n]], np.int64))
            counts = np.bincount(parent_index[n], minlength=len(level_nodes[n - 1]))
            offsets.append(_frozen(np.concatenate([[0], np.cumsum(counts)]), np.int64))
        self.parent_index = tuple(parent_index)
        self.offsets = tuple(offsets)

        prob = [_frozen([1.0])]
        for n in range(1, self.horizon + 1):
            prob.append(_frozen(prob[n - 1][self.parent_index[n]] * self.cond_prob[n]))
        self.prob = tuple(prob)

    # -- shape helpers -------------------------------------------------
    def size(self, n: int) -> int:
        return len(self.level_ids[n])

    @property
    def leaves(self) -> tuple[str, ...]:
        return self.level_ids[self.horizon]

    @property
    def n_leaves(self) -> int:
        return self.size(self.horizon)

    def node(self, n: int, i: int) -> Node:
        return self.nodes[sum(self.size(k) for k in range(n)) + i]

    def _check_time(self, n, name="time"):
        if not (0 <= n <= self.horizon):
            raise IndexError(f"{name} {n} outside 0..{self.horizon}")

    def _check_level(self, values, m):
        values = np.asarray(values, dtype=np.float64)
        if values.ndim == 0 or values.shape[0] != self.size(m):
            got = "a scalar" if values.ndim == 0 else f"{values.shape[0]} values"
            raise ValueError(f"expected one value per time-{m} node ({self.size(m)}), got {got}")
        return values

    def increments(self, n: int) -> np.ndarray:
        """Price increments into time ``n`` as a (k_n, d) array."""
        self._check_time(n)
        if n == 0:
            raise IndexError("no increment into time 0")
        return self.prices[n] - self.prices[n - 1][self.parent_index[n]]

    def lift(self, values, m: int, to: int | None = None) -> np.ndarray:
        """Broadcast a time-``m`` quantity onto the descendants at time ``to``."""
        to = self.horizon if to is None else to
        self._check_time(m)
        self._check_time(to)
        if to < m:
            raise IndexError(f"cannot lift from time {m} back to time {to}")
        out = self._check_level(values, m)
        for k in range(m + 1, to + 1):
            out = out[self.parent_index[k]]
        return out

    def ancestor_index(self, n: int, m: int | None = None) -> np.ndarray:
        """Index of the time-``n`` ancestor of every time-``m`` node."""
        return self.lift(np.arange(self.size(n), dtype=np.float64), n, m).astype(np.int64)

    # -- conditional operators -----------------------------------------
    def cond_expect(self, values, n: int, m: int | None = None) -> np.ndarray:
        """E[X | F_n] for a time-``m`` quantity X (``m`` defaults to the horizon)."""
        m = self.horizon if m is None else m
        self._check_time(m)
        self._check_time(n)
        if n > m:
            raise IndexError(f"conditioning time {n} exceeds the measurability time {m}")
        values = self._check_level(values, m)
        tail = values.shape[1:]
        out = values.reshape(values.shape[0], -1)
        for k in range(m, n, -1):
            out = _backend.fold(out, self.cond_prob[k], self.offsets[k - 1])
        return out.reshape((self.size(n),) + tail)

    def expect(self, values, m: int | None = None):
        out = self.cond_expect(values, 0, m)[0]
        return float(out) if np.ndim(out) == 0 else out

    # -- constructors for processes ------------------------------------
    def claim(self, payoff) -> np.ndarray:
        """Validate a leaf payoff given as an array or as a ``{leaf id: value}`` mapping."""
        if isinstance(payoff, Mapping):
            missing = [lid for lid in self.leaves if lid not in payoff]
            if missing:
                raise CoverageError("payoff is missing a leaf", missing[0])
            extra = [k for k in payoff if k not in self.position or self.position[k][0] != self.horizon]
            if extra:
                raise CoverageError("payoff given on a node that is not a leaf", extra[0])
            payoff = [payoff[lid] for lid in self.leaves]
        arr = np.asarray(payoff, dtype=np.float64)
        if arr.shape != (self.n_leaves,):
            raise CoverageError(f"payoff must have one value per leaf ({self.n_leaves}), got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ModelError("payoff values must be finite")
        return _frozen(arr)

    def predictable(self, mapping: Mapping[str, Sequence[float]] | None = None, default=0.0) -> "Predictable":
        """Build a d-vector predictable process from ``{node id: vector}``; unset nodes get ``default``."""
        mapping = mapping or {}
        steps = [np.tile(np.broadcast_to(np.asarray(default, dtype=float), (self.assets,)), (self.size(n), 1))
                 for n in range(self.horizon)]
        for nid, vec in mapping.items():
            if nid not in self.position:
                raise ModelError("strategy given on an unknown node", nid)
            n, i = self.position[nid]
            if n >= self.horizon:
                raise ModelError("strategy given on a terminal node", nid)
            vec = np.asarray(vec, dtype=float).reshape(-1)
            if vec.shape != (self.assets,):
                raise ModelError(f"strategy needs {self.assets} components", nid)
            steps[n][i] = vec
        return Predictable(steps)


class Adapted:
    """Per-level values of an adapted process: ``x[n]`` is indexed by time-``n`` node."""

    __slots__ = ("levels",)

    def __init__(self, levels):
        self.levels = tuple(_frozen(a) for a in levels)

    def __getitem__(self, n):
        return self.levels[n]

    def __len__(self):
        return len(self.levels)

    def __iter__(self):
        return iter(self.levels)

    @property
    def terminal(self):
        return self.levels[-1]

    def max_abs_diff(self, other: "Adapted") -> float:
        return max(float(np.max(np.abs(a - b), initial=0.0)) for a, b in zip(self.levels, other.levels))

    def __repr__(self):
        return f"Adapted(levels={len(self.levels)})"


class Predictable:
    """Strategy-like process: ``xi[n]`` (n = 1..T) holds xi_n on the time-(n-1) nodes."""

    __slots__ = ("steps",)

    def __init__(self, steps):
        self.steps = tuple(_frozen(s) for s in steps)

    def __getitem__(self, n):
        if not 1 <= n <= len(self.steps):
            raise IndexError(f"predictable index {n} outside 1..{len(self.steps)}")
        return self.steps[n - 1]

    def __len__(self):
        return len(self.steps)

    @property
    def dim(self):
        return self.steps[0].shape[1]

    def scaled(self, c: float) -> "Predictable":
        return Predictable([c * s for s in self.steps])

    def max_abs_diff(self, other: "Predictable") -> float:
        return max(float(np.max(np.abs(a - b), initial=0.0)) for a, b in zip(self.steps, other.steps))

    def to_mapping(self, tree: ScenarioTree) -> dict[str, list[float]]:
        return {nid: [float(v) for v in self.steps[n][i]]
                for n in range(len(self.steps)) for i, nid in enumerate(tree.level_ids[n])}

    def __repr__(self):
        return f"Predictable(steps={len(self.steps)}, dim={self.dim})"


def adapted_to_mapping(tree: ScenarioTree, x: Adapted) -> dict[str, object]:
    out = {}
    for n, level in enumerate(x):
        for i, nid in enumerate(tree.level_ids[n]):
            v = level[i]
            out[nid] = float(v) if np.ndim(v) == 0 else [float(t) for t in v]
    return out


# ----------------------------------------------------------------------
def cond_expect(tree: ScenarioTree, values, n: int, m: int | None = None) -> np.ndarray:
    return tree.cond_expect(values, n, m)


def step_gains(tree: ScenarioTree, xi: Predictable, n: int, increments=None) -> np.ndarray:
    """xi_n . dS_n on the time-n nodes (increments may be d or d+1 wide)."""
    inc = tree.increments(n) if increments is None else increments
    return np.einsum("ij,ij->i", xi[n][tree.parent_index[n]], inc)


def gains(tree: ScenarioTree, xi: Predictable) -> Adapted:
    """Gains process G_n = sum_{j<=n} xi_j . dS_j with G_0 = 0."""
    if len(xi) != tree.horizon or xi.dim != tree.assets:
        raise ValueError("strategy shape does not match the tree")
    levels = [np.zeros(1)]
    for n in range(1, tree.horizon + 1):
        levels.append(levels[n - 1][tree.parent_index[n]] + step_gains(tree, xi, n))
    return Adapted(levels)


def doob_decompose(tree: ScenarioTree) -> tuple[Adapted, Adapted]:
    """Split prices into a martingale part M and a predictable drift A (A_0 = 0, M_0 = S_0)."""
    drift = [np.zeros((1, tree.assets))]
    for n in range(1, tree.horizon + 1):
        step = tree.cond_expect(tree.increments(n), n - 1, n)
        drift.append(drift[n - 1][tree.parent_index[n]] + step[tree.parent_index[n]])
    martingale = [tree.prices[n] - drift[n] for n in range(tree.horizon + 1)]
    return Adapted(martingale), Adapted(drift)


def _check_numeraire(tree: ScenarioTree, terminal) -> np.ndarray:
    terminal = tree._check_level(terminal, tree.horizon)
    bad = np.flatnonzero(~(terminal > 0.0))
    if bad.size:
        i = int(bad[0])
        raise NonPositiveNumeraire(tree.leaves[i], float(terminal[i]), [tree.leaves[j] for j in bad])
    return terminal


def bilinear_matrix(tree: ScenarioTree, numeraire_T, columns, n: int) -> np.ndarray:
    """All pairwise weighted bilinear forms of the leaf-level columns, conditioned on F_n.

    ``columns`` is (leaves, p); the result is (k_n, p, p) with entry
    ``E_n[(X/N - E_n[X N^-2]/(N E_n[N^-2])) (Y/N - ...)]``.
    """
    inv = 1.0 / _check_numeraire(tree, numeraire_T)
    w = inv * inv
    columns = np.asarray(columns, dtype=np.float64)
    if columns.ndim == 1:
        columns = columns[:, None]
    p = columns.shape[1]
    moments = tree.cond_expect(np.column_stack([w, w[:, None] * columns]), n)
    mean = moments[:, 1:] / moments[:, :1]
    centred = (columns - tree.lift(mean, n)) * inv[:, None]
    iu, ju = np.triu_indices(p)
    prods = tree.cond_expect(centred[:, iu] * centred[:, ju], n)
    out = np.empty((tree.size(n), p, p))
    out[:, iu, ju] = prods
    out[:, ju, iu] = prods
    return out


def weighted_bilinear(tree: ScenarioTree, numeraire_T, x, y, n: int, m: int | None = None) -> np.ndarray:
    """Numeraire-weighted conditional covariance of two time-``m`` quantities given F_n."""
    m = tree.horizon if m is None else m
    if n >= m:
        raise IndexError(f"conditioning time {n} must precede {m}")
    cols = np.column_stack([tree.lift(x, m), tree.lift(y, m)])
    return bilinear_matrix(tree, numeraire_T, cols, n)[:, 0, 1]


def conditional_covariance(tree: ScenarioTree, columns, n: int) -> np.ndarray:
    """Plain conditional covariance matrices of leaf-level columns given F_n."""
    columns = np.asarray(columns, dtype=np.float64)
    if columns.ndim == 1:
        columns = columns[:, None]
    p = columns.shape[1]
    mean = tree.cond_expect(columns, n)
    centred = columns - tree.lift(mean, n)
    iu, ju = np.triu_indices(p)
    prods = tree.cond_expect(centred[:, iu] * centred[:, ju], n)
    out = np.empty((tree.size(n), p, p))
    out[:, iu, ju] = prods
    out[:, ju, iu] = prods
    return out
