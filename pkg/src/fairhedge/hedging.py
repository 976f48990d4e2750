"""Numeraire-adjusted Follmer-Schweizer decomposition on a scenario tree.

The strategy is found backward in time: at every time-(n-1) node the
weighted covariance system ``C_n xi_n = c_n`` is solved, where the claim
residual ``H - sum_{k>n} xi_k . dS_k`` is kept in original units and the
numeraire only enters through the weights of the bilinear form.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import HorizonNotOne, SingularCovariance, ZeroConditionalVariance
from .market import (
    Adapted,
    Predictable,
    ScenarioTree,
    bilinear_matrix,
    conditional_covariance,
    doob_decompose,
)
from .numeraire import LiftedStrategy, NumeraireSpec, build_numeraire, lift_self_financing, lifted_gains

RCOND_MIN = 1e-10


@dataclass(frozen=True)
class CovMatrixProcess:
    """Per step n = 1..T: matrices, inverses and reciprocal condition estimates on the time-(n-1) nodes."""

    matrices: tuple[np.ndarray, ...]
    inverses: tuple[np.ndarray, ...]
    rcond: tuple[np.ndarray, ...]
    rhs: tuple[np.ndarray, ...]

    def __getitem__(self, n):
        return self.matrices[n - 1]


@dataclass(frozen=True)
class Decomposition:
    V0: float
    V: Adapted
    xi: Predictable
    lifted: LiftedStrategy
    L: Adapted
    spec: NumeraireSpec
    cov: CovMatrixProcess
    tails: tuple[np.ndarray, ...]
    diagnostics: dict = field(default_factory=dict)

    def hedging_error(self, tree: ScenarioTree, H) -> np.ndarray:
        """(H - V0 - sum xi_k . dS_k) / N_T on the leaves."""
        return (np.asarray(H) - self.V0 - self.tails[0]) / self.spec.terminal

    def objective(self, tree: ScenarioTree, H) -> float:
        return float(tree.expect(self.hedging_error(tree, H) ** 2))


def _leaf_increments(tree: ScenarioTree):
    return [None] + [tree.lift(tree.increments(n), n) for n in range(1, tree.horizon + 1)]


def _strategy_gain(tree, x, n, inc_leaf):
    return np.einsum("ij,ij->i", tree.lift(x, n - 1), inc_leaf)


def _rcond(mats: np.ndarray, scale: np.ndarray) -> np.ndarray:
    """Ratio of extreme eigenvalues; zero when the matrix is negligible against ``scale``."""
    lam = np.linalg.eigvalsh(mats)
    top = lam[:, -1]
    tiny = top <= 1e-14 * np.maximum(scale, np.finfo(float).tiny)
    out = np.zeros_like(top)
    np.divide(lam[:, 0], top, out=out, where=~tiny)
    return np.clip(out, 0.0, 1.0)


def _solve_step(tree, n, mats, rhs, scale, error=SingularCovariance):
    rc = _rcond(mats, scale)
    bad = np.flatnonzero(rc < RCOND_MIN)
    if bad.size:
        i = int(bad[0])
        raise error(tree.level_ids[n - 1][i], float(rc[i]), time=n)
    x, ok = _backend.chol_solve(mats, rhs)
    if not ok.all():
        i = int(np.flatnonzero(~ok)[0])
        raise error(tree.level_ids[n - 1][i], float(rc[i]), time=n)
    return x, rc


def fs_decompose(tree: ScenarioTree, spec: NumeraireSpec | None, H) -> Decomposition:
    """Fair price, hedging strategy and residual martingale under the numeraire ``spec``."""
    H = tree.claim(H)
    spec = build_numeraire(tree) if spec is None else spec
    NT = spec.terminal
    w = NT ** -2.0
    T, d = tree.horizon, tree.assets
    inc = _leaf_increments(tree)

    steps = [None] * T
    V = [None] * (T + 1)
    tails = [None] * (T + 1)
    tails[T] = np.zeros(tree.n_leaves)
    mats, invs, rconds, rhss = [None] * T, [None] * T, [None] * T, [None] * T
    for n in range(T, 0, -1):
        resid = H - tails[n]
        M = bilinear_matrix(tree, NT, np.column_stack([inc[n], resid]), n - 1)
        C, c = M[:, :d, :d], M[:, :d, d]
        scale = tree.cond_expect(w * np.einsum("ij,ij->i", inc[n], inc[n]), n - 1)
        x, rc = _solve_step(tree, n, C, c, scale)
        steps[n - 1] = x
        mats[n - 1], invs[n - 1], rconds[n - 1], rhss[n - 1] = C, np.linalg.inv(C), rc, c
        tails[n - 1] = tails[n] + _strategy_gain(tree, x, n, inc[n])
        mom = tree.cond_expect(np.column_stack([w, w * (H - tails[n - 1])]), n - 1)
        V[n - 1] = mom[:, 1] / mom[:, 0]
    V[T] = H / NT
    cov = CovMatrixProcess(tuple(mats), tuple(invs), tuple(rconds), tuple(rhss))
    return _assemble(tree, spec, H, Predictable(steps), V, tails, cov)


def classical_fs(tree: ScenarioTree, H) -> Decomposition:
    """The bank-account case N = 1, computed with plain conditional covariances."""
    H = tree.claim(H)
    T, d = tree.horizon, tree.assets
    inc = _leaf_increments(tree)
    steps = [None] * T
    V = [None] * (T + 1)
    tails = [None] * (T + 1)
    tails[T] = np.zeros(tree.n_leaves)
    mats, invs, rconds, rhss = [None] * T, [None] * T, [None] * T, [None] * T
    for n in range(T, 0, -1):
        M = conditional_covariance(tree, np.column_stack([inc[n], H - tails[n]]), n - 1)
        C, c = M[:, :d, :d], M[:, :d, d]
        scale = tree.cond_expect(np.einsum("ij,ij->i", inc[n], inc[n]), n - 1)
        x, rc = _solve_step(tree, n, C, c, scale, error=ZeroConditionalVariance)
        steps[n - 1] = x
        mats[n - 1], invs[n - 1], rconds[n - 1], rhss[n - 1] = C, np.linalg.inv(C), rc, c
        tails[n - 1] = tails[n] + _strategy_gain(tree, x, n, inc[n])
        V[n - 1] = tree.cond_expect(H - tails[n - 1], n - 1)
    V[T] = H.copy()
    cov = CovMatrixProcess(tuple(mats), tuple(invs), tuple(rconds), tuple(rhss))
    return _assemble(tree, build_numeraire(tree), H, Predictable(steps), V, tails, cov)


def _assemble(tree, spec, H, xi, V, tails, cov) -> Decomposition:
    T = tree.horizon
    NT = spec.terminal
    V0 = float(V[0][0])
    lifted = lift_self_financing(tree, spec, V0, xi)
    hedge_N = lifted_gains(tree, lifted, spec)
    LT = H / NT - hedge_N.terminal
    L = Adapted([tree.cond_expect(LT, n) for n in range(T)] + [LT])
    dec = Decomposition(V0, Adapted(V), xi, lifted, L, spec, cov, tuple(tails))
    dec.diagnostics.update(decomposition_diagnostics(tree, dec, H))
    return dec


def decomposition_diagnostics(tree: ScenarioTree, dec: Decomposition, H) -> dict:
    """Residuals of every property the decomposition is supposed to satisfy."""
    T, d = tree.horizon, tree.assets
    NT = dec.spec.terminal
    w = NT ** -2.0
    inc = _leaf_increments(tree)
    out = {}

    out["identity"] = float(np.max(np.abs(H / NT - lifted_gains(tree, dec.lifted, dec.spec).terminal - dec.L.terminal)))
    W_T = dec.V0 + dec.tails[0]
    out["correspondence"] = float(np.max(np.abs(dec.L.terminal - (H - W_T) / NT)))
    out["martingale"] = max(
        float(np.max(np.abs(tree.cond_expect(dec.L[n], n - 1, n) - dec.L[n - 1]))) for n in range(1, T + 1)
    )

    foc_price = 0.0
    foc_strategy = 0.0
    for n in range(1, T + 1):
        after = H - dec.tails[n - 1] - tree.lift(dec.V[n - 1], n - 1)
        foc_price = max(foc_price, float(np.max(np.abs(tree.cond_expect(after * w, n - 1)))))
        M = bilinear_matrix(tree, NT, np.column_stack([H - dec.tails[n - 1], inc[n]]), n - 1)
        foc_strategy = max(foc_strategy, float(np.max(np.abs(M[:, 0, 1:]))))
    out["foc_price"] = foc_price
    out["foc_strategy"] = foc_strategy

    out["mean_L"] = float(tree.expect(dec.L.terminal))
    out["weighted_mean_L"] = float(tree.expect(dec.L.terminal / NT))
    out["root_foc"] = float(tree.expect((H - W_T) * w))

    M, _ = doob_decompose(tree)
    out["orthogonality"] = _orthogonality(tree, dec.L, M)
    MN = Adapted(_doob_martingale(tree, dec.spec.SN))
    out["orthogonality_numeraire"] = _orthogonality(tree, dec.L, MN)
    out["inverse_error"] = max(
        float(np.max(np.abs(C @ Ci - np.eye(d)))) for C, Ci in zip(dec.cov.matrices, dec.cov.inverses)
    )
    return out


def _doob_martingale(tree, X):
    levels = [np.array(X[0])]
    for n in range(1, tree.horizon + 1):
        dX = X[n] - X[n - 1][tree.parent_index[n]]
        drift = tree.cond_expect(dX, n - 1, n)[tree.parent_index[n]]
        levels.append(levels[n - 1][tree.parent_index[n]] + dX - drift)
    return levels


def _orthogonality(tree, L: Adapted, M: Adapted) -> float:
    """max |E_{n-1}[dL_n dM^i_n]| over steps, nodes and components."""
    worst = 0.0
    for n in range(1, tree.horizon + 1):
        dL = L[n] - L[n - 1][tree.parent_index[n]]
        dM = M[n] - M[n - 1][tree.parent_index[n]]
        worst = max(worst, float(np.max(np.abs(tree.cond_expect(dL[:, None] * dM, n - 1, n)))))
    return worst


def interest_rate_fair_price(tree: ScenarioTree, H, r: float) -> tuple[float, Predictable]:
    """One-period fair price when the bank account grows at a constant rate ``r``.

    The strategy is the bank-account one; only the price is discounted.
    """
    if tree.horizon != 1:
        raise HorizonNotOne(tree.horizon)
    if not r >= 0.0:
        raise ValueError(f"rate must be non-negative, got {r!r}")
    H = tree.claim(H)
    dec = classical_fs(tree, H)
    xi1 = dec.xi[1][0]
    growth = 1.0 + r
    drift = tree.expect(tree.prices[1] / growth) - tree.prices[0][0]
    V0 = tree.expect(H / growth) - float(np.dot(xi1, drift))
    return float(V0), dec.xi
