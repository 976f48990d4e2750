"""Tradable numeraires, numeraire-denominated prices and the self-financing lift."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonPositiveNumeraire
from .market import Adapted, Predictable, ScenarioTree, gains, step_gains

POSITIVITY_FLOOR = 1e-12


@dataclass(frozen=True)
class NumeraireSpec:
    """Generator ``eta``, realised numeraire ``N`` (N_0 = 1) and prices ``(1/N, S/N)``."""

    eta: Predictable
    N: Adapted
    SN: Adapted

    @property
    def terminal(self) -> np.ndarray:
        return self.N.terminal

    def denominated_increments(self, tree: ScenarioTree, n: int) -> np.ndarray:
        return self.SN[n] - self.SN[n - 1][tree.parent_index[n]]


@dataclass(frozen=True)
class LiftedStrategy:
    """Bank plus risky holdings ``(xi0, xi)`` and the initial wealth they start from."""

    bar_xi: Predictable
    V0: float

    @property
    def risky(self) -> Predictable:
        return Predictable([s[:, 1:] for s in self.bar_xi.steps])

    @property
    def bank(self) -> Predictable:
        return Predictable([s[:, :1] for s in self.bar_xi.steps])


@dataclass(frozen=True)
class WealthReport:
    max_deviation: float
    self_financing_original: float
    self_financing_numeraire: float


def bar_prices(tree: ScenarioTree, n: int) -> np.ndarray:
    """Prices with the unit bank account prepended, (k_n, d+1)."""
    return np.column_stack([np.ones(tree.size(n)), tree.prices[n]])


def build_numeraire(tree: ScenarioTree, eta: Predictable | None = None) -> NumeraireSpec:
    if eta is None:
        eta = tree.predictable()
    if len(eta) != tree.horizon or eta.dim != tree.assets:
        raise ValueError("generator shape does not match the tree")
    return spec_from_values(tree, eta, [1.0 + g for g in gains(tree, eta)])


def spec_from_values(tree: ScenarioTree, eta: Predictable, values) -> NumeraireSpec:
    """Wrap already computed numeraire values, enforcing strict positivity."""
    N = Adapted(values)
    for n, level in enumerate(N):
        bad = np.flatnonzero(~(level > POSITIVITY_FLOOR))
        if bad.size:
            i = int(bad[0])
            raise NonPositiveNumeraire(
                tree.level_ids[n][i], float(level[i]), [tree.level_ids[n][j] for j in bad]
            )
    SN = Adapted([bar_prices(tree, n) / N[n][:, None] for n in range(tree.horizon + 1)])
    return NumeraireSpec(eta, N, SN)


def denominate_wealth(spec: NumeraireSpec, x: Adapted) -> Adapted:
    return Adapted([np.asarray(a) / (n if np.ndim(a) == 1 else n[:, None]) for a, n in zip(x, spec.N)])


def wealth(tree: ScenarioTree, V0: float, xi: Predictable) -> Adapted:
    return Adapted([V0 + g for g in gains(tree, xi)])


def lift_self_financing(tree: ScenarioTree, spec: NumeraireSpec | None, V0: float, xi: Predictable) -> LiftedStrategy:
    """Add the bank position that makes ``xi`` self-financing from initial wealth ``V0``.

    xi0_n = W_{n-1} - xi_n . S_{n-1}, with W the original-units wealth. The
    numeraire is not needed to build the lift; it is accepted so callers can
    pass the spec they verify against.
    """
    W = wealth(tree, V0, xi)
    steps = []
    for n in range(1, tree.horizon + 1):
        risky = xi[n]
        bank = W[n - 1] - np.einsum("ij,ij->i", risky, tree.prices[n - 1])
        steps.append(np.column_stack([bank, risky]))
    return LiftedStrategy(Predictable(steps), float(V0))


def lifted_gains(tree: ScenarioTree, lifted: LiftedStrategy, spec: NumeraireSpec | None = None) -> Adapted:
    """V0 + sum bar_xi_k . dX_k with X = (1, S), or X = S^N when a spec is given."""
    levels = [np.full(1, lifted.V0)]
    for n in range(1, tree.horizon + 1):
        if spec is None:
            inc = bar_prices(tree, n) - bar_prices(tree, n - 1)[tree.parent_index[n]]
        else:
            inc = spec.denominated_increments(tree, n)
        levels.append(levels[n - 1][tree.parent_index[n]] + step_gains(tree, lifted.bar_xi, n, inc))
    return Adapted(levels)


def self_financing_gap(tree: ScenarioTree, lifted: LiftedStrategy, spec: NumeraireSpec | None = None) -> float:
    """max |bar_xi_n . X_n - (V0 + sum_{k<=n} bar_xi_k . dX_k)| over nodes."""
    acc = lifted_gains(tree, lifted, spec)
    gap = 0.0
    for n in range(1, tree.horizon + 1):
        prices = bar_prices(tree, n) if spec is None else spec.SN[n]
        held = np.einsum("ij,ij->i", lifted.bar_xi[n][tree.parent_index[n]], prices)
        gap = max(gap, float(np.max(np.abs(held - acc[n]))))
    return gap


def verify_wealth_correspondence(tree: ScenarioTree, spec: NumeraireSpec, V0: float, xi: Predictable) -> WealthReport:
    lifted = lift_self_financing(tree, spec, V0, xi)
    in_numeraire = lifted_gains(tree, lifted, spec)
    scaled = denominate_wealth(spec, wealth(tree, V0, xi))
    return WealthReport(
        max_deviation=in_numeraire.max_abs_diff(scaled),
        self_financing_original=self_financing_gap(tree, lifted),
        self_financing_numeraire=self_financing_gap(tree, lifted, spec),
    )
