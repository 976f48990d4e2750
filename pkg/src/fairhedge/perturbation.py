"""Linear numeraire families N^eps = 1 + eps N', stability sweeps and first-order corrections.

Three formula variants are available for the corrections:

``conditional`` / ``unconditional``
    Derivatives of the recursion actually implemented in :mod:`.hedging`.
    They differ only in how the strategy-correction term ``A'`` is centred
    before it is paired with a conditionally centred increment, which makes
    them algebraically identical; both are kept so the choice is explicit.
``printed``
    The closed forms taken literally: the bilinear-form derivative with the
    ``J'`` cross terms, ``A'`` carrying the lifted base strategy against
    ``d(S_bar N')``, and price/residual corrections that assume ``E[L_T] = 0``.
    Finite differences reject it; it is retained as a negative control.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import EpsilonOutOfRange, SingularCovariance
from .hedging import Decomposition, classical_fs, fs_decompose
from .market import Adapted, Predictable, ScenarioTree, gains
from .numeraire import NumeraireSpec, bar_prices, spec_from_values

SAFETY = 0.99
VARIANTS = ("conditional", "unconditional", "printed")
ORDER_MIN = 1.5
FD_ATOL = 1e-8


@dataclass(frozen=True)
class PerturbationFamily:
    eta: Predictable
    N_prime: Adapted
    eps_lower: float  # -inf when no node constrains negative eps
    eps_upper: float

    @property
    def eps_max(self) -> float:
        return min(-self.eps_lower, self.eps_upper)

    @property
    def trivial(self) -> bool:
        return all(not np.any(level) for level in self.N_prime)

    def contains(self, eps: float) -> bool:
        return self.eps_lower < eps < self.eps_upper

    def numeraire(self, tree: ScenarioTree, eps: float) -> NumeraireSpec:
        if not self.contains(eps):
            raise EpsilonOutOfRange(eps, self.eps_lower, self.eps_upper)
        return spec_from_values(tree, self.eta.scaled(eps), [1.0 + eps * x for x in self.N_prime])


def build_family(tree: ScenarioTree, eta: Predictable) -> PerturbationFamily:
    N_prime = gains(tree, eta)
    allv = np.concatenate(N_prime.levels)
    pos, neg = allv[allv > 0], allv[allv < 0]
    # 1 + eps x > 0: x > 0 bounds eps from below, x < 0 from above
    lower = -SAFETY / pos.max() if pos.size else -math.inf
    upper = SAFETY / -neg.min() if neg.size else math.inf
    return PerturbationFamily(eta, N_prime, float(lower), float(upper))


# ----------------------------------------------------------------------
@dataclass(frozen=True)
class StabilityReport:
    eps: tuple[float, ...]
    deviations: dict  # family name -> array over eps
    orders: dict
    order: float
    monotone: dict


STABILITY_FAMILIES = ("xi", "increments", "V0", "L")


def _fit_order(eps, dev) -> float:
    eps, dev = np.abs(np.asarray(eps, float)), np.asarray(dev, float)
    keep = dev > 0
    if keep.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(eps[keep]), np.log(dev[keep]), 1)[0])


def _check_grid(family, eps_grid, pairs=False):
    grid = [float(e) for e in eps_grid]
    if not grid:
        raise ValueError("empty eps grid")
    for e in grid:
        if e == 0.0:
            raise EpsilonOutOfRange(e, family.eps_lower, family.eps_upper)
        if not family.contains(e) or (pairs and not family.contains(-e)):
            raise EpsilonOutOfRange(e, family.eps_lower, family.eps_upper)
    mags = [abs(e) for e in grid]
    if any(b >= a for a, b in zip(mags, mags[1:])):
        raise ValueError("eps grid must be strictly decreasing in magnitude")
    return grid


def _decompose_at(tree, family, H, eps):
    try:
        return fs_decompose(tree, family.numeraire(tree, eps), H)
    except SingularCovariance as exc:
        raise exc.at_eps(eps) from exc


def stability_sweep(tree: ScenarioTree, family: PerturbationFamily, H, eps_grid) -> StabilityReport:
    grid = _check_grid(family, eps_grid)
    base = fs_decompose(tree, family.numeraire(tree, 0.0), H)
    dev = {k: [] for k in STABILITY_FAMILIES}
    for eps in grid:
        dec = _decompose_at(tree, family, H, eps)
        dev["xi"].append(dec.xi.max_abs_diff(base.xi))
        inc = 0.0
        for n in range(1, tree.horizon + 1):
            plain = bar_prices(tree, n) - bar_prices(tree, n - 1)[tree.parent_index[n]]
            inc = max(inc, float(np.max(np.abs(dec.spec.denominated_increments(tree, n) - plain))))
        dev["increments"].append(inc)
        dev["V0"].append(abs(dec.V0 - base.V0))
        dev["L"].append(dec.L.max_abs_diff(base.L))
    dev = {k: np.array(v) for k, v in dev.items()}
    overall = np.max(np.vstack(list(dev.values())), axis=0)
    return StabilityReport(
        eps=tuple(grid),
        deviations=dev,
        orders={k: _fit_order(grid, v) for k, v in dev.items()},
        order=_fit_order(grid, overall),
        monotone={k: bool(np.all(np.diff(v) < 0)) for k, v in dev.items()},
    )


# ----------------------------------------------------------------------
@dataclass
class AsymptoticCorrections:
    xi_prime: Predictable
    V0_prime: float
    L_prime: Adapted
    variant: str
    J_prime: tuple  # per step n: leaf array J'_{n-1}
    C_prime: tuple  # per step n: (k_{n-1}, d, d)
    c_prime: tuple  # per step n: (k_{n-1}, d)
    A_prime: tuple  # per step n: leaf array A'_{n+1} (zeros at n = T)
    residual_drift: float  # first-order change of E[L_T]
    base: Decomposition
    trusted: bool = False
    validation: object = None
    notes: list = field(default_factory=list)


def _centre(tree, x, n):
    return x - tree.lift(tree.cond_expect(x, n), n)


def _bilinear_derivative(tree, Np, X, Y, n, printed=False):
    """First-order change of the weighted covariance of X, Y given F_n, per time-n node.

    X is (leaves,) or (leaves, p), Y is (leaves, q); returns (k_n, p, q).
    """
    X = np.asarray(X).reshape(tree.n_leaves, -1)
    Y = np.asarray(Y).reshape(tree.n_leaves, -1)
    Xc, Yc = _centre(tree, X, n), _centre(tree, Y, n)
    N3 = Np[:, None, None]
    if printed:
        Jp = (-2.0 * Np + 2.0 * tree.lift(tree.cond_expect(Np, n), n))[:, None, None]
        terms = (-X[:, :, None] * Jp * Yc[:, None, :]
                 - Xc[:, :, None] * Jp * Y[:, None, :]
                 - 2.0 * Xc[:, :, None] * N3 * Yc[:, None, :])
        return tree.cond_expect(terms, n)
    return tree.cond_expect(-2.0 * Xc[:, :, None] * N3 * Yc[:, None, :], n)


def asymptotic_corrections(tree: ScenarioTree, family: PerturbationFamily, H, variant: str = "conditional") -> AsymptoticCorrections:
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; choose from {VARIANTS}")
    printed = variant == "printed"
    H = tree.claim(H)
    base = classical_fs(tree, H)
    T = tree.horizon
    Np = family.N_prime.terminal
    inc = [None] + [tree.lift(tree.increments(n), n) for n in range(1, T + 1)]

    # lifted base strategy against the increments of (N', S N'): only the printed A' uses it
    SNp = [bar_prices(tree, n) * family.N_prime[n][:, None] for n in range(T + 1)]
    lifted_step = [None] + [
        tree.lift(np.einsum("ij,ij->i", base.lifted.bar_xi[n][tree.parent_index[n]],
                            SNp[n] - SNp[n - 1][tree.parent_index[n]]), n)
        for n in range(1, T + 1)
    ]

    xi_p = [None] * T
    Js, Cs, cs, As = [None] * T, [None] * T, [None] * T, [None] * T
    gain_p = np.zeros(tree.n_leaves)  # sum_{k>n} xi'_k . dS_k
    lifted_tail = np.zeros(tree.n_leaves)  # sum_{k>n} bar_xi0_k . d(S_bar N')_k
    for n in range(T, 0, -1):
        F = n - 1
        A = -gain_p + (lifted_tail if printed else 0.0)
        resid = H - base.tails[n]
        Cp = _bilinear_derivative(tree, Np, inc[n], inc[n], F, printed)
        cp = _bilinear_derivative(tree, Np, resid, inc[n], F, printed)[:, 0, :]
        if variant == "unconditional":
            A_c = A - tree.expect(A)
        else:
            A_c = _centre(tree, A, F)
        cp = cp + tree.cond_expect(A_c[:, None] * _centre(tree, inc[n], F), F)
        rhs = cp - np.einsum("kij,kj->ki", Cp, base.xi[n])
        x, ok = _backend.chol_solve(base.cov[n], rhs)
        if not ok.all():
            i = int(np.flatnonzero(~ok)[0])
            raise SingularCovariance(tree.level_ids[F][i], float(base.cov.rcond[n - 1][i]), time=n)
        xi_p[n - 1] = x
        Js[n - 1] = -2.0 * Np + 2.0 * tree.lift(tree.cond_expect(Np, F), F)
        Cs[n - 1], cs[n - 1], As[n - 1] = Cp, cp, A
        gain_p = gain_p + np.einsum("ij,ij->i", tree.lift(x, F), inc[n])
        lifted_tail = lifted_tail + lifted_step[n]

    L0 = H - base.V0 - base.tails[0]
    drift = tree.expect(L0 * Np)
    # lifted_tail now equals W0_T N'_T, so lifted_tail - H N' = -L0 N'
    level = lifted_tail - H * Np - gain_p
    V0p = tree.expect(level)
    Lp = [tree.cond_expect(level, n) - V0p for n in range(T)] + [level - V0p]
    notes = []
    if not printed:
        # E[L^eps_T] moves at first order by E[L0 N']; the printed forms take it as zero
        V0p -= drift
        Lp = [x + drift for x in Lp]
    else:
        notes.append("printed closed forms; expected to fail the finite-difference check")
    return AsymptoticCorrections(
        xi_prime=Predictable(xi_p),
        V0_prime=float(V0p),
        L_prime=Adapted(Lp),
        variant=variant,
        J_prime=tuple(Js),
        C_prime=tuple(Cs),
        c_prime=tuple(cs),
        A_prime=tuple(As),
        residual_drift=float(drift),
        base=base,
        notes=notes,
    )


# ----------------------------------------------------------------------
@dataclass(frozen=True)
class CentralDifference:
    eps: float
    xi: Predictable
    V0: float
    L: Adapted


@dataclass(frozen=True)
class ValidationReport:
    eps: tuple[float, ...]
    deviations: dict  # quantity -> array over eps
    orders: dict  # quantity -> orders between consecutive eps
    passed: dict
    ok: bool
    variant: str


QUANTITIES = ("xi", "V0", "L")


def central_differences(tree: ScenarioTree, family: PerturbationFamily, H, eps_list) -> list[CentralDifference]:
    grid = _check_grid(family, eps_list, pairs=True)
    out = []
    for eps in grid:
        up = _decompose_at(tree, family, H, eps)
        dn = _decompose_at(tree, family, H, -eps)
        h = 2.0 * eps
        out.append(CentralDifference(
            eps=eps,
            xi=Predictable([(a - b) / h for a, b in zip(up.xi.steps, dn.xi.steps)]),
            V0=(up.V0 - dn.V0) / h,
            L=Adapted([(a - b) / h for a, b in zip(up.L, dn.L)]),
        ))
    return out


def finite_difference_validate(tree, family, H, corrections: AsymptoticCorrections, eps_list,
                               differences=None, atol: float = FD_ATOL) -> ValidationReport:
    """Compare closed-form corrections with central differences of the full recursion.

    A quantity passes when its deviation shrinks with order >= 1.5 between
    consecutive eps, or when the smallest-eps deviation is already below
    ``atol`` (round-off level, where no order can be measured).
    """
    if differences is None:
        differences = central_differences(tree, family, H, eps_list)
    eps = tuple(cd.eps for cd in differences)
    dev = {q: [] for q in QUANTITIES}
    for cd in differences:
        dev["xi"].append(cd.xi.max_abs_diff(corrections.xi_prime))
        dev["V0"].append(abs(cd.V0 - corrections.V0_prime))
        dev["L"].append(cd.L.max_abs_diff(corrections.L_prime))
    dev = {q: np.array(v) for q, v in dev.items()}
    orders, passed = {}, {}
    for q, v in dev.items():
        ords = []
        for i in range(len(v) - 1):
            ratio = abs(eps[i]) / abs(eps[i + 1])
            if v[i + 1] == 0.0:
                ords.append(math.inf if v[i] > 0 else math.nan)
            else:
                ords.append(math.log(max(v[i], 1e-300) / v[i + 1]) / math.log(ratio))
        orders[q] = np.array(ords)
        last = v[-1]
        passed[q] = bool(last <= atol or (len(ords) > 0 and all(o >= ORDER_MIN for o in ords if not math.isnan(o))))
    ok = all(passed.values())
    return ValidationReport(eps, dev, orders, passed, ok, corrections.variant)


def select_variant(tree, family, H, eps_list=(1e-3, 1e-4), candidates=VARIANTS) -> AsymptoticCorrections:
    """Return the first variant whose corrections pass the finite-difference check."""
    differences = central_differences(tree, family, H, eps_list)
    first = None
    for variant in candidates:
        corr = asymptotic_corrections(tree, family, H, variant)
        report = finite_difference_validate(tree, family, H, corr, eps_list, differences)
        corr.validation = report
        corr.trusted = report.ok
        if report.ok:
            return corr
        if first is None:
            first = corr
    return first
