"""Quadratic hedging on scenario trees under a tradable numeraire."""
from .errors import (
    CoverageError,
    EpsilonOutOfRange,
    FairHedgeError,
    HorizonNotOne,
    ModelError,
    NonPositiveNumeraire,
    NumericalError,
    ProbabilityError,
    RankDeficientDesign,
    SingularCovariance,
    ZeroConditionalVariance,
)
from .hedging import Decomposition, classical_fs, fs_decompose, interest_rate_fair_price
from .market import Adapted, Node, Predictable, ScenarioTree, doob_decompose, gains, weighted_bilinear
from .modelfile import Model, load_model
from .numeraire import NumeraireSpec, build_numeraire, lift_self_financing, verify_wealth_correspondence
from .oracle import check_against_recursion, solve_global
from .perturbation import (
    AsymptoticCorrections,
    PerturbationFamily,
    asymptotic_corrections,
    build_family,
    finite_difference_validate,
    select_variant,
    stability_sweep,
)

__version__ = "0.1.0"

__all__ = [
    "Adapted", "AsymptoticCorrections", "CoverageError", "Decomposition", "EpsilonOutOfRange",
    "FairHedgeError", "HorizonNotOne", "Model", "ModelError", "Node", "NonPositiveNumeraire",
    "NumeraireSpec", "NumericalError", "PerturbationFamily", "Predictable", "ProbabilityError",
    "RankDeficientDesign", "ScenarioTree", "SingularCovariance", "ZeroConditionalVariance",
    "asymptotic_corrections", "build_family", "build_numeraire", "check_against_recursion",
    "classical_fs", "doob_decompose", "finite_difference_validate", "fs_decompose", "gains",
    "interest_rate_fair_price", "lift_self_financing", "load_model", "select_variant",
    "solve_global", "stability_sweep", "verify_wealth_correspondence", "weighted_bilinear",
]
