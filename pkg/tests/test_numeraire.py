import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairhedge.errors import NonPositiveNumeraire
from fairhedge.generate import random_generator, random_tree
from fairhedge.numeraire import (
    build_numeraire,
    lift_self_financing,
    lifted_gains,
    self_financing_gap,
    verify_wealth_correspondence,
)


def test_half_share_numeraire(tri):
    tree, _ = tri
    spec = build_numeraire(tree, tree.predictable({"root": [0.5]}))
    np.testing.assert_allclose(spec.N[1], [2.0, 1.0, 0.5])
    np.testing.assert_allclose(spec.SN[1], [[0.5, 2.0], [1.0, 2.0], [2.0, 2.0]])
    assert tree.expect(spec.N[1] ** -2.0) == pytest.approx(45 / 24, abs=1e-12)


def test_bank_numeraire_is_one(tri):
    tree, _ = tri
    spec = build_numeraire(tree)
    assert all(np.all(level == 1.0) for level in spec.N)


def test_non_positive_names_offenders(tri):
    tree, _ = tri
    with pytest.raises(NonPositiveNumeraire) as info:
        build_numeraire(tree, tree.predictable({"root": [1.0]}))
    assert info.value.node == "down"
    assert info.value.value == pytest.approx(0.0)
    with pytest.raises(NonPositiveNumeraire) as info:
        build_numeraire(tree, tree.predictable({"root": [-1.0]}))
    assert info.value.offenders == ("up",)


def test_lift_on_trinomial(tri):
    tree, _ = tri
    xi = tree.predictable({"root": [1 / 3]})
    lifted = lift_self_financing(tree, None, 1 / 6, xi)
    np.testing.assert_allclose(lifted.bank[1], [[1 / 6 - 2 / 3]])
    np.testing.assert_allclose(lifted_gains(tree, lifted)[1], 1 / 6 + np.array([2, 0, -1]) / 3)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), horizon=st.integers(1, 3), assets=st.integers(1, 3))
def test_wealth_correspondence(seed, horizon, assets):
    rng = np.random.default_rng(seed)
    tree = random_tree(rng, horizon, assets)
    spec = build_numeraire(tree, random_generator(tree, rng))
    xi = tree.predictable()
    xi = type(xi)([rng.normal(size=s.shape) for s in xi.steps])
    rep = verify_wealth_correspondence(tree, spec, float(rng.normal()), xi)
    assert rep.max_deviation <= 1e-12
    assert rep.self_financing_original <= 1e-12
    assert rep.self_financing_numeraire <= 1e-12
    lifted = lift_self_financing(tree, spec, 0.0, xi)
    assert self_financing_gap(tree, lifted, spec) <= 1e-12
