import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairhedge.errors import CoverageError, ModelError, ProbabilityError
from fairhedge.generate import random_tree
from fairhedge.market import (
    Adapted,
    Node,
    ScenarioTree,
    bilinear_matrix,
    conditional_covariance,
    doob_decompose,
    gains,
    weighted_bilinear,
)


def _nodes(**changes):
    base = {
        "root": Node("root", 0, None, 1.0, (2.0,)),
        "up": Node("up", 1, "root", 1 / 6, (4.0,)),
        "mid": Node("mid", 1, "root", 1 / 2, (2.0,)),
        "down": Node("down", 1, "root", 1 / 3, (1.0,)),
    }
    base.update(changes)
    return [v for v in base.values() if v is not None]


def test_levels_keep_input_order(tri):
    tree, _ = tri
    assert tree.level_ids[1] == ("up", "mid", "down")
    assert tree.leaves == ("up", "mid", "down")
    assert tree.position["mid"] == (1, 1)
    np.testing.assert_allclose(tree.prob[1], [1 / 6, 1 / 2, 1 / 3])


def test_expectation_of_stock(tri):
    tree, _ = tri
    assert tree.expect(tree.prices[1][:, 0]) == pytest.approx(4 / 6 + 1 + 1 / 3)


@pytest.mark.parametrize("changes,error,node", [
    ({"mid": Node("mid", 1, "root", 0.4, (2.0,))}, ProbabilityError, "root"),
    ({"down": Node("down", 1, "root", 1 / 3, (-1.0,))}, ModelError, "down"),
    ({"down": Node("down", 1, "nowhere", 1 / 3, (1.0,))}, ModelError, "down"),
    ({"down": Node("down", 2, "root", 1 / 3, (1.0,))}, ModelError, "down"),
    ({"mid": Node("mid", 1, "root", 0.0, (2.0,))}, ModelError, "mid"),
])
def test_invalid_trees_name_the_node(changes, error, node):
    with pytest.raises(error) as info:
        ScenarioTree(_nodes(**changes))
    assert info.value.node == node


def test_duplicate_ids_rejected():
    nodes = _nodes() + [Node("mid", 1, "root", 0.0, (2.0,))]
    with pytest.raises(ModelError, match="duplicate"):
        ScenarioTree(nodes)


def test_claim_coverage(tri):
    tree, _ = tri
    with pytest.raises(CoverageError) as info:
        tree.claim({"up": 1.0, "mid": 0.0})
    assert info.value.node == "down"
    np.testing.assert_array_equal(tree.claim({"up": 1, "mid": 0, "down": 0}), [1, 0, 0])


def test_doob_decomposition(tri):
    tree, _ = tri
    M, A = doob_decompose(tree)
    np.testing.assert_allclose(M[1] + A[1], tree.prices[1])
    assert tree.expect(M[1][:, 0]) == pytest.approx(2.0)
    assert A[1][0, 0] == pytest.approx(tree.expect(tree.prices[1][:, 0]) - 2.0)


def test_gains_and_lift(tri):
    tree, _ = tri
    xi = tree.predictable({"root": [0.5]})
    np.testing.assert_allclose(gains(tree, xi)[1], [1.0, 0.0, -0.5])
    np.testing.assert_array_equal(tree.lift(np.array([3.0]), 0), [3.0, 3.0, 3.0])


def test_bilinear_form_is_shift_invariant(tri):
    tree, H = tri
    N = np.array([2.0, 1.0, 0.5])
    x = tree.prices[1][:, 0]
    base = weighted_bilinear(tree, N, x, H, 0)
    assert weighted_bilinear(tree, N, x + 7.0, H - 3.0, 0) == pytest.approx(base, abs=1e-15)
    np.testing.assert_allclose(weighted_bilinear(tree, np.ones(3), x, H, 0),
                               conditional_covariance(tree, np.column_stack([x, H]), 0)[:, 0, 1])


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), horizon=st.integers(1, 3), assets=st.integers(1, 2))
def test_tower_property(seed, horizon, assets):
    rng = np.random.default_rng(seed)
    tree = random_tree(rng, horizon, assets)
    X = rng.normal(size=tree.n_leaves)
    for n in range(horizon):
        inner = tree.cond_expect(X, n + 1)
        np.testing.assert_allclose(tree.cond_expect(inner, n, n + 1), tree.cond_expect(X, n), atol=1e-13)
    assert tree.expect(X) == pytest.approx(float(np.dot(tree.prob[horizon], X)), abs=1e-13)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_bilinear_matrix_is_psd(seed):
    rng = np.random.default_rng(seed)
    tree = random_tree(rng, 2, 2)
    N = rng.uniform(0.5, 2.0, tree.n_leaves)
    cols = rng.normal(size=(tree.n_leaves, 3))
    M = bilinear_matrix(tree, N, cols, 1)
    np.testing.assert_allclose(M, np.transpose(M, (0, 2, 1)), atol=1e-14)
    assert np.all(np.linalg.eigvalsh(M) > -1e-12)


def test_adapted_container():
    a = Adapted([np.zeros(1), np.ones(3)])
    b = Adapted([np.zeros(1), np.array([1.0, 1.5, 1.0])])
    assert a.max_abs_diff(b) == 0.5
    assert len(a) == 2
