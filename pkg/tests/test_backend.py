import numpy as np
import pytest

from fairhedge import _backend, _kernels_py
from fairhedge.generate import random_claim, random_generator, random_tree
from fairhedge.hedging import fs_decompose
from fairhedge.numeraire import build_numeraire


@pytest.fixture(params=_backend.available())
def backend(request):
    prev = _backend.use(request.param)
    yield request.param
    _backend.use(prev)


def test_fold_matches_reference(backend):
    rng = np.random.default_rng(0)
    offsets = np.array([0, 3, 5, 9], dtype=np.int64)
    vals = rng.normal(size=(9, 2))
    w = rng.random(9)
    expect = np.array([w[a:b] @ vals[a:b] for a, b in zip(offsets[:-1], offsets[1:])])
    np.testing.assert_allclose(_backend.fold(vals, w, offsets), expect, rtol=1e-15, atol=1e-15)


def test_chol_solve(backend):
    rng = np.random.default_rng(1)
    a = rng.normal(size=(6, 3, 3))
    mats = a @ a.transpose(0, 2, 1) + np.eye(3)
    mats[2] = 0.0
    rhs = rng.normal(size=(6, 3))
    x, ok = _backend.chol_solve(mats, rhs)
    assert ok.tolist() == [True, True, False, True, True, True]
    good = np.flatnonzero(ok)
    np.testing.assert_allclose(np.einsum("kij,kj->ki", mats[good], x[good]), rhs[good], atol=1e-12)


def test_unknown_backend():
    with pytest.raises(ValueError):
        _backend.use("fortran")


@pytest.mark.skipif("compiled" not in _backend.available(), reason="extension not built")
def test_backends_agree_on_decomposition():
    rng = np.random.default_rng(3)
    tree = random_tree(rng, 3, 2)
    spec = build_numeraire(tree, random_generator(tree, rng))
    H = random_claim(tree, rng)
    out = {}
    for name in ("compiled", "python"):
        prev = _backend.use(name)
        out[name] = fs_decompose(tree, spec, H)
        _backend.use(prev)
    assert abs(out["compiled"].V0 - out["python"].V0) <= 1e-13
    assert out["compiled"].xi.max_abs_diff(out["python"].xi) <= 1e-12


def test_python_fold_handles_empty_columns():
    out = _kernels_py.fold(np.zeros((4, 0)), np.ones(4), np.array([0, 2, 4], dtype=np.int64))
    assert out.shape == (2, 0)
