"""Time the compiled and numpy kernels on the same inputs.

    python benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from fairhedge import _backend
from fairhedge.generate import random_claim, random_generator, random_tree
from fairhedge.hedging import fs_decompose
from fairhedge.numeraire import build_numeraire


def cases(rng):
    k = 20000
    sizes = rng.integers(2, 5, size=k)
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    n = int(offsets[-1])
    w = rng.random(n)
    vals1 = rng.normal(size=(n, 1))
    vals4 = rng.normal(size=(n, 4))
    yield "fold 1 col", lambda: _backend.fold(vals1, w, offsets)
    yield "fold 4 cols", lambda: _backend.fold(vals4, w, offsets)
    a = rng.normal(size=(k, 3, 3))
    mats = a @ a.transpose(0, 2, 1) + 3 * np.eye(3)
    rhs = rng.normal(size=(k, 3))
    yield "chol_solve 3x3", lambda: _backend.chol_solve(mats, rhs)
    tree = random_tree(rng, horizon=6, assets=2, max_children=4)
    spec = build_numeraire(tree, random_generator(tree, rng))
    H = random_claim(tree, rng)
    yield f"fs_decompose ({len(tree.nodes)} nodes)", lambda: fs_decompose(tree, spec, H)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    names = _backend.available()
    rng = np.random.default_rng(0)
    print(f"{'kernel':32s}" + "".join(f"{b:>14s}" for b in names) + "   ratio")
    for label, fn in cases(rng):
        times = {}
        for b in names:
            prev = _backend.use(b)
            fn()
            times[b] = min(timeit.repeat(fn, number=3, repeat=args.repeat)) / 3
            _backend.use(prev)
        ratio = times["python"] / times["compiled"] if "compiled" in times else float("nan")
        print(f"{label:32s}" + "".join(f"{times[b] * 1e3:12.3f}ms" for b in names) + f"   {ratio:5.2f}x")


if __name__ == "__main__":
    main()
