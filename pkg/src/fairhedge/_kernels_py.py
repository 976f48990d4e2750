"""Pure numpy versions of the compiled kernels."""
import numpy as np


def fold(values, weights, offsets):
    # reduceat over axis 0 accumulates row by row in stored order, same as the compiled loop
    weighted = weights[:, None] * values
    return np.add.reduceat(weighted, offsets[:-1], axis=0)


def _solve_factored(low, rhs):
    y = np.linalg.solve(low, rhs[..., None])
    return np.linalg.solve(np.swapaxes(low, -1, -2), y)[..., 0]


def chol_solve(mats, rhs):
    k, d, _ = mats.shape
    try:
        low = np.linalg.cholesky(mats)
    except np.linalg.LinAlgError:
        pass
    else:
        return _solve_factored(low, rhs), np.ones(k, dtype=bool)
    out = np.full((k, d), np.nan)
    ok = np.ones(k, dtype=bool)
    for m in range(k):
        try:
            low = np.linalg.cholesky(mats[m])
        except np.linalg.LinAlgError:
            ok[m] = False
            continue
        out[m] = _solve_factored(low, rhs[m])
    return out, ok
