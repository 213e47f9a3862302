"""Pure-Python fallback for the quasi-triangular Lyapunov back-substitution.

Mirrors ``_lyap_core.solve_quasi_triangular`` block for block, with the
inner sums delegated to numpy.
"""

from __future__ import annotations

import numpy as np


def solve_quasi_triangular(T: np.ndarray, F: np.ndarray, starts: np.ndarray, sizes: np.ndarray) -> np.ndarray:
    n = T.shape[0]
    Y = np.zeros((n, n))
    for bj in range(len(starts) - 1, -1, -1):
        j0, q = int(starts[bj]), int(sizes[bj])
        js = slice(j0, j0 + q)
        for bi in range(bj, -1, -1):
            i0, p = int(starts[bi]), int(sizes[bi])
            is_ = slice(i0, i0 + p)
            R = F[is_, js] - T[is_, i0 + p:] @ Y[i0 + p:, js] - Y[is_, j0 + q:] @ T[js, j0 + q:].T
            if p == 1 and q == 1:
                denom = T[i0, i0] + T[j0, j0]
                if denom == 0.0:
                    raise ZeroDivisionError("Lyapunov operator is singular (eigenvalues with lambda_i + lambda_j = 0)")
                Yij = R / denom
            else:
                K = np.kron(np.eye(q), T[is_, is_]) + np.kron(T[js, js], np.eye(p))
                try:
                    Yij = np.linalg.solve(K, R.ravel(order="F")).reshape((p, q), order="F")
                except np.linalg.LinAlgError:
                    raise ZeroDivisionError(
                        "Lyapunov operator is singular (eigenvalues with lambda_i + lambda_j = 0)"
                    ) from None
            Y[is_, js] = Yij
            Y[js, is_] = Yij.T
    return Y
