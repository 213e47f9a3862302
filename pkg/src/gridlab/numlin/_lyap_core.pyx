# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled quasi-triangular Lyapunov back-substitution.

Solves ``T Y + Y T^T = F`` for symmetric ``F`` with ``T`` in real Schur
form. Same block ordering as the pure-Python fallback in ``_lyap_py``.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


cdef int _small_sylvester(double[:, ::1] T, Py_ssize_t i0, Py_ssize_t p,
                          Py_ssize_t j0, Py_ssize_t q,
                          double* r, double* out) noexcept nogil:
    # (I_q kron T_ii + T_jj kron I_p) vec(Y) = vec(R), column-major vec,
    # Gaussian elimination with complete pivoting on at most 4 unknowns.
    cdef double K[4][4]
    cdef double rhs[4]
    cdef int colperm[4]
    cdef Py_ssize_t N = p * q
    cdef Py_ssize_t a, b, c, d, row, col, k, pr, pc
    cdef double v, big, f, tmp
    for row in range(N):
        rhs[row] = r[row]
        colperm[row] = <int>row
        for col in range(N):
            K[row][col] = 0.0
    for b in range(q):
        for a in range(p):
            row = a + p * b
            for d in range(q):
                for c in range(p):
                    col = c + p * d
                    v = 0.0
                    if b == d:
                        v += T[i0 + a, i0 + c]
                    if a == c:
                        v += T[j0 + b, j0 + d]
                    K[row][col] = v
    for k in range(N):
        big = -1.0
        pr = k
        pc = k
        for row in range(k, N):
            for col in range(k, N):
                if fabs(K[row][col]) > big:
                    big = fabs(K[row][col])
                    pr = row
                    pc = col
        if big == 0.0:
            return -1
        if pr != k:
            for col in range(N):
                tmp = K[k][col]; K[k][col] = K[pr][col]; K[pr][col] = tmp
            tmp = rhs[k]; rhs[k] = rhs[pr]; rhs[pr] = tmp
        if pc != k:
            for row in range(N):
                tmp = K[row][k]; K[row][k] = K[row][pc]; K[row][pc] = tmp
            colperm[k], colperm[pc] = colperm[pc], colperm[k]
        for row in range(k + 1, N):
            f = K[row][k] / K[k][k]
            if f != 0.0:
                for col in range(k, N):
                    K[row][col] -= f * K[k][col]
                rhs[row] -= f * rhs[k]
    cdef double sol[4]
    for k in range(N - 1, -1, -1):
        v = rhs[k]
        for col in range(k + 1, N):
            v -= K[k][col] * sol[col]
        sol[k] = v / K[k][k]
    for k in range(N):
        out[colperm[k]] = sol[k]
    return 0


def solve_quasi_triangular(double[:, ::1] T, double[:, ::1] F,
                           Py_ssize_t[::1] starts, Py_ssize_t[::1] sizes):
    """Return ``Y`` with ``T Y + Y T^T = F``.

    ``starts``/``sizes`` describe the 1x1 and 2x2 diagonal blocks of ``T``.
    """
    cdef Py_ssize_t n = T.shape[0]
    cdef Py_ssize_t nb = starts.shape[0]
    Y_arr = np.zeros((n, n), dtype=np.float64)
    cdef double[:, ::1] Y = Y_arr
    cdef Py_ssize_t bi, bj, i0, j0, p, q, a, b, k, ei, ej
    cdef double r[4]
    cdef double y[4]
    cdef double acc
    cdef int status = 0
    with nogil:
        for bj in range(nb - 1, -1, -1):
            j0 = starts[bj]
            q = sizes[bj]
            ej = j0 + q
            for bi in range(bj, -1, -1):
                i0 = starts[bi]
                p = sizes[bi]
                ei = i0 + p
                for b in range(q):
                    for a in range(p):
                        acc = F[i0 + a, j0 + b]
                        for k in range(ei, n):
                            acc -= T[i0 + a, k] * Y[k, j0 + b]
                        for k in range(ej, n):
                            acc -= Y[i0 + a, k] * T[j0 + b, k]
                        r[a + p * b] = acc
                if _small_sylvester(T, i0, p, j0, q, r, y) != 0:
                    status = -1
                    break
                for b in range(q):
                    for a in range(p):
                        Y[i0 + a, j0 + b] = y[a + p * b]
                        Y[j0 + b, i0 + a] = y[a + p * b]
            if status != 0:
                break
    if status != 0:
        raise ZeroDivisionError("Lyapunov operator is singular (eigenvalues with lambda_i + lambda_j = 0)")
    return Y_arr
