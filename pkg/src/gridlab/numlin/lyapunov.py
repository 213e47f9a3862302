"""Continuous Lyapunov equations and controllability gramians.

``A W + W A^T = -Q Q^T`` is solved by the Bartels-Stewart method: a real
Schur factorization ``A = U T U^T`` followed by a block back-substitution
on the quasi-triangular ``T`` (compiled kernel when available).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ..errors import NumericalError
from . import _kernels
from .spectra import CLUSTER_RTOL, Spectrum, cluster_eigenvalues, system_matrices

__all__ = [
    "GramianReport",
    "SchurLyapunov",
    "solve_lyapunov",
    "solve_lyapunov_kron",
    "lyapunov_residual",
    "gramian_report",
    "controllability_gramian",
]

KRON_MAX_STATES = 20


def _schur_blocks(T: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = T.shape[0]
    starts, sizes = [], []
    k = 0
    while k < n:
        starts.append(k)
        if k + 1 < n and T[k + 1, k] != 0.0:
            sizes.append(2)
            k += 2
        else:
            sizes.append(1)
            k += 1
    return np.array(starts, dtype=np.intp), np.array(sizes, dtype=np.intp)


def _schur_eigenvalues(T: np.ndarray, starts, sizes) -> np.ndarray:
    eig = []
    for s, p in zip(starts, sizes):
        if p == 1:
            eig.append(complex(T[s, s]))
        else:
            eig.extend(np.linalg.eigvals(T[s:s + 2, s:s + 2]))
    return np.array(eig, dtype=complex)


class SchurLyapunov:
    """Reusable Lyapunov solver for one state matrix.

    The Schur factorization is computed once, so many right-hand sides
    (one per input channel, say) cost one back-substitution each.
    """

    def __init__(self, A, backend: str | None = None):
        A = np.asarray(A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got shape {A.shape}")
        self.A = A
        self.n = A.shape[0]
        self._kernel = _kernels.get_kernel(backend)
        if self.n == 0:
            self.T = self.U = np.zeros((0, 0))
            self._starts = self._sizes = np.zeros(0, dtype=np.intp)
            self.eigenvalues = np.zeros(0, complex)
            return
        if not np.all(np.isfinite(A)):
            raise NumericalError("state matrix has non-finite entries")
        T, U = scipy.linalg.schur(A, output="real")
        self.T = np.ascontiguousarray(T)
        self.U = U
        self._starts, self._sizes = _schur_blocks(self.T)
        self.eigenvalues = _schur_eigenvalues(self.T, self._starts, self._sizes)
        unstable = self.eigenvalues[self.eigenvalues.real >= 0]
        if unstable.size:
            raise NumericalError(f"state matrix is not Hurwitz; eigenvalues with Re >= 0: {unstable.tolist()}")

    def solve_rhs(self, S) -> np.ndarray:
        """Solve ``A W + W A^T = -S`` for symmetric ``S``."""
        S = np.asarray(S, dtype=float)
        if self.n == 0:
            return np.zeros((0, 0))
        F = -(self.U.T @ S @ self.U)
        F = np.ascontiguousarray(0.5 * (F + F.T))
        try:
            Y = self._kernel(self.T, F, self._starts, self._sizes)
        except ZeroDivisionError as exc:
            raise NumericalError(str(exc)) from None
        W = self.U @ Y @ self.U.T
        return 0.5 * (W + W.T)

    def solve(self, Q) -> np.ndarray:
        """Solve ``A W + W A^T = -Q Q^T``."""
        Q = np.asarray(Q, dtype=float).reshape(self.n, -1)
        return self.solve_rhs(Q @ Q.T)


def solve_lyapunov(A, Q, backend: str | None = None) -> np.ndarray:
    """Return ``W`` with ``A W + W A^T = -Q Q^T`` for Hurwitz ``A``."""
    return SchurLyapunov(A, backend=backend).solve(Q)


def solve_lyapunov_kron(A, Q) -> np.ndarray:
    """Dense vectorized solve, ``(I kron A + A kron I) vec W = -vec(Q Q^T)``.

    Cost grows as ``n^6``; kept for cross-checking small systems only.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if n > KRON_MAX_STATES:
        raise ValueError(f"Kronecker solve limited to {KRON_MAX_STATES} states, got {n}")
    Q = np.asarray(Q, dtype=float).reshape(n, -1)
    I = np.eye(n)
    K = np.kron(I, A) + np.kron(A, I)
    w = np.linalg.solve(K, -(Q @ Q.T).ravel(order="F"))
    return w.reshape((n, n), order="F")


def lyapunov_residual(A, Q, W) -> float:
    """Relative residual ``||A W + W A^T + Q Q^T||_F / ||Q Q^T||_F``."""
    A = np.asarray(A, dtype=float)
    Q = np.asarray(Q, dtype=float).reshape(A.shape[0], -1)
    S = Q @ Q.T
    denom = np.linalg.norm(S)
    R = A @ W + W @ A.T + S
    return float(np.linalg.norm(R) / denom) if denom > 0 else float(np.linalg.norm(R))


@dataclass(frozen=True, eq=False)
class GramianReport:
    W: np.ndarray
    residual: float
    spectrum: Spectrum


def gramian_report(A, Q, W, rtol: float = CLUSTER_RTOL) -> GramianReport:
    eig = np.linalg.eigvalsh(W) if W.size else np.zeros(0)
    return GramianReport(W=W, residual=lyapunov_residual(A, Q, W), spectrum=cluster_eigenvalues(eig, rtol=rtol))


def controllability_gramian(sys, actuation="setpoint", rtol: float = CLUSTER_RTOL, backend=None) -> GramianReport:
    """Controllability gramian of ``sys`` for the chosen actuation.

    ``actuation`` is ``"setpoint"`` (direct per-generator power setpoint,
    ``sys.B_setpoint``), ``"load"`` (the disturbance inputs ``B_in``) or an
    explicit input matrix. Objects without a setpoint matrix fall back to
    their input matrix.
    """
    A, B_in, _, _ = system_matrices(sys)
    if isinstance(actuation, str):
        if actuation == "setpoint":
            Bset = getattr(sys, "B_setpoint", None)
            Q = B_in if Bset is None else np.asarray(Bset, dtype=float)
        elif actuation == "load":
            Q = B_in
        else:
            raise ValueError(f"unknown actuation {actuation!r}")
    else:
        Q = np.asarray(actuation, dtype=float).reshape(A.shape[0], -1)
    W = solve_lyapunov(A, Q, backend=backend)
    return gramian_report(A, Q, W, rtol=rtol)
