"""Eigenvalue grouping, poles, zeros and minimal realizations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ..errors import NumericalError

__all__ = [
    "EigenGroup",
    "Spectrum",
    "cluster_eigenvalues",
    "system_matrices",
    "poles",
    "zeros_siso",
    "minimal_realization",
]

CLUSTER_RTOL = 1e-6


@dataclass(frozen=True)
class EigenGroup:
    value: complex
    multiplicity: int


@dataclass(frozen=True, eq=False)
class Spectrum:
    eigenvalues: np.ndarray
    groups: tuple[EigenGroup, ...]
    rtol: float
    atol: float = 0.0

    def __len__(self):
        return len(self.eigenvalues)

    @property
    def values(self) -> np.ndarray:
        return np.array([g.value for g in self.groups])

    @property
    def multiplicities(self) -> tuple[int, ...]:
        return tuple(g.multiplicity for g in self.groups)


def _close(a: complex, b: complex, rtol: float, atol: float) -> bool:
    return abs(a - b) <= max(atol, rtol * max(abs(a), abs(b)))


def cluster_eigenvalues(values, rtol: float = CLUSTER_RTOL, atol: float = 0.0) -> Spectrum:
    """Group numerically equal eigenvalues.

    Values are sorted by real then imaginary part and joined by single
    linkage: two values share a group when they are within
    ``max(atol, rtol * max(|a|, |b|))`` of each other, directly or through a
    chain of such neighbours. Each group reports the mean of its members.
    """
    vals = np.asarray(values)
    if vals.size == 0:
        return Spectrum(vals, (), rtol, atol)
    real_input = not np.iscomplexobj(vals) or np.all(vals.imag == 0)
    order = np.lexsort((vals.imag, vals.real)) if np.iscomplexobj(vals) else np.argsort(vals)
    vals = vals[order]

    n = len(vals)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    # values are sorted by real part, so stop once the real gap alone is too large
    for i in range(n):
        for j in range(i + 1, n):
            if vals[j].real - vals[i].real > max(atol, rtol * (abs(vals[i]) + abs(vals[j]))):
                break
            if _close(vals[i], vals[j], rtol, atol):
                parent[find(j)] = find(i)

    members: dict[int, list[int]] = {}
    for i in range(n):
        members.setdefault(find(i), []).append(i)
    groups = []
    for idx in sorted(members.values(), key=lambda m: m[0]):
        mean = vals[idx].mean()
        groups.append(EigenGroup(float(mean.real) if real_input else complex(mean), len(idx)))
    return Spectrum(vals.real if real_input else vals, tuple(groups), rtol, atol)


def system_matrices(sys):
    """Return ``(A, B, C, D)`` from an LTI object or a tuple of matrices."""
    if isinstance(sys, tuple):
        A, B, C = (np.atleast_2d(np.asarray(m, dtype=float)) for m in sys[:3])
        D = np.asarray(sys[3], dtype=float) if len(sys) > 3 and sys[3] is not None else None
    else:
        A = np.asarray(sys.A, dtype=float)
        B = np.asarray(getattr(sys, "B_in", None) if hasattr(sys, "B_in") else sys.B, dtype=float)
        C = np.asarray(sys.C, dtype=float)
        D = getattr(sys, "D", None)
        D = None if D is None else np.asarray(D, dtype=float)
    n = A.shape[0]
    B = B.reshape(n, -1)
    C = C.reshape(-1, n)
    if D is None:
        D = np.zeros((C.shape[0], B.shape[1]))
    return A, B, C, np.atleast_2d(D).reshape(C.shape[0], B.shape[1])


def poles(sys, rtol: float = CLUSTER_RTOL) -> Spectrum:
    """Eigenvalues of the state matrix.

    These are the system poles only for a minimal realization; use
    :func:`minimal_realization` first when modes may be uncontrollable or
    unobservable from the selected channel.
    """
    A = system_matrices(sys)[0]
    return cluster_eigenvalues(np.linalg.eigvals(A) if A.size else np.zeros(0, complex), rtol=rtol)


def _krylov_basis(A: np.ndarray, B: np.ndarray, tol: float) -> np.ndarray:
    """Orthonormal basis of the Krylov space spanned by ``B, AB, A^2 B, ...``."""
    n = A.shape[0]
    scale = max(np.linalg.norm(A, 2), np.linalg.norm(B, 2), np.finfo(float).tiny)
    Q = np.zeros((n, 0))
    V = B
    while Q.shape[1] < n and V.shape[1]:
        for _ in range(2):
            V = V - Q @ (Q.T @ V)
        U, s, _ = np.linalg.svd(V, full_matrices=False)
        r = int(np.sum(s > tol * scale))
        if r == 0:
            break
        Qnew = U[:, :r]
        Q = np.hstack([Q, Qnew])
        V = A @ Qnew
    return Q


def minimal_realization(sys, tol: float = 1e-10):
    """Remove uncontrollable and unobservable modes by orthogonal projection.

    Returns ``(A, B, C, D)`` of the reduced realization. ``tol`` is the
    relative singular-value threshold used for every rank decision.
    """
    A, B, C, D = system_matrices(sys)
    Qc = _krylov_basis(A, B, tol)
    Ac, Bc, Cc = Qc.T @ A @ Qc, Qc.T @ B, C @ Qc
    Qo = _krylov_basis(Ac.T, Cc.T, tol)
    return Qo.T @ Ac @ Qo, Qo.T @ Bc, Cc @ Qo, D


def zeros_siso(sys, minimal: bool = True, rtol: float = CLUSTER_RTOL) -> Spectrum:
    """Finite invariant zeros of a SISO system.

    Zeros are the finite generalized eigenvalues of the pencil
    ``[[A, B], [C, D]] - s [[I, 0], [0, 0]]``. With ``minimal`` (default)
    the realization is reduced first so that pole/zero cancellations from
    decoupled modes are not reported.
    """
    A, B, C, D = minimal_realization(sys) if minimal else system_matrices(sys)
    if B.shape[1] != 1 or C.shape[0] != 1:
        raise ValueError(f"zeros_siso needs one input and one output, got {C.shape[0]}x{B.shape[1]}")
    n = A.shape[0]
    if n == 0 or (not np.any(B) or not np.any(C)):
        if not np.any(D):
            raise NumericalError("system pencil is degenerate: the channel is identically zero")
        return cluster_eigenvalues(np.zeros(0, complex), rtol=rtol)
    P = np.block([[A, B], [C, D]])
    E = np.zeros_like(P)
    E[:n, :n] = np.eye(n)
    alpha, beta = scipy.linalg.eig(P, E, right=False, homogeneous_eigvals=True)
    # infinite eigenvalues come out with beta at rounding level
    bound = 1e8 * max(np.linalg.norm(P, 1), 1.0)
    finite = np.abs(alpha) < bound * np.abs(beta)
    z = alpha[finite] / beta[finite]
    if not np.all(np.isfinite(z)):
        raise NumericalError("system pencil is degenerate")
    return cluster_eigenvalues(z, rtol=rtol)
