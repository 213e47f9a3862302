"""H2 norms from gramians, with a frequency-domain quadrature for checking."""

from __future__ import annotations

import numpy as np

from ..parallel import pmap
from .lyapunov import SchurLyapunov
from .spectra import system_matrices

__all__ = ["h2_norm", "h2_channel_norms", "h2_norm_frequency"]


def _check_strictly_proper(D: np.ndarray) -> None:
    if np.any(D != 0):
        raise ValueError("H2 norm is infinite for a system with direct feedthrough")


def h2_norm(sys, backend: str | None = None) -> float:
    """``sqrt(trace(C W C^T))`` with ``W`` the controllability gramian of ``(A, B)``."""
    A, B, C, D = system_matrices(sys)
    _check_strictly_proper(D)
    W = SchurLyapunov(A, backend=backend).solve(B)
    return float(np.sqrt(max(np.trace(C @ W @ C.T), 0.0)))


def h2_channel_norms(sys, backend: str | None = None) -> np.ndarray:
    """H2 norm of every SISO channel, shape ``(outputs, inputs)``.

    One Schur factorization is shared by all channels. The gramians are
    taken per input (controllability) or per output (observability),
    whichever needs fewer solves.
    """
    A, B, C, D = system_matrices(sys)
    _check_strictly_proper(D)
    p, m = C.shape[0], B.shape[1]
    if m <= p:
        solver = SchurLyapunov(A, backend=backend)

        def column(l):
            W = solver.solve(B[:, l])
            return np.einsum("ij,jk,ik->i", C, W, C)

        sq = np.column_stack(pmap(column, range(m))) if m else np.zeros((p, 0))
    else:
        solver = SchurLyapunov(A.T, backend=backend)

        def row(g):
            Wo = solver.solve(C[g, :])
            return np.einsum("ji,jk,ki->i", B, Wo, B)

        sq = np.vstack(pmap(row, range(p))) if p else np.zeros((0, m))
    return np.sqrt(np.clip(sq, 0.0, None))


def h2_norm_frequency(sys, w_min: float = 1e-3, w_max: float = 1e3, points: int = 4001, tails: bool = True) -> float:
    """H2 norm by trapezoid quadrature of ``|H(iw)|^2`` on a log grid.

    ``(1/pi) * integral_0^inf ||H(iw)||_F^2 dw`` over ``[w_min, w_max]``.
    With ``tails`` the two truncated ends are added in closed form: a flat
    rectangle below ``w_min`` and the ``1/w^2`` asymptote above ``w_max``,
    which is the decay of any strictly proper channel.
    """
    A, B, C, D = system_matrices(sys)
    n = A.shape[0]
    w = np.logspace(np.log10(w_min), np.log10(w_max), points)
    resolvent = np.linalg.solve(1j * w[:, None, None] * np.eye(n) - A, np.broadcast_to(B, (len(w),) + B.shape))
    H = C @ resolvent + D
    mag2 = np.sum(np.abs(H) ** 2, axis=(1, 2))
    total = np.trapezoid(mag2, w) if hasattr(np, "trapezoid") else np.trapz(mag2, w)
    if tails:
        total += mag2[0] * w[0] + mag2[-1] * w[-1]
    return float(np.sqrt(total / np.pi))
