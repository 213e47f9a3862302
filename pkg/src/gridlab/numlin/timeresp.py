"""Matrix exponential and exact zero-order-hold step simulation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ..errors import NumericalError
from .spectra import system_matrices

__all__ = ["matrix_exponential", "discretize", "StepTrajectory", "step_response", "steady_state"]


def matrix_exponential(A, t: float = 1.0) -> np.ndarray:
    """``exp(A t)`` by scaling and squaring with a Pade approximant."""
    return scipy.linalg.expm(np.asarray(A, dtype=float) * t)


def discretize(A, B, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """``(exp(A dt), integral_0^dt exp(A tau) dtau B)`` from one augmented exponential."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    n, m = B.shape
    aug = np.zeros((n + m, n + m))
    aug[:n, :n] = A
    aug[:n, n:] = B
    E = scipy.linalg.expm(aug * dt)
    return E[:n, :n], E[:n, n:]


@dataclass(frozen=True, eq=False)
class StepTrajectory:
    t: np.ndarray
    x: np.ndarray  # (len(t), states)
    y: np.ndarray  # (len(t), outputs)


def step_response(sys, input_index: int, magnitude: float, t_grid) -> StepTrajectory:
    """Response to ``u = magnitude`` on one input from rest at ``t = 0``.

    Steps are exact for piecewise-constant input; each distinct step
    length on the grid costs one augmented matrix exponential.
    """
    A, B, C, _ = system_matrices(sys)
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0 or t[0] != 0.0:
        raise ValueError("t_grid must be a 1-D grid starting at 0")
    dts = np.diff(t)
    if np.any(dts <= 0):
        raise ValueError("t_grid must be strictly increasing")
    if not 0 <= input_index < B.shape[1]:
        raise IndexError(f"input index {input_index} out of range for {B.shape[1]} inputs")
    b = B[:, input_index] * magnitude
    n = A.shape[0]
    x = np.zeros((t.size, n))
    cache: dict[float, tuple[np.ndarray, np.ndarray]] = {}
    for k, dt in enumerate(dts):
        key = float(np.round(dt, 15))
        if key not in cache:
            Phi, Gam = discretize(A, b[:, None], dt)
            cache[key] = (Phi, Gam[:, 0])
        Phi, gam = cache[key]
        x[k + 1] = Phi @ x[k] + gam
    return StepTrajectory(t=t, x=x, y=x @ C.T)


def steady_state(sys, input_index: int, magnitude: float) -> np.ndarray:
    """Final output value ``-C A^-1 B u`` of a step."""
    A, B, C, _ = system_matrices(sys)
    if A.size and np.linalg.cond(A) < 1e14:
        return C @ -np.linalg.solve(A, B[:, input_index] * magnitude)
    raise NumericalError("no finite steady state: state matrix is singular")
