"""Dense linear-systems kernels: Lyapunov, gramians, H2, poles/zeros, time response."""

from ._kernels import BACKEND, available_backends
from .h2 import h2_channel_norms, h2_norm, h2_norm_frequency
from .lyapunov import (
    GramianReport,
    SchurLyapunov,
    controllability_gramian,
    gramian_report,
    lyapunov_residual,
    solve_lyapunov,
    solve_lyapunov_kron,
)
from .spectra import (
    EigenGroup,
    Spectrum,
    cluster_eigenvalues,
    minimal_realization,
    poles,
    system_matrices,
    zeros_siso,
)
from .timeresp import StepTrajectory, discretize, matrix_exponential, steady_state, step_response

__all__ = [
    "BACKEND",
    "available_backends",
    "EigenGroup",
    "Spectrum",
    "GramianReport",
    "SchurLyapunov",
    "StepTrajectory",
    "cluster_eigenvalues",
    "controllability_gramian",
    "discretize",
    "gramian_report",
    "h2_channel_norms",
    "h2_norm",
    "h2_norm_frequency",
    "lyapunov_residual",
    "matrix_exponential",
    "minimal_realization",
    "poles",
    "solve_lyapunov",
    "solve_lyapunov_kron",
    "steady_state",
    "step_response",
    "system_matrices",
    "zeros_siso",
]
