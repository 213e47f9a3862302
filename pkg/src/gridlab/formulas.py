"""Closed forms for identical GFMs on a fully connected network.

Every generator has effective inertia ``M`` and damping ``D`` and each pair
is coupled by susceptance ``B``. The three-generator transfer functions,
their poles/zeros and H2 norms, and the controllability gramian for ``n``
generators are available in closed form; :func:`verify_closed_forms`
checks each one against the numerical kernels.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from itertools import product

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import numlin
from .assembly import FREQ, REL_ANGLE, LtiSystem, assemble_all_gfm, siso_channel, uniform_fleet
from .devices import GfmParams, effective_params
from .errors import ValidationError
from .netcase import fully_connected

__all__ = [
    "TriangleParams",
    "triangle_tf",
    "triangle_poles",
    "triangle_zeros",
    "h2_squared_cubic",
    "h2_local_closed",
    "h2_nonlocal_closed",
    "h2_nonlocal_residue",
    "theorem1_spectrum",
    "gramian_closed_form",
    "triangle_system",
    "VerificationRecord",
    "verify_closed_forms",
    "summarize",
    "report_json",
    "DEFAULT_GRID",
    "DENSE_GRID",
]


@dataclass(frozen=True)
class TriangleParams:
    M: float
    D: float
    B: float
    n: int = 3

    def __post_init__(self):
        for name in ("M", "D", "B"):
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0:
                raise ValidationError(f"{name} must be positive, got {v!r}")
        if self.n < 2:
            raise ValidationError(f"n must be at least 2, got {self.n}")


def _need_three(p: TriangleParams) -> None:
    if p.n != 3:
        raise ValueError(f"closed form only available for n = 3, got n = {p.n}")


def triangle_tf(p: TriangleParams, kind: str = "diagonal") -> tuple[np.ndarray, np.ndarray]:
    """Numerator and denominator coefficients (descending powers of s).

    diagonal:    ((M/B)s^2 + (D/B)s + 1) / (((M/B)s^2 + (D/B)s + 3)(Ms + D))
    offdiagonal: 1 / (same denominator)
    """
    _need_three(p)
    quad = np.array([p.M / p.B, p.D / p.B, 3.0])
    den = np.polymul(quad, [p.M, p.D])
    if kind == "diagonal":
        num = np.array([p.M / p.B, p.D / p.B, 1.0])
    elif kind == "offdiagonal":
        num = np.array([1.0])
    else:
        raise ValueError(f"kind must be 'diagonal' or 'offdiagonal', got {kind!r}")
    return num, den


def _quadratic_roots(a: float, b: float, c: float) -> np.ndarray:
    disc = np.lib.scimath.sqrt(b * b - 4 * a * c)
    return np.array([(-b + disc) / (2 * a), (-b - disc) / (2 * a)], dtype=complex)


def triangle_poles(p: TriangleParams) -> np.ndarray:
    _need_three(p)
    quad = _quadratic_roots(p.M / p.B, p.D / p.B, 3.0)
    return np.append(quad, complex(-p.D / p.M))


def triangle_zeros(p: TriangleParams) -> np.ndarray:
    _need_three(p)
    return _quadratic_roots(p.M / p.B, p.D / p.B, 1.0)


def h2_squared_cubic(num, den) -> float:
    """Squared H2 norm of ``(b2 s^2 + b1 s + b0) / (a3 s^3 + a2 s^2 + a1 s + a0)``.

    Residue evaluation of ``(1/2pi) integral |H(iw)|^2 dw`` for a stable
    third-order denominator::

        (b2^2 a0 a1 + (b1^2 - 2 b0 b2) a0 a3 + b0^2 a2 a3) / (2 a0 a3 (a1 a2 - a0 a3))
    """
    num = np.atleast_1d(np.asarray(num, dtype=float))
    den = np.atleast_1d(np.asarray(den, dtype=float))
    if den.size != 4 or num.size > 3:
        raise ValueError("need a third-order denominator and a numerator of degree <= 2")
    b2, b1, b0 = np.concatenate([np.zeros(3 - num.size), num])
    a3, a2, a1, a0 = den
    hurwitz = a1 * a2 - a0 * a3
    if min(a3, a2, a1, a0) <= 0 or hurwitz <= 0:
        raise ValueError("denominator is not Hurwitz")
    return float((b2 * b2 * a0 * a1 + (b1 * b1 - 2 * b0 * b2) * a0 * a3 + b0 * b0 * a2 * a3) / (2 * a0 * a3 * hurwitz))


def h2_local_closed(p: TriangleParams) -> float:
    """Squared local H2 norm ``(6D^2 + 5BM) / (12 D^3 M + 18 B D M^2)``."""
    _need_three(p)
    M, D, B = p.M, p.D, p.B
    return (6 * D**2 + 5 * B * M) / (12 * D**3 * M + 18 * B * D * M**2)


def h2_nonlocal_closed(p: TriangleParams) -> float:
    """Printed nonlocal expression ``M^4 / (6 B D^3 + 9 B^2 D M)``.

    Advisory only: it does not agree with the residue evaluation of the
    off-diagonal channel (see :func:`h2_nonlocal_residue`), which gives
    ``B^2 / (6 B D^3 + 9 B^2 D M)``.
    """
    _need_three(p)
    M, D, B = p.M, p.D, p.B
    return M**4 / (6 * B * D**3 + 9 * B**2 * D * M)


def h2_nonlocal_residue(p: TriangleParams) -> float:
    """Squared nonlocal H2 norm by the cubic residue formula."""
    return h2_squared_cubic(*triangle_tf(p, "offdiagonal"))


def theorem1_spectrum(p: TriangleParams) -> numlin.Spectrum:
    """Grouped gramian eigenvalues for ``n`` identical GFMs on a complete graph.

    ``1/(2BD)`` once and ``1/(2nBD)`` ``n - 2`` times for the relative
    angles, ``1/(2MD)`` ``n`` times for the frequencies.
    """
    n = p.n
    angle = [1.0 / (2 * p.B * p.D)] + [1.0 / (2 * n * p.B * p.D)] * (n - 2)
    freq = [1.0 / (2 * p.M * p.D)] * n
    return numlin.cluster_eigenvalues(np.array(angle + freq))


def gramian_closed_form(p: TriangleParams) -> np.ndarray:
    """``blockdiag((1/(2nBD)) (ones + I), (1/(2MD)) I)`` in angle/frequency ordering."""
    n = p.n
    W = np.zeros((2 * n - 1, 2 * n - 1))
    W[: n - 1, : n - 1] = (np.ones((n - 1, n - 1)) + np.eye(n - 1)) / (2 * n * p.B * p.D)
    W[n - 1 :, n - 1 :] = np.eye(n) / (2 * p.M * p.D)
    return W


def triangle_system(p: TriangleParams) -> LtiSystem:
    """Assembled all-GFM system on the complete graph with inputs at every generator."""
    rn = fully_connected(p.n, p.B)
    return assemble_all_gfm(rn, uniform_fleet(rn, GfmParams.from_effective(p.M, p.D)))


# ---------------------------------------------------------------------------
# verification harness

DEFAULT_GRID = {
    "M": (0.636, 2.0, 12.73),
    "D": (1.0, 2.0, 20.0),
    "B": (1.0, 10.0, 100.0),
    "n": tuple(range(2, 11)),
}

DENSE_GRID = {
    "M": tuple(np.round(np.geomspace(0.636, 12.73, 6), 6)),
    "D": (0.5, 1.0, 2.0, 5.0, 20.0),
    "B": (0.5, 1.0, 10.0, 100.0, 300.0),
    "n": tuple(range(2, 15)),
}

TOL = 1e-9


@dataclass
class VerificationRecord:
    name: str
    point: dict
    closed_form: float
    oracle: float
    rel_err: float
    tol: float
    passed: bool
    advisory: bool = False


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), np.finfo(float).tiny)


def _set_rel_err(expected, computed) -> float:
    """Largest relative error after optimally matching two value sets."""
    expected = np.asarray(expected, dtype=complex)
    computed = np.asarray(computed, dtype=complex)
    if expected.size != computed.size:
        return float("inf")
    cost = np.abs(expected[:, None] - computed[None, :])
    r, c = linear_sum_assignment(cost)
    return float(np.max(cost[r, c] / np.maximum(np.abs(expected[r]), np.finfo(float).tiny)))


def _record(records, name, point, closed, oracle, err=None, tol=TOL, advisory=False):
    err = _rel(closed, oracle) if err is None else err
    records.append(VerificationRecord(name, dict(point), float(closed), float(oracle), float(err), tol, bool(err <= tol), advisory))


def _check_triangle_point(p: TriangleParams, records: list) -> None:
    point = {"M": p.M, "D": p.D, "B": p.B}
    sys = triangle_system(p)
    diag = siso_channel(sys, 1, 1)
    off = siso_channel(sys, 2, 1)

    # poles: the minimal diagonal channel has exactly the three closed-form poles,
    # and every eigenvalue of the full state matrix is one of them
    expected_p = triangle_poles(p)
    Am = numlin.minimal_realization(diag)[0]
    err = _set_rel_err(expected_p, np.linalg.eigvals(Am))
    full = np.linalg.eigvals(sys.A)
    err_full = max(np.min(np.abs(expected_p - z)) / abs(z) for z in full)
    _record(records, "triangle_poles", point, abs(expected_p[0]), abs(expected_p[0]), err=max(err, err_full))

    expected_z = triangle_zeros(p)
    z = numlin.zeros_siso(diag).eigenvalues
    _record(records, "triangle_zeros", point, abs(expected_z[0]), abs(z[0]) if z.size else np.nan, err=_set_rel_err(expected_z, z))

    local = numlin.h2_norm(diag) ** 2
    _record(records, "h2_local", point, h2_local_closed(p), local)
    nonlocal_ = numlin.h2_norm(off) ** 2
    _record(records, "h2_nonlocal_residue", point, h2_nonlocal_residue(p), nonlocal_)
    _record(records, "h2_nonlocal_printed", point, h2_nonlocal_closed(p), nonlocal_, advisory=True)


def _check_gramian_point(p: TriangleParams, records: list) -> None:
    point = {"M": p.M, "D": p.D, "B": p.B, "n": p.n}
    sys = triangle_system(p)
    rep = numlin.controllability_gramian(sys)
    expected = theorem1_spectrum(p)
    got = rep.spectrum
    same_groups = sorted(expected.multiplicities) == sorted(got.multiplicities)
    err = _set_rel_err(expected.eigenvalues, got.eigenvalues)
    if not same_groups:
        err = float("inf")
    _record(records, "theorem1_spectrum", point, float(expected.values.max()), float(got.values.max()), err=err)

    Wc = gramian_closed_form(p)
    # every column of the angle block sums to 1/(2BD)
    col = Wc[: p.n - 1, : p.n - 1].sum(axis=0)
    target = 1.0 / (2 * p.B * p.D)
    _record(records, "angle_block_column_sums", point, target, float(col[0]), err=float(np.max(np.abs(col - target)) / target), tol=1e-12)
    closed_eigs = np.linalg.eigvalsh(Wc)
    _record(records, "theorem1_vs_closed_form", point, float(expected.values.max()), float(closed_eigs.max()),
            err=_set_rel_err(expected.eigenvalues, closed_eigs), tol=1e-12)
    entry_err = float(np.abs(rep.W - Wc).max() / np.abs(Wc).max())
    _record(records, "gramian_closed_form", point, float(np.abs(Wc).max()), float(np.abs(rep.W).max()), err=entry_err)


def verify_closed_forms(grid: str | dict = "default") -> list[VerificationRecord]:
    """Evaluate every closed form against its numerical oracle over a grid."""
    if isinstance(grid, str):
        try:
            grid = {"default": DEFAULT_GRID, "dense": DENSE_GRID}[grid]
        except KeyError:
            raise ValueError(f"unknown grid {grid!r}") from None
    records: list[VerificationRecord] = []

    eff = effective_params(GfmParams(T_c=0.0318, R=0.05))
    _record(records, "effective_inertia", {"T_c": 0.0318, "R": 0.05}, 0.636, eff.M_eff)
    _record(records, "effective_damping", {"T_c": 0.0318, "R": 0.05}, 20.0, eff.D_eff)

    for M, D, B in product(grid["M"], grid["D"], grid["B"]):
        _check_triangle_point(TriangleParams(M, D, B, 3), records)
    for n, M, D, B in product(grid["n"], grid["M"], grid["D"], grid["B"]):
        _check_gramian_point(TriangleParams(M, D, B, n), records)
    return records


def summarize(records: list[VerificationRecord]) -> list[dict]:
    """One row per identity: point count, worst relative error, status."""
    rows: dict[str, dict] = {}
    for r in records:
        row = rows.setdefault(
            r.name, {"name": r.name, "points": 0, "max_rel_err": 0.0, "tol": r.tol, "passed": True, "advisory": r.advisory}
        )
        row["points"] += 1
        row["max_rel_err"] = max(row["max_rel_err"], r.rel_err)
        row["passed"] &= r.passed
    return list(rows.values())


def report_json(records: list[VerificationRecord]) -> str:
    return json.dumps([asdict(r) for r in records], indent=2) + "\n"
