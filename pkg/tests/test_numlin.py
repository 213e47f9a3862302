from __future__ import annotations

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from gridlab import numlin
from gridlab.assembly import LtiSystem, assemble_all_gfm, siso_channel, uniform_fleet
from gridlab.devices import GfmParams
from gridlab.errors import NumericalError
from gridlab.netcase import fully_connected
from gridlab.numlin import _kernels
from gridlab.numlin.lyapunov import _schur_blocks

BACKENDS = numlin.available_backends()


def random_stable(rng, n, shift=0.1):
    A = rng.normal(size=(n, n))
    # shift the spectrum into the open left half-plane
    return A - (np.linalg.eigvals(A).real.max() + shift + rng.uniform(0, 1)) * np.eye(n)


def triangle(M=1.0, D=1.0, B=1.0):
    rn = fully_connected(3, B)
    return assemble_all_gfm(rn, uniform_fleet(rn, GfmParams.from_effective(M, D)))


# ---------------------------------------------------------------------------
# spectra


def test_cluster_groups():
    spec = numlin.cluster_eigenvalues(np.array([1.0, 1.0 + 1e-9, 2.0, 3.0, 3.0, 3.0]))
    assert spec.multiplicities == (2, 1, 3)
    assert spec.values[0] == pytest.approx(1.0)
    assert sum(spec.multiplicities) == len(spec)
    assert numlin.cluster_eigenvalues(np.array([1.0, 1.001])).multiplicities == (1, 1)


def test_cluster_complex_and_chain():
    spec = numlin.cluster_eigenvalues(np.array([-1 + 2j, -1 - 2j, -1 + 2j]))
    assert sorted(spec.multiplicities) == [1, 2]
    # single linkage joins a chain of close neighbours
    chain = 1.0 + np.arange(5) * 0.9e-6
    assert numlin.cluster_eigenvalues(chain).multiplicities == (5,)


def test_cluster_empty():
    spec = numlin.cluster_eigenvalues(np.zeros(0))
    assert spec.groups == () and len(spec) == 0


def test_triangle_poles_and_zeros():
    ch = siso_channel(triangle(), 1, 1)
    z = np.sort_complex(numlin.zeros_siso(ch).eigenvalues)
    assert np.allclose(z, [-0.5 - 0.8660254037844386j, -0.5 + 0.8660254037844386j], atol=1e-12)
    A_min = numlin.minimal_realization(ch)[0]
    p = np.sort_complex(np.linalg.eigvals(A_min))
    assert np.allclose(p, [-1.0, -0.5 - 1.6583123951777j, -0.5 + 1.6583123951777j], atol=1e-12)
    full = numlin.poles(ch)
    assert sum(full.multiplicities) == 5
    assert sorted(full.multiplicities) == [1, 2, 2]


@settings(max_examples=30, deadline=None)
@given(st.floats(0.3, 15), st.floats(0.5, 25), st.floats(0.5, 100))
def test_triangle_zeros_are_numerator_roots(M, D, B):
    ch = siso_channel(triangle(M, D, B), 1, 1)
    z = numlin.zeros_siso(ch).eigenvalues
    expected = np.roots([M / B, D / B, 1.0])
    assert z.size == 2
    for r in expected:
        assert np.min(np.abs(z - r)) <= 1e-8 * abs(r)


def test_first_order_channel_has_no_zeros():
    sys = (np.array([[-2.0]]), np.array([[1.0]]), np.array([[1.0]]))
    assert numlin.zeros_siso(sys).eigenvalues.size == 0


def test_zero_channel_is_degenerate():
    sys = (np.array([[-1.0, 0.0], [0.0, -2.0]]), np.array([[1.0], [0.0]]), np.array([[0.0, 1.0]]))
    with pytest.raises(NumericalError, match="degenerate"):
        numlin.zeros_siso(sys)
    with pytest.raises(ValueError):
        numlin.zeros_siso(triangle())


def test_zeros_known_rational():
    # (s + 3) / ((s + 1)(s + 2)) in controllable companion form
    A = np.array([[0.0, 1.0], [-2.0, -3.0]])
    B = np.array([[0.0], [1.0]])
    C = np.array([[3.0, 1.0]])
    assert numlin.zeros_siso((A, B, C)).eigenvalues == pytest.approx([-3.0])


def test_minimal_realization_drops_hidden_modes():
    A = np.diag([-1.0, -2.0, -3.0])
    B = np.array([[1.0], [1.0], [0.0]])
    C = np.array([[1.0, 0.0, 1.0]])
    Am, Bm, Cm, _ = numlin.minimal_realization((A, B, C))
    assert Am.shape == (1, 1)
    assert Am[0, 0] == pytest.approx(-1.0)


# ---------------------------------------------------------------------------
# Lyapunov


@pytest.mark.parametrize("backend", BACKENDS)
def test_lyapunov_identity(backend):
    W = numlin.solve_lyapunov(-np.eye(2), np.eye(2), backend=backend)
    assert np.allclose(W, 0.5 * np.eye(2), atol=1e-15)


@pytest.mark.parametrize("backend", BACKENDS)
def test_lyapunov_companion(backend):
    A = np.array([[0.0, 1.0], [-1.0, -2.0]])
    Q = np.array([[0.0], [1.0]])
    W = numlin.solve_lyapunov(A, Q, backend=backend)
    assert numlin.lyapunov_residual(A, Q, W) < 1e-10
    # hand solution: W = diag(1/4, 1/4)
    assert np.allclose(W, np.diag([0.25, 0.25]), atol=1e-14)


@pytest.mark.parametrize("backend", BACKENDS)
def test_lyapunov_random_residual(backend):
    rng = np.random.default_rng(11)
    for _ in range(25):
        n = int(rng.integers(1, 51))
        A = random_stable(rng, n)
        Q = rng.normal(size=(n, int(rng.integers(1, 4))))
        W = numlin.solve_lyapunov(A, Q, backend=backend)
        assert numlin.lyapunov_residual(A, Q, W) <= 1e-9
        assert np.array_equal(W, W.T)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 20), st.integers(0, 2**31 - 1))
def test_lyapunov_matches_kronecker(n, seed):
    rng = np.random.default_rng(seed)
    A = random_stable(rng, n)
    Q = rng.normal(size=(n, 2))
    ref = numlin.solve_lyapunov_kron(A, Q)
    for backend in BACKENDS:
        W = numlin.solve_lyapunov(A, Q, backend=backend)
        assert np.abs(W - ref).max() <= 1e-8 * max(1.0, np.abs(ref).max())


def test_backends_agree():
    if len(BACKENDS) < 2:
        pytest.skip("compiled kernel not built")
    rng = np.random.default_rng(5)
    for n in (1, 2, 7, 30, 80):
        A = random_stable(rng, n)
        Q = rng.normal(size=(n, 3))
        a = numlin.solve_lyapunov(A, Q, backend="cython")
        b = numlin.solve_lyapunov(A, Q, backend="python")
        assert np.abs(a - b).max() <= 1e-12 * max(1.0, np.abs(a).max())


def test_kernel_directly_on_quasi_triangular():
    rng = np.random.default_rng(9)
    A = random_stable(rng, 12)
    T, _ = scipy.linalg.schur(A, output="real")
    T = np.ascontiguousarray(T)
    starts, sizes = _schur_blocks(T)
    assert 2 in sizes  # random real matrices have complex pairs
    F = rng.normal(size=(12, 12))
    F = np.ascontiguousarray(F + F.T)
    for backend in BACKENDS:
        Y = _kernels.get_kernel(backend)(T, F, starts, sizes)
        assert np.abs(T @ Y + Y @ T.T - F).max() < 1e-10 * np.abs(F).max()


def test_unknown_backend():
    with pytest.raises(ValueError):
        _kernels.get_kernel("fortran")


def test_not_hurwitz_lists_eigenvalues():
    with pytest.raises(NumericalError, match="not Hurwitz"):
        numlin.solve_lyapunov(np.diag([-1.0, 0.5]), np.eye(2))
    with pytest.raises(NumericalError):
        numlin.solve_lyapunov(np.array([[0.0, 1.0], [-1.0, 0.0]]), np.eye(2))


def test_kron_oracle_size_limit():
    with pytest.raises(ValueError):
        numlin.solve_lyapunov_kron(-np.eye(21), np.eye(21))


def test_schur_reuse_many_rhs():
    rng = np.random.default_rng(2)
    A = random_stable(rng, 15)
    solver = numlin.SchurLyapunov(A)
    for _ in range(3):
        q = rng.normal(size=(15, 1))
        assert numlin.lyapunov_residual(A, q, solver.solve(q)) < 1e-10


# ---------------------------------------------------------------------------
# gramians and H2


def test_gramian_report_invariants():
    rng = np.random.default_rng(4)
    A = random_stable(rng, 10)
    B = rng.normal(size=(10, 2))
    rep = numlin.controllability_gramian(LtiSystem.from_matrices(A, B, np.eye(10)), actuation="load")
    ev = np.linalg.eigvalsh(rep.W)
    assert ev.min() >= -1e-10 * ev.max()
    assert rep.residual < 1e-10
    assert sum(rep.spectrum.multiplicities) == 10


def test_gramian_setpoint_actuation_triangle():
    M, D, B = 0.636, 20.0, 10.0
    rep = numlin.controllability_gramian(triangle(M, D, B))
    vals = sorted(zip(rep.spectrum.values, rep.spectrum.multiplicities))
    expected = sorted([(1 / (6 * B * D), 1), (1 / (2 * B * D), 1), (1 / (2 * M * D), 3)])
    for (v, m), (ev, em) in zip(vals, expected):
        assert m == em and v == pytest.approx(ev, rel=1e-9)


def test_gramian_two_generators():
    M, D, B = 2.0, 1.5, 3.0
    rn = fully_connected(2, B)
    rep = numlin.controllability_gramian(assemble_all_gfm(rn, uniform_fleet(rn, GfmParams.from_effective(M, D))))
    assert sorted(rep.spectrum.multiplicities) == [1, 2]
    assert sorted(rep.spectrum.values) == pytest.approx(sorted([1 / (2 * B * D), 1 / (2 * M * D)]), rel=1e-9)


def _groups(spec):
    return {m: v for v, m in zip(spec.values, spec.multiplicities)}


def test_gramian_inertia_scaling():
    # triangle: frequency group has multiplicity 3, the two angle groups multiplicity 1
    a = numlin.controllability_gramian(triangle(1.0, 2.0, 5.0))
    b = numlin.controllability_gramian(triangle(2.0, 2.0, 5.0))
    assert _groups(b.spectrum)[3] == pytest.approx(0.5 * _groups(a.spectrum)[3], rel=1e-9)
    ia = a.spectrum.values[np.array(a.spectrum.multiplicities) == 1]
    ib = b.spectrum.values[np.array(b.spectrum.multiplicities) == 1]
    assert np.sort(ib) == pytest.approx(np.sort(ia), rel=1e-9)


def test_gramian_explicit_actuation():
    A = -np.eye(3)
    rep = numlin.controllability_gramian((A, np.zeros((3, 1)), np.eye(3)), actuation=np.eye(3))
    assert np.allclose(rep.W, 0.5 * np.eye(3))
    with pytest.raises(ValueError):
        numlin.controllability_gramian((A, np.zeros((3, 1)), np.eye(3)), actuation="wind")


def test_h2_first_order():
    sys = (np.array([[-1.0]]), np.array([[1.0]]), np.array([[1.0]]))
    assert numlin.h2_norm(sys) ** 2 == pytest.approx(0.5, rel=1e-14)


def test_h2_triangle_reference_values():
    sys = triangle()
    assert numlin.h2_norm(siso_channel(sys, 1, 1)) ** 2 == pytest.approx(11 / 30, rel=1e-12)
    assert numlin.h2_norm(siso_channel(sys, 2, 1)) ** 2 == pytest.approx(1 / 15, rel=1e-12)


def test_h2_rejects_feedthrough_and_instability():
    with pytest.raises(ValueError):
        numlin.h2_norm((np.array([[-1.0]]), np.array([[1.0]]), np.array([[1.0]]), np.array([[1.0]])))
    with pytest.raises(NumericalError):
        numlin.h2_norm((np.array([[1.0]]), np.array([[1.0]]), np.array([[1.0]])))


def test_h2_channel_norms_match_siso():
    sys = triangle(2.0, 1.0, 10.0)
    table = numlin.h2_channel_norms(sys)
    for g in range(3):
        for l in range(3):
            ch = siso_channel(sys, sys.input_labels[l], sys.output_labels[g])
            assert table[g, l] == pytest.approx(numlin.h2_norm(ch), rel=1e-12)
    # both gramian orientations give the same table
    rng = np.random.default_rng(0)
    A = random_stable(rng, 8)
    wide = (A, rng.normal(size=(8, 5)), rng.normal(size=(2, 8)))
    tall = (A, wide[1][:, :2], rng.normal(size=(5, 8)))
    for s in (wide, tall):
        t = numlin.h2_channel_norms(s)
        ref = [[numlin.h2_norm((A, s[1][:, [j]], s[2][[i]])) for j in range(s[1].shape[1])] for i in range(s[2].shape[0])]
        assert np.allclose(t, ref, rtol=1e-12)


def test_h2_mimo_is_frobenius_of_channels():
    sys = triangle(2.0, 1.0, 10.0)
    assert numlin.h2_norm(sys) == pytest.approx(np.sqrt((numlin.h2_channel_norms(sys) ** 2).sum()), rel=1e-12)


def test_h2_quadrature_agrees():
    ch = siso_channel(triangle(0.636, 20, 10), 1, 2)
    assert numlin.h2_norm_frequency(ch) == pytest.approx(numlin.h2_norm(ch), rel=1e-3)


# ---------------------------------------------------------------------------
# time response


def test_expm_nilpotent():
    assert np.allclose(numlin.matrix_exponential(np.array([[0.0, 1.0], [0.0, 0.0]]), 1.0), [[1, 1], [0, 1]])


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 50), st.integers(0, 2**31 - 1))
def test_expm_inverse(n, seed):
    rng = np.random.default_rng(seed)
    A = random_stable(rng, n) * 0.2
    E = numlin.matrix_exponential(A, 1.0) @ numlin.matrix_exponential(A, -1.0)
    assert np.abs(E - np.eye(n)).max() < 1e-10


def test_scalar_step():
    t = np.linspace(0, 20, 2001)
    traj = numlin.step_response((np.array([[-1.0]]), np.array([[1.0]]), np.array([[1.0]])), 0, 1.0, t)
    assert np.allclose(traj.y[:, 0], 1 - np.exp(-t), atol=1e-13)
    assert numlin.steady_state((np.array([[-1.0]]), np.array([[1.0]]), np.array([[1.0]])), 0, 1.0)[0] == pytest.approx(1.0)


def test_nonuniform_grid_and_errors():
    sys = (np.array([[-1.0]]), np.array([[1.0]]), np.array([[1.0]]))
    t = np.array([0.0, 0.1, 0.5, 2.0])
    assert np.allclose(numlin.step_response(sys, 0, 2.0, t).y[:, 0], 2 * (1 - np.exp(-t)), atol=1e-14)
    with pytest.raises(ValueError):
        numlin.step_response(sys, 0, 1.0, [0.0, 0.2, 0.1])
    with pytest.raises(ValueError):
        numlin.step_response(sys, 0, 1.0, [0.1, 0.2])
    with pytest.raises(IndexError):
        numlin.step_response(sys, 1, 1.0, [0.0, 0.1])


def test_steady_state_singular():
    sys = (np.array([[0.0, 1.0], [0.0, -1.0]]), np.array([[0.0], [1.0]]), np.eye(2))
    with pytest.raises(NumericalError, match="no finite steady state"):
        numlin.steady_state(sys, 0, 1.0)


def test_step_reaches_steady_state():
    sys = triangle(0.636, 20.0, 10.0)
    rate = np.abs(np.linalg.eigvals(sys.A).real).min()
    t = np.linspace(0, 12 / rate, 3001)
    traj = numlin.step_response(sys, 0, 1.0, t)
    assert np.allclose(traj.y[-1], numlin.steady_state(sys, 0, 1.0), rtol=0, atol=1e-6)


def test_discretize_matches_integral():
    A = np.array([[-1.0, 2.0], [0.0, -3.0]])
    B = np.array([[0.0], [1.0]])
    Phi, Gam = numlin.discretize(A, B, 0.3)
    assert np.allclose(Phi, numlin.matrix_exponential(A, 0.3))
    assert np.allclose(Gam, np.linalg.solve(A, (Phi - np.eye(2)) @ B))
