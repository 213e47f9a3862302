from __future__ import annotations

import json
import os
import subprocess
import sys
from fractions import Fraction
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridlab import formulas, numlin
from gridlab.assembly import siso_channel
from gridlab.errors import ValidationError
from gridlab.formulas import (
    TriangleParams,
    gramian_closed_form,
    h2_local_closed,
    h2_nonlocal_closed,
    h2_nonlocal_residue,
    h2_squared_cubic,
    theorem1_spectrum,
    triangle_poles,
    triangle_system,
    triangle_tf,
    triangle_zeros,
)

UNIT = TriangleParams(1.0, 1.0, 1.0)
M_GRID, D_GRID, B_GRID = (0.636, 2.0, 12.73), (1.0, 2.0, 20.0), (1.0, 10.0, 100.0)


def test_params_validation():
    with pytest.raises(ValidationError):
        TriangleParams(0.0, 1.0, 1.0)
    with pytest.raises(ValidationError):
        TriangleParams(1.0, 1.0, 1.0, n=1)
    with pytest.raises(ValueError, match="n = 3"):
        triangle_tf(TriangleParams(1, 1, 1, n=4))
    with pytest.raises(ValueError):
        triangle_tf(UNIT, "anti")


def test_unit_transfer_functions():
    num, den = triangle_tf(UNIT, "diagonal")
    assert np.array_equal(num, [1, 1, 1])
    assert np.allclose(den, np.polymul([1, 1, 3], [1, 1]))
    num_off, den_off = triangle_tf(UNIT, "offdiagonal")
    assert np.array_equal(num_off, [1.0])
    assert np.array_equal(den_off, den)


def test_numerator_difference():
    p = TriangleParams(2.0, 3.0, 5.0)
    diff = np.polysub(triangle_tf(p, "diagonal")[0], triangle_tf(p, "offdiagonal")[0])
    assert np.allclose(diff, [p.M / p.B, p.D / p.B, 0.0])


def test_unit_poles_and_zeros():
    assert np.allclose(np.sort_complex(triangle_poles(UNIT)), [-1, -0.5 - 1.6583123951777j, -0.5 + 1.6583123951777j])
    assert np.allclose(np.sort_complex(triangle_zeros(UNIT)), [-0.5 - 0.8660254037844j, -0.5 + 0.8660254037844j])


def test_real_pole_case():
    p = TriangleParams(0.636, 20.0, 10.0)
    poles = triangle_poles(p)
    assert 4 - 12 * p.M / p.B == pytest.approx(4 - 0.7632)
    assert np.all(poles.imag == 0)
    assert poles[2].real == pytest.approx(-31.446540880503143)
    assert np.allclose(np.polyval([p.M / p.B, p.D / p.B, 3], poles[:2]), 0, atol=1e-9)


def test_zeros_follow_from_pole_quadratic():
    # swap the constant 3 for 1 in the pole quadratic
    p = TriangleParams(2.0, 1.0, 4.0)
    assert np.allclose(np.sort_complex(triangle_zeros(p)), np.sort_complex(np.roots([p.M / p.B, p.D / p.B, 1.0])))


def test_cubic_h2_formula_oracle():
    # 1/((s+1)(s+2)(s+3)): impulse response e^-t/2 - e^-2t + e^-3t/2, square integral 1/120
    assert h2_squared_cubic([1.0], np.poly([-1, -2, -3])) == pytest.approx(1 / 120, rel=1e-14)
    # s/((s+1)^3): impulse response t e^{-t} (1 - t/2), integral of its square is 1/16
    assert h2_squared_cubic([1.0, 0.0], np.poly([-1, -1, -1])) == pytest.approx(1 / 16, rel=1e-14)
    with pytest.raises(ValueError):
        h2_squared_cubic([1.0], [1.0, -1.0, 1.0, 1.0])
    with pytest.raises(ValueError):
        h2_squared_cubic([1.0], [1.0, 1.0])


@settings(max_examples=50, deadline=None)
@given(st.floats(0.2, 10), st.floats(0.2, 10), st.floats(0.2, 10), st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_cubic_h2_formula_vs_gramian(r1, r2, r3, b2, b1, b0):
    den = np.poly([-r1, -r2, -r3])
    num = [b2, b1, b0]
    # controllable canonical realization
    A = np.zeros((3, 3))
    A[0, 1] = A[1, 2] = 1.0
    A[2] = -den[:0:-1]
    B = np.array([[0.0], [0.0], [1.0]])
    C = np.array([[b0, b1, b2]])
    ref = numlin.h2_norm((A, B, C)) ** 2
    assert h2_squared_cubic(num, den) == pytest.approx(ref, rel=1e-8, abs=1e-14)


def test_local_closed_form_unit():
    assert Fraction(h2_local_closed(UNIT)).limit_denominator(1000) == Fraction(11, 30)
    assert h2_nonlocal_residue(UNIT) == pytest.approx(1 / 15, rel=1e-14)


@pytest.mark.parametrize("M,D,B", list(product((0.636, 2.0, 9.0), (1.0, 20.0), (1.0, 10.0, 100.0))))
def test_h2_closed_forms_vs_gramian(M, D, B):
    p = TriangleParams(M, D, B)
    sys = triangle_system(p)
    local = numlin.h2_norm(siso_channel(sys, 1, 1)) ** 2
    nonlocal_ = numlin.h2_norm(siso_channel(sys, 3, 1)) ** 2
    assert h2_local_closed(p) == pytest.approx(local, rel=1e-9)
    assert h2_squared_cubic(*triangle_tf(p, "diagonal")) == pytest.approx(local, rel=1e-9)
    assert h2_nonlocal_residue(p) == pytest.approx(nonlocal_, rel=1e-9)
    assert h2_nonlocal_residue(p) == pytest.approx(B / (6 * D**3 + 9 * B * D * M), rel=1e-12)


def test_printed_nonlocal_form_is_advisory():
    # the printed expression agrees only where M^4 happens to equal B^2
    p = TriangleParams(2.0, 3.0, 4.0)
    assert h2_nonlocal_closed(p) == pytest.approx(h2_nonlocal_residue(p), rel=1e-12)
    assert h2_nonlocal_closed(TriangleParams(0.636, 20, 10)) != pytest.approx(h2_nonlocal_residue(TriangleParams(0.636, 20, 10)), rel=0.1)


@pytest.mark.parametrize("M,D,B", list(product(M_GRID, D_GRID, B_GRID)))
def test_local_exceeds_nonlocal(M, D, B):
    p = TriangleParams(M, D, B)
    sys = triangle_system(p)
    assert h2_local_closed(p) > numlin.h2_norm(siso_channel(sys, 2, 1)) ** 2


@pytest.mark.parametrize("B", [60.0, 100.0, 1000.0])
def test_pole_zero_distance_shrinks_with_inertia(B):
    # B large enough that the pole pair stays complex over the whole range (B > D^2 / (12 M))
    dist = []
    for M in np.linspace(0.636, 12.73, 50):
        p = TriangleParams(M, 20.0, B)
        assert abs(triangle_poles(p)[0].imag) > 0
        poles = triangle_poles(p)[:2]
        zeros = triangle_zeros(p)
        cost = np.abs(poles[:, None] - zeros[None, :])
        dist.append(min(cost[0, 0] + cost[1, 1], cost[0, 1] + cost[1, 0]))
    assert np.all(np.diff(dist) <= 1e-12)


def test_complete_graph_spectrum_examples():
    spec = theorem1_spectrum(TriangleParams(0.636, 20.0, 10.0, n=3))
    got = dict(zip(spec.multiplicities, spec.values))
    assert spec.multiplicities == (1, 1, 3)
    assert sorted(spec.values) == pytest.approx([8.3333333333e-4, 0.0025, 0.0393081761], rel=1e-9)
    assert got[3] == pytest.approx(1 / (2 * 0.636 * 20))
    two = theorem1_spectrum(TriangleParams(1.0, 2.0, 3.0, n=2))
    assert sorted(two.multiplicities) == [1, 2]
    assert sorted(two.values) == pytest.approx(sorted([1 / 12, 1 / 4]))


def test_complete_graph_spectrum_inertia_halving():
    a = theorem1_spectrum(TriangleParams(1.0, 2.0, 3.0, n=5))
    b = theorem1_spectrum(TriangleParams(2.0, 2.0, 3.0, n=5))
    assert dict(zip(b.multiplicities, b.values))[5] == pytest.approx(0.5 * dict(zip(a.multiplicities, a.values))[5])


def test_gramian_closed_form_n3_block():
    p = TriangleParams(1.5, 2.0, 3.0, n=3)
    W = gramian_closed_form(p)
    assert np.allclose(W[:2, :2], np.array([[2, 1], [1, 2]]) / (6 * p.B * p.D))
    assert np.allclose(W[2:, 2:], np.eye(3) / (2 * p.M * p.D))
    assert not np.any(W[:2, 2:])


@pytest.mark.parametrize("n", range(2, 11))
def test_complete_graph_spectrum_matches_closed_form(n):
    p = TriangleParams(0.7, 3.0, 11.0, n=n)
    ev = np.sort(np.linalg.eigvalsh(gramian_closed_form(p)))
    expected = np.sort(theorem1_spectrum(p).eigenvalues)
    assert np.allclose(ev, expected, rtol=1e-12, atol=0)
    # every column of the angle block sums to 1/(2BD)
    col = gramian_closed_form(p)[: n - 1, : n - 1].sum(axis=0)
    assert np.allclose(col, 1 / (2 * p.B * p.D), rtol=1e-12, atol=0)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 10), st.floats(0.3, 15), st.floats(0.5, 25), st.floats(0.5, 100))
def test_gramian_closed_form_vs_lyapunov(n, M, D, B):
    p = TriangleParams(M, D, B, n)
    W = numlin.controllability_gramian(triangle_system(p)).W
    Wc = gramian_closed_form(p)
    assert np.abs(W - Wc).max() <= 1e-9 * np.abs(Wc).max()


def test_verify_default_grid_all_pass():
    records = formulas.verify_closed_forms("default")
    rows = formulas.summarize(records)
    names = {r["name"] for r in rows}
    assert {"triangle_poles", "triangle_zeros", "h2_local", "h2_nonlocal_residue", "theorem1_spectrum", "gramian_closed_form"} <= names
    for r in rows:
        if r["advisory"]:
            assert r["name"] == "h2_nonlocal_printed"
        else:
            assert r["passed"], r
    counts = {r["name"]: r["points"] for r in rows}
    assert counts["triangle_poles"] == 27
    assert counts["theorem1_spectrum"] == 27 * 9


def test_report_json_fields(tmp_path):
    records = formulas.verify_closed_forms({"M": (1.0,), "D": (1.0,), "B": (1.0,), "n": (2, 3)})
    doc = json.loads(formulas.report_json(records))
    assert {"name", "point", "closed_form", "oracle", "rel_err", "passed"} <= set(doc[0])
    assert any(d["name"] == "h2_local" and d["closed_form"] == pytest.approx(11 / 30) for d in doc)


def test_verify_unknown_grid():
    with pytest.raises(ValueError):
        formulas.verify_closed_forms("huge")


def test_pure_python_backend_selected_by_env():
    env = dict(os.environ, GRIDLAB_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "from gridlab import numlin; print(numlin.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"
