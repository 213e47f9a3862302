from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridlab.devices import (
    GfmParams,
    SgParams,
    device_from_json,
    device_to_json,
    effective_params,
    gfm_channel,
    sg_small_signal,
)
from gridlab.errors import CaseParseError, ValidationError
from gridlab.numlin import step_response

pos = st.floats(1e-3, 1e3, allow_nan=False, allow_infinity=False)


def test_effective_params_reference_values():
    e = effective_params(GfmParams(T_c=0.0318, R=0.05))
    assert e.M_eff == 0.636
    assert e.D_eff == 20.0
    assert effective_params(GfmParams(1.0, 1.0)) == effective_params(GfmParams.from_effective(1.0, 1.0))
    slow = effective_params(GfmParams(T_c=0.318, R=0.05))
    assert slow.M_eff == pytest.approx(6.36, rel=1e-15)
    assert slow.D_eff == 20.0


@settings(max_examples=100)
@given(pos, pos, st.floats(0.1, 10.0))
def test_effective_params_scaling(T_c, R, c):
    base = effective_params(GfmParams(T_c, R))
    t = effective_params(GfmParams(T_c * c, R))
    assert t.M_eff == pytest.approx(c * base.M_eff, rel=1e-12)
    assert t.D_eff == base.D_eff
    r = effective_params(GfmParams(T_c, R * c))
    assert r.M_eff == pytest.approx(base.M_eff / c, rel=1e-12)
    assert r.D_eff == pytest.approx(base.D_eff / c, rel=1e-12)
    assert base.M_eff == pytest.approx(T_c * base.D_eff, rel=1e-15)


@settings(max_examples=50)
@given(pos, pos)
def test_from_effective_inverts(M, D):
    e = effective_params(GfmParams.from_effective(M, D))
    assert e.M_eff == pytest.approx(M, rel=1e-14)
    assert e.D_eff == pytest.approx(D, rel=1e-14)


def test_gfm_channel():
    tf = gfm_channel(GfmParams(0.0318, 0.05))
    assert tf.den == pytest.approx((0.636, 20.0))
    assert tf.num == (1.0,)
    assert tf.dc_gain == pytest.approx(0.05)
    unit = gfm_channel(GfmParams(1.0, 1.0))
    assert unit.num == (1.0,) and unit.den == (1.0, 1.0)
    assert unit(1j) == pytest.approx(1 / (1j + 1))


@settings(max_examples=50)
@given(pos, pos)
def test_gfm_channel_pole_is_filter_time_constant(T_c, R):
    tf = gfm_channel(GfmParams(T_c, R))
    assert tf.poles()[0] == pytest.approx(-1.0 / T_c, rel=1e-12)
    assert tf.zeros().size == 0


def test_gfm_channel_step_is_monotone_first_order():
    g = GfmParams(0.5, 0.25)
    tf = gfm_channel(g)
    t = np.linspace(0, 5, 501)
    sys = (np.array([[-tf.den[1] / tf.den[0]]]), np.array([[1 / tf.den[0]]]), np.array([[1.0]]))
    y = step_response(sys, 0, 1.0, t).y[:, 0]
    assert np.all(np.diff(y) > 0)
    assert np.allclose(y, g.R * (1 - np.exp(-t / g.T_c)), atol=1e-12)


def test_sg_block_structure():
    p = SgParams(M=7, D=1, K=1, R_sg=0.05, T_sg=0.5, alpha=2.0, omega0=3.0)
    blk = sg_small_signal(p)
    assert blk.A.shape == (3, 3)
    assert blk.A[0, 1] == 3.0
    assert blk.B[1, 0] == -2.0 / 7
    assert np.array_equal(blk.C, [[0, 1, 0]])


def _freq_loop(p):
    return sg_small_signal(p).A[1:, 1:]


def test_sg_dc_gain():
    p = SgParams(M=7, D=1, K=1, R_sg=0.05, T_sg=0.5, alpha=1.5)
    blk = sg_small_signal(p)
    # final value of domega for a unit step in dP_G
    A, B = blk.A[1:, 1:], blk.B[1:]
    dw = -np.linalg.solve(A, B)[0, 0]
    assert dw == pytest.approx(-p.alpha / (p.D + p.K / p.R_sg), rel=1e-12)
    t = np.arange(0, 60, 0.05)
    y = step_response((A, B, np.array([[1.0, 0.0]])), 0, 1.0, t).y[:, 0]
    assert y[-1] == pytest.approx(dw, rel=1e-6)


def test_sg_reference_eigenvalues():
    p = SgParams(M=7, D=1, K=1, R_sg=0.05, T_sg=0.5)
    eig = np.linalg.eigvals(sg_small_signal(p).A)
    # the angle integrator sits at the origin; the remaining modes are damped
    assert np.sum(np.abs(eig) < 1e-12) == 1
    assert np.all(np.linalg.eigvals(_freq_loop(p)).real < 0)
    # tied to an infinite bus (dP_G = delta) all three are damped
    blk = sg_small_signal(p)
    closed = blk.A + blk.B @ np.array([[1.0, 0.0, 0.0]])
    assert np.all(np.linalg.eigvals(closed).real < 0)


def test_sg_without_governor():
    p = SgParams(M=4, D=1.5, K=0, R_sg=0.05, T_sg=0.25)
    eig = np.sort(np.linalg.eigvals(_freq_loop(p)).real)
    assert eig == pytest.approx(np.sort([-p.D / p.M, -1 / p.T_sg]))


@settings(max_examples=100)
@given(st.floats(2, 9), st.floats(1, 2), st.floats(0, 5), st.floats(0.01, 0.2), st.floats(0.05, 5))
def test_sg_standard_range_is_stable(M, D, K, R_sg, T_sg):
    assert np.all(np.linalg.eigvals(_freq_loop(SgParams(M, D, K, R_sg, T_sg))).real < 0)


def test_invalid_params():
    with pytest.raises(ValidationError):
        GfmParams(0.0, 0.05)
    with pytest.raises(ValidationError):
        GfmParams(0.1, -1)
    with pytest.raises(ValidationError):
        SgParams(M=0, D=1, K=1, R_sg=0.05, T_sg=0.5)
    with pytest.raises(ValidationError):
        SgParams(M=1, D=-1, K=1, R_sg=0.05, T_sg=0.5)
    SgParams(M=1, D=0, K=0, R_sg=0.05, T_sg=0.5)


def test_device_json_round_trip():
    for dev in (GfmParams(0.0318, 0.05, alpha=2.0), SgParams(7, 1, 1, 0.05, 0.5, alpha=0.5, omega0=376.99)):
        doc = json.loads(json.dumps(device_to_json(dev)))
        assert device_from_json(doc) == dev
    assert device_to_json(GfmParams(1, 2))["type"] == "gfm"


def test_device_json_errors():
    with pytest.raises(CaseParseError) as err:
        device_from_json({"type": "sg", "params": {"M": 1}})
    assert err.value.key == "D"
    with pytest.raises(CaseParseError, match="unknown device type"):
        device_from_json({"type": "gfl", "params": {}})
    with pytest.raises(CaseParseError):
        device_from_json({"params": {}})
