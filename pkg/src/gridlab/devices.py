"""Reduced-order device models for synchronous generators and droop GFMs.

Sign convention: ``dP_G`` is the electrical power the device delivers to
the network, so a positive step depresses frequency.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CaseParseError, ValidationError

__all__ = [
    "SgParams",
    "GfmParams",
    "EffectiveParams",
    "TransferFunction",
    "DeviceBlock",
    "effective_params",
    "gfm_channel",
    "sg_small_signal",
    "device_from_json",
    "device_to_json",
]


def _positive(owner: str, **values: float) -> None:
    for name, v in values.items():
        if not np.isfinite(v) or v <= 0:
            raise ValidationError(f"{owner}: {name} must be positive, got {v!r}")


@dataclass(frozen=True)
class SgParams:
    """Synchronous generator with a first-order governor/turbine loop."""

    M: float
    D: float
    K: float
    R_sg: float
    T_sg: float
    alpha: float = 1.0
    omega0: float = 1.0

    def __post_init__(self):
        _positive("SgParams", M=self.M, R_sg=self.R_sg, T_sg=self.T_sg, alpha=self.alpha, omega0=self.omega0)
        for name in ("D", "K"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValidationError(f"SgParams: {name} must be non-negative, got {v!r}")


@dataclass(frozen=True)
class GfmParams:
    """Multi-loop droop grid-forming inverter."""

    T_c: float
    R: float
    alpha: float = 1.0

    def __post_init__(self):
        _positive("GfmParams", T_c=self.T_c, R=self.R, alpha=self.alpha)

    @classmethod
    def from_effective(cls, M_eff: float, D_eff: float, alpha: float = 1.0) -> "GfmParams":
        """Build the filter/droop pair that yields the given effective inertia and damping."""
        _positive("GfmParams", M_eff=M_eff, D_eff=D_eff)
        return cls(T_c=M_eff / D_eff, R=1.0 / D_eff, alpha=alpha)


@dataclass(frozen=True)
class EffectiveParams:
    M_eff: float
    D_eff: float


def effective_params(g: GfmParams) -> EffectiveParams:
    """Effective inertia ``T_c/R`` and damping ``1/R`` of a droop GFM."""
    return EffectiveParams(M_eff=g.T_c / g.R, D_eff=1.0 / g.R)


@dataclass(frozen=True)
class TransferFunction:
    """SISO rational function with coefficients in descending powers of s."""

    num: tuple[float, ...]
    den: tuple[float, ...]

    def __call__(self, s):
        return np.polyval(self.num, s) / np.polyval(self.den, s)

    @property
    def dc_gain(self) -> float:
        return float(self.num[-1] / self.den[-1])

    def poles(self) -> np.ndarray:
        return np.roots(self.den)

    def zeros(self) -> np.ndarray:
        return np.roots(self.num)


def gfm_channel(g: GfmParams) -> TransferFunction:
    """``d_omega / (alpha dP_G) = 1 / (M_eff s + D_eff)``."""
    e = effective_params(g)
    return TransferFunction(num=(1.0,), den=(e.M_eff, e.D_eff))


@dataclass(frozen=True, eq=False)
class DeviceBlock:
    """Per-device state space with states (angle, frequency, governor).

    The single input is ``dP_G``; the single output is the frequency.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    states: tuple[str, ...] = ("delta", "omega", "x_g")


def sg_small_signal(p: SgParams) -> DeviceBlock:
    """Linear SG block.

    ddelta/dt = omega0 * domega
    M domega/dt = -D domega + x_g - alpha dP_G
    T_sg dx_g/dt = -x_g - (K/R_sg) domega
    """
    A = np.array(
        [
            [0.0, p.omega0, 0.0],
            [0.0, -p.D / p.M, 1.0 / p.M],
            [0.0, -p.K / (p.R_sg * p.T_sg), -1.0 / p.T_sg],
        ]
    )
    B = np.array([[0.0], [-p.alpha / p.M], [0.0]])
    C = np.array([[0.0, 1.0, 0.0]])
    return DeviceBlock(A, B, C)


# ---------------------------------------------------------------------------
# JSON

_SG_KEYS = ("M", "D", "K", "R_sg", "T_sg")


def device_to_json(dev: SgParams | GfmParams) -> dict:
    if isinstance(dev, GfmParams):
        return {"type": "gfm", "params": {"T_c": dev.T_c, "R": dev.R}, "alpha": dev.alpha}
    if isinstance(dev, SgParams):
        params = {k: getattr(dev, k) for k in _SG_KEYS}
        params["omega0"] = dev.omega0
        return {"type": "sg", "params": params, "alpha": dev.alpha}
    raise TypeError(f"not a device: {dev!r}")


def device_from_json(obj: dict) -> SgParams | GfmParams:
    if not isinstance(obj, dict) or "type" not in obj:
        raise CaseParseError("device entry needs a 'type'", key="type")
    params = obj.get("params")
    if not isinstance(params, dict):
        raise CaseParseError("device entry needs a 'params' object", key="params")
    alpha = float(obj.get("alpha", 1.0))
    kind = obj["type"]
    try:
        if kind == "gfm":
            return GfmParams(T_c=float(params["T_c"]), R=float(params["R"]), alpha=alpha)
        if kind == "sg":
            kwargs = {k: float(params[k]) for k in _SG_KEYS}
            return SgParams(**kwargs, alpha=alpha, omega0=float(params.get("omega0", 1.0)))
    except KeyError as exc:
        raise CaseParseError(f"{kind} device is missing parameter {exc.args[0]!r}", key=exc.args[0]) from None
    raise CaseParseError(f"unknown device type {kind!r}", key="type")
