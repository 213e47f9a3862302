"""Desk-scale studies: load steps, H2 maps and gramian sweeps.

Every entry point accepts either a :class:`~gridlab.netcase.PowerNetwork`
(reduced on the fly) or a :class:`~gridlab.netcase.ReducedNetwork`, and a
fleet given as a :class:`~gridlab.assembly.FleetSpec`, a single device
applied to every generator, or ``None`` for the default GFM fleet.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, replace

import numpy as np

from . import numlin
from .assembly import FREQ, REL_ANGLE, FleetSpec, LtiSystem, assemble_mixed, uniform_fleet
from .devices import GfmParams, SgParams, effective_params
from .errors import ValidationError
from .netcase import PowerNetwork, ReducedNetwork, kron_reduce
from .parallel import pmap

__all__ = [
    "default_gfm_params",
    "default_sg_params",
    "as_reduced",
    "as_fleet",
    "build_system",
    "StepResult",
    "run_step_experiment",
    "H2Map",
    "compute_h2_map",
    "LocalizationMetrics",
    "localization_metrics",
    "SweepPoint",
    "SweepResult",
    "gramian_sweep",
    "trajectory_csv",
    "h2_map_csv",
    "sweep_csv",
    "fmt",
]

SPREAD_WINDOW = 1.0
SETTLING_BAND = 0.02


def default_gfm_params(**overrides) -> GfmParams:
    """GFM with ``T_c = 0.0318`` s and droop ``R = 0.05`` (``M_eff = 0.636``, ``D_eff = 20``)."""
    return GfmParams(**{"T_c": 0.0318, "R": 0.05, "alpha": 1.0, **overrides})


def default_sg_params(**overrides) -> SgParams:
    """SG with ``M = 7``, ``D = 1`` and a unit-gain governor (``R_sg = 0.05``, ``T_sg = 0.5``)."""
    return SgParams(**{"M": 7.0, "D": 1.0, "K": 1.0, "R_sg": 0.05, "T_sg": 0.5, "alpha": 1.0, **overrides})


def as_reduced(net: PowerNetwork | ReducedNetwork) -> ReducedNetwork:
    if isinstance(net, ReducedNetwork):
        return net
    if isinstance(net, PowerNetwork):
        return kron_reduce(net)
    raise TypeError(f"expected a PowerNetwork or ReducedNetwork, got {type(net).__name__}")


def as_fleet(rn: ReducedNetwork, fleet) -> FleetSpec:
    if fleet is None:
        return uniform_fleet(rn, default_gfm_params())
    if isinstance(fleet, (GfmParams, SgParams)):
        return uniform_fleet(rn, fleet)
    if isinstance(fleet, FleetSpec):
        return fleet
    raise TypeError(f"cannot interpret {type(fleet).__name__} as a fleet")


def build_system(net, fleet=None) -> tuple[ReducedNetwork, FleetSpec, LtiSystem]:
    rn = as_reduced(net)
    fs = as_fleet(rn, fleet)
    return rn, fs, assemble_mixed(rn, fs)


# ---------------------------------------------------------------------------
# load steps


@dataclass(frozen=True, eq=False)
class StepResult:
    """Generator frequency deviations after a load step.

    ``domega`` has one column per generator in ``gen_buses`` order.
    ``spread`` is the largest instantaneous gap between any two generator
    frequencies over the first ``spread_window`` seconds.
    """

    t: np.ndarray
    domega: np.ndarray
    gen_buses: tuple[int, ...]
    bus: int
    dp: float
    peak: np.ndarray
    final: np.ndarray
    settling_time: float
    spread: float
    spread_window: float

    @property
    def peak_generator(self) -> int:
        return self.gen_buses[int(np.argmax(self.peak))]


def _settling_time(t: np.ndarray, y: np.ndarray, final: np.ndarray, band: float) -> float:
    """First time after which every column stays within ``band`` of its final value."""
    if band <= 0:
        return 0.0
    outside = np.any(np.abs(y - final) > band, axis=1)
    if not outside.any():
        return 0.0
    last = int(np.nonzero(outside)[0][-1])
    return float(t[last + 1]) if last + 1 < t.size else float("inf")


def run_step_experiment(net, fleet=None, bus: int = 20, dp: float = 1.0, t_end: float = 10.0, dt: float = 0.01) -> StepResult:
    """Step the load at ``bus`` by ``dp`` and record every generator frequency."""
    if not dt > 0:
        raise ValidationError(f"dt must be positive, got {dt}")
    if not t_end > 0:
        raise ValidationError(f"t_end must be positive, got {t_end}")
    if isinstance(net, PowerNetwork):
        kind = net.bus(bus).kind  # raises "bus N not found"
        if kind != "load":
            raise ValidationError(f"bus {bus} is not a load bus")
    rn, _, sys = build_system(net, fleet)
    if bus not in rn.load_order:
        if bus in rn.gen_order:
            raise ValidationError(f"bus {bus} is not a load bus")
        raise ValidationError(f"bus {bus} not found")
    steps = int(round(t_end / dt))
    t = np.arange(steps + 1) * dt
    idx = rn.load_order.index(bus)
    traj = numlin.step_response(sys, idx, dp, t)
    y = traj.y
    final = numlin.steady_state(sys, idx, dp)
    peak = np.abs(y).max(axis=0)
    window = t <= SPREAD_WINDOW + 1e-12
    spread = float((y[window].max(axis=1) - y[window].min(axis=1)).max())
    settle = _settling_time(t, y, final, SETTLING_BAND * float(peak.max(initial=0.0)))
    return StepResult(t, y, rn.gen_order, bus, float(dp), peak, final, settle, spread, SPREAD_WINDOW)


# ---------------------------------------------------------------------------
# H2 maps


@dataclass(frozen=True, eq=False)
class H2Map:
    """``values[l, g]`` is the H2 norm from the load step at ``rows[l]`` to the frequency at ``cols[g]``."""

    rows: tuple[int, ...]
    cols: tuple[int, ...]
    values: np.ndarray
    fleet: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (len(self.rows), len(self.cols)):
            raise ValidationError(f"map values have shape {v.shape}, expected {(len(self.rows), len(self.cols))}")
        if np.any(v < 0):
            raise ValidationError("H2 values must be non-negative")
        object.__setattr__(self, "values", v)


def _describe_fleet(fs: FleetSpec) -> str:
    kinds = {type(d).__name__ for d in fs.devices}
    if len(set(fs.devices)) == 1:
        return repr(fs.devices[0])
    return "mixed(" + ",".join(sorted(kinds)) + ")"


def compute_h2_map(net, fleet=None) -> H2Map:
    """All load-to-generator-frequency H2 norms from one shared Schur factorization."""
    rn, fs, sys = build_system(net, fleet)
    values = numlin.h2_channel_norms(sys).T
    return H2Map(rn.load_order, rn.gen_order, values, _describe_fleet(fs))


@dataclass(frozen=True)
class LocalizationMetrics:
    peak_to_median: float
    per_generator_spread: tuple[float, ...]
    top_k: tuple[tuple[int, int, float], ...]


def localization_metrics(m: H2Map, k: int = 5) -> LocalizationMetrics:
    """Peak over median of the map, per-generator max/min ratio and the ``k`` largest pairs."""
    v = m.values
    if v.size == 0:
        raise ValidationError("empty H2 map")
    med = float(np.median(v))
    ptm = float(v.max() / med) if med > 0 else float("inf")
    col_min = v.min(axis=0)
    spread = tuple(float(hi / lo) if lo > 0 else float("inf") for hi, lo in zip(v.max(axis=0), col_min))
    flat = np.argsort(-v, axis=None, kind="stable")[:k]
    top = tuple((m.rows[i], m.cols[j], float(v[i, j])) for i, j in zip(*np.unravel_index(flat, v.shape)))
    return LocalizationMetrics(ptm, spread, top)


# ---------------------------------------------------------------------------
# gramian sweeps


@dataclass(frozen=True, eq=False)
class SweepPoint:
    M_eff: float
    angle: numlin.Spectrum
    freq: numlin.Spectrum
    off_block_ratio: float  # ||W_12||_F / ||W||_F
    residual: float


@dataclass(frozen=True, eq=False)
class SweepResult:
    M_grid: np.ndarray
    points: tuple[SweepPoint, ...]

    def frequency_values(self) -> np.ndarray:
        """Frequency-group eigenvalues, one row per grid point."""
        return np.array([p.freq.eigenvalues for p in self.points])

    def angle_values(self) -> np.ndarray:
        return np.array([p.angle.eigenvalues for p in self.points])


def gramian_sweep(net, template: GfmParams | None = None, M_grid=None) -> SweepResult:
    """Setpoint-actuated gramian spectrum of an identical all-GFM fleet as ``M_eff`` varies.

    Damping is held at the template's ``D_eff``; only ``T_c`` changes. The
    spectrum is split into the angle and frequency blocks.
    """
    template = template or default_gfm_params()
    if not isinstance(template, GfmParams):
        raise TypeError("gramian sweeps need a GFM template")
    grid = np.asarray(np.linspace(0.636, 12.73, 50) if M_grid is None else M_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise ValidationError("M grid must be positive and strictly increasing")
    rn = as_reduced(net)
    D_eff = effective_params(template).D_eff

    def point(M):
        dev = replace(template, T_c=float(M) / D_eff)
        sys = assemble_mixed(rn, uniform_fleet(rn, dev))
        rep = numlin.controllability_gramian(sys)
        ia, iw = sys.state_indices(REL_ANGLE), sys.state_indices(FREQ)
        W = rep.W
        off = float(np.linalg.norm(W[np.ix_(ia, iw)]) / np.linalg.norm(W))
        angle = numlin.cluster_eigenvalues(np.linalg.eigvalsh(W[np.ix_(ia, ia)]))
        freq = numlin.cluster_eigenvalues(np.linalg.eigvalsh(W[np.ix_(iw, iw)]))
        return SweepPoint(float(M), angle, freq, off, rep.residual)

    return SweepResult(grid, tuple(pmap(point, grid)))


# ---------------------------------------------------------------------------
# CSV


def fmt(v: float) -> str:
    return format(float(v), ".12g")


def _csv(rows) -> str:
    buf = io.StringIO(newline="")
    for row in rows:
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


def trajectory_csv(res: StepResult) -> str:
    header = ["t"] + [f"gen_{b}_domega" for b in res.gen_buses]
    body = ([fmt(t)] + [fmt(v) for v in row] for t, row in zip(res.t, res.domega))
    return _csv([header, *body])


def h2_map_csv(m: H2Map) -> str:
    header = ["load_bus"] + [str(g) for g in m.cols]
    body = ([str(l)] + [fmt(v) for v in row] for l, row in zip(m.rows, m.values))
    return _csv([header, *body])


def sweep_csv(res: SweepResult) -> str:
    rows = [["M_eff", "group", "eigenvalue", "multiplicity"]]
    for p in res.points:
        for name, spec in (("angle", p.angle), ("frequency", p.freq)):
            for g in spec.groups:
                rows.append([fmt(p.M_eff), name, fmt(g.value), str(g.multiplicity)])
    return _csv(rows)
