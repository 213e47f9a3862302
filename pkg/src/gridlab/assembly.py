"""State-space assembly of SG/GFM fleets on a Kron-reduced network.

States are ordered as relative angles (every generator except the
reference, ``delta_i - delta_ref``), then one frequency deviation per
generator, then one governor state per SG. Inputs are load-bus power
steps in ``load_order``; outputs are generator frequencies in
``gen_order``.

Frequency rows read ``M_i domega_i/dt = -D_i domega_i [+ x_g,i] - alpha_i dP_G,i``
with ``dP_G = B_r delta + B_L dP_L``; the coupling therefore enters as the
negative reduced Laplacian, which is what makes ``A`` Hurwitz.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Union

import numpy as np

from .devices import GfmParams, SgParams, device_from_json, device_to_json, effective_params
from .errors import CaseParseError, ValidationError
from .netcase import ReducedNetwork, _matrix_from_json, _matrix_json, _require

__all__ = [
    "StateLabel",
    "FleetSpec",
    "LtiSystem",
    "uniform_fleet",
    "assemble_all_gfm",
    "assemble_all_sg",
    "assemble_mixed",
    "siso_channel",
    "fleet_from_json",
    "fleet_to_json",
    "system_to_json",
    "system_from_json",
]

Device = Union[SgParams, GfmParams]

REL_ANGLE, FREQ, GOVERNOR, GENERIC = "RelAngle", "Freq", "Governor", "State"


@dataclass(frozen=True)
class StateLabel:
    kind: str
    bus: int

    def __str__(self):
        return f"{self.kind}({self.bus})"

    @classmethod
    def parse(cls, text: str) -> "StateLabel":
        kind, _, rest = text.partition("(")
        if kind not in (REL_ANGLE, FREQ, GOVERNOR, GENERIC) or not rest.endswith(")"):
            raise CaseParseError(f"bad state label {text!r}", key="state_labels")
        return cls(kind, int(rest[:-1]))


@dataclass(frozen=True)
class FleetSpec:
    """One device per generator bus, in the reduced network's ``gen_order``.

    ``reference_gen`` indexes ``entries``; ``None`` means the last one.
    """

    entries: tuple[tuple[int, Device], ...]
    reference_gen: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple((int(b), d) for b, d in self.entries))
        if not self.entries:
            raise ValidationError("fleet has no generators")
        ref = self.reference_index
        if not 0 <= ref < len(self.entries):
            raise ValidationError(f"reference index {self.reference_gen} out of range for {len(self.entries)} generators")
        for bus, dev in self.entries:
            if not isinstance(dev, (SgParams, GfmParams)):
                raise TypeError(f"generator {bus}: unsupported device {dev!r}")

    @property
    def reference_index(self) -> int:
        return len(self.entries) - 1 if self.reference_gen is None else self.reference_gen

    @property
    def buses(self) -> tuple[int, ...]:
        return tuple(b for b, _ in self.entries)

    @property
    def devices(self) -> tuple[Device, ...]:
        return tuple(d for _, d in self.entries)

    def with_reference(self, index: int | None) -> "FleetSpec":
        return FleetSpec(self.entries, index)


def uniform_fleet(rn: ReducedNetwork, device: Device, reference_gen: int | None = None) -> FleetSpec:
    return FleetSpec(tuple((g, device) for g in rn.gen_order), reference_gen)


@dataclass(frozen=True, eq=False)
class LtiSystem:
    """``dx/dt = A x + B_in u``, ``y = C x`` with labelled states.

    ``B_setpoint`` is the direct power-setpoint actuation (``alpha_i/M_i``
    on each frequency row) used for controllability studies.
    """

    A: np.ndarray
    B_in: np.ndarray
    C: np.ndarray
    state_labels: tuple[StateLabel, ...]
    input_labels: tuple[int, ...] = ()
    output_labels: tuple[int, ...] = ()
    B_setpoint: np.ndarray | None = None
    D: np.ndarray | None = None

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValidationError(f"A must be square, got {A.shape}")
        B = np.asarray(self.B_in, dtype=float).reshape(n, -1)
        C = np.asarray(self.C, dtype=float).reshape(-1, n)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B_in", B)
        object.__setattr__(self, "C", C)
        if self.B_setpoint is not None:
            object.__setattr__(self, "B_setpoint", np.asarray(self.B_setpoint, dtype=float).reshape(n, -1))
        if self.D is not None:
            object.__setattr__(self, "D", np.asarray(self.D, dtype=float).reshape(C.shape[0], B.shape[1]))
        labels = tuple(self.state_labels)
        if len(labels) != n:
            raise ValidationError(f"{len(labels)} state labels for {n} states")
        if len(set(labels)) != n:
            raise ValidationError("state labels must be unique")
        object.__setattr__(self, "state_labels", labels)
        object.__setattr__(self, "input_labels", tuple(int(v) for v in self.input_labels) or tuple(range(B.shape[1])))
        object.__setattr__(self, "output_labels", tuple(int(v) for v in self.output_labels) or tuple(range(C.shape[0])))
        if len(self.input_labels) != B.shape[1] or len(self.output_labels) != C.shape[0]:
            raise ValidationError("input/output labels do not match B_in/C dimensions")

    @classmethod
    def from_matrices(cls, A, B, C, D=None) -> "LtiSystem":
        """Wrap plain matrices; states are labelled ``State(k)``."""
        n = np.atleast_2d(np.asarray(A)).shape[0]
        return cls(A, B, C, tuple(StateLabel(GENERIC, k) for k in range(n)), D=D)

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    def state_indices(self, kind: str) -> np.ndarray:
        return np.array([k for k, lab in enumerate(self.state_labels) if lab.kind == kind], dtype=int)


def _device_terms(dev: Device) -> tuple[float, float, float]:
    """(inertia, damping, alpha) seen by the frequency row."""
    if isinstance(dev, GfmParams):
        e = effective_params(dev)
        return e.M_eff, e.D_eff, dev.alpha
    return dev.M, dev.D, dev.alpha


def assemble_mixed(rn: ReducedNetwork, fleet: FleetSpec) -> LtiSystem:
    """Assemble any combination of SG and GFM devices."""
    if fleet.buses != rn.gen_order:
        raise ValidationError(f"fleet buses {fleet.buses} do not match generator order {rn.gen_order}")
    n, m = rn.n_gen, rn.n_load
    ref = fleet.reference_index
    angle_gens = [i for i in range(n) if i != ref]
    sg_gens = [i for i, dev in enumerate(fleet.devices) if isinstance(dev, SgParams)]
    na, ns = len(angle_gens), len(sg_gens)
    N = na + n + ns
    ia = {g: k for k, g in enumerate(angle_gens)}
    iw = {g: na + g for g in range(n)}
    ix = {g: na + n + k for k, g in enumerate(sg_gens)}

    A = np.zeros((N, N))
    B = np.zeros((N, m))
    Bset = np.zeros((N, n))
    C = np.zeros((n, N))

    def omega0(i):
        dev = fleet.devices[i]
        return dev.omega0 if isinstance(dev, SgParams) else 1.0

    for i in angle_gens:
        A[ia[i], iw[i]] = omega0(i)
        A[ia[i], iw[ref]] = -omega0(ref)

    B_r, B_L = rn.B_r, rn.B_L
    for i, dev in enumerate(fleet.devices):
        M, D, alpha = _device_terms(dev)
        row = iw[i]
        for j in angle_gens:
            A[row, ia[j]] = -alpha * B_r[i, j] / M
        A[row, row] = -D / M
        B[row, :] = -alpha * B_L[i, :] / M
        Bset[row, i] = alpha / M
        C[i, row] = 1.0
        if isinstance(dev, SgParams):
            A[row, ix[i]] = 1.0 / M
            A[ix[i], row] = -dev.K / (dev.R_sg * dev.T_sg)
            A[ix[i], ix[i]] = -1.0 / dev.T_sg

    gens = rn.gen_order
    labels = [StateLabel(REL_ANGLE, gens[i]) for i in angle_gens]
    labels += [StateLabel(FREQ, g) for g in gens]
    labels += [StateLabel(GOVERNOR, gens[i]) for i in sg_gens]
    return LtiSystem(A, B, C, tuple(labels), rn.load_order, gens, Bset)


def assemble_all_gfm(rn: ReducedNetwork, fleet: FleetSpec) -> LtiSystem:
    """All-GFM system with ``2n - 1`` states."""
    for bus, dev in fleet.entries:
        if not isinstance(dev, GfmParams):
            raise TypeError(f"generator {bus} is not a GFM")
    return assemble_mixed(rn, fleet)


def assemble_all_sg(rn: ReducedNetwork, fleet: FleetSpec) -> LtiSystem:
    """All-SG system with ``3n - 1`` states."""
    for bus, dev in fleet.entries:
        if not isinstance(dev, SgParams):
            raise TypeError(f"generator {bus} is not an SG")
    return assemble_mixed(rn, fleet)


def siso_channel(sys: LtiSystem, input_bus: int, output_bus: int) -> LtiSystem:
    """Single channel from the load input at ``input_bus`` to the frequency at ``output_bus``."""
    try:
        l = sys.input_labels.index(input_bus)
    except ValueError:
        raise IndexError(f"input bus {input_bus} not among {sys.input_labels}") from None
    try:
        g = sys.output_labels.index(output_bus)
    except ValueError:
        raise IndexError(f"output bus {output_bus} not among {sys.output_labels}") from None
    return LtiSystem(
        sys.A,
        sys.B_in[:, [l]],
        sys.C[[g], :],
        sys.state_labels,
        (input_bus,),
        (output_bus,),
        sys.B_setpoint,
    )


# ---------------------------------------------------------------------------
# JSON


def fleet_to_json(fleet: FleetSpec) -> str:
    doc = {
        "reference": int(fleet.buses[fleet.reference_index]),
        "generators": [{"bus": int(b), "device": device_to_json(d)} for b, d in fleet.entries],
    }
    return json.dumps(doc, indent=2) + "\n"


def fleet_from_json(text: str, rn: ReducedNetwork | None = None) -> FleetSpec:
    """Parse a fleet file; ``reference`` is the bus id of the angle reference.

    When ``rn`` is given the entries are reordered to its ``gen_order`` and
    every generator bus must be covered exactly once.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CaseParseError(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
    gens = _require(doc, "generators", "fleet")
    if not isinstance(gens, list):
        raise CaseParseError("'generators' must be a list", key="generators")
    by_bus: dict[int, Device] = {}
    for k, item in enumerate(gens):
        bus = _require(item, "bus", f"generators[{k}]")
        if bus in by_bus:
            raise ValidationError(f"generator bus {bus} listed twice")
        by_bus[int(bus)] = device_from_json(_require(item, "device", f"generators[{k}]"))
    order = list(rn.gen_order) if rn is not None else list(by_bus)
    if rn is not None and set(order) != set(by_bus):
        missing = sorted(set(order) - set(by_bus))
        extra = sorted(set(by_bus) - set(order))
        raise ValidationError(f"fleet does not match generator buses (missing {missing}, unknown {extra})")
    ref_bus = doc.get("reference")
    ref = None
    if ref_bus is not None:
        if ref_bus not in order:
            raise ValidationError(f"reference bus {ref_bus} is not a generator")
        ref = order.index(ref_bus)
    return FleetSpec(tuple((b, by_bus[b]) for b in order), ref)


def system_to_json(sys: LtiSystem) -> str:
    doc = {
        "A": _matrix_json(sys.A),
        "B_in": _matrix_json(sys.B_in),
        "C": _matrix_json(sys.C),
        "state_labels": [str(l) for l in sys.state_labels],
        "input_labels": list(sys.input_labels),
        "output_labels": list(sys.output_labels),
    }
    if sys.B_setpoint is not None:
        doc["B_setpoint"] = _matrix_json(sys.B_setpoint)
    return json.dumps(doc, indent=2) + "\n"


def system_from_json(text: str) -> LtiSystem:
    doc = json.loads(text)
    A = _matrix_from_json(_require(doc, "A", "system"), "A")
    B = _matrix_from_json(_require(doc, "B_in", "system"), "B_in")
    C = _matrix_from_json(_require(doc, "C", "system"), "C")
    labels = tuple(StateLabel.parse(s) for s in _require(doc, "state_labels", "system"))
    Bset = doc.get("B_setpoint")
    return LtiSystem(
        A,
        B,
        C,
        labels,
        tuple(doc.get("input_labels", ())),
        tuple(doc.get("output_labels", ())),
        None if Bset is None else _matrix_from_json(Bset, "B_setpoint"),
    )
