"""Case ingestion, susceptance Laplacian and Kron reduction.

Networks use the DC power-flow convention: every branch contributes a
susceptance ``b = 1/x`` and resistances, shunts and taps are ignored.
Matrices are dense; the intended cases have at most a few hundred buses.
"""

from __future__ import annotations

import json
import re
import warnings
from dataclasses import dataclass
from importlib import resources
from typing import Iterable

import numpy as np
import scipy.linalg

from .errors import CaseParseError, NumericalError, ValidationError

__all__ = [
    "BusRecord",
    "BranchRecord",
    "PowerNetwork",
    "ReducedNetwork",
    "parse_matpower_case",
    "parse_native_case",
    "emit_native_case",
    "load_case",
    "bundled_case",
    "build_laplacian",
    "kron_reduce",
    "fully_connected",
    "emit_reduced_json",
    "parse_reduced_json",
]

GENERATOR = "generator"
LOAD = "load"

# Reciprocal condition number below which B_LL is treated as singular.
RCOND_MIN = 1e-12


@dataclass(frozen=True)
class BusRecord:
    id: int
    kind: str
    name: str | None = None

    def __post_init__(self):
        if isinstance(self.id, bool) or not isinstance(self.id, (int, np.integer)) or self.id <= 0:
            raise ValidationError(f"bus id must be a positive integer, got {self.id!r}")
        if self.kind not in (GENERATOR, LOAD):
            raise ValidationError(f"bus {self.id}: kind must be 'generator' or 'load', got {self.kind!r}")


@dataclass(frozen=True)
class BranchRecord:
    from_bus: int
    to_bus: int
    susceptance: float

    def __post_init__(self):
        if self.from_bus == self.to_bus:
            raise ValidationError(f"branch {self.from_bus}-{self.to_bus} is a self-loop")
        if not np.isfinite(self.susceptance) or self.susceptance <= 0:
            raise ValidationError(
                f"branch {self.from_bus}-{self.to_bus}: susceptance must be positive, got {self.susceptance!r}"
            )


@dataclass(frozen=True)
class PowerNetwork:
    """Buses and branches of a case.

    Construction checks that bus ids are unique and that every branch
    references an existing bus. Connectivity is checked by the parsers
    (see :func:`validate_network`) so that a disconnected network can still
    be built and handed to :func:`kron_reduce` for diagnosis.
    """

    buses: tuple[BusRecord, ...]
    branches: tuple[BranchRecord, ...]

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(self.buses))
        object.__setattr__(self, "branches", tuple(self.branches))
        seen = set()
        for bus in self.buses:
            if bus.id in seen:
                raise ValidationError(f"duplicate bus id {bus.id}")
            seen.add(bus.id)
        for br in self.branches:
            for end in (br.from_bus, br.to_bus):
                if end not in seen:
                    raise ValidationError(f"branch {br.from_bus}-{br.to_bus} references unknown bus {end}")

    @property
    def gen_order(self) -> tuple[int, ...]:
        return tuple(b.id for b in self.buses if b.kind == GENERATOR)

    @property
    def load_order(self) -> tuple[int, ...]:
        return tuple(b.id for b in self.buses if b.kind == LOAD)

    def bus(self, bus_id: int) -> BusRecord:
        for b in self.buses:
            if b.id == bus_id:
                return b
        raise ValidationError(f"bus {bus_id} not found")


@dataclass(frozen=True, eq=False)
class ReducedNetwork:
    """Kron-reduced coupling between generator buses.

    ``B_r`` relates generator angles to generator power injections and
    ``B_L`` maps a power change at each eliminated bus onto the generator
    buses: ``dP_G = B_r @ d_delta_G + B_L @ dP_L``.
    """

    gen_order: tuple[int, ...]
    load_order: tuple[int, ...]
    B_r: np.ndarray
    B_L: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "gen_order", tuple(int(g) for g in self.gen_order))
        object.__setattr__(self, "load_order", tuple(int(l) for l in self.load_order))
        B_r = np.array(self.B_r, dtype=float)
        B_L = np.array(self.B_L, dtype=float).reshape(len(self.gen_order), len(self.load_order))
        n = len(self.gen_order)
        if B_r.shape != (n, n):
            raise ValidationError(f"B_r must be {n}x{n}, got {B_r.shape}")
        B_r.setflags(write=False)
        B_L.setflags(write=False)
        object.__setattr__(self, "B_r", B_r)
        object.__setattr__(self, "B_L", B_L)

    @property
    def n_gen(self) -> int:
        return len(self.gen_order)

    @property
    def n_load(self) -> int:
        return len(self.load_order)

    def __eq__(self, other):
        if not isinstance(other, ReducedNetwork):
            return NotImplemented
        return (
            self.gen_order == other.gen_order
            and self.load_order == other.load_order
            and np.array_equal(self.B_r, other.B_r)
            and np.array_equal(self.B_L, other.B_L)
        )

    def invariant_violations(self, tol: float = 1e-9) -> list[str]:
        """Return a description of every violated invariant (empty if none)."""
        problems = []
        scale = max(1.0, float(np.abs(self.B_r).max(initial=0.0)))
        if not np.allclose(self.B_r, self.B_r.T, rtol=0, atol=tol * scale):
            problems.append("B_r is not symmetric")
        if np.abs(self.B_r.sum(axis=1)).max(initial=0.0) > tol * scale:
            problems.append("B_r rows do not sum to zero")
        eig = np.linalg.eigvalsh(0.5 * (self.B_r + self.B_r.T))
        if eig.size and eig.min() < -tol * scale:
            problems.append("B_r is not positive semidefinite")
        if eig.size and int(np.sum(np.abs(eig) <= tol * scale)) != 1:
            problems.append("B_r does not have exactly one zero eigenvalue")
        if self.n_load and np.abs(self.B_L.sum(axis=0) - 1.0).max() > tol:
            problems.append("B_L columns do not sum to one")
        return problems


# ---------------------------------------------------------------------------
# MATPOWER subset


_BLOCK_RE = re.compile(r"mpc\.(\w+)\s*=\s*\[")


def _strip_comment(line: str) -> str:
    pos = line.find("%")
    return line if pos < 0 else line[:pos]


def _matpower_blocks(text: str) -> dict[str, list[tuple[int, list[float]]]]:
    """Collect every ``mpc.<name> = [ ... ];`` matrix block with line numbers."""
    blocks: dict[str, list[tuple[int, list[float]]]] = {}
    current: str | None = None
    rows: list[tuple[int, list[float]]] = []
    start_line = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if current is None:
            m = _BLOCK_RE.search(line)
            if not m:
                continue
            current, rows, start_line = m.group(1), [], lineno
            line = line[m.end():]
        closing = line.find("]")
        body = line if closing < 0 else line[:closing]
        for chunk in body.split(";"):
            tokens = chunk.replace(",", " ").split()
            if not tokens:
                continue
            try:
                rows.append((lineno, [float(t) for t in tokens]))
            except ValueError:
                raise CaseParseError(f"non-numeric entry in mpc.{current}: {chunk.strip()!r}", line=lineno) from None
        if closing >= 0:
            blocks[current] = rows
            current = None
    if current is not None:
        raise CaseParseError(f"mpc.{current} block is not closed", line=start_line)
    return blocks


def parse_matpower_case(text: str, *, drop_condensers: bool = False) -> PowerNetwork:
    """Parse the bus, branch and gen tables of a MATPOWER case.

    Only bus ids, branch endpoints/reactance/status and generator bus ids
    (plus ``Pg``/``Pmax`` when ``drop_condensers`` is set) are consumed.
    Branch rows may be full MATPOWER rows or the reduced ``fbus tbus x``
    form. A generator is treated as a synchronous condenser when its active
    dispatch ``Pg`` or capability ``Pmax`` is not positive; with
    ``drop_condensers`` its bus becomes a load bus.
    """
    blocks = _matpower_blocks(text)
    for name in ("bus", "branch", "gen"):
        if name not in blocks:
            raise CaseParseError(f"missing mpc.{name} table")

    bus_ids: list[int] = []
    for lineno, row in blocks["bus"]:
        bid = row[0]
        if bid != int(bid) or bid <= 0:
            raise CaseParseError(f"bus id must be a positive integer, got {bid}", line=lineno)
        if int(bid) in bus_ids:
            raise CaseParseError(f"duplicate bus id {int(bid)}", line=lineno)
        bus_ids.append(int(bid))
    known = set(bus_ids)

    gen_buses = set()
    for lineno, row in blocks["gen"]:
        bid = int(row[0])
        if bid not in known:
            raise CaseParseError(f"generator at unknown bus {bid}", line=lineno)
        if len(row) > 7 and row[7] <= 0:
            continue  # out of service
        if drop_condensers:
            pg = row[1] if len(row) > 1 else 1.0
            pmax = row[8] if len(row) > 8 else 1.0
            if pg <= 0 or pmax <= 0:
                continue
        gen_buses.add(bid)

    branches = []
    for lineno, row in blocks["branch"]:
        # three columns is the reduced "fbus tbus x" form, otherwise x is column 4
        if len(row) < 3:
            raise CaseParseError("branch row needs at least fbus, tbus, x", line=lineno)
        f, t = int(row[0]), int(row[1])
        x = row[2] if len(row) == 3 else row[3]
        if len(row) > 10 and row[10] <= 0:
            continue  # out of service
        for end in (f, t):
            if end not in known:
                raise CaseParseError(f"branch references unknown bus {end}", line=lineno)
        if f == t:
            raise ValidationError(f"line {lineno}: branch {f}-{t} is a self-loop")
        if x <= 0:
            raise ValidationError(f"line {lineno}: branch {f}-{t} has non-positive reactance {x}")
        branches.append(BranchRecord(f, t, 1.0 / x))

    buses = [BusRecord(b, GENERATOR if b in gen_buses else LOAD) for b in bus_ids]
    net = PowerNetwork(tuple(buses), tuple(branches))
    validate_network(net)
    return net


# ---------------------------------------------------------------------------
# native JSON


def _require(obj: dict, key: str, where: str):
    if not isinstance(obj, dict):
        raise CaseParseError(f"{where} must be an object", key=key)
    if key not in obj:
        raise CaseParseError(f"{where}: missing key {key!r}", key=key)
    return obj[key]


def parse_native_case(text: str) -> PowerNetwork:
    """Parse the native JSON case format.

    ``{"buses": [{"id": int, "kind": "generator"|"load", "name"?: str}],
    "branches": [{"from": int, "to": int, "b": float}]}``
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CaseParseError(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
    buses_raw = _require(doc, "buses", "case")
    branches_raw = _require(doc, "branches", "case")
    if not isinstance(buses_raw, list):
        raise CaseParseError("'buses' must be a list", key="buses")
    if not isinstance(branches_raw, list):
        raise CaseParseError("'branches' must be a list", key="branches")

    buses = []
    for k, item in enumerate(buses_raw):
        where = f"buses[{k}]"
        bid = _require(item, "id", where)
        kind = _require(item, "kind", where)
        if isinstance(bid, bool) or not isinstance(bid, int):
            raise CaseParseError(f"{where}: 'id' must be an integer", key="id")
        if kind not in (GENERATOR, LOAD):
            raise CaseParseError(f"{where}: 'kind' must be 'generator' or 'load'", key="kind")
        name = item.get("name")
        if name is not None and not isinstance(name, str):
            raise CaseParseError(f"{where}: 'name' must be a string", key="name")
        buses.append(BusRecord(bid, kind, name))

    branches = []
    for k, item in enumerate(branches_raw):
        where = f"branches[{k}]"
        vals = [_require(item, key, where) for key in ("from", "to", "b")]
        for key, v in zip(("from", "to"), vals[:2]):
            if isinstance(v, bool) or not isinstance(v, int):
                raise CaseParseError(f"{where}: {key!r} must be an integer", key=key)
        if isinstance(vals[2], bool) or not isinstance(vals[2], (int, float)):
            raise CaseParseError(f"{where}: 'b' must be a number", key="b")
        branches.append(BranchRecord(vals[0], vals[1], float(vals[2])))

    net = PowerNetwork(tuple(buses), tuple(branches))
    validate_network(net)
    return net


def emit_native_case(net: PowerNetwork) -> str:
    buses = []
    for b in net.buses:
        entry = {"id": int(b.id), "kind": b.kind}
        if b.name is not None:
            entry["name"] = b.name
        buses.append(entry)
    branches = [{"from": int(br.from_bus), "to": int(br.to_bus), "b": float(br.susceptance)} for br in net.branches]
    return json.dumps({"buses": buses, "branches": branches}, indent=2) + "\n"


def load_case(path_or_name: str, *, drop_condensers: bool | None = None) -> PowerNetwork:
    """Load a case from a path (``.m`` or ``.json``) or a bundled name.

    Bundled names are ``ieee39`` and ``ieee118``; the 118-bus case has its
    synchronous condensers removed unless ``drop_condensers=False``.
    """
    if path_or_name in _BUNDLED:
        return bundled_case(path_or_name, drop_condensers=drop_condensers)
    with open(path_or_name, encoding="utf-8") as fh:
        text = fh.read()
    if path_or_name.endswith(".json") or text.lstrip().startswith("{"):
        return parse_native_case(text)
    return parse_matpower_case(text, drop_condensers=bool(drop_condensers))


_BUNDLED = {"ieee39": ("case39.m", False), "ieee118": ("case118.m", True)}


def bundled_case(name: str, *, drop_condensers: bool | None = None) -> PowerNetwork:
    try:
        filename, default_drop = _BUNDLED[name]
    except KeyError:
        raise ValidationError(f"unknown bundled case {name!r}; choose from {sorted(_BUNDLED)}") from None
    text = resources.files("gridlab.data").joinpath(filename).read_text(encoding="utf-8")
    drop = default_drop if drop_condensers is None else drop_condensers
    return parse_matpower_case(text, drop_condensers=drop)


# ---------------------------------------------------------------------------
# graph checks and matrices


def _components(nodes: Iterable[int], edges: Iterable[tuple[int, int]]) -> list[list[int]]:
    adj: dict[int, set[int]] = {n: set() for n in nodes}
    for a, b in edges:
        if a in adj and b in adj:
            adj[a].add(b)
            adj[b].add(a)
    seen: set[int] = set()
    comps = []
    for start in adj:
        if start in seen:
            continue
        stack, comp = [start], []
        seen.add(start)
        while stack:
            u = stack.pop()
            comp.append(u)
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        comps.append(sorted(comp))
    return comps


def validate_network(net: PowerNetwork) -> None:
    """Check the invariants required for reduction: a generator and connectivity."""
    if not net.gen_order:
        raise ValidationError("case has no generator buses")
    comps = _components([b.id for b in net.buses], [(br.from_bus, br.to_bus) for br in net.branches])
    if len(comps) > 1:
        islands = sorted(comps, key=len)[:-1]
        raise ValidationError(f"network is disconnected; isolated bus groups: {islands}")


def build_laplacian(net: PowerNetwork) -> tuple[np.ndarray, tuple[int, ...]]:
    """Full susceptance Laplacian ordered generators first, then loads.

    Returns the matrix and the bus ordering used for its rows/columns.
    """
    order = net.gen_order + net.load_order
    index = {bid: k for k, bid in enumerate(order)}
    L = np.zeros((len(order), len(order)))
    for br in net.branches:
        i, j, b = index[br.from_bus], index[br.to_bus], br.susceptance
        L[i, i] += b
        L[j, j] += b
        L[i, j] -= b
        L[j, i] -= b
    return L, order


def kron_reduce(net: PowerNetwork) -> ReducedNetwork:
    """Eliminate every load bus by a Schur complement.

    ``B_r = B_GG - B_GL B_LL^-1 B_LG`` and ``B_L = -B_GL B_LL^-1``.
    """
    gens, loads = net.gen_order, net.load_order
    if not gens:
        raise ValidationError("case has no generator buses")
    L, _ = build_laplacian(net)
    n = len(gens)
    if not loads:
        return ReducedNetwork(gens, (), L, np.zeros((n, 0)))

    B_GG, B_GL = L[:n, :n], L[:n, n:]
    B_LG, B_LL = L[n:, :n], L[n:, n:]
    with warnings.catch_warnings():
        # singularity is reported below through the condition estimate
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(B_LL, check_finite=False)
    anorm = np.abs(B_LL).sum(axis=0).max()
    rcond = scipy.linalg.lapack.dgecon(lu, anorm, norm="1")[0] if anorm > 0 else 0.0
    if not np.isfinite(rcond) or rcond < RCOND_MIN:
        raise NumericalError(f"B_LL is singular (rcond={rcond:.3g}); {_describe_islands(net)}")
    X = scipy.linalg.lu_solve((lu, piv), B_LG, check_finite=False)
    B_r = B_GG - B_GL @ X
    B_r = 0.5 * (B_r + B_r.T)
    # B_L = -B_GL B_LL^-1 = -(B_LL^-T B_GL^T)^T
    B_L = -scipy.linalg.lu_solve((lu, piv), B_GL.T, trans=1, check_finite=False).T
    return ReducedNetwork(gens, loads, B_r, B_L)


def _describe_islands(net: PowerNetwork) -> str:
    gens = set(net.gen_order)
    comps = _components([b.id for b in net.buses], [(br.from_bus, br.to_bus) for br in net.branches])
    islands = [c for c in comps if not gens.intersection(c)]
    if islands:
        return f"load buses without a path to any generator: {islands}"
    return "no isolated load island found; B_LL is ill-conditioned"


def fully_connected(n: int, B: float) -> ReducedNetwork:
    """Reduced network of ``n`` generators pairwise coupled by susceptance ``B``.

    Each generator bus also hosts a load injection point, so ``B_L`` is the
    identity and ``load_order`` repeats the generator ids.
    """
    if n < 1:
        raise ValidationError("need at least one generator")
    ids = tuple(range(1, n + 1))
    B_r = B * (n * np.eye(n) - np.ones((n, n)))
    return ReducedNetwork(ids, ids, B_r, np.eye(n))


# ---------------------------------------------------------------------------
# reduced-network JSON


def _matrix_json(M: np.ndarray) -> dict:
    M = np.asarray(M, dtype=float)
    return {"rows": int(M.shape[0]), "cols": int(M.shape[1]), "data": [float(v) for v in M.ravel()]}


def _matrix_from_json(obj: dict, name: str) -> np.ndarray:
    rows, cols, data = (_require(obj, k, name) for k in ("rows", "cols", "data"))
    if len(data) != rows * cols:
        raise CaseParseError(f"{name}: expected {rows * cols} entries, got {len(data)}", key="data")
    return np.array(data, dtype=float).reshape(rows, cols)


def emit_reduced_json(rn: ReducedNetwork) -> str:
    doc = {
        "gen_order": list(rn.gen_order),
        "load_order": list(rn.load_order),
        "B_r": _matrix_json(rn.B_r),
        "B_L": _matrix_json(rn.B_L),
    }
    return json.dumps(doc, indent=2) + "\n"


def parse_reduced_json(text: str) -> ReducedNetwork:
    doc = json.loads(text)
    gen_order = _require(doc, "gen_order", "reduced network")
    load_order = _require(doc, "load_order", "reduced network")
    B_r = _matrix_from_json(_require(doc, "B_r", "reduced network"), "B_r")
    B_L = _matrix_from_json(_require(doc, "B_L", "reduced network"), "B_L")
    return ReducedNetwork(tuple(gen_order), tuple(load_order), B_r, B_L)
