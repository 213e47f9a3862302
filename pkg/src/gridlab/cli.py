"""Command-line front end: ``gridlab <command> ...``.

Exit status is 0 on success, 1 when ``verify`` finds a failing identity,
2 for unreadable or invalid input and 3 for numerical failures. Inputs
named ``-`` are read from stdin; without ``-o`` results go to stdout, so
``parse``, ``reduce``, ``assemble`` and ``poles`` compose with pipes.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__, experiments, formulas, numlin
from .assembly import FleetSpec, assemble_mixed, fleet_from_json, system_from_json, system_to_json, uniform_fleet
from .devices import GfmParams
from .errors import NumericalError
from .netcase import (
    _BUNDLED,
    PowerNetwork,
    ReducedNetwork,
    bundled_case,
    emit_native_case,
    emit_reduced_json,
    parse_matpower_case,
    parse_native_case,
    parse_reduced_json,
)

EXIT_OK, EXIT_VERIFY, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3


class InputError(Exception):
    """Bad command-line input detected before any computation."""


@dataclass
class RunConfig:
    command: str
    inputs: list[str] = field(default_factory=list)
    fleet: str | None = None
    output: str | None = None
    options: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# input helpers


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None


def _write(text: str, path: str | None) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _is_json(path: str, text: str) -> bool:
    return path.endswith(".json") or text.lstrip().startswith("{")


def _load_network(path: str, keep_condensers: bool = False) -> PowerNetwork | ReducedNetwork:
    """A bundled case name, a MATPOWER file, a native case JSON or a reduced-network JSON.

    Condensers are only dropped by default for the bundled 118-bus case.
    """
    if path in _BUNDLED:
        return bundled_case(path, drop_condensers=False if keep_condensers else None)
    text = _read(path)
    if _is_json(path, text):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError:
            doc = None
        if isinstance(doc, dict) and "B_r" in doc:
            return parse_reduced_json(text)
        return parse_native_case(text)
    return parse_matpower_case(text)


def _load_reduced(path: str, keep_condensers: bool = False) -> ReducedNetwork:
    return experiments.as_reduced(_load_network(path, keep_condensers))


def _fleet(args, rn: ReducedNetwork) -> FleetSpec:
    if args.fleet is not None:
        return fleet_from_json(_read(args.fleet), rn)
    if args.sg_defaults:
        return uniform_fleet(rn, experiments.default_sg_params())
    over = {}
    if args.gfm_tc is not None:
        over["T_c"] = args.gfm_tc
    if args.gfm_droop is not None:
        over["R"] = args.gfm_droop
    return uniform_fleet(rn, experiments.default_gfm_params(**over))


def _parse_sweep(text: str) -> tuple[float, float, int]:
    parts = text.split(":")
    if len(parts) != 3:
        raise InputError(f"--sweep-m expects LO:HI:STEPS, got {text!r}")
    try:
        lo, hi, steps = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise InputError(f"--sweep-m expects LO:HI:STEPS, got {text!r}") from None
    if not (0 < lo < hi) or steps < 2:
        raise InputError("--sweep-m needs 0 < LO < HI and STEPS >= 2")
    return lo, hi, steps


# ---------------------------------------------------------------------------
# commands


def cmd_parse(args) -> int:
    text = _read(args.file)
    fmt = args.format or ("json" if _is_json(args.file, text) else "matpower")
    if fmt == "json":
        net = parse_native_case(text)
    else:
        net = parse_matpower_case(text, drop_condensers=args.drop_condensers)
    _write(emit_native_case(net), args.output)
    return EXIT_OK


def cmd_reduce(args) -> int:
    _write(emit_reduced_json(_load_reduced(args.case, args.keep_condensers)), args.output)
    return EXIT_OK


def cmd_assemble(args) -> int:
    rn = _load_reduced(args.case, args.keep_condensers)
    _write(system_to_json(assemble_mixed(rn, _fleet(args, rn))), args.output)
    return EXIT_OK


def cmd_poles(args) -> int:
    sys_ = system_from_json(_read(args.system))
    spec = numlin.poles(sys_)
    lines = ["real,imag,multiplicity"]
    for g in spec.groups:
        z = complex(g.value)
        lines.append(f"{experiments.fmt(z.real)},{experiments.fmt(z.imag)},{g.multiplicity}")
    _write("\n".join(lines) + "\n", args.output)
    stable = bool(np.all(spec.eigenvalues.real < 0))
    print(f"{len(spec)} poles, {'Hurwitz' if stable else 'NOT Hurwitz'}", file=sys.stderr)
    return EXIT_OK


def cmd_step(args) -> int:
    net = _load_network(args.case, args.keep_condensers)
    rn = experiments.as_reduced(net)
    res = experiments.run_step_experiment(net, _fleet(args, rn), args.bus, args.dp, args.t_end, args.dt)
    _write(experiments.trajectory_csv(res), args.output)
    print(
        f"peak generator {res.peak_generator}, max spread (first {experiments.fmt(res.spread_window)} s) "
        f"{experiments.fmt(res.spread)}, settling time {experiments.fmt(res.settling_time)}",
        file=sys.stderr,
    )
    return EXIT_OK


def cmd_h2map(args) -> int:
    rn = _load_reduced(args.case, args.keep_condensers)
    m = experiments.compute_h2_map(rn, _fleet(args, rn))
    _write(experiments.h2_map_csv(m), args.output)
    print(f"peak-to-median {experiments.fmt(experiments.localization_metrics(m).peak_to_median)}", file=sys.stderr)
    return EXIT_OK


def cmd_gramian(args) -> int:
    rn = _load_reduced(args.case, args.keep_condensers)
    fleet = _fleet(args, rn)
    devices = set(fleet.devices)
    if len(devices) != 1 or not isinstance(next(iter(devices)), GfmParams):
        raise InputError("gramian sweeps need an identical all-GFM fleet")
    lo, hi, steps = _parse_sweep(args.sweep_m)
    grid = np.geomspace(lo, hi, steps) if args.log else np.linspace(lo, hi, steps)
    res = experiments.gramian_sweep(rn, next(iter(devices)), grid)
    _write(experiments.sweep_csv(res), args.output)
    return EXIT_OK


def cmd_verify(args) -> int:
    records = formulas.verify_closed_forms(args.grid)
    rows = formulas.summarize(records)
    width = max(len(r["name"]) for r in rows)
    out = sys.stdout
    out.write(f"{'identity':<{width}}  points  max_rel_err   tol      status\n")
    for r in rows:
        status = "PASS" if r["passed"] else ("ADVISORY" if r["advisory"] else "FAIL")
        out.write(f"{r['name']:<{width}}  {r['points']:>6}  {r['max_rel_err']:<11.3e}  {r['tol']:<7.0e}  {status}\n")
    if args.report:
        _write(formulas.report_json(records), args.report)
    ok = all(r["passed"] for r in rows if not r["advisory"])
    return EXIT_OK if ok else EXIT_VERIFY


# ---------------------------------------------------------------------------
# parser


def _case_args(p) -> None:
    p.add_argument("case", help="bundled case (ieee39, ieee118), MATPOWER .m file, case JSON or reduced JSON; '-' for stdin")
    p.add_argument("--keep-condensers", action="store_true", help="keep synchronous condensers in the 118-bus case")


def _fleet_args(p) -> None:
    g = p.add_mutually_exclusive_group()
    g.add_argument("--fleet", metavar="FILE", help="fleet JSON with one device per generator bus")
    g.add_argument("--gfm-tc", type=float, metavar="T_C", help="identical GFMs with this power-filter time constant [s]")
    g.add_argument("--sg-defaults", action="store_true", help="identical SGs with default parameters")
    p.add_argument("--gfm-droop", type=float, metavar="R", help="droop coefficient for identical GFMs (default 0.05)")


def _output_arg(p) -> None:
    p.add_argument("-o", "--output", metavar="FILE", help="output file (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridlab",
        description="Small-signal frequency dynamics of mixed SG/GFM fleets on Kron-reduced networks.",
        epilog="GRIDLAB_THREADS caps internal parallelism (default 1).",
    )
    parser.add_argument("--version", action="version", version=f"gridlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("parse", help="parse a case file into the native JSON format")
    p.add_argument("file", help="MATPOWER .m or case JSON file; '-' for stdin")
    p.add_argument("--format", choices=("matpower", "json"), help="input format (default: by extension/content)")
    p.add_argument("--drop-condensers", action="store_true", help="drop generators with Pg <= 0 or Pmax <= 0")
    _output_arg(p)
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("reduce", help="Kron-reduce a case onto its generator buses")
    _case_args(p)
    _output_arg(p)
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("assemble", help="assemble the state-space system for a fleet")
    _case_args(p)
    _fleet_args(p)
    _output_arg(p)
    p.set_defaults(func=cmd_assemble)

    p = sub.add_parser("poles", help="grouped eigenvalues of an assembled system")
    p.add_argument("system", help="system JSON from 'assemble'; '-' for stdin")
    _output_arg(p)
    p.set_defaults(func=cmd_poles)

    p = sub.add_parser("step", help="generator frequency response to a load step")
    _case_args(p)
    _fleet_args(p)
    p.add_argument("--bus", type=int, required=True, help="load bus to step")
    p.add_argument("--dp", type=float, default=1.0, help="step size in per unit (default 1)")
    p.add_argument("--t-end", type=float, default=10.0, help="simulation length [s] (default 10)")
    p.add_argument("--dt", type=float, default=0.01, help="time step [s] (default 0.01)")
    _output_arg(p)
    p.set_defaults(func=cmd_step)

    p = sub.add_parser("h2map", help="H2 norm of every load-to-generator-frequency channel")
    _case_args(p)
    _fleet_args(p)
    _output_arg(p)
    p.set_defaults(func=cmd_h2map)

    p = sub.add_parser("gramian", help="gramian eigenvalues over an effective-inertia sweep")
    _case_args(p)
    _fleet_args(p)
    p.add_argument("--sweep-m", default="0.636:12.73:50", metavar="LO:HI:STEPS", help="M_eff grid (default 0.636:12.73:50)")
    p.add_argument("--log", action="store_true", help="log-spaced grid instead of linear")
    _output_arg(p)
    p.set_defaults(func=cmd_gramian)

    p = sub.add_parser("verify", help="check every closed form against its numerical oracle")
    p.add_argument("--grid", choices=("default", "dense"), default="default", help="parameter grid (default: default)")
    p.add_argument("--report", metavar="FILE", help="write the per-point JSON report here")
    p.set_defaults(func=cmd_verify)
    return parser


def _config(args) -> RunConfig:
    inputs = [getattr(args, k) for k in ("file", "case", "system") if getattr(args, k, None) is not None]
    opts = {k: v for k, v in vars(args).items() if k not in ("func", "command", "fleet", "output")}
    return RunConfig(args.command, inputs, getattr(args, "fleet", None), getattr(args, "output", None), opts)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "gfm_droop", None) is not None and (args.fleet or args.sg_defaults):
        parser.error("--gfm-droop only applies to identical GFM fleets")
    cfg = _config(args)
    for path in cfg.inputs + ([cfg.fleet] if cfg.fleet else []):
        if path != "-" and path not in _BUNDLED:
            try:
                open(path, encoding="utf-8").close()
            except OSError as exc:
                print(f"gridlab: error: cannot read {path}: {exc.strerror}", file=sys.stderr)
                return EXIT_INPUT
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"gridlab: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, ValueError, TypeError, KeyError) as exc:
        print(f"gridlab: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
