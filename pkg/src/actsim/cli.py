"""Command-line front end.

Every command prints one JSON document to stdout (schema in
``docs/report.schema.json``).  Exit codes: 0 success, 2 malformed input,
3 engine failure, 4 contract failure (invalid graph, failed fidelity
threshold, missing sequence).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .architecture import (
    ArchitectureGraph,
    GeometryError,
    attach_actuator_layer,
    bridge_between,
    build_conveyor_belt,
    build_ladder,
    build_star,
    resource_summary,
    validate,
)
from .effective import PARITIES, code_indices, global_swap_step, sequence_operator
from .exact import (
    SWEEP_OPS,
    ScheduleError,
    SimParams,
    effective_vs_exact,
    write_sweep_csv,
)
from .sequencer import (
    GATES,
    GateRequest,
    LibraryMissError,
    SearchOverflowError,
    compile,
    gate_contract,
    replay_effective,
    replay_exact,
    search_sequence,
    standard_alphabet,
)
from .statevec import DimensionError, UnitarityError, state_fidelity

EXIT_OK, EXIT_INPUT, EXIT_ENGINE, EXIT_CONTRACT = 0, 2, 3, 4


class CliError(Exception):
    def __init__(self, code: int, message: str, result: dict | None = None):
        super().__init__(message)
        self.code = code
        self.result = result

    def with_result(self, result: dict) -> "CliError":
        self.result = result
        return self


def _emit(command: str, ok: bool, result: dict | None, error: dict | None = None) -> None:
    doc = {"command": command, "version": __version__, "ok": ok, "result": result, "error": error}
    json.dump(doc, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def _load(path: str) -> ArchitectureGraph:
    try:
        return ArchitectureGraph.load(path)
    except (OSError, ValueError) as exc:
        raise CliError(EXIT_INPUT, f"cannot read architecture {path!r}: {exc}") from exc


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


# -- commands -----------------------------------------------------------


def cmd_build(args) -> dict:
    if args.geometry == "ladder":
        graph = build_ladder(args.N, args.variant or "three_species", base=args.base or "three_species")
    elif args.geometry == "conveyor":
        graph = build_conveyor_belt(args.N, args.variant or "three_register", base=args.base or "three_register")
    elif args.geometry == "star":
        graph = build_star(args.N)
    else:
        left, right = _load(args.left), _load(args.right)
        graph = bridge_between(left, right, tuple(args.boundary))
    if args.freeze:
        graph = attach_actuator_layer(graph, args.freeze)
    out = args.output or Path(f"{args.geometry}_{args.N}_{args.variant or 'default'}.json")
    graph.save(out)
    return {"path": str(out), "graph": graph.digest()}


def cmd_validate(args) -> dict:
    graph = _load(args.arch)
    report = validate(graph)
    result = {
        "valid": report.ok,
        "graph": graph.digest(),
        "violations": [
            {"kind": v.kind, "where": [str(w) for w in v.where], "detail": v.detail} for v in report.violations
        ],
    }
    if not report.ok:
        raise CliError(EXIT_CONTRACT, f"{len(report.violations)} violation(s)").with_result(result)
    return result


def cmd_resources(args) -> dict:
    graph = _load(args.arch)
    if not validate(graph).ok:
        raise CliError(EXIT_CONTRACT, "graph fails validation")
    s = resource_summary(graph)
    return {
        "graph": graph.digest(),
        "drive_lines": s.drive_lines,
        "physical_qubits": s.physical_qubits,
        "crossed": s.crossed,
        "double_crossed": s.double_crossed,
        "actuators": s.actuators,
    }


def _operands(values: list[str]) -> tuple:
    out = []
    for v in values:
        out.append(int(v) if v.lstrip("-").isdigit() else v)
    return tuple(out)


def cmd_run(args) -> dict:
    graph = _load(args.arch)
    if not validate(graph).ok:
        raise CliError(EXIT_CONTRACT, "graph fails validation")
    req = GateRequest(args.gate, _operands(args.operands), args.repetitions, args.parity)
    ir = compile(graph, req)
    rng = np.random.default_rng(args.seed)
    pairs = gate_contract(graph, req, rng, args.samples)
    params = SimParams(args.eta) if args.engine == "exact" else None
    fids, defect = [], 0.0
    for start, want in pairs:
        if params is None:
            got = replay_effective(graph, ir, start)
        else:
            evo = replay_exact(graph, ir, start, params)
            got, defect = evo.state, max(defect, evo.unitarity_defect)
        fids.append(state_fidelity(got, want))
    result = {
        "graph": graph.digest(),
        "gate": req.name,
        "operands": list(req.operands),
        "repetitions": req.repetitions,
        "engine": args.engine,
        "eta": args.eta if params else None,
        "seed": args.seed,
        "ir": ir.to_text(),
        "fidelities": fids,
        "fidelity": float(np.mean(fids)),
        "min_fidelity": float(min(fids)),
        "threshold": args.min_fidelity,
        "unitarity_defect": defect,
    }
    if min(fids) < args.min_fidelity:
        raise CliError(EXIT_CONTRACT, "fidelity below threshold").with_result(result)
    return result


def cmd_sweep(args) -> dict:
    graph = _load(args.arch) if args.arch else None
    rows = effective_vs_exact(graph, args.op, args.eta)
    if args.csv:
        write_sweep_csv(rows, args.csv, timings=args.timings)
    return {
        "op": args.op,
        "csv": str(args.csv) if args.csv else None,
        "rows": [
            {
                "eta": r.eta,
                "distance": r.distance,
                "avg_gate_fidelity": r.avg_gate_fidelity,
                "population_leak": r.population_leak,
                "unitarity_defect": r.unitarity_defect,
            }
            for r in rows
        ],
    }


def cmd_search(args) -> dict:
    graph = _load(args.arch)
    inputs = None
    if args.target == "swap_step":
        target = global_swap_step(graph, args.parity)
        inputs = np.eye(2**graph.n_qubits)[:, code_indices(graph, "ICS")]
    else:
        ir = compile(graph, GateRequest(args.target))
        target = sequence_operator(graph, ir.pulses())
    found = search_sequence(graph, target, standard_alphabet(graph), args.max_depth, inputs=inputs)
    if found is None:
        raise CliError(EXIT_CONTRACT, f"no sequence up to depth {args.max_depth}").with_result(
            {"target": args.target, "found": False}
        )
    return {"target": args.target, "found": True, "depth": len(found.ops), "ir": found.to_text()}


# -- parser -------------------------------------------------------------


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="actsim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="build an architecture graph and save it as JSON")
    b.add_argument("geometry", choices=("ladder", "conveyor", "star", "bridge"))
    b.add_argument("N", type=int, nargs="?", default=2, help="logical qubits (star: neighbours)")
    b.add_argument("variant", nargs="?")
    b.add_argument("--base", help="layout under an actuator_variant")
    b.add_argument("--left", help="bridge: left module JSON")
    b.add_argument("--right", help="bridge: right module JSON")
    b.add_argument("--boundary", type=_ints, default=[0, 0], help="bridge: 'i,j'")
    b.add_argument("--freeze", type=_ints, help="attach one actuator to each listed qubit")
    b.add_argument("-o", "--output", type=Path, help="default: <geometry>_<N>_<variant>.json")
    b.set_defaults(func=cmd_build)

    v = sub.add_parser("validate", help="check species and frequency rules")
    v.add_argument("arch")
    v.set_defaults(func=cmd_validate)

    r = sub.add_parser("resources", help="count drive lines, qubits and actuators")
    r.add_argument("arch")
    r.set_defaults(func=cmd_resources)

    run = sub.add_parser("run", help="compile a gate, replay it and score it against its contract")
    run.add_argument("arch")
    run.add_argument("--gate", choices=GATES, required=True)
    run.add_argument("--operands", nargs="*", default=[])
    run.add_argument("--repetitions", type=int, default=1)
    run.add_argument("--parity", choices=PARITIES, default=PARITIES[0])
    run.add_argument("--engine", choices=("effective", "exact"), default="effective")
    run.add_argument("--eta", type=float, default=80.0)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--samples", type=int, default=4)
    run.add_argument("--min-fidelity", type=float, default=0.99)
    run.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="exact-versus-effective distance over blockade ratios")
    s.add_argument("--op", choices=SWEEP_OPS, required=True)
    s.add_argument("--eta", type=_floats, default=[5.0, 20.0, 80.0])
    s.add_argument("--arch", help="graph to use instead of the smallest star")
    s.add_argument("--csv", type=Path)
    s.add_argument("--timings", action="store_true", help="fill the runtime_s column")
    s.add_argument("--seed", type=int, default=0, help="accepted for symmetry; sweeps are deterministic")
    s.set_defaults(func=cmd_sweep)

    q = sub.add_parser("search", help="breadth-first search for a pulse word")
    q.add_argument("arch")
    q.add_argument("--target", choices=("swap_step", "cz", "ccz"), required=True)
    q.add_argument("--parity", choices=PARITIES, default=PARITIES[0])
    q.add_argument("--max-depth", type=int, default=4)
    q.set_defaults(func=cmd_search)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        result = args.func(args)
    except CliError as exc:
        _emit(args.command, False, exc.result, {"type": "CliError", "message": str(exc)})
        return exc.code
    except (LibraryMissError, GeometryError, SearchOverflowError) as exc:
        _emit(args.command, False, None, {"type": type(exc).__name__, "message": str(exc)})
        return EXIT_CONTRACT
    except (ScheduleError, UnitarityError, DimensionError) as exc:
        _emit(args.command, False, None, {"type": type(exc).__name__, "message": str(exc)})
        return EXIT_ENGINE
    except (KeyError, ValueError, OSError) as exc:
        _emit(args.command, False, None, {"type": type(exc).__name__, "message": str(exc)})
        return EXIT_INPUT
    _emit(args.command, True, result)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
