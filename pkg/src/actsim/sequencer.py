"""Compilation of named operations into global pulse schedules.

A :class:`ScheduleIR` is an ordered list of instructions: a species pulse,
charging or discharging an actuator, or a barrier.  It replays on the
blockade-limit engine directly, or on the exact engine after each pulse is
turned into a calibrated envelope.

Text form, one instruction per line::

    # source cz
    PULSE QA r:6.28318531,1,0,0 x:0,1,0,0
    CHARGE 9
    DISCHARGE 9
    BARRIER

``xx:`` carries the double-crossed rotation when one is set.  The leading
``# source`` comment records which operation produced the schedule.

Numbers are written with 9 significant digits when that reproduces the value
exactly, otherwise with full precision, so the text round-trips losslessly.

Transport steps whose pulse sequences depend on the geometry come from a
versioned library of entries, each checked against its contract on load.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Iterable, Sequence, Union

import numpy as np

from .architecture import (
    ArchitectureGraph,
    GeometryError,
    build_conveyor_belt,
    conveyor_layout,
)
from .effective import (
    DECODE_TOL,
    PARITIES,
    EncodedState,
    SpeciesPulse,
    actuator_set,
    apply_global_swap_step,
    apply_species_pulse,
    bridge_nodes,
    cnot_pulses,
    encode,
    species_pulse,
)
from .exact import (
    DriveSchedule,
    Evolution,
    ScheduleError,
    Segment,
    SimParams,
    evolve,
    pulse_envelope,
)
from .statevec import (
    RotationSpec,
    StateVector,
    ground_projector_diagonal,
    random_state,
    state_fidelity,
)

GATES = (
    "cz",
    "ccz",
    "cnot",
    "swap_step",
    "icc_shift",
    "modular_swap",
    "freeze_region",
    "unfreeze_region",
)
SEARCH_MAX_QUBITS = 8
SEARCH_MAX_DEPTH = 8
SEARCH_MAX_NODES = 200_000


class LibraryMissError(GeometryError):
    """No verified library sequence exists for this operation and geometry."""


class LibraryError(RuntimeError):
    """A library entry failed its contract check."""


class SearchOverflowError(ValueError):
    """A search request exceeds the size caps."""


# -- IR -----------------------------------------------------------------


@dataclass(frozen=True)
class Pulse:
    pulse: SpeciesPulse


@dataclass(frozen=True)
class Charge:
    actuator: int


@dataclass(frozen=True)
class Discharge:
    actuator: int


@dataclass(frozen=True)
class Barrier:
    pass


Instruction = Union[Pulse, Charge, Discharge, Barrier]


def _fmt(x: float) -> str:
    short = format(x, ".9g")
    return short if float(short) == x else repr(float(x))


def _fmt_rot(rot: RotationSpec) -> str:
    return ",".join(_fmt(v) for v in (rot.angle, *rot.axis))


def _parse_rot(text: str) -> RotationSpec:
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 4:
        raise ValueError(f"bad rotation field {text!r}")
    return RotationSpec(parts[0], tuple(parts[1:]))


@dataclass(frozen=True)
class ScheduleIR:
    ops: tuple[Instruction, ...] = ()
    source: str = ""

    def __post_init__(self):
        object.__setattr__(self, "ops", tuple(self.ops))

    def __add__(self, other: "ScheduleIR") -> "ScheduleIR":
        return ScheduleIR(self.ops + other.ops, self.source or other.source)

    def pulses(self) -> list[SpeciesPulse]:
        return [op.pulse for op in self.ops if isinstance(op, Pulse)]

    def check(self, graph: ArchitectureGraph) -> None:
        """Raise if an instruction names a missing species or a non-actuator."""
        for op in self.ops:
            if isinstance(op, Pulse) and op.pulse.species not in graph.species_ids:
                raise GeometryError(f"species {op.pulse.species!r} is not in the graph")
            if isinstance(op, (Charge, Discharge)):
                if graph.node(op.actuator).role != "actuator":
                    raise GeometryError(f"qubit {op.actuator} is not an actuator")

    def to_text(self) -> str:
        lines = [f"# source {self.source}".rstrip()]
        for op in self.ops:
            if isinstance(op, Pulse):
                p = op.pulse
                line = f"PULSE {p.species} r:{_fmt_rot(p.regular_rotation)} x:{_fmt_rot(p.crossed_rotation)}"
                if p.double_crossed_rotation is not None:
                    line += f" xx:{_fmt_rot(p.double_crossed_rotation)}"
                lines.append(line)
            elif isinstance(op, Charge):
                lines.append(f"CHARGE {op.actuator}")
            elif isinstance(op, Discharge):
                lines.append(f"DISCHARGE {op.actuator}")
            else:
                lines.append("BARRIER")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ScheduleIR":
        source = ""
        ops: list[Instruction] = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if line.startswith("# source"):
                source = line[len("# source"):].strip()
                continue
            if not line or line.startswith("#"):
                continue
            word, *args = line.split()
            try:
                if word == "PULSE":
                    species, *fields = args
                    kv = dict(f.split(":", 1) for f in fields)
                    if set(kv) - {"r", "x", "xx"}:
                        raise ValueError(f"unknown pulse field in {line!r}")
                    ops.append(Pulse(SpeciesPulse(
                        species,
                        _parse_rot(kv["r"]),
                        _parse_rot(kv["x"]),
                        _parse_rot(kv["xx"]) if "xx" in kv else None,
                    )))
                elif word in ("CHARGE", "DISCHARGE") and len(args) == 1:
                    ops.append((Charge if word == "CHARGE" else Discharge)(int(args[0])))
                elif word == "BARRIER" and not args:
                    ops.append(Barrier())
                else:
                    raise ValueError(f"unknown instruction {line!r}")
            except (KeyError, ValueError, TypeError) as exc:
                raise ValueError(f"line {lineno}: {exc}") from exc
        return cls(tuple(ops), source)


@dataclass(frozen=True)
class GateRequest:
    """``operands`` are qubit indices, or a mask name for the region gates."""

    name: str
    operands: tuple = ()
    repetitions: int = 1
    parity: str = PARITIES[0]

    def __post_init__(self):
        if self.name not in GATES:
            raise ValueError(f"unknown gate {self.name!r}; choose from {GATES}")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.parity not in PARITIES:
            raise ValueError(f"unknown parity {self.parity!r}")
        object.__setattr__(self, "operands", tuple(self.operands))


# -- compilation --------------------------------------------------------


def _phase_pulse(graph: ArchitectureGraph, mediator: int) -> SpeciesPulse:
    """2*pi on ``mediator``'s class.

    When the mediator's class is alone on its species the pulse is a single
    scaled envelope; otherwise other classes are left untouched, which needs
    class-selective shaping.
    """
    node = graph.nodes[mediator]
    classes = {graph.nodes[q].coupling_class for q in graph.members(node.species)}
    if classes == {node.coupling_class}:
        return SpeciesPulse.from_drive(node.species, RotationSpec(2 * np.pi / node.multiplier))
    rots = {c: RotationSpec(0.0) for c in ("regular", "crossed", "double_crossed")}
    rots[node.coupling_class] = RotationSpec(2 * np.pi)
    return SpeciesPulse(node.species, rots["regular"], rots["crossed"], rots["double_crossed"])


def _phase_mediator(graph: ArchitectureGraph, req: GateRequest) -> int:
    want = 2 if req.name == "cz" else 3
    if req.operands:
        (q,) = req.operands[:1]
        q = int(q)
        if len(graph.neighbors(q)) != want:
            raise GeometryError(f"{req.name} needs a mediator with {want} neighbours; qubit {q} has {len(graph.neighbors(q))}")
        return q
    for role in ("actuator", "coupler"):
        for q in graph.with_role(role):
            if len(graph.neighbors(q)) == want:
                return q
    raise GeometryError(f"no actuator or coupler with {want} neighbours for {req.name}")


def _common_mediator(graph: ArchitectureGraph, a: int, b: int) -> int:
    common = sorted(
        q for q in graph.neighbors(a) & graph.neighbors(b)
        if graph.nodes[q].role in ("coupler", "actuator")
    )
    if not common:
        raise GeometryError(f"qubits {a} and {b} share no coupler")
    return common[0]


def _region_actuators(graph: ArchitectureGraph, operands) -> list[int]:
    if len(operands) == 1 and isinstance(operands[0], str):
        members = sorted(graph.mask(operands[0]).members)
    else:
        members = sorted(int(q) for q in operands)
    if not members:
        raise GeometryError("empty region")
    acts = []
    for q in members:
        partners = graph.actuator_partners(q)
        if not partners:
            raise GeometryError(f"qubit {q} has no actuator partner")
        acts.extend(partners)
    return sorted(set(acts))


def _compile_once(graph: ArchitectureGraph, req: GateRequest, parity: str) -> list[Instruction]:
    name = req.name
    if name in ("cz", "ccz"):
        q = _phase_mediator(graph, req)
        return [Barrier(), Pulse(_phase_pulse(graph, q)), Barrier()]
    if name == "cnot":
        control, target = (int(q) for q in req.operands[:2])
        mediator = _common_mediator(graph, control, target)
        return [Pulse(p) for p in cnot_pulses(graph, control, target, mediator)]
    if name == "modular_swap":
        q_left, q_right = (int(q) for q in req.operands[:2])
        coupler, actuator = bridge_nodes(graph)
        body: list[Instruction] = [Discharge(actuator), Barrier()]
        for c, t in ((q_left, q_right), (q_right, q_left), (q_left, q_right)):
            body += [Pulse(p) for p in cnot_pulses(graph, c, t, coupler)]
            body.append(Barrier())
        return body + [Charge(actuator)]
    if name == "freeze_region":
        return [Charge(a) for a in _region_actuators(graph, req.operands)]
    if name == "unfreeze_region":
        return [Discharge(a) for a in _region_actuators(graph, req.operands)]
    entry = library().lookup(graph, name, parity)
    return list(entry.ir.ops)


def compile(graph: ArchitectureGraph, req: GateRequest) -> ScheduleIR:
    """IR for ``req``; ``swap_step`` repetitions alternate parity."""
    ops: list[Instruction] = []
    other = {PARITIES[0]: PARITIES[1], PARITIES[1]: PARITIES[0]}
    parity = req.parity
    for _ in range(req.repetitions):
        ops += _compile_once(graph, req, parity)
        if req.name == "swap_step":
            parity = other[parity]
    ir = ScheduleIR(tuple(ops), req.name)
    ir.check(graph)
    return ir


# -- replay -------------------------------------------------------------


def replay(
    graph: ArchitectureGraph,
    ir: ScheduleIR,
    state: StateVector,
    engine: str = "effective",
    params: SimParams | None = None,
) -> StateVector:
    if engine == "effective":
        return replay_effective(graph, ir, state)
    if engine == "exact":
        if params is None:
            raise ValueError("the exact engine needs SimParams")
        return replay_exact(graph, ir, state, params).state
    raise ValueError(f"unknown engine {engine!r}")


def replay_effective(graph: ArchitectureGraph, ir: ScheduleIR, state: StateVector) -> StateVector:
    ir.check(graph)
    for op in ir.ops:
        if isinstance(op, Pulse):
            state = apply_species_pulse(graph, op.pulse, state)
        elif isinstance(op, Charge):
            state = actuator_set(graph, op.actuator, "excited", state)
        elif isinstance(op, Discharge):
            state = actuator_set(graph, op.actuator, "ground", state)
    return state


def exact_schedule(graph: ArchitectureGraph, ir: ScheduleIR, params: SimParams) -> DriveSchedule:
    """Translate ``ir`` into calibrated envelopes.

    A run of CHARGE (or DISCHARGE) instructions becomes one pi pulse per
    actuator species, which must name every actuator on that drive line.
    """
    ir.check(graph)
    segments: list[Segment] = []
    ops = list(ir.ops)
    i = 0
    while i < len(ops):
        op = ops[i]
        if isinstance(op, Pulse):
            env = pulse_envelope(graph, op.pulse, params)
            if env is not None:
                segments.append(Segment.single(op.pulse.species, env))
            i += 1
        elif isinstance(op, (Charge, Discharge)):
            kind = type(op)
            run = []
            while i < len(ops) and type(ops[i]) is kind:
                run.append(ops[i].actuator)
                i += 1
            by_species: dict[str, set[int]] = {}
            for a in run:
                by_species.setdefault(graph.nodes[a].species, set()).add(a)
            for species, acts in sorted(by_species.items()):
                if acts != set(graph.members(species)):
                    raise ScheduleError(
                        f"drive line {species!r} cannot charge a subset of its actuators"
                    )
                axis = "x" if kind is Charge else "-x"
                env = params.envelope(graph, RotationSpec.about(axis, np.pi))
                segments.append(Segment.single(species, env))
        else:
            i += 1
    return DriveSchedule(tuple(segments))


def replay_exact(
    graph: ArchitectureGraph, ir: ScheduleIR, state: StateVector, params: SimParams
) -> Evolution:
    """Exact replay reported in the ZZ interaction frame."""
    return evolve(graph, exact_schedule(graph, ir, params), params, state, frame="zz")


# -- search -------------------------------------------------------------


def standard_alphabet(
    graph: ArchitectureGraph,
    angles: Sequence[float] = (np.pi / 2, -np.pi / 2, np.pi, -np.pi, 2 * np.pi),
    axes: Sequence[str] = ("x", "y", "z"),
) -> list[SpeciesPulse]:
    """Uniform pulses (same rotation on every class) for each species."""
    return [
        SpeciesPulse.uniform(s, RotationSpec.about(ax, a))
        for s in graph.species_ids
        for a in angles
        for ax in axes
    ]


def _phase_key(images: np.ndarray) -> bytes:
    flat = images.reshape(-1)
    lead = flat[np.argmax(np.abs(flat) > 1e-6)]
    norm = flat * (abs(lead) / lead)
    return np.round(norm, 6).tobytes()


def _matches(images: np.ndarray, target: np.ndarray, tol: float) -> bool:
    overlap = np.vdot(target, images)
    if abs(overlap) < 1e-12:
        return False
    phase = overlap / abs(overlap)
    return float(np.max(np.abs(images - phase * target))) <= tol


def search_sequence(
    graph: ArchitectureGraph,
    target: np.ndarray,
    alphabet: Sequence[SpeciesPulse],
    max_depth: int,
    inputs: np.ndarray | None = None,
    tol: float = 1e-8,
    max_nodes: int = SEARCH_MAX_NODES,
) -> ScheduleIR | None:
    """Shortest pulse word reproducing ``target`` up to a global phase.

    Breadth-first over words in ``alphabet``, deduplicating operators by their
    phase-normalised images.  Among the shortest solutions the
    lexicographically smallest (by alphabet index) is returned; ``None`` when
    nothing is found up to ``max_depth``.  With ``inputs`` (columns of states)
    only the images of those states must match.
    """
    n = graph.n_qubits
    if n > SEARCH_MAX_QUBITS:
        raise SearchOverflowError(f"search is capped at {SEARCH_MAX_QUBITS} qubits, graph has {n}")
    if max_depth > SEARCH_MAX_DEPTH:
        raise SearchOverflowError(f"search depth is capped at {SEARCH_MAX_DEPTH}")
    dim = 2**n
    probes = np.eye(dim, dtype=complex) if inputs is None else np.asarray(inputs, dtype=complex)
    if probes.ndim == 1:
        probes = probes[:, None]
    goal = np.asarray(target, dtype=complex) @ probes
    letters = [species_pulse(graph, p) for p in alphabet]

    if _matches(probes, goal, tol):
        return ScheduleIR((), "search")
    frontier = [((), probes)]
    seen = {_phase_key(probes)}
    for _ in range(max_depth):
        nxt = []
        for word, images in frontier:
            for k, op in enumerate(letters):
                new = op @ images
                key = _phase_key(new)
                if key in seen:
                    continue
                seen.add(key)
                if len(seen) > max_nodes:
                    raise SearchOverflowError(f"search exceeded {max_nodes} distinct operators")
                if _matches(new, goal, tol):
                    return ScheduleIR(tuple(Pulse(alphabet[j]) for j in word + (k,)), "search")
                nxt.append((word + (k,), new))
        frontier = nxt
        if not frontier:
            break
    return None


# -- library ------------------------------------------------------------

LIBRARY_VERSION = 1


@dataclass(frozen=True)
class LibraryEntry:
    name: str
    geometry: dict
    parities: tuple[str, ...]
    provenance: str
    ir: ScheduleIR = field(repr=False)

    def builds(self, graph: ArchitectureGraph) -> bool:
        g = self.geometry
        if g.get("kind") != "conveyor":
            return False
        try:
            ref = build_conveyor_belt(
                g["N"], g["variant"], base=g.get("base", "three_register"),
                zeta=graph.zeta, base_coupling=graph.base_coupling,
            )
        except GeometryError:
            return False
        return (
            ref.edges == graph.edges
            and [(n.species, n.coupling_class, n.role) for n in ref.nodes]
            == [(n.species, n.coupling_class, n.role) for n in graph.nodes]
        )

    def verify(self, seed: int = 0) -> None:
        """Replay on the reference geometry and compare with the contract."""
        g = self.geometry
        graph = build_conveyor_belt(g["N"], g["variant"], base=g.get("base", "three_register"))
        if self.name != "swap_step":
            raise LibraryError(f"no contract check for {self.name!r}")
        N = g["N"]
        rng = np.random.default_rng(seed)
        inputs = [np.eye(2**N)[x] for x in range(2**N)]
        inputs += [random_state(N, rng).amplitudes for _ in range(3)]
        for parity in self.parities:
            for alpha in inputs:
                start = encode(graph, EncodedState("ICS", alpha))
                got = replay_effective(graph, self.ir, start)
                want = apply_global_swap_step(graph, start, parity)
                if state_fidelity(got, want) < 1 - DECODE_TOL:
                    raise LibraryError(f"library entry {self.name} fails its contract")


@dataclass(frozen=True)
class SequenceLibrary:
    version: int
    entries: tuple[LibraryEntry, ...]

    def lookup(self, graph: ArchitectureGraph, name: str, parity: str) -> LibraryEntry:
        for e in self.entries:
            if e.name == name and parity in e.parities and e.builds(graph):
                return e
        raise LibraryMissError(
            f"no verified {name} sequence for this geometry; supply one or use the contract operator"
        )

    @classmethod
    def from_dict(cls, data: dict, verify: bool = True) -> "SequenceLibrary":
        if data.get("version") != LIBRARY_VERSION:
            raise LibraryError(f"unsupported library version {data.get('version')!r}")
        entries = tuple(
            LibraryEntry(
                e["name"], dict(e["geometry"]), tuple(e["parities"]), e["provenance"],
                ScheduleIR.from_text(e["ir"]),
            )
            for e in data["entries"]
        )
        if verify:
            for e in entries:
                e.verify()
        return cls(data["version"], entries)

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "entries": [
                {
                    "name": e.name, "geometry": e.geometry, "parities": list(e.parities),
                    "provenance": e.provenance, "ir": e.ir.to_text(),
                }
                for e in self.entries
            ],
        }


@lru_cache(maxsize=1)
def library() -> SequenceLibrary:
    """Built-in library, verified once per process."""
    text = resources.files("actsim").joinpath("data/sequence_library.json").read_text("utf-8")
    return SequenceLibrary.from_dict(json.loads(text))


# -- contracts ----------------------------------------------------------


def _phase_product(graph: ArchitectureGraph, mediators: Iterable[int]) -> np.ndarray:
    n = graph.n_qubits
    diag = np.ones(2**n)
    for m in mediators:
        diag = diag * (1 - 2 * ground_projector_diagonal(n, graph.neighbors(m)))
    return diag


def _swap_axes(state: StateVector, a: int, b: int) -> StateVector:
    axes = list(range(state.n_qubits))
    axes[a], axes[b] = axes[b], axes[a]
    return StateVector(state.n_qubits, np.transpose(state.tensor(), axes).reshape(-1))


def _module_input(graph: ArchitectureGraph, rng: np.random.Generator):
    """Random logical content on both bridged modules; bridge closed."""
    _, actuator = bridge_nodes(graph)
    n = graph.n_qubits
    tensor = np.zeros((2,) * n, dtype=complex)
    carriers = [q for q in range(n) if graph.nodes[q].role == "computational"]
    amps = random_state(len(carriers), rng).tensor()
    index: list = [0] * n
    index[actuator] = 1
    for q in carriers:
        index[q] = slice(None)
    tensor[tuple(index)] = amps
    return StateVector(n, tensor.reshape(-1))


def gate_contract(
    graph: ArchitectureGraph,
    req: GateRequest,
    rng: np.random.Generator,
    samples: int = 4,
) -> list[tuple[StateVector, StateVector]]:
    """Input states with the output each gate promises, up to a global phase.

    These are written from each operation's logical contract, without
    replaying the compiled pulses.
    """
    name = req.name
    n = graph.n_qubits
    pairs: list[tuple[StateVector, StateVector]] = []
    if name in ("cz", "ccz"):
        q = _phase_mediator(graph, req)
        node = graph.nodes[q]
        same = [m for m in graph.members(node.species) if graph.nodes[m].coupling_class == node.coupling_class]
        diag = _phase_product(graph, same) ** req.repetitions
        for _ in range(samples):
            psi = random_state(n, rng)
            pairs.append((psi, StateVector(n, diag * psi.amplitudes)))
        return pairs
    if name == "cnot":
        control, target = (int(q) for q in req.operands[:2])
        for _ in range(samples):
            # NOT on the target when the control is |g>; everything else |g>
            two = random_state(2, rng).amplitudes.reshape(2, 2)
            out = two.copy()
            if req.repetitions % 2:
                out[0] = out[0][::-1]
            psi = np.zeros((2,) * n, dtype=complex)
            phi = np.zeros((2,) * n, dtype=complex)
            idx: list = [0] * n
            idx[control] = slice(None)
            idx[target] = slice(None)
            block = two if control < target else two.T
            oblock = out if control < target else out.T
            psi[tuple(idx)] = block
            phi[tuple(idx)] = oblock
            pairs.append((StateVector(n, psi.reshape(-1)), StateVector(n, phi.reshape(-1))))
        return pairs
    if name == "swap_step":
        other = {PARITIES[0]: PARITIES[1], PARITIES[1]: PARITIES[0]}
        for _ in range(samples):
            start = encode(graph, EncodedState("ICS", random_state(len(conveyor_layout(graph)[0]), rng).amplitudes))
            out, parity = start, req.parity
            for _ in range(req.repetitions):
                out = apply_global_swap_step(graph, out, parity)
                parity = other[parity]
            pairs.append((start, out))
        return pairs
    if name == "modular_swap":
        q_left, q_right = (int(q) for q in req.operands[:2])
        for _ in range(samples):
            start = _module_input(graph, rng)
            out = start
            for _ in range(req.repetitions):
                out = _swap_axes(out, q_left, q_right)
            pairs.append((start, out))
        return pairs
    if name in ("freeze_region", "unfreeze_region"):
        acts = _region_actuators(graph, req.operands)
        level = 1 if name == "freeze_region" else 0
        bits = [0] * n
        start_bits = list(bits)
        for a in acts:
            start_bits[a] = 1 - level
            bits[a] = level
        return [(StateVector.basis(start_bits), StateVector.basis(bits))]
    raise LibraryMissError(f"no contract check available for {name!r}")
