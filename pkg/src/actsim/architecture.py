"""Globally driven architecture graphs.

A graph holds qubits partitioned into drive species, uniform-strength ZZ edges
and named region masks.  Two hardware rules are checked by :func:`validate`:
no edge joins two qubits of the same species, and every transition frequency
sits at ``omega_drive + coordination * zeta``.

All frequencies are angular (rad/s).

Row/loop layouts produced by the builders
-----------------------------------------
Ladder (``N`` rows of ``2N+3`` qubits, row ``r`` column ``c`` has index
``r*(2N+3)+c``; the ``N-1`` inter-row couplers follow, then any actuators):

* ``three_species``: row species cycle ``A, B, C`` along the columns.  The
  couplers sit on the centre column ``N+1`` and take the next species in the
  cycle.  Every coupler is crossed, and each row carries two crossed qubits at
  columns ``1`` and ``2N+1`` (``3N-1`` crossed in total).
* ``two_species_lowoverhead``: rows alternate ``A, B``; couplers on column
  ``N+1`` take the other species.  The ``2N-1`` addressable sites (column 1 of
  every row, then the couplers) are double-crossed for the first ``3N/2`` and
  crossed for the remaining ``N/2-1``.
* ``actuator_variant``: a base ladder plus one actuator per inter-row junction,
  coupled to the two row qubits joined by that coupler, on species ``QA``.

Conveyor belt (loop positions ``0 .. L-1`` with ``L = N(b+1)``; computational
qubit ``Q_i`` at ``(i-1)(b+1)``, followed by its register block of ``b`` qubits,
off-loop node last):

* ``three_register`` (``b=3``): species alternate ``A, B`` along the loop; the
  middle qubit of ``S_{1,2}`` and the off-loop node are crossed.
* ``single_register`` (``b=1``): every register qubit is crossed; ``Q_1`` and
  the off-loop node are double-crossed.
* ``actuator_variant``: the off-loop node becomes an actuator on species
  ``QA``.

The off-loop node couples to ``Q_1 .. Q_min(3, N)``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable

import numpy as np

COUPLING_MULTIPLIER = {"regular": 1, "crossed": 2, "double_crossed": 4}
ROLES = ("computational", "register", "coupler", "actuator")
MASK_KINDS = ("freeze_region", "bridge", "module_boundary")

DEFAULT_ZETA = 2 * np.pi * 5e6
DEFAULT_BASE_COUPLING = 1.0
_BASE_DRIVE = 2 * np.pi * 4.8e9
_DRIVE_SPACING = 2 * np.pi * 0.25e9
_FREQ_RTOL = 1e-12


class GeometryError(ValueError):
    """Raised for invalid builder parameters or mismatched geometry."""


class InvalidGraphError(ValueError):
    """Raised when an operation requires a graph that passes :func:`validate`."""


@dataclass(frozen=True)
class Species:
    id: str
    drive_frequency: float


@dataclass(frozen=True)
class QubitNode:
    index: int
    species: str
    coupling_class: str = "regular"
    role: str = "computational"
    transition_frequency: float | None = None
    coordination: int | None = None

    @property
    def multiplier(self) -> int:
        return COUPLING_MULTIPLIER[self.coupling_class]


@dataclass(frozen=True)
class RegionMask:
    name: str
    members: frozenset[int]
    kind: str

    def __post_init__(self):
        object.__setattr__(self, "members", frozenset(int(m) for m in self.members))


@dataclass(frozen=True)
class ArchitectureGraph:
    species: tuple[Species, ...]
    nodes: tuple[QubitNode, ...]
    edges: tuple[tuple[int, int], ...]
    zeta: float = DEFAULT_ZETA
    base_coupling: float = DEFAULT_BASE_COUPLING
    masks: tuple[RegionMask, ...] = ()
    _adjacency: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        adj: dict[int, set[int]] = {node.index: set() for node in self.nodes}
        for i, j in self.edges:
            if i != j and i in adj and j in adj:
                adj[i].add(j)
                adj[j].add(i)
        object.__setattr__(
            self, "_adjacency", {k: frozenset(v) for k, v in adj.items()}
        )

    @classmethod
    def build(
        cls,
        species: Iterable[Species],
        nodes: Iterable[QubitNode],
        edges: Iterable[tuple[int, int]],
        zeta: float = DEFAULT_ZETA,
        base_coupling: float = DEFAULT_BASE_COUPLING,
        masks: Iterable[RegionMask] = (),
    ) -> "ArchitectureGraph":
        """Construct a graph, deriving coordination and transition frequencies."""
        species = tuple(species)
        edges = tuple(tuple(sorted((int(i), int(j)))) for i, j in edges)
        skeleton = cls(species, tuple(nodes), edges, zeta, base_coupling, tuple(masks))
        drive = {s.id: s.drive_frequency for s in species}
        derived = []
        for node in skeleton.nodes:
            kappa = len(skeleton.neighbors(node.index))
            omega = drive[node.species] + kappa * zeta if node.species in drive else None
            derived.append(replace(node, coordination=kappa, transition_frequency=omega))
        return replace(skeleton, nodes=tuple(derived))

    @property
    def n_qubits(self) -> int:
        return len(self.nodes)

    @property
    def species_ids(self) -> tuple[str, ...]:
        return tuple(s.id for s in self.species)

    def node(self, index: int) -> QubitNode:
        if not 0 <= index < len(self.nodes):
            raise IndexError(f"no qubit {index} in a graph of {len(self.nodes)}")
        return self.nodes[index]

    def neighbors(self, index: int) -> frozenset[int]:
        if index not in self._adjacency:
            raise IndexError(f"no qubit {index} in a graph of {len(self.nodes)}")
        return self._adjacency[index]

    def members(self, species: str, coupling_class: str | None = None) -> list[int]:
        if species not in self.species_ids:
            raise KeyError(f"unknown species {species!r}")
        return [
            n.index
            for n in self.nodes
            if n.species == species and (coupling_class is None or n.coupling_class == coupling_class)
        ]

    def with_role(self, role: str) -> list[int]:
        return [n.index for n in self.nodes if n.role == role]

    def actuator_partners(self, index: int) -> list[int]:
        return sorted(j for j in self.neighbors(index) if self.nodes[j].role == "actuator")

    def mask(self, name: str) -> RegionMask:
        for m in self.masks:
            if m.name == name:
                return m
        raise KeyError(f"no mask named {name!r}")

    def rabi_multiplier(self, index: int) -> int:
        return self.node(index).multiplier

    # -- serialisation -------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "zeta": self.zeta,
            "base_coupling": self.base_coupling,
            "species": [{"id": s.id, "drive_frequency": s.drive_frequency} for s in self.species],
            "nodes": [
                {"index": n.index, "species": n.species, "class": n.coupling_class, "role": n.role}
                for n in self.nodes
            ],
            "edges": [list(e) for e in self.edges],
            "masks": [
                {"name": m.name, "kind": m.kind, "members": sorted(m.members)} for m in self.masks
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ArchitectureGraph":
        try:
            return cls.build(
                species=[Species(str(s["id"]), float(s["drive_frequency"])) for s in data["species"]],
                nodes=[
                    QubitNode(int(n["index"]), str(n["species"]), str(n["class"]), str(n["role"]))
                    for n in data["nodes"]
                ],
                edges=[(int(i), int(j)) for i, j in data["edges"]],
                zeta=float(data["zeta"]),
                base_coupling=float(data["base_coupling"]),
                masks=[
                    RegionMask(str(m["name"]), frozenset(m["members"]), str(m["kind"]))
                    for m in data.get("masks", [])
                ],
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed architecture document: {exc}") from exc

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "ArchitectureGraph":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def digest(self) -> dict:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return {
            "nodes": len(self.nodes),
            "edges": len(self.edges),
            "species": len(self.species),
            "sha256": hashlib.sha256(blob).hexdigest(),
        }


# -- validation ---------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    kind: str  # "P1", "detuning", "malformed_edge", "node", "species", "mask"
    detail: str
    where: tuple = ()


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def of_kind(self, kind: str) -> list[Violation]:
        return [v for v in self.violations if v.kind == kind]


def validate(graph: ArchitectureGraph) -> ValidationReport:
    """Collect every structural violation of ``graph``; never raises."""
    out: list[Violation] = []
    drive: dict[str, float] = {}
    for s in graph.species:
        if s.id in drive:
            out.append(Violation("species", f"duplicate species id {s.id!r}", (s.id,)))
        drive[s.id] = s.drive_frequency

    n = len(graph.nodes)
    for pos, node in enumerate(graph.nodes):
        if node.index != pos:
            out.append(Violation("node", f"node at position {pos} has index {node.index}", (pos,)))
        if node.species not in drive:
            out.append(Violation("node", f"node {pos} has unknown species {node.species!r}", (pos,)))
        if node.coupling_class not in COUPLING_MULTIPLIER:
            out.append(Violation("node", f"node {pos} has unknown class {node.coupling_class!r}", (pos,)))
        if node.role not in ROLES:
            out.append(Violation("node", f"node {pos} has unknown role {node.role!r}", (pos,)))

    seen: set[tuple[int, int]] = set()
    for edge in graph.edges:
        i, j = edge
        key = (min(i, j), max(i, j))
        if i == j:
            out.append(Violation("malformed_edge", f"self-loop on {i}", edge))
        elif not (0 <= i < n and 0 <= j < n):
            out.append(Violation("malformed_edge", f"edge {edge} references a missing node", edge))
        elif key in seen:
            out.append(Violation("malformed_edge", f"duplicate edge {key}", edge))
        else:
            seen.add(key)
            if graph.nodes[i].species == graph.nodes[j].species:
                out.append(
                    Violation("P1", f"edge {key} joins two {graph.nodes[i].species!r} qubits", key)
                )

    for pos, node in enumerate(graph.nodes):
        if node.species not in drive or node.index != pos:
            continue
        kappa = len(graph.neighbors(pos))
        expected = drive[node.species] + kappa * graph.zeta
        actual = node.transition_frequency
        if (
            actual is None
            or node.coordination != kappa
            or abs(actual - expected) > _FREQ_RTOL * max(abs(expected), 1.0)
        ):
            out.append(
                Violation(
                    "detuning",
                    f"node {pos}: omega={actual!r}, expected {expected!r} (kappa={kappa})",
                    (pos,),
                )
            )

    for m in graph.masks:
        if m.kind not in MASK_KINDS:
            out.append(Violation("mask", f"mask {m.name!r} has unknown kind {m.kind!r}", (m.name,)))
        missing = sorted(q for q in m.members if not 0 <= q < n)
        if missing:
            out.append(Violation("mask", f"mask {m.name!r} references missing nodes {missing}", (m.name,)))
            continue
        if m.kind == "freeze_region":
            bare = sorted(q for q in m.members if not graph.actuator_partners(q))
            if bare:
                out.append(
                    Violation("mask", f"freeze mask {m.name!r} has members without actuators {bare}", (m.name,))
                )
    return ValidationReport(tuple(out))


def require_valid(graph: ArchitectureGraph) -> None:
    report = validate(graph)
    if not report.ok:
        raise InvalidGraphError("; ".join(v.detail for v in report.violations))


# -- builders -----------------------------------------------------------


def _species(ids: Iterable[str]) -> tuple[Species, ...]:
    return tuple(Species(sid, _BASE_DRIVE + k * _DRIVE_SPACING) for k, sid in enumerate(ids))


def _check_even(N: int) -> None:
    if not isinstance(N, (int, np.integer)) or N < 2 or N % 2:
        raise GeometryError(f"N must be an even integer >= 2, got {N!r}")


LADDER_VARIANTS = ("three_species", "two_species_lowoverhead", "actuator_variant")
CONVEYOR_VARIANTS = ("three_register", "single_register", "actuator_variant")


def ladder_index(N: int, row: int, col: int) -> int:
    """Index of the row qubit at ``(row, col)`` in a ladder built for ``N``."""
    width = 2 * N + 3
    if not (0 <= row < N and 0 <= col < width):
        raise GeometryError(f"({row}, {col}) is outside an N={N} ladder")
    return row * width + col


def build_ladder(
    N: int,
    variant: str = "three_species",
    *,
    base: str = "three_species",
    zeta: float = DEFAULT_ZETA,
    base_coupling: float = DEFAULT_BASE_COUPLING,
) -> ArchitectureGraph:
    """Ladder of ``N`` rows; see the module docstring for the layout.

    ``base`` selects the underlying ladder when ``variant="actuator_variant"``.
    Row masks ``row0 .. row{N-1}`` (kind ``module_boundary``) record the rows.
    """
    _check_even(N)
    if variant not in LADDER_VARIANTS:
        raise GeometryError(f"unknown ladder variant {variant!r}")
    if variant == "actuator_variant":
        if base not in LADDER_VARIANTS[:2]:
            raise GeometryError(f"unknown ladder base {base!r}")
        plain = build_ladder(N, base, zeta=zeta, base_coupling=base_coupling)
        return _attach_junction_actuators(plain, N)

    width = 2 * N + 3
    centre = N + 1
    three = variant == "three_species"
    ids = ("A", "B", "C") if three else ("A", "B")
    period = len(ids)

    nodes: list[QubitNode] = []
    edges: list[tuple[int, int]] = []
    masks: list[RegionMask] = []
    special_rows: list[int] = []
    for r in range(N):
        row = []
        for c in range(width):
            idx = r * width + c
            cls_ = "regular"
            if three and c in (1, 2 * N + 1):
                cls_ = "crossed"
            nodes.append(QubitNode(idx, ids[c % period], cls_, "computational"))
            row.append(idx)
            if c:
                edges.append((idx - 1, idx))
        special_rows.append(r * width + 1)
        masks.append(RegionMask(f"row{r}", frozenset(row), "module_boundary"))

    couplers = []
    for r in range(N - 1):
        idx = N * width + r
        above, below = r * width + centre, (r + 1) * width + centre
        nodes.append(QubitNode(idx, ids[(centre + 1) % period], "crossed", "coupler"))
        edges += [(above, idx), (below, idx)]
        couplers.append(idx)

    if not three:
        addressable = special_rows + couplers
        n_double = N + N // 2
        for k, idx in enumerate(addressable):
            cls_ = "double_crossed" if k < n_double else "crossed"
            nodes[idx] = replace(nodes[idx], coupling_class=cls_)

    return ArchitectureGraph.build(_species(ids), nodes, edges, zeta, base_coupling, masks)


def _attach_junction_actuators(graph: ArchitectureGraph, N: int) -> ArchitectureGraph:
    width = 2 * N + 3
    centre = N + 1
    species = graph.species + (Species("QA", _next_drive(graph)),)
    nodes = list(graph.nodes)
    edges = list(graph.edges)
    actuators = []
    for r in range(N - 1):
        idx = len(nodes)
        nodes.append(QubitNode(idx, "QA", "regular", "actuator"))
        edges += [(r * width + centre, idx), ((r + 1) * width + centre, idx)]
        actuators.append(idx)
    masks = graph.masks + (RegionMask("junctions", frozenset(actuators), "bridge"),)
    return ArchitectureGraph.build(species, nodes, edges, graph.zeta, graph.base_coupling, masks)


def build_conveyor_belt(
    N: int,
    variant: str = "three_register",
    *,
    base: str = "three_register",
    zeta: float = DEFAULT_ZETA,
    base_coupling: float = DEFAULT_BASE_COUPLING,
) -> ArchitectureGraph:
    """Closed loop of ``N`` computational qubits with register blocks.

    Masks: ``module`` (all nodes, ``module_boundary``) and ``loop``
    (loop positions, ``module_boundary``).
    """
    _check_even(N)
    if variant not in CONVEYOR_VARIANTS:
        raise GeometryError(f"unknown conveyor variant {variant!r}")
    actuated = variant == "actuator_variant"
    layout = base if actuated else variant
    if layout not in CONVEYOR_VARIANTS[:2]:
        raise GeometryError(f"unknown conveyor base {base!r}")
    block = 3 if layout == "three_register" else 1
    length = N * (block + 1)

    nodes: list[QubitNode] = []
    edges: list[tuple[int, int]] = []
    for p in range(length):
        is_q = p % (block + 1) == 0
        cls_ = "regular"
        if layout == "three_register" and p == 2:
            cls_ = "crossed"
        if layout == "single_register":
            cls_ = "double_crossed" if p == 0 else ("regular" if is_q else "crossed")
        nodes.append(QubitNode(p, "AB"[p % 2], cls_, "computational" if is_q else "register"))
        edges.append((p, (p + 1) % length))

    off = length
    if actuated:
        nodes.append(QubitNode(off, "QA", "regular", "actuator"))
        ids = ("A", "B", "QA")
    else:
        off_cls = "crossed" if layout == "three_register" else "double_crossed"
        nodes.append(QubitNode(off, "B", off_cls, "coupler"))
        ids = ("A", "B")
    for i in range(min(3, N)):
        edges.append((i * (block + 1), off))

    masks = [
        RegionMask("module", frozenset(range(off + 1)), "module_boundary"),
        RegionMask("loop", frozenset(range(length)), "module_boundary"),
    ]
    return ArchitectureGraph.build(_species(ids), nodes, edges, zeta, base_coupling, masks)


def build_star(
    m: int,
    *,
    zeta: float = DEFAULT_ZETA,
    base_coupling: float = DEFAULT_BASE_COUPLING,
) -> ArchitectureGraph:
    """One actuator (index ``m``, species ``QA``) coupled to ``m`` qubits on species ``A``.

    ``m=0`` gives a single isolated qubit on species ``A`` with no actuator.
    """
    if m < 0:
        raise GeometryError(f"star needs m >= 0, got {m}")
    if m == 0:
        return ArchitectureGraph.build(
            _species(["A"]), [QubitNode(0, "A")], [], zeta, base_coupling
        )
    nodes = [QubitNode(i, "A") for i in range(m)]
    nodes.append(QubitNode(m, "QA", "regular", "actuator"))
    edges = [(i, m) for i in range(m)]
    return ArchitectureGraph.build(_species(["A", "QA"]), nodes, edges, zeta, base_coupling)


def conveyor_layout(graph: ArchitectureGraph) -> tuple[list[int], int]:
    """Return ``(computational qubit indices in loop order, register block size)``."""
    loop = sorted(graph.mask("loop").members)
    qs = [q for q in loop if graph.nodes[q].role == "computational"]
    if not qs or len(loop) % len(qs):
        raise GeometryError("graph is not a conveyor belt")
    return qs, len(loop) // len(qs) - 1


def _next_drive(graph: ArchitectureGraph) -> float:
    if not graph.species:
        return _BASE_DRIVE
    return max(s.drive_frequency for s in graph.species) + _DRIVE_SPACING


def _fresh_species_id(graph: ArchitectureGraph, stem: str) -> str:
    taken = set(graph.species_ids)
    if stem not in taken:
        return stem
    k = 1
    while f"{stem}{k}" in taken:
        k += 1
    return f"{stem}{k}"


def attach_actuator_layer(
    graph: ArchitectureGraph, region: Iterable[int], name: str | None = None
) -> ArchitectureGraph:
    """Give every qubit in ``region`` its own actuator on one new drive line.

    The region is recorded as a ``freeze_region`` mask (default name
    ``freeze<k>``).  An empty region returns ``graph`` unchanged.
    """
    region = sorted(set(int(q) for q in region))
    if not region:
        return graph
    for q in region:
        node = graph.node(q)
        if node.role == "actuator":
            raise GeometryError(f"qubit {q} is itself an actuator")
    sid = _fresh_species_id(graph, "QA")
    species = graph.species + (Species(sid, _next_drive(graph)),)
    nodes = list(graph.nodes)
    edges = list(graph.edges)
    for q in region:
        idx = len(nodes)
        nodes.append(QubitNode(idx, sid, "regular", "actuator"))
        edges.append((q, idx))
    if name is None:
        name = f"freeze{sum(1 for m in graph.masks if m.kind == 'freeze_region')}"
    masks = graph.masks + (RegionMask(name, frozenset(region), "freeze_region"),)
    return ArchitectureGraph.build(species, nodes, edges, graph.zeta, graph.base_coupling, masks)


def bridge_between(
    module_a: ArchitectureGraph,
    module_b: ArchitectureGraph,
    boundary: tuple[int, int],
) -> ArchitectureGraph:
    """Disjoint union of two modules joined by an actuator-gated bridge.

    Species and masks of ``module_a``/``module_b`` are prefixed ``L.``/``R.``
    so each module keeps its own drive lines; node indices of ``module_b`` are
    shifted by ``module_a.n_qubits``.  The bridge is a coupler qubit on species
    ``bridge`` joined to both boundary qubits, plus an actuator on species
    ``bridge.QA`` joined to the coupler.  With the actuator excited the coupler
    is blockaded and the modules are isolated; mask ``bridge`` (kind
    ``bridge``) lists ``(coupler, actuator)``.
    """
    if module_a is module_b:
        raise GeometryError("bridge_between needs two distinct modules")
    require_valid(module_a)
    require_valid(module_b)
    qa, qb = boundary
    if not 0 <= qa < module_a.n_qubits:
        raise GeometryError(f"boundary qubit {qa} is not in the left module")
    if not 0 <= qb < module_b.n_qubits:
        raise GeometryError(f"boundary qubit {qb} is not in the right module")
    if module_a.zeta != module_b.zeta or module_a.base_coupling != module_b.base_coupling:
        raise GeometryError("modules must share zeta and base coupling")

    shift = module_a.n_qubits
    species = [Species(f"L.{s.id}", s.drive_frequency) for s in module_a.species]
    drive = max((s.drive_frequency for s in module_a.species), default=_BASE_DRIVE)
    for s in module_b.species:
        drive += _DRIVE_SPACING
        species.append(Species(f"R.{s.id}", drive))
    nodes = [replace(n, species=f"L.{n.species}") for n in module_a.nodes]
    nodes += [
        replace(n, index=n.index + shift, species=f"R.{n.species}") for n in module_b.nodes
    ]
    edges = list(module_a.edges) + [(i + shift, j + shift) for i, j in module_b.edges]
    masks = [replace(m, name=f"L.{m.name}") for m in module_a.masks]
    masks += [
        RegionMask(f"R.{m.name}", frozenset(q + shift for q in m.members), m.kind)
        for m in module_b.masks
    ]

    coupler = len(nodes)
    actuator = coupler + 1
    species += [
        Species("bridge", drive + _DRIVE_SPACING),
        Species("bridge.QA", drive + 2 * _DRIVE_SPACING),
    ]
    nodes += [
        QubitNode(coupler, "bridge", "regular", "coupler"),
        QubitNode(actuator, "bridge.QA", "regular", "actuator"),
    ]
    edges += [(qa, coupler), (qb + shift, coupler), (coupler, actuator)]
    masks.append(RegionMask("bridge", frozenset((coupler, actuator)), "bridge"))
    return ArchitectureGraph.build(
        species, nodes, edges, module_a.zeta, module_a.base_coupling, masks
    )


# -- resources ----------------------------------------------------------


@dataclass(frozen=True)
class ResourceSummary:
    drive_lines: int
    physical_qubits: int
    crossed: int
    double_crossed: int
    actuators: int


def resource_summary(graph: ArchitectureGraph) -> ResourceSummary:
    """Count drive lines, non-actuator qubits, crossed elements and actuators."""
    require_valid(graph)
    nodes = graph.nodes
    return ResourceSummary(
        drive_lines=len(graph.species),
        physical_qubits=sum(1 for n in nodes if n.role != "actuator"),
        crossed=sum(1 for n in nodes if n.coupling_class == "crossed"),
        double_crossed=sum(1 for n in nodes if n.coupling_class == "double_crossed"),
        actuators=sum(1 for n in nodes if n.role == "actuator"),
    )
