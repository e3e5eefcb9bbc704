"""Blockade-limit engine: conditional rotations, species pulses and encodings.

In the strong-blockade limit a drive on qubit ``j`` only acts on the branch
where every neighbour of ``j`` is in ``|g>``::

    W_j(theta, n) = 1 (x) Q_<j> + R(theta, n) (x) P_<j>

A species pulse applies one ``W`` per member, with separate rotations for the
regular, crossed and double-crossed classes.  Members of one species are never
adjacent, so the factors commute and their order is irrelevant.

Logical encodings
-----------------
``ICC`` (ladder): logical qubit ``r`` lives on row ``r`` at column ``2k+1``.
Columns left of it hold a Neel pattern whose qubit next to the carrier is
``|g>``; columns right of it are all ``|g>``.  Couplers and actuators are
``|g>``.

``ICS`` (conveyor belt): logical qubit ``i`` sits on ``Q_i``.  Register blocks
hold ``|g>`` (single-register) or alternate ``F=ggg`` / ``N=geg`` starting with
``F`` on ``S_{1,2}`` (three-register).  The off-loop node is ``|g>``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.constants import hbar

from .architecture import ArchitectureGraph, GeometryError, RegionMask, conveyor_layout
from .statevec import (
    DimensionError,
    RotationSpec,
    StateVector,
    apply_projector_controlled_rotation,
    check_dense,
    controlled_rotation_matrix,
    controlled_rotation_tensor,
    ground_projector_diagonal,
    identity_tensor,
)

DECODE_TOL = 1e-9
PARITIES = ("even_clockwise_odd_anticlockwise", "odd_clockwise_even_anticlockwise")


class BlockedChargeError(RuntimeError):
    """An actuator flip was requested while one of its neighbours is excited."""


class LeakageError(ValueError):
    """A state has weight outside the requested code space."""


class BridgeIsolatedError(RuntimeError):
    """The bridge actuator is excited, so the modules are decoupled."""


@dataclass(frozen=True)
class SpeciesPulse:
    """One global pulse on ``species``; ``double_crossed_rotation=None`` means identity."""

    species: str
    regular_rotation: RotationSpec = RotationSpec(0.0)
    crossed_rotation: RotationSpec = RotationSpec(0.0)
    double_crossed_rotation: RotationSpec | None = None

    @classmethod
    def uniform(cls, species: str, rotation: RotationSpec) -> "SpeciesPulse":
        """Same rotation on every coupling class."""
        return cls(species, rotation, rotation, rotation)

    @classmethod
    def from_drive(cls, species: str, rotation: RotationSpec) -> "SpeciesPulse":
        """Rotation produced by a single envelope: angles scale 1x/2x/4x by class."""
        return cls(
            species,
            rotation,
            RotationSpec(2 * rotation.angle, rotation.axis),
            RotationSpec(4 * rotation.angle, rotation.axis),
        )

    def rotation_for(self, coupling_class: str) -> RotationSpec:
        if coupling_class == "regular":
            return self.regular_rotation
        if coupling_class == "crossed":
            return self.crossed_rotation
        if coupling_class == "double_crossed":
            return self.double_crossed_rotation or RotationSpec(0.0)
        raise ValueError(f"unknown coupling class {coupling_class!r}")

    def inverse(self) -> "SpeciesPulse":
        dc = self.double_crossed_rotation
        return SpeciesPulse(
            self.species,
            self.regular_rotation.inverse(),
            self.crossed_rotation.inverse(),
            None if dc is None else dc.inverse(),
        )

    @property
    def is_identity(self) -> bool:
        return all(
            self.rotation_for(c).is_identity for c in ("regular", "crossed", "double_crossed")
        )


# -- operators ----------------------------------------------------------


def _check_target(graph: ArchitectureGraph, target: int) -> None:
    if not 0 <= target < graph.n_qubits:
        raise IndexError(f"unknown target qubit {target}")


def conditional_rotation(
    graph: ArchitectureGraph, target: int, rotation: RotationSpec
) -> np.ndarray:
    """Dense ``W_target``; the neighbour set comes from the graph edges."""
    _check_target(graph, target)
    check_dense(graph.n_qubits)
    return controlled_rotation_matrix(graph.n_qubits, target, graph.neighbors(target), rotation)


def apply_conditional_rotation(
    graph: ArchitectureGraph, target: int, rotation: RotationSpec, state: StateVector
) -> StateVector:
    _check_target(graph, target)
    return apply_projector_controlled_rotation(state, target, graph.neighbors(target), rotation)


def _pulse_targets(graph: ArchitectureGraph, pulse: SpeciesPulse, frozen: Iterable[int]):
    if pulse.species not in graph.species_ids:
        raise KeyError(f"species {pulse.species!r} is not in the graph")
    frozen = set(frozen)
    for q in graph.members(pulse.species):
        if q in frozen:
            continue
        rot = pulse.rotation_for(graph.nodes[q].coupling_class)
        if not rot.is_identity:
            yield q, rot


def _apply_pulse_tensor(graph, pulse, tensor, frozen=()):
    n = graph.n_qubits
    for q, rot in _pulse_targets(graph, pulse, frozen):
        tensor = controlled_rotation_tensor(tensor, n, q, graph.neighbors(q), rot.matrix())
    return tensor


def species_pulse(graph: ArchitectureGraph, pulse: SpeciesPulse) -> np.ndarray:
    """Dense operator of one global pulse."""
    return frozen_propagator(graph, (), pulse, _check_partners=False)


def apply_species_pulse(
    graph: ArchitectureGraph,
    pulse: SpeciesPulse,
    state: StateVector,
    frozen: Iterable[int] = (),
) -> StateVector:
    """Structured application; members listed in ``frozen`` are left untouched."""
    if state.n_qubits != graph.n_qubits:
        raise DimensionError(f"state has {state.n_qubits} qubits, graph has {graph.n_qubits}")
    tensor = _apply_pulse_tensor(graph, pulse, state.tensor(), frozen)
    return StateVector(state.n_qubits, tensor.reshape(-1))


def apply_sequence(
    graph: ArchitectureGraph, pulses: Sequence[SpeciesPulse], state: StateVector
) -> StateVector:
    """Apply ``pulses[0]`` first, then ``pulses[1]``, and so on."""
    if state.n_qubits != graph.n_qubits:
        raise DimensionError(f"state has {state.n_qubits} qubits, graph has {graph.n_qubits}")
    for pulse in pulses:
        state = apply_species_pulse(graph, pulse, state)
    return state


def sequence_operator(graph: ArchitectureGraph, pulses: Sequence[SpeciesPulse]) -> np.ndarray:
    n = graph.n_qubits
    tensor = identity_tensor(n)
    for pulse in pulses:
        tensor = _apply_pulse_tensor(graph, pulse, tensor)
    return tensor.reshape(2**n, 2**n)


def frozen_propagator(
    graph: ArchitectureGraph,
    region: RegionMask | Iterable[int],
    pulse: SpeciesPulse,
    *,
    _check_partners: bool = True,
) -> np.ndarray:
    """Species-pulse operator with every region member held fixed.

    Each region member must have an actuator neighbour; the caller is
    responsible for that actuator being excited, which is what pins the
    member in the blockade limit.
    """
    members = set(region.members if isinstance(region, RegionMask) else region)
    if _check_partners:
        for q in sorted(members):
            _check_target(graph, q)
            if not graph.actuator_partners(q):
                raise GeometryError(f"qubit {q} has no actuator partner to freeze it")
    n = graph.n_qubits
    tensor = _apply_pulse_tensor(graph, pulse, identity_tensor(n), members)
    return tensor.reshape(2**n, 2**n)


def native_controlled_phase(
    graph: ArchitectureGraph, actuator: int, neighbors_only: bool = False
) -> np.ndarray:
    """Operator of a 2*pi pulse on ``actuator``: ``1 - 2P`` over its neighbours.

    The actuator factor is untouched.  With ``neighbors_only`` the diagonal
    ``2^m x 2^m`` block over the sorted neighbour list is returned instead of
    the full-register operator.
    """
    _check_target(graph, actuator)
    nbrs = sorted(graph.neighbors(actuator))
    if not nbrs:
        raise GeometryError(f"qubit {actuator} has no neighbours to act on")
    if neighbors_only:
        diag = 1 - 2 * ground_projector_diagonal(len(nbrs), range(len(nbrs)))
    else:
        check_dense(graph.n_qubits)
        diag = 1 - 2 * ground_projector_diagonal(graph.n_qubits, nbrs)
    return np.diag(diag.astype(complex))


def canonical_phase_form(op: np.ndarray) -> np.ndarray:
    """Relabel ``g <-> e`` on every qubit and fix the global phase.

    ``-P + Q`` puts its ``-1`` on the all-ground entry; after the relabelling
    the ``-1`` moves to the all-excited entry, i.e. ``diag(1, ..., 1, -1)``.
    The first diagonal entry is normalised to ``+1``.
    """
    op = np.asarray(op, dtype=complex)
    dim = op.shape[0]
    flip = np.arange(dim)[::-1]
    relabelled = op[np.ix_(flip, flip)]
    return relabelled / (relabelled[0, 0] / abs(relabelled[0, 0]))


# -- actuators ----------------------------------------------------------

LEVELS = ("ground", "excited")


def _blocked_weight(state: StateVector, qubits: Iterable[int]) -> float:
    qubits = list(qubits)
    if not qubits:
        return 0.0
    free = ground_projector_diagonal(state.n_qubits, qubits)
    return float(np.sum(state.probabilities() * (1 - free)))


def actuator_set(
    graph: ArchitectureGraph,
    actuator: int,
    level: str,
    state: StateVector,
    tol: float = DECODE_TOL,
) -> StateVector:
    """Drive ``actuator`` to ``level`` with a conditional pi pulse.

    Charging uses ``R(pi, x)`` and discharging ``R(pi, -x)``, so a charge
    followed by a discharge is the identity.  A no-op when the actuator is
    already at ``level``.  Raises :class:`BlockedChargeError` if any actuator
    neighbour carries excited weight above ``tol``: the blockade would leave the
    actuator where it is.
    """
    _check_target(graph, actuator)
    if graph.nodes[actuator].role != "actuator":
        raise GeometryError(f"qubit {actuator} is not an actuator")
    if level not in LEVELS:
        raise ValueError(f"level must be one of {LEVELS}, got {level!r}")
    p_exc = state.excited_population(actuator)
    want_excited = level == "excited"
    if (want_excited and p_exc >= 1 - tol) or (not want_excited and p_exc <= tol):
        return state
    if tol < p_exc < 1 - tol:
        raise ValueError(f"actuator {actuator} is not in a definite level (P_e={p_exc:.3g})")
    nbrs = graph.neighbors(actuator)
    blocked = _blocked_weight(state, nbrs)
    if blocked > tol:
        raise BlockedChargeError(
            f"actuator {actuator}: neighbours excited with weight {blocked:.3g}; the drive is blockaded"
        )
    rot = RotationSpec.about("x" if want_excited else "-x", np.pi)
    return apply_projector_controlled_rotation(state, actuator, nbrs, rot)


def actuator_energy(graph: ArchitectureGraph, actuator: int, state: StateVector) -> float:
    """``<H_QA>`` in joules, with ``H_QA = hbar*omega/2`` times (+1 on ``|e>``, -1 on ``|g>``)."""
    omega = graph.node(actuator).transition_frequency
    p_exc = state.excited_population(actuator)
    return 0.5 * hbar * omega * (2 * p_exc - 1)


# -- encodings ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class EncodedState:
    kind: str
    amplitudes: np.ndarray = field(repr=False)
    N: int = 0
    position: int | None = None
    leakage: float = 0.0

    def __post_init__(self):
        if self.kind not in ("ICC", "ICS"):
            raise ValueError(f"unknown encoding kind {self.kind!r}")
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        n_logical = self.N or int(round(np.log2(amps.size)))
        if amps.size != 2**n_logical:
            raise DimensionError(f"{amps.size} amplitudes do not match N={n_logical}")
        if abs(np.linalg.norm(amps) - 1) > 1e-10:
            raise ValueError("logical amplitudes are not normalised")
        if self.kind == "ICC" and (self.position is None or not 0 <= self.position <= n_logical):
            raise ValueError(f"ICC position must be in [0, {n_logical}], got {self.position!r}")
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "N", n_logical)


def _ladder_rows(graph: ArchitectureGraph) -> list[list[int]]:
    rows = []
    r = 0
    while True:
        try:
            rows.append(sorted(graph.mask(f"row{r}").members))
        except KeyError:
            break
        r += 1
    if not rows:
        raise GeometryError("graph is not a ladder (no row masks)")
    return rows


def icc_row_pattern(width: int, k: int) -> list[int | None]:
    """Background bits of one ladder row with the carrier at column ``2k+1``."""
    carrier = 2 * k + 1
    if not 0 < carrier < width - 1:
        raise ValueError(f"carrier column {carrier} does not fit a row of {width}")
    row: list[int | None] = [0] * width
    for j in range(carrier):
        row[j] = (carrier - 1 - j) % 2
    row[carrier] = None
    return row


def _code_layout(graph: ArchitectureGraph, kind: str, k: int | None):
    """Return ``(background bits, carrier qubits in logical order)``."""
    background = [0] * graph.n_qubits
    if kind == "ICC":
        rows = _ladder_rows(graph)
        N = len(rows)
        if k is None or not 0 <= k <= N:
            raise ValueError(f"ICC position must be in [0, {N}], got {k!r}")
        carriers = []
        for row in rows:
            pattern = icc_row_pattern(len(row), k)
            for q, bit in zip(row, pattern):
                if bit is None:
                    carriers.append(q)
                else:
                    background[q] = bit
        return background, carriers
    if kind == "ICS":
        try:
            qs, block = conveyor_layout(graph)
        except KeyError as exc:
            raise GeometryError("graph is not a conveyor belt") from exc
        for i, q in enumerate(qs):
            if block == 3 and i % 2 == 1:
                background[q + 2] = 1
        return background, qs
    raise ValueError(f"unknown encoding kind {kind!r}")


def code_indices(graph: ArchitectureGraph, kind: str, k: int | None = None) -> np.ndarray:
    """Basis indices of the encoded logical basis states, logical qubit 1 most significant."""
    background, carriers = _code_layout(graph, kind, k)
    n = graph.n_qubits
    base = 0
    for q, bit in enumerate(background):
        base |= bit << (n - 1 - q)
    N = len(carriers)
    out = np.empty(2**N, dtype=np.int64)
    for x in range(2**N):
        idx = base
        for pos, q in enumerate(carriers):
            if (x >> (N - 1 - pos)) & 1:
                idx |= 1 << (n - 1 - q)
        out[x] = idx
    return out


def encode(graph: ArchitectureGraph, enc: EncodedState) -> StateVector:
    idx = code_indices(graph, enc.kind, enc.position)
    if idx.size != enc.amplitudes.size:
        raise GeometryError(
            f"encoding has N={enc.N} but the graph carries {int(np.log2(idx.size))} logical qubits"
        )
    amps = np.zeros(2**graph.n_qubits, dtype=complex)
    amps[idx] = enc.amplitudes
    return StateVector(graph.n_qubits, amps)


def decode(
    graph: ArchitectureGraph,
    state: StateVector,
    kind: str,
    k: int | None = None,
    tol: float = DECODE_TOL,
) -> EncodedState:
    """Read logical amplitudes back; leakage above ``tol`` raises :class:`LeakageError`."""
    if state.n_qubits != graph.n_qubits:
        raise DimensionError(f"state has {state.n_qubits} qubits, graph has {graph.n_qubits}")
    idx = code_indices(graph, kind, k)
    alpha = state.amplitudes[idx]
    weight = float(np.vdot(alpha, alpha).real)
    leakage = max(0.0, 1.0 - weight)
    if leakage > tol:
        raise LeakageError(f"{leakage:.3g} of the weight lies outside the {kind} code space")
    return EncodedState(kind, alpha / np.sqrt(weight), position=k, leakage=leakage)


# -- transport ----------------------------------------------------------


def swap_step_pairs(graph: ArchitectureGraph, parity: str = PARITIES[0]) -> list[tuple[int, int]]:
    """Qubit pairs exchanged by one global SWAP step.

    ``even_clockwise_odd_anticlockwise`` exchanges ``(Q_2, Q_3), (Q_4, Q_5), ...,
    (Q_N, Q_1)``; ``odd_clockwise_even_anticlockwise`` exchanges ``(Q_1, Q_2),
    (Q_3, Q_4), ...``.  Each step is its own inverse.
    """
    if parity not in PARITIES:
        raise ValueError(f"unknown parity {parity!r}")
    try:
        qs, _ = conveyor_layout(graph)
    except KeyError as exc:
        raise GeometryError("global SWAP steps need a conveyor-belt geometry") from exc
    N = len(qs)
    start = 1 if parity == PARITIES[0] else 0
    pairs = {tuple(sorted((qs[j], qs[(j + 1) % N]))) for j in range(start, N, 2)}
    return sorted(pairs)


def _permute_axes(tensor: np.ndarray, pairs) -> np.ndarray:
    axes = list(range(tensor.ndim))
    for a, b in pairs:
        axes[a], axes[b] = axes[b], axes[a]
    return np.transpose(tensor, axes)


def apply_global_swap_step(
    graph: ArchitectureGraph, state: StateVector, parity: str = PARITIES[0]
) -> StateVector:
    """Exchange the contents of each :func:`swap_step_pairs` pair."""
    pairs = swap_step_pairs(graph, parity)
    if state.n_qubits != graph.n_qubits:
        raise DimensionError(f"state has {state.n_qubits} qubits, graph has {graph.n_qubits}")
    out = _permute_axes(state.tensor(), pairs)
    return StateVector(state.n_qubits, np.ascontiguousarray(out).reshape(-1))


def global_swap_step(graph: ArchitectureGraph, parity: str = PARITIES[0]) -> np.ndarray:
    """Dense permutation operator of one SWAP step (register qubits untouched)."""
    pairs = swap_step_pairs(graph, parity)
    n = graph.n_qubits
    check_dense(n)
    dim = 2**n
    tensor = np.eye(dim, dtype=complex).reshape((2,) * n + (dim,))
    out = _permute_axes(tensor[..., :], [*pairs])
    return np.ascontiguousarray(out).reshape(dim, dim)


def bridge_nodes(graph: ArchitectureGraph) -> tuple[int, int]:
    """``(coupler, actuator)`` of the graph's bridge mask."""
    try:
        members = graph.mask("bridge").members
    except KeyError as exc:
        raise GeometryError("graph has no bridge") from exc
    coupler = [q for q in members if graph.nodes[q].role == "coupler"]
    actuator = [q for q in members if graph.nodes[q].role == "actuator"]
    if len(coupler) != 1 or len(actuator) != 1:
        raise GeometryError("bridge mask must hold one coupler and one actuator")
    return coupler[0], actuator[0]


def cnot_pulses(
    graph: ArchitectureGraph, control: int, target: int, mediator: int
) -> list[SpeciesPulse]:
    """Three global pulses giving a NOT on ``target`` when ``control`` is ``|g>``.

    ``R_y(pi/2)`` on the target's species, a 2*pi pulse on the mediator (a
    phase of -1 when control and target are both ``|g>``), then ``R_y(-pi/2)``.
    Envelopes scale with coupling class, so the target's own class gets exactly
    ``pi/2`` and every other member of its species is rotated and un-rotated.
    """
    for q in (control, target):
        if q not in graph.neighbors(mediator):
            raise GeometryError(f"qubit {q} is not coupled to mediator {mediator}")
    t_node = graph.nodes[target]
    m_node = graph.nodes[mediator]
    h = SpeciesPulse.from_drive(t_node.species, RotationSpec.about("y", np.pi / 2 / t_node.multiplier))
    z = SpeciesPulse.from_drive(m_node.species, RotationSpec.about("x", 2 * np.pi / m_node.multiplier))
    return [h, z, h.inverse()]


def modular_swap_pulses(graph: ArchitectureGraph, q_left: int, q_right: int) -> list[SpeciesPulse]:
    coupler, _ = bridge_nodes(graph)
    return (
        cnot_pulses(graph, q_left, q_right, coupler)
        + cnot_pulses(graph, q_right, q_left, coupler)
        + cnot_pulses(graph, q_left, q_right, coupler)
    )


def modular_swap(
    graph: ArchitectureGraph,
    bridge_actuator: int,
    q_left: int,
    q_right: int,
    state: StateVector,
    tol: float = DECODE_TOL,
) -> StateVector:
    """Exchange the boundary qubits of two bridged modules.

    The bridge actuator must be ``|g>`` on entry (bridge open).  Three
    bridge-mediated CNOTs run on alternating module drive lines, then the
    actuator is charged to close the bridge again.
    """
    _, actuator = bridge_nodes(graph)
    if bridge_actuator != actuator:
        raise GeometryError(f"qubit {bridge_actuator} is not the bridge actuator")
    if state.excited_population(actuator) > tol:
        raise BridgeIsolatedError("bridge actuator is excited; modules are isolated")
    state = apply_sequence(graph, modular_swap_pulses(graph, q_left, q_right), state)
    return actuator_set(graph, actuator, "excited", state, tol)
