"""Time-dependent RWA propagation of globally driven ZZ-coupled registers.

Hamiltonians are returned as ``H/hbar`` (rad/s)::

    H = sum_i (Omega_i(t)/2) (e^{i phi} |g><e| + h.c.) + sum_<ij> 2 zeta |ee><ee|

with ``Omega_i = multiplier_i * Omega_species(t)``.  A drive with phase ``phi``
rotates about the axis ``(cos phi, -sin phi, 0)``.

Both routes multiply fourth-order Magnus steps (Hamiltonian sampled at two
Gauss points per step, exact exponential of the Hermitian generator), halving
the step until successive products agree.  ``dense`` exponentiates the full
Hamiltonian.  ``factorized`` uses the fact that a
segment only drives an independent set: undriven qubits are constants of
motion, so each driven qubit evolves under a 2x2 Hamiltonian detuned by
``2 zeta k`` where ``k`` counts its excited neighbours.  Both integrate the same
equations; the second scales to larger registers.

Results can be reported in the rotating frame or in the interaction frame of
the static ZZ term (``frame="zz"``), which removes the idle ``exp(-i H_zz t)``
phases.  That frame is used when comparing against the blockade-limit model.
"""

from __future__ import annotations

import csv
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .architecture import ArchitectureGraph, GeometryError, build_star
from .effective import SpeciesPulse, conditional_rotation, native_controlled_phase
from .statevec import (
    DimensionError,
    RotationSpec,
    StateVector,
    UnitarityError,
    average_gate_fidelity,
    check_dense,
    index_to_bits,
    operator_distance,
    unitarity_defect,
)

SHAPES = ("flat_top", "cosine_ramp_flat_top")
DENSE_ROUTE_MAX_QUBITS = 0
GAUSS = np.sqrt(3) / 6  # Gauss-Legendre nodes at mid -/+ GAUSS*dt


class ScheduleError(ValueError):
    """A drive schedule is malformed or not realisable by global drives."""


@dataclass(frozen=True)
class PulseEnvelope:
    """Amplitude envelope of one species drive.

    ``peak_rabi`` is the regular-class value; crossed and double-crossed nodes
    see twice and four times as much.  For ``cosine_ramp_flat_top`` each ramp
    lasts ``ramp_fraction * duration`` and follows ``sin^2``.
    """

    peak_rabi: float
    duration: float
    phase: float = 0.0
    shape: str = "cosine_ramp_flat_top"
    ramp_fraction: float = 0.1

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ScheduleError(f"unknown envelope shape {self.shape!r}")
        if self.duration < 0:
            raise ScheduleError("duration must be nonnegative")
        if not 0 <= self.ramp_fraction < 0.5:
            raise ScheduleError("ramp_fraction must lie in [0, 0.5)")
        if self.shape == "flat_top":
            object.__setattr__(self, "ramp_fraction", 0.0)

    @classmethod
    def calibrated(
        cls,
        angle: float,
        peak_rabi: float,
        phase: float = 0.0,
        shape: str = "cosine_ramp_flat_top",
        ramp_fraction: float = 0.1,
    ) -> "PulseEnvelope":
        """Envelope whose area equals ``angle``; negative angles flip the phase."""
        if peak_rabi <= 0:
            raise ScheduleError("peak_rabi must be positive")
        if angle < 0:
            angle, phase = -angle, phase + np.pi
        r = 0.0 if shape == "flat_top" else ramp_fraction
        return cls(peak_rabi, angle / (peak_rabi * (1 - r)), phase, shape, r)

    @classmethod
    def for_rotation(
        cls,
        rotation: RotationSpec,
        peak_rabi: float,
        shape: str = "cosine_ramp_flat_top",
        ramp_fraction: float = 0.1,
    ) -> "PulseEnvelope":
        """Calibrated envelope for a rotation about an axis in the xy-plane."""
        nx, ny, nz = rotation.axis
        if abs(nz) > 1e-12 and not rotation.is_identity:
            raise ScheduleError("resonant drives only rotate about axes in the xy-plane")
        return cls.calibrated(rotation.angle, peak_rabi, np.arctan2(-ny, nx), shape, ramp_fraction)

    @property
    def ramp_time(self) -> float:
        return self.ramp_fraction * self.duration

    def breakpoints(self) -> list[float]:
        tr = self.ramp_time
        if tr == 0:
            return [0.0, self.duration]
        return [0.0, tr, self.duration - tr, self.duration]

    def rabi(self, t: float | np.ndarray) -> np.ndarray:
        """Regular-class Rabi frequency at time ``t`` (zero outside the pulse)."""
        t = np.asarray(t, dtype=float)
        inside = (t >= 0) & (t <= self.duration)
        tr = self.ramp_time
        if tr == 0:
            return np.where(inside, self.peak_rabi, 0.0)
        rise = np.sin(np.pi * np.clip(t, 0, tr) / (2 * tr)) ** 2
        fall = np.sin(np.pi * np.clip(self.duration - t, 0, tr) / (2 * tr)) ** 2
        return np.where(inside, self.peak_rabi * np.minimum(rise, fall), 0.0)

    def area(self) -> float:
        return self.peak_rabi * self.duration * (1 - self.ramp_fraction)


@dataclass(frozen=True)
class Segment:
    """Drives that start together; the segment lasts as long as its longest envelope."""

    drives: tuple[tuple[str, PulseEnvelope], ...]

    def __post_init__(self):
        object.__setattr__(self, "drives", tuple((str(s), e) for s, e in self.drives))
        ids = [s for s, _ in self.drives]
        if len(set(ids)) != len(ids):
            raise ScheduleError("a species appears twice in one segment")

    @classmethod
    def single(cls, species: str, envelope: PulseEnvelope) -> "Segment":
        return cls(((species, envelope),))

    @property
    def duration(self) -> float:
        return max((e.duration for _, e in self.drives), default=0.0)


@dataclass(frozen=True)
class DriveSchedule:
    segments: tuple[Segment, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))

    @property
    def duration(self) -> float:
        return sum(s.duration for s in self.segments)

    def __add__(self, other: "DriveSchedule") -> "DriveSchedule":
        return DriveSchedule(self.segments + other.segments)


@dataclass(frozen=True)
class SimParams:
    """Integration settings.

    ``zeta=None`` takes the graph's coupling.  ``dt`` sets the initial step on
    ramps (default: 32 steps per ramp); steps are halved until successive
    refinements differ by less than ``convergence_tol``.
    """

    eta: float
    zeta: float | None = None
    dt: float | None = None
    unitarity_tol: float = 1e-10
    convergence_tol: float = 1e-10
    max_refinements: int = 12
    shape: str = "cosine_ramp_flat_top"
    ramp_fraction: float = 0.1

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if self.zeta is not None and not self.zeta > 0:
            raise ValueError("zeta must be positive")

    def zeta_for(self, graph: ArchitectureGraph) -> float:
        return graph.zeta if self.zeta is None else self.zeta

    def peak_rabi(self, graph: ArchitectureGraph) -> float:
        return self.zeta_for(graph) / self.eta

    def envelope(self, graph: ArchitectureGraph, rotation: RotationSpec) -> PulseEnvelope:
        return PulseEnvelope.for_rotation(
            rotation, self.peak_rabi(graph), self.shape, self.ramp_fraction
        )


@dataclass(frozen=True, eq=False)
class Evolution:
    state: StateVector
    unitarity_defect: float
    steps: int
    duration: float


@dataclass(frozen=True, eq=False)
class Propagator:
    operator: np.ndarray = field(repr=False)
    unitarity_defect: float
    steps: int
    duration: float


# -- Hamiltonian --------------------------------------------------------


def zz_diagonal(graph: ArchitectureGraph, zeta: float | None = None) -> np.ndarray:
    """Diagonal of ``sum_<ij> 2 zeta n_i n_j`` over the computational basis."""
    zeta = graph.zeta if zeta is None else zeta
    n = graph.n_qubits
    counts = np.zeros((2,) * n)
    for i, j in graph.edges:
        shape = [1] * n
        shape[i] = shape[j] = 2
        counts = counts + np.array([[0, 0], [0, 1]]).reshape(shape)
    return 2 * zeta * counts.reshape(-1)


def _drive_operator(graph: ArchitectureGraph, species: str, phase: float) -> np.ndarray:
    """``sum_i (multiplier_i / 2)(e^{i phi}|g><e| + h.c.)`` for one species."""
    n = graph.n_qubits
    dim = 2**n
    op = np.zeros((dim, dim), dtype=complex)
    idx = np.arange(dim)
    for q in graph.members(species):
        bit = 1 << (n - 1 - q)
        ground = idx[(idx & bit) == 0]
        m = graph.nodes[q].multiplier
        op[ground, ground | bit] += 0.5 * m * np.exp(1j * phase)
        op[ground | bit, ground] += 0.5 * m * np.exp(-1j * phase)
    return op


def build_rwa_hamiltonian(
    graph: ArchitectureGraph,
    active_drives: Mapping[str, PulseEnvelope] | Iterable[tuple[str, float, float]],
    t: float = 0.0,
    zeta: float | None = None,
) -> np.ndarray:
    """Dense ``H(t)/hbar``.

    ``active_drives`` maps species to envelopes evaluated at ``t``, or is a
    list of ``(species, Omega, phi)`` triples with ``Omega`` the regular-class
    Rabi frequency.
    """
    check_dense(graph.n_qubits)
    if isinstance(active_drives, Mapping):
        terms = [(s, float(e.rabi(t)), e.phase) for s, e in active_drives.items()]
    else:
        terms = [(s, float(w), float(p)) for s, w, p in active_drives]
    h = np.diag(zz_diagonal(graph, zeta)).astype(complex)
    for species, rabi, phase in terms:
        if species not in graph.species_ids:
            raise KeyError(f"species {species!r} is not in the graph")
        if rabi:
            h += rabi * _drive_operator(graph, species, phase)
    return h


# -- integration --------------------------------------------------------


def _check_segment(graph: ArchitectureGraph, segment: Segment) -> list[int]:
    driven: list[int] = []
    for species, _ in segment.drives:
        if species not in graph.species_ids:
            raise KeyError(f"species {species!r} is not in the graph")
        driven.extend(graph.members(species))
    dset = set(driven)
    for q in driven:
        if graph.neighbors(q) & dset:
            raise ScheduleError("simultaneous drives must act on non-adjacent supports")
    return sorted(dset)


def _intervals(segment: Segment) -> list[tuple[float, float, bool]]:
    """Split a segment into ``(start, stop, varying)`` pieces."""
    points = sorted({0.0, segment.duration, *(p for _, e in segment.drives for p in e.breakpoints())})
    out = []
    for a, b in zip(points[:-1], points[1:]):
        if b - a <= 0:
            continue
        mid = 0.5 * (a + b)
        varying = False
        for _, e in segment.drives:
            tr = e.ramp_time
            if tr > 0 and a < e.duration and (mid < tr or mid > e.duration - tr):
                varying = True
        # an envelope that ends inside the piece makes it piecewise constant only
        out.append((a, b, varying))
    return out


def _initial_steps(length: float, params: SimParams) -> int:
    if params.dt:
        return max(1, int(np.ceil(length / params.dt)))
    return 32


class _Integrator:
    """Shared refinement loop; subclasses provide ``step(a, b, n)`` products."""

    def __init__(self, params: SimParams):
        self.params = params
        self.steps = 0

    def piece(self, a: float, b: float, varying: bool):
        if not varying:
            self.steps += 1
            return self.step(a, b, 1)
        n = _initial_steps(b - a, self.params)
        coarse = self.step(a, b, n)
        for _ in range(self.params.max_refinements):
            fine = self.step(a, b, 2 * n)
            err = float(np.max(np.abs(fine - coarse)))
            n *= 2
            coarse = fine
            if err <= self.params.convergence_tol:
                break
        else:
            raise UnitarityError(
                f"time stepping did not converge to {self.params.convergence_tol:g} on [{a:g}, {b:g}]"
            )
        self.steps += n
        return coarse


class _DenseIntegrator(_Integrator):
    def __init__(self, graph, segment, params):
        super().__init__(params)
        zeta = params.zeta_for(graph)
        self.h0 = np.diag(zz_diagonal(graph, zeta)).astype(complex)
        self.drives = [(e, _drive_operator(graph, s, e.phase)) for s, e in segment.drives]

    def _h(self, t):
        h = np.broadcast_to(self.h0, (t.size,) + self.h0.shape).copy()
        for env, op in self.drives:
            h += env.rabi(t)[:, None, None] * op
        return h

    def step(self, a, b, n):
        dt = (b - a) / n
        dim = self.h0.shape[0]
        u = np.eye(dim, dtype=complex)
        chunk = max(1, 2**15 // dim)
        for start in range(0, n, chunk):
            mid = a + (np.arange(start, min(n, start + chunk)) + 0.5) * dt
            k = _magnus_generator(self._h(mid - GAUSS * dt), self._h(mid + GAUSS * dt), dt)
            vals, vecs = np.linalg.eigh(k)
            steps = (vecs * np.exp(-1j * vals)[:, None, :]) @ np.conj(np.swapaxes(vecs, 1, 2))
            u = _ordered_product(steps) @ u
        return u


def _magnus_generator(h1: np.ndarray, h2: np.ndarray, dt: float) -> np.ndarray:
    """Hermitian ``K`` with ``exp(-iK)`` the fourth-order Magnus step from Gauss-point samples."""
    comm = h2 @ h1 - h1 @ h2
    return 0.5 * dt * (h1 + h2) - 1j * (np.sqrt(3) / 12) * dt**2 * comm


def _expm_2x2(h: np.ndarray, dt: float) -> np.ndarray:
    """``exp(-i h dt)`` for a stack of Hermitian 2x2 matrices."""
    c = 0.5 * (h[..., 0, 0] + h[..., 1, 1]).real
    az = 0.5 * (h[..., 0, 0] - h[..., 1, 1]).real
    ax = h[..., 1, 0].real
    ay = h[..., 1, 0].imag
    norm = np.sqrt(ax**2 + ay**2 + az**2)
    cos = np.cos(norm * dt)
    sinc = np.where(norm > 0, np.sin(norm * dt) / np.where(norm > 0, norm, 1), dt)
    out = np.empty(h.shape, dtype=complex)
    out[..., 0, 0] = cos - 1j * sinc * az
    out[..., 1, 1] = cos + 1j * sinc * az
    out[..., 0, 1] = -1j * sinc * (ax - 1j * ay)
    out[..., 1, 0] = -1j * sinc * (ax + 1j * ay)
    return out * np.exp(-1j * c * dt)[..., None, None]


class _QubitIntegrator(_Integrator):
    """2x2 propagators of one driven qubit for every excited-neighbour count."""

    def __init__(self, envelope, multiplier, degree, zeta, params):
        super().__init__(params)
        self.env = envelope
        self.m = multiplier
        self.detuning = 2 * zeta * np.arange(degree + 1)

    def _h(self, t):
        off = 0.5 * self.m * np.exp(1j * self.env.phase)
        w = self.env.rabi(t)
        h = np.zeros((t.size, self.detuning.size, 2, 2), dtype=complex)
        h[:, :, 0, 1] = w[:, None] * off
        h[:, :, 1, 0] = w[:, None] * np.conj(off)
        h[:, :, 1, 1] = self.detuning
        return h

    def step(self, a, b, n):
        dt = (b - a) / n
        mid = a + (np.arange(n) + 0.5) * dt
        k = _magnus_generator(self._h(mid - GAUSS * dt), self._h(mid + GAUSS * dt), dt)
        return _ordered_product(_expm_2x2(k, 1.0))


def _ordered_product(factors: np.ndarray) -> np.ndarray:
    """``factors[-1] @ ... @ factors[0]`` by pairwise reduction along axis 0."""
    while factors.shape[0] > 1:
        if factors.shape[0] % 2:
            eye = np.broadcast_to(np.eye(factors.shape[-1]), factors[:1].shape)
            factors = np.concatenate([factors, eye])
        factors = factors[1::2] @ factors[0::2]
    return factors[0]


def _segment_dense(graph, segment, params) -> tuple[np.ndarray, int]:
    integ = _DenseIntegrator(graph, segment, params)
    dim = 2**graph.n_qubits
    u = np.eye(dim, dtype=complex)
    for a, b, varying in _intervals(segment):
        u = integ.piece(a, b, varying) @ u
    return u, integ.steps


def _segment_factorized(graph, segment, params, tensor: np.ndarray):
    """Apply one segment to ``tensor`` (qubit axes first, then batch axes)."""
    n = graph.n_qubits
    zeta = params.zeta_for(graph)
    driven = _check_segment(graph, segment)
    envelope = {}
    for species, env in segment.drives:
        for q in graph.members(species):
            envelope[q] = env
    steps = 0
    defect = 0.0
    for q in driven:
        env = envelope[q]
        nbrs = sorted(graph.neighbors(q))
        integ = _QubitIntegrator(env, graph.nodes[q].multiplier, len(nbrs), zeta, params)
        u = np.broadcast_to(np.eye(2, dtype=complex), (len(nbrs) + 1, 2, 2)).copy()
        for a, b, varying in _intervals(Segment.single("", env)) if env.duration else []:
            u = integ.piece(a, b, varying) @ u
        # idle until the segment ends: free evolution under the detuning only
        rest = segment.duration - env.duration
        if rest > 0:
            u = np.exp(-1j * rest * np.stack([np.zeros_like(integ.detuning), integ.detuning], -1))[
                ..., :, None
            ] * u
        steps += integ.steps
        defect = max(defect, max(unitarity_defect(blk) for blk in u))
        # excited-neighbour count for every configuration of the other qubits
        moved = np.moveaxis(tensor, q, 0)
        count_shape = moved.shape[1:n]
        count = np.zeros(count_shape, dtype=int)
        others = [j for j in range(n) if j != q]
        for j in nbrs:
            ax = others.index(j)
            shape = [1] * (n - 1)
            shape[ax] = 2
            count = count + np.arange(2).reshape(shape)
        blocks = u[count]  # shape count_shape + (2, 2)
        extra = moved.ndim - n
        blocks = blocks.reshape(count_shape + (1,) * extra + (2, 2))
        new0 = blocks[..., 0, 0] * moved[0] + blocks[..., 0, 1] * moved[1]
        new1 = blocks[..., 1, 0] * moved[0] + blocks[..., 1, 1] * moved[1]
        tensor = np.moveaxis(np.stack([new0, new1]), 0, q)
    # static ZZ phases of edges not touching a driven qubit
    dset = set(driven)
    idle_edges = [e for e in graph.edges if not (set(e) & dset)]
    if idle_edges and segment.duration > 0:
        idle = ArchitectureGraph(graph.species, graph.nodes, tuple(idle_edges), zeta)
        phase = np.exp(-1j * segment.duration * zz_diagonal(idle, zeta)).reshape((2,) * n)
        tensor = tensor * phase.reshape(phase.shape + (1,) * (tensor.ndim - n))
    return tensor, steps, defect


def _frame_phase(graph, params, duration) -> np.ndarray:
    return np.exp(1j * duration * zz_diagonal(graph, params.zeta_for(graph)))


def _route(graph: ArchitectureGraph, method: str) -> str:
    if method == "auto":
        return "dense" if graph.n_qubits <= DENSE_ROUTE_MAX_QUBITS else "factorized"
    if method not in ("dense", "factorized"):
        raise ValueError(f"unknown propagation method {method!r}")
    return method


def propagator(
    graph: ArchitectureGraph,
    schedule: DriveSchedule,
    params: SimParams,
    *,
    frame: str = "rotating",
    method: str = "auto",
) -> Propagator:
    """Full unitary of ``schedule``; raises :class:`UnitarityError` past tolerance."""
    n = graph.n_qubits
    check_dense(n)
    dim = 2**n
    steps = 0
    if _route(graph, method) == "dense":
        u = np.eye(dim, dtype=complex)
        for seg in schedule.segments:
            _check_segment(graph, seg)
            useg, s = _segment_dense(graph, seg, params)
            u = useg @ u
            steps += s
    else:
        tensor = np.eye(dim, dtype=complex).reshape((2,) * n + (dim,))
        for seg in schedule.segments:
            tensor, s, _ = _segment_factorized(graph, seg, params, tensor)
            steps += s
        u = tensor.reshape(dim, dim)
    if frame == "zz":
        u = _frame_phase(graph, params, schedule.duration)[:, None] * u
    elif frame != "rotating":
        raise ValueError(f"unknown frame {frame!r}")
    defect = unitarity_defect(u)
    if defect > params.unitarity_tol:
        raise UnitarityError(f"propagator unitarity defect {defect:.3g} exceeds tolerance")
    return Propagator(u, defect, steps, schedule.duration)


def evolve(
    graph: ArchitectureGraph,
    schedule: DriveSchedule,
    params: SimParams,
    state: StateVector,
    *,
    frame: str = "rotating",
    method: str = "auto",
) -> Evolution:
    """Propagate ``state``; unitarity is checked on every factor used."""
    if state.n_qubits != graph.n_qubits:
        raise DimensionError(f"state has {state.n_qubits} qubits, graph has {graph.n_qubits}")
    if _route(graph, method) == "dense":
        prop = propagator(graph, schedule, params, frame=frame, method="dense")
        return Evolution(
            StateVector(graph.n_qubits, prop.operator @ state.amplitudes),
            prop.unitarity_defect,
            prop.steps,
            prop.duration,
        )
    tensor = state.tensor().astype(complex)
    steps = 0
    defect = 0.0
    for seg in schedule.segments:
        tensor, s, d = _segment_factorized(graph, seg, params, tensor)
        steps += s
        defect = max(defect, d)
    amps = tensor.reshape(-1)
    if frame == "zz":
        amps = _frame_phase(graph, params, schedule.duration) * amps
    elif frame != "rotating":
        raise ValueError(f"unknown frame {frame!r}")
    if defect > params.unitarity_tol:
        raise UnitarityError(f"step unitarity defect {defect:.3g} exceeds tolerance")
    norm = np.linalg.norm(amps)
    return Evolution(StateVector(graph.n_qubits, amps / norm), defect, steps, schedule.duration)


def propagate(
    graph: ArchitectureGraph,
    schedule: DriveSchedule,
    params: SimParams,
    state: StateVector,
    *,
    frame: str = "rotating",
    method: str = "auto",
) -> StateVector:
    return evolve(graph, schedule, params, state, frame=frame, method=method).state


# -- translation from global pulses --------------------------------------


def pulse_envelope(
    graph: ArchitectureGraph, pulse: SpeciesPulse, params: SimParams
) -> PulseEnvelope | None:
    """Envelope realising ``pulse`` with one drive, or ``None`` for an identity pulse.

    A single envelope rotates every class about the same axis with angles in
    ratio 1:2:4.  Pulses that ask for anything else need independent class
    shaping and raise :class:`ScheduleError`.
    """
    members = graph.members(pulse.species)
    classes = sorted({graph.nodes[q].coupling_class for q in members})
    base: RotationSpec | None = None
    for cls_ in classes:
        rot = pulse.rotation_for(cls_)
        if rot.is_identity:
            continue
        m = {"regular": 1, "crossed": 2, "double_crossed": 4}[cls_]
        base = RotationSpec(rot.angle / m, rot.axis)
        break
    if base is None:
        return None
    for cls_ in classes:
        m = {"regular": 1, "crossed": 2, "double_crossed": 4}[cls_]
        rot = pulse.rotation_for(cls_)
        same_axis = np.allclose(rot.axis, base.axis, atol=1e-12)
        if rot.is_identity or not same_axis or abs(rot.angle - m * base.angle) > 1e-12:
            raise ScheduleError(
                f"pulse on {pulse.species!r} needs class-dependent shaping a single envelope cannot give"
            )
    return params.envelope(graph, base)


def pulse_schedule(
    graph: ArchitectureGraph, pulses: Sequence[SpeciesPulse], params: SimParams
) -> DriveSchedule:
    segments = []
    for p in pulses:
        env = pulse_envelope(graph, p, params)
        if env is not None:
            segments.append(Segment.single(p.species, env))
    return DriveSchedule(tuple(segments))


# -- comparison with the blockade limit ---------------------------------

SWEEP_OPS = ("cz", "ccz", "freeze", "pi_pulse")


@dataclass(frozen=True)
class SweepRow:
    op: str
    eta: float
    distance: float
    avg_gate_fidelity: float
    population_leak: float
    unitarity_defect: float
    runtime_s: float


def default_sweep_graph(op_name: str) -> ArchitectureGraph:
    return {"cz": lambda: build_star(2), "ccz": lambda: build_star(3),
            "freeze": lambda: build_star(1), "pi_pulse": lambda: build_star(0)}[op_name]()


def _sweep_target(graph: ArchitectureGraph, op_name: str):
    """Driven species, effective operator, and (target qubit, blocked basis inputs)."""
    actuators = graph.with_role("actuator")
    if op_name in ("cz", "ccz"):
        want = 2 if op_name == "cz" else 3
        cand = [a for a in actuators if len(graph.neighbors(a)) == want]
        if not cand:
            raise GeometryError(f"{op_name} needs an actuator with {want} neighbours")
        a = cand[0]
        return graph.nodes[a].species, RotationSpec(2 * np.pi), native_controlled_phase(graph, a), a
    others = [q for q in range(graph.n_qubits) if graph.nodes[q].role != "actuator"]
    if not others:
        raise GeometryError(f"{op_name} needs a non-actuator qubit")
    q = others[0]
    if op_name == "pi_pulse" and graph.neighbors(q):
        raise GeometryError("pi_pulse compares an isolated qubit")
    rot = RotationSpec(np.pi)
    return graph.nodes[q].species, rot, conditional_rotation(graph, q, rot), q


def _population_leak(graph: ArchitectureGraph, u: np.ndarray, target: int) -> float:
    """Largest flip probability of ``target`` from a basis state where it is blockaded."""
    n = graph.n_qubits
    nbrs = graph.neighbors(target)
    worst = 0.0
    for idx in range(2**n):
        bits = index_to_bits(idx, n)
        if not any(bits[j] for j in nbrs):
            continue
        flipped = idx ^ (1 << (n - 1 - target))
        worst = max(worst, float(abs(u[flipped, idx]) ** 2))
    return worst


def _sweep_point(graph, op_name, eta, params: SimParams | None) -> SweepRow:
    start = time.perf_counter()
    base = params or SimParams(eta)
    p = SimParams(
        eta, base.zeta, base.dt, base.unitarity_tol, base.convergence_tol,
        base.max_refinements, base.shape, base.ramp_fraction,
    )
    species, rot, effective_op, target = _sweep_target(graph, op_name)
    node = graph.nodes[target]
    env = p.envelope(graph, RotationSpec(rot.angle / node.multiplier, rot.axis))
    prop = propagator(graph, DriveSchedule((Segment.single(species, env),)), p, frame="zz")
    u = prop.operator
    leak = _population_leak(graph, u, target) if op_name in ("freeze",) else 0.0
    return SweepRow(
        op_name,
        float(eta),
        operator_distance(u, effective_op),
        average_gate_fidelity(u, effective_op),
        leak,
        prop.unitarity_defect,
        time.perf_counter() - start,
    )


def worker_count() -> int:
    """Thread cap from ``ACTSIM_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("ACTSIM_THREADS", "1")))
    except ValueError:
        return 1


def effective_vs_exact(
    graph: ArchitectureGraph | None,
    op_name: str,
    eta_values: Iterable[float],
    params: SimParams | None = None,
) -> list[SweepRow]:
    """Distance between the exact calibrated pulse and the blockade-limit operator.

    ``cz``/``ccz`` drive a 2*pi pulse on an actuator with two/three neighbours;
    ``freeze``/``pi_pulse`` drive a pi pulse on a qubit with/without an
    actuator neighbour.  Comparison is made in the ZZ interaction frame.
    ``graph=None`` uses the smallest star for the op.  Rows come back sorted
    by ``eta`` whatever the thread count.
    """
    if op_name not in SWEEP_OPS:
        raise ValueError(f"unsupported op {op_name!r}; choose from {SWEEP_OPS}")
    graph = graph or default_sweep_graph(op_name)
    etas = sorted(float(e) for e in eta_values)
    if any(e <= 0 for e in etas):
        raise ValueError("eta values must be positive")
    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        rows = list(pool.map(lambda e: _sweep_point(graph, op_name, e, params), etas))
    return rows


CSV_COLUMNS = ("op", "eta", "distance", "avg_gate_fidelity", "runtime_s", "population_leak")


def write_sweep_csv(rows: Sequence[SweepRow], path, timings: bool = False) -> None:
    """CSV export; ``runtime_s`` is left blank unless ``timings`` so reruns are byte-identical."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow([
                r.op,
                repr(r.eta),
                f"{r.distance:.12e}",
                f"{r.avg_gate_fidelity:.12e}",
                f"{r.runtime_s:.6f}" if timings else "",
                f"{r.population_leak:.12e}",
            ])
