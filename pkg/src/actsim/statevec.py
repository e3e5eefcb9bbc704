"""Dense state vectors, conditional rotations and comparison metrics.

Basis convention: qubit 0 is the most significant bit of the basis index and
``|g>`` maps to bit 0, ``|e>`` to bit 1.  Pauli matrices are written in the
ordered basis ``(|g>, |e>)``, so ``sigma_z |g> = +|g>``.

Operators are plain ``numpy`` arrays.  Dense construction is restricted to
``DENSE_MAX_QUBITS``; larger registers go through the structured (in-place)
routines, which work on the amplitude tensor of shape ``(2,) * n``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

DENSE_MAX_QUBITS = 14
NORM_TOL = 1e-10

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)


class DimensionError(ValueError):
    """Raised when operands disagree in size or exceed the dense limit."""


class UnitarityError(ValueError):
    """Raised when an operator that must be unitary is not."""


def rotation_matrix(angle: float, axis: Sequence[float]) -> np.ndarray:
    """Return ``exp(-i angle/2 n.sigma)`` for a unit axis ``n``."""
    nx, ny, nz = axis
    generator = nx * SIGMA_X + ny * SIGMA_Y + nz * SIGMA_Z
    return np.cos(angle / 2) * IDENTITY_2 - 1j * np.sin(angle / 2) * generator


_AXES = {"x": (1.0, 0.0, 0.0), "y": (0.0, 1.0, 0.0), "z": (0.0, 0.0, 1.0)}


@dataclass(frozen=True)
class RotationSpec:
    """Single-qubit rotation by ``angle`` (radians) about the unit ``axis``."""

    angle: float
    axis: tuple[float, float, float] = (1.0, 0.0, 0.0)

    def __post_init__(self):
        axis = tuple(float(a) for a in self.axis)
        if len(axis) != 3:
            raise ValueError(f"axis must have three components, got {self.axis!r}")
        if abs(np.linalg.norm(axis) - 1.0) > 1e-12:
            raise ValueError(f"axis {axis} is not a unit vector")
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "angle", float(self.angle))

    @classmethod
    def about(cls, axis: str | Sequence[float], angle: float) -> "RotationSpec":
        """Build from an axis name (``"x"``, ``"-y"``, ...) or a 3-vector."""
        if isinstance(axis, str):
            sign = -1.0 if axis.startswith("-") else 1.0
            vec = tuple(sign * c for c in _AXES[axis.lstrip("+-")])
            return cls(angle, vec)
        return cls(angle, tuple(axis))

    @classmethod
    def identity(cls) -> "RotationSpec":
        return cls(0.0)

    @property
    def is_identity(self) -> bool:
        return self.angle == 0.0

    def matrix(self) -> np.ndarray:
        return rotation_matrix(self.angle, self.axis)

    def inverse(self) -> "RotationSpec":
        return RotationSpec(-self.angle, self.axis)


@dataclass(frozen=True, eq=False)
class StateVector:
    """Normalised pure state of ``n_qubits`` qubits."""

    n_qubits: int
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != 2**self.n_qubits:
            raise DimensionError(
                f"expected {2**self.n_qubits} amplitudes for {self.n_qubits} qubits, got {amps.size}"
            )
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state is not normalised (norm={norm!r})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_amplitudes(cls, amplitudes, normalize: bool = False) -> "StateVector":
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        n = int(round(np.log2(amps.size)))
        if 2**n != amps.size:
            raise DimensionError(f"length {amps.size} is not a power of two")
        if normalize:
            amps = amps / np.linalg.norm(amps)
        return cls(n, amps)

    @classmethod
    def basis(cls, bits: Sequence[int] | str) -> "StateVector":
        """Computational basis state; ``bits`` may be ``"geg"`` or ``[0, 1, 0]``."""
        bits = _parse_bits(bits)
        amps = np.zeros(2 ** len(bits), dtype=complex)
        amps[bits_to_index(bits)] = 1.0
        return cls(len(bits), amps)

    @classmethod
    def product(cls, factors: Iterable[Sequence[complex]]) -> "StateVector":
        amps = np.ones(1, dtype=complex)
        n = 0
        for f in factors:
            f = np.asarray(f, dtype=complex)
            amps = np.kron(amps, f / np.linalg.norm(f))
            n += 1
        return cls(n, amps)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape((2,) * self.n_qubits)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def excited_population(self, qubit: int) -> float:
        """Probability of finding ``qubit`` in ``|e>``."""
        _check_indices(self.n_qubits, [qubit])
        probs = self.probabilities().reshape((2,) * self.n_qubits)
        return float(np.moveaxis(probs, qubit, 0)[1].sum())

    def evolve(self, op: np.ndarray) -> "StateVector":
        op = np.asarray(op)
        if op.shape != (self.dim, self.dim):
            raise DimensionError(f"operator shape {op.shape} does not match dim {self.dim}")
        return StateVector(self.n_qubits, op @ self.amplitudes)


def bits_to_index(bits: Sequence[int]) -> int:
    idx = 0
    for b in bits:
        idx = (idx << 1) | int(b)
    return idx


def index_to_bits(index: int, n_qubits: int) -> tuple[int, ...]:
    return tuple((index >> (n_qubits - 1 - q)) & 1 for q in range(n_qubits))


def _parse_bits(bits: Sequence[int] | str) -> list[int]:
    if isinstance(bits, str):
        table = {"g": 0, "e": 1, "0": 0, "1": 1}
        return [table[c] for c in bits]
    return [int(b) for b in bits]


def _check_indices(n_qubits: int, indices: Iterable[int]) -> None:
    for q in indices:
        if not 0 <= q < n_qubits:
            raise IndexError(f"qubit index {q} out of range for {n_qubits} qubits")


def controlled_rotation_tensor(
    tensor: np.ndarray, n_qubits: int, target: int, neighbors: Iterable[int], matrix: np.ndarray
) -> np.ndarray:
    """Apply ``1 (x) Q + R (x) P`` to an amplitude tensor, returning a new array.

    ``tensor`` has shape ``(2,) * n_qubits + batch``; trailing batch axes are
    carried along untouched, which lets the same routine build dense operators
    column-by-column in one shot.
    """
    neighbors = sorted(set(neighbors))
    out = np.array(tensor, dtype=complex, copy=True)
    index: list = [slice(None)] * out.ndim
    for j in neighbors:
        index[j] = 0
    index = tuple(index)
    block = out[index]
    axis = target - sum(1 for j in neighbors if j < target)
    rotated = np.tensordot(matrix, block, axes=([1], [axis]))
    out[index] = np.moveaxis(rotated, 0, axis)
    return out


def apply_projector_controlled_rotation(
    state: StateVector, target: int, neighbors: Iterable[int], rotation: RotationSpec
) -> StateVector:
    """Rotate ``target`` on the branch where every neighbour is in ``|g>``."""
    neighbors = set(neighbors)
    _check_indices(state.n_qubits, [target, *neighbors])
    if target in neighbors:
        raise ValueError(f"target {target} is listed among its own neighbours")
    if rotation.is_identity:
        return state
    new = controlled_rotation_tensor(
        state.tensor(), state.n_qubits, target, neighbors, rotation.matrix()
    )
    return StateVector(state.n_qubits, new.reshape(-1))


def check_dense(n_qubits: int) -> None:
    if n_qubits > DENSE_MAX_QUBITS:
        raise DimensionError(
            f"{n_qubits} qubits exceed the dense limit of {DENSE_MAX_QUBITS}; use structured application"
        )


def identity_tensor(n_qubits: int) -> np.ndarray:
    """Identity matrix reshaped so its rows form an amplitude tensor."""
    check_dense(n_qubits)
    dim = 2**n_qubits
    return np.eye(dim, dtype=complex).reshape((2,) * n_qubits + (dim,))


def controlled_rotation_matrix(
    n_qubits: int, target: int, neighbors: Iterable[int], rotation: RotationSpec
) -> np.ndarray:
    neighbors = set(neighbors)
    _check_indices(n_qubits, [target, *neighbors])
    if target in neighbors:
        raise ValueError(f"target {target} is listed among its own neighbours")
    out = controlled_rotation_tensor(
        identity_tensor(n_qubits), n_qubits, target, neighbors, rotation.matrix()
    )
    dim = 2**n_qubits
    return out.reshape(dim, dim)


def ground_projector_diagonal(n_qubits: int, qubits: Iterable[int]) -> np.ndarray:
    """Diagonal of the projector onto 'every qubit in ``qubits`` is ``|g>``'."""
    qubits = list(qubits)
    _check_indices(n_qubits, qubits)
    idx = np.arange(2**n_qubits)
    mask = np.ones(idx.size, dtype=bool)
    for q in qubits:
        mask &= ((idx >> (n_qubits - 1 - q)) & 1) == 0
    return mask.astype(float)


def unitarity_defect(u: np.ndarray) -> float:
    """``max |U^dag U - 1|`` elementwise."""
    u = np.asarray(u)
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))


def is_unitary(u: np.ndarray, tol: float = 1e-10) -> bool:
    return unitarity_defect(u) <= tol


def state_fidelity(a: StateVector, b: StateVector) -> float:
    """``|<a|b>|^2``."""
    if a.n_qubits != b.n_qubits:
        raise DimensionError(f"{a.n_qubits} vs {b.n_qubits} qubits")
    return float(min(1.0, abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2))


def _pair(u, v, check_unitary: bool, tol: float = 1e-10):
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    if u.shape != v.shape or u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise DimensionError(f"operator shapes {u.shape} and {v.shape} are incompatible")
    if check_unitary:
        for name, op in (("u", u), ("v", v)):
            defect = unitarity_defect(op)
            if defect > tol:
                raise UnitarityError(f"{name} is not unitary (defect {defect:.3g})")
    return u, v


def operator_distance(
    u: np.ndarray, v: np.ndarray, mode: str = "phase-insensitive", check_unitary: bool = True
) -> float:
    """Spectral-norm distance, optionally minimised over a global phase.

    For unitaries, ``||u - e^{i phi} v||_2`` equals the largest chord between
    ``e^{i phi}`` and the eigenphases of ``v^dag u``.  The optimum phase is the
    midpoint of the shortest arc covering all eigenphases, so the minimum is
    ``2 sin(w / 2)`` with ``w`` half that arc length.
    """
    if mode not in ("spectral-norm", "phase-insensitive"):
        raise ValueError(f"unknown distance mode {mode!r}")
    u, v = _pair(u, v, check_unitary=check_unitary or mode == "phase-insensitive")
    if mode == "spectral-norm":
        return float(np.linalg.norm(u - v, 2))
    phases = np.sort(np.angle(np.linalg.eigvals(v.conj().T @ u)))
    gaps = np.diff(np.concatenate([phases, [phases[0] + 2 * np.pi]]))
    half_width = (2 * np.pi - gaps.max()) / 2
    return float(2 * np.sin(half_width / 2))


def average_gate_fidelity(u: np.ndarray, v: np.ndarray, check_unitary: bool = True) -> float:
    """``(|Tr(u^dag v)|^2 + d) / (d^2 + d)``."""
    u, v = _pair(u, v, check_unitary=check_unitary)
    d = u.shape[0]
    overlap = abs(np.trace(u.conj().T @ v)) ** 2
    return float(min(1.0, (overlap + d) / (d * d + d)))


def random_state(n_qubits: int, rng: np.random.Generator) -> StateVector:
    """Haar-random pure state."""
    amps = rng.normal(size=2**n_qubits) + 1j * rng.normal(size=2**n_qubits)
    return StateVector(n_qubits, amps / np.linalg.norm(amps))


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR with phase fix."""
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))
