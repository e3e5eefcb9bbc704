import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def kron_all(factors):
    out = np.ones((1, 1), dtype=complex)
    for f in factors:
        out = np.kron(out, f)
    return out


def embed(op, target, n):
    """Single-qubit ``op`` on ``target`` of ``n`` qubits via explicit Kronecker products."""
    return kron_all([op if q == target else np.eye(2) for q in range(n)])


def ground_projector(n, qubits):
    """Dense projector onto all listed qubits in |g>, built from per-qubit |g><g|."""
    g = np.diag([1.0, 0.0])
    return kron_all([g if q in qubits else np.eye(2) for q in range(n)])


def brute_force_w(n, target, neighbors, rotation):
    """``1 (x) Q + R (x) P`` assembled from dense projectors."""
    p = ground_projector(n, set(neighbors))
    q = np.eye(2**n) - p
    return q + embed(rotation, target, n) @ p


def su2_to_rotation(m):
    """Angle and axis of an SU(2) matrix ``cos(t/2) 1 - i sin(t/2) n.sigma``."""
    from actsim.statevec import RotationSpec

    half = np.arccos(np.clip((m[0, 0] + m[1, 1]).real / 2, -1, 1))
    vec = np.array([-(m[0, 1] + m[1, 0]).imag, (m[1, 0] - m[0, 1]).real, -(m[0, 0] - m[1, 1]).imag]) / 2
    norm = np.linalg.norm(vec)
    if norm < 1e-15:
        return RotationSpec(2 * half)
    return RotationSpec(2 * half, tuple(vec / norm))


def pytest_configure(config):
    config.acceptance_lines = []


def pytest_terminal_summary(terminalreporter, config):
    lines = getattr(config, "acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
