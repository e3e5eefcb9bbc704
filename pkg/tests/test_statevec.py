import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from actsim.statevec import (
    DimensionError,
    RotationSpec,
    StateVector,
    UnitarityError,
    apply_projector_controlled_rotation,
    average_gate_fidelity,
    controlled_rotation_matrix,
    ground_projector_diagonal,
    operator_distance,
    random_state,
    random_unitary,
    rotation_matrix,
    state_fidelity,
)

from conftest import brute_force_w, ground_projector

angles = st.floats(-4 * np.pi, 4 * np.pi, allow_nan=False)
axes = st.tuples(*[st.floats(-1, 1, allow_nan=False)] * 3).filter(lambda v: np.linalg.norm(v) > 0.1)


def unit(v):
    v = np.asarray(v, dtype=float)
    return tuple(v / np.linalg.norm(v))


class TestStateVector:
    def test_basis_ordering_qubit0_most_significant(self):
        s = StateVector.basis("egg")
        assert s.amplitudes[0b100] == 1
        assert s.excited_population(0) == 1
        assert s.excited_population(2) == 0

    def test_rejects_unnormalised(self):
        with pytest.raises(ValueError):
            StateVector(1, np.array([1.0, 1.0]))

    def test_rejects_wrong_length(self):
        with pytest.raises(DimensionError):
            StateVector(2, np.array([1.0, 0, 0]))

    def test_amplitudes_are_read_only(self):
        s = StateVector.basis("g")
        with pytest.raises(ValueError):
            s.amplitudes[0] = 0


class TestControlledRotation:
    def test_two_pi_with_ground_neighbour_flips_sign(self):
        s = StateVector.basis("gg")
        out = apply_projector_controlled_rotation(s, 1, {0}, RotationSpec.about("y", 2 * np.pi))
        np.testing.assert_allclose(out.amplitudes, -s.amplitudes, atol=1e-15)

    def test_zero_angle_is_identity(self, rng):
        s = random_state(4, rng)
        out = apply_projector_controlled_rotation(s, 2, {0, 3}, RotationSpec(0.0))
        np.testing.assert_allclose(out.amplitudes, s.amplitudes)

    def test_excited_neighbour_blocks(self):
        s = StateVector.basis("egg")
        out = apply_projector_controlled_rotation(s, 2, {0}, RotationSpec(np.pi))
        np.testing.assert_allclose(out.amplitudes, s.amplitudes)

    def test_target_in_neighbors_rejected(self):
        with pytest.raises(ValueError):
            apply_projector_controlled_rotation(StateVector.basis("gg"), 0, {0, 1}, RotationSpec(1.0))

    def test_index_out_of_range(self):
        with pytest.raises(IndexError):
            apply_projector_controlled_rotation(StateVector.basis("gg"), 2, {0}, RotationSpec(1.0))

    @settings(max_examples=60, deadline=None)
    @given(
        n=st.integers(1, 6),
        data=st.data(),
        angle=angles,
        axis=axes,
    )
    def test_matches_projector_construction(self, n, data, angle, axis):
        target = data.draw(st.integers(0, n - 1))
        others = [q for q in range(n) if q != target]
        nbrs = data.draw(st.sets(st.sampled_from(others)) if others else st.just(set()))
        rot = RotationSpec(angle, unit(axis))
        dense = controlled_rotation_matrix(n, target, nbrs, rot)
        oracle = brute_force_w(n, target, nbrs, rotation_matrix(angle, unit(axis)))
        np.testing.assert_allclose(dense, oracle, atol=1e-12)

    def test_norm_preserved_on_many_inputs(self, rng):
        worst = 0.0
        for _ in range(1000):
            n = int(rng.integers(2, 11))
            target = int(rng.integers(n))
            nbrs = {int(q) for q in rng.choice(n, size=min(3, n - 1), replace=False) if q != target}
            rot = RotationSpec(float(rng.uniform(-7, 7)), unit(rng.normal(size=3)))
            out = apply_projector_controlled_rotation(random_state(n, rng), target, nbrs, rot)
            worst = max(worst, abs(np.linalg.norm(out.amplitudes) - 1))
        assert worst <= 1e-12


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6])
def test_projector_identities(n, rng):
    for _ in range(5):
        qubits = {int(q) for q in rng.choice(n, size=int(rng.integers(1, n + 1)), replace=False)}
        p = np.diag(ground_projector_diagonal(n, qubits))
        np.testing.assert_allclose(p, ground_projector(n, qubits))
        q = np.eye(2**n) - p
        np.testing.assert_allclose(p @ p, p)
        np.testing.assert_allclose(p @ q, 0)
        np.testing.assert_allclose(p + q, np.eye(2**n))


class TestFidelity:
    def test_equal_states(self, rng):
        s = random_state(3, rng)
        assert state_fidelity(s, s) == pytest.approx(1.0, abs=1e-14)

    def test_orthogonal(self):
        assert state_fidelity(StateVector.basis("g"), StateVector.basis("e")) == 0

    def test_half(self):
        plus = StateVector.from_amplitudes([1, 1], normalize=True)
        assert state_fidelity(StateVector.basis("g"), plus) == pytest.approx(0.5)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            state_fidelity(StateVector.basis("g"), StateVector.basis("gg"))


class TestOperatorDistance:
    def test_zero_for_equal(self, rng):
        u = random_unitary(4, rng)
        assert operator_distance(u, u) == pytest.approx(0, abs=1e-7)

    def test_global_phase_ignored(self, rng):
        u = random_unitary(4, rng)
        assert operator_distance(u, -u) == pytest.approx(0, abs=1e-7)
        assert operator_distance(u, np.exp(0.3j) * u) == pytest.approx(0, abs=1e-7)

    def test_spectral(self):
        assert operator_distance(np.eye(2), np.diag([1, -1]), mode="spectral-norm") == pytest.approx(2)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), dim=st.sampled_from([2, 4, 8]))
    def test_phase_insensitive_matches_grid_minimum(self, seed, dim):
        r = np.random.default_rng(seed)
        u, v = random_unitary(dim, r), random_unitary(dim, r)
        phis = np.linspace(0, 2 * np.pi, 4001)
        brute = min(np.linalg.norm(u - np.exp(1j * p) * v, 2) for p in phis)
        got = operator_distance(u, v)
        assert got <= brute + 1e-9
        assert got >= brute - 2e-3

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            operator_distance(np.eye(2), np.eye(4))

    def test_non_unitary_rejected(self):
        with pytest.raises(UnitarityError):
            operator_distance(np.eye(2), np.diag([1.0, 0.5]))


class TestAverageGateFidelity:
    def test_identical(self, rng):
        u = random_unitary(4, rng)
        assert average_gate_fidelity(u, u) == pytest.approx(1)

    def test_identity_vs_cz(self):
        assert average_gate_fidelity(np.eye(4), np.diag([1, 1, 1, -1])) == pytest.approx(0.4)

    def test_matches_haar_average(self, rng):
        u, v = random_unitary(2, rng), random_unitary(2, rng)
        samples = 20000
        psi = rng.normal(size=(samples, 2)) + 1j * rng.normal(size=(samples, 2))
        psi /= np.linalg.norm(psi, axis=1, keepdims=True)
        overlaps = np.abs(np.einsum("si,ij,sj->s", psi.conj(), u.conj().T @ v, psi)) ** 2
        assert average_gate_fidelity(u, v) == pytest.approx(overlaps.mean(), abs=1e-2)
